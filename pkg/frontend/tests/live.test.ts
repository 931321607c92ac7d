/** The same cooperation loop against a live service.
 *
 *     FACTWEAVE_SERVICE_URL=http://127.0.0.1:8787 npx vitest run tests/live.test.ts
 *
 * Skipped when the environment variable is unset.
 */

import { describe, expect, it } from 'vitest';

import { HttpClient } from '../src/api.js';
import { EditorStore } from '../src/store.js';
import { FactSpec } from '../src/model.js';

const BASE = process.env.FACTWEAVE_SERVICE_URL;

const CSV = `Country,Sport,Sex,Gold
Norway,Biathlon,Female,5
Norway,Biathlon,Male,4
Norway,Skiing,Female,7
Germany,Biathlon,Female,3
Germany,Skiing,Male,2
China,Skiing,Female,1
China,Biathlon,Male,2
USA,Skiing,Female,4
USA,Biathlon,Male,3
France,Skiing,Male,1
`;

const distribution: FactSpec = {
  type: 'distribution',
  subspace: [],
  breakdown: 'Country',
  measure: { field: 'Gold', aggregation: 'sum' },
  focus: [],
  meta: { extra: '' },
};

const extreme: FactSpec = {
  type: 'extreme',
  subspace: [{ field: 'Sex', value: 'Female' }],
  breakdown: 'Country',
  measure: { field: 'Gold', aggregation: 'sum' },
  focus: ['Norway'],
  meta: { extra: 'maximum' },
};

describe.skipIf(!BASE)('editor cooperation loop (live service)', () => {
  it('drives the full loop end to end', async () => {
    const store = new EditorStore(new HttpClient(BASE));
    await store.uploadDataset(CSV, 'live smoke');
    expect(store.state.error).toBeNull();
    expect(store.state.dataset?.rowCount).toBe(10);
    expect(store.state.recommendations.length).toBeGreaterThan(0);

    await store.addKeyframe(distribution, null);
    await store.addKeyframe(extreme, null);
    expect(store.badges()).toEqual(['keyframe', 'keyframe']);

    await store.runInterpolation(0, 3, 5);
    const badges = store.badges();
    expect(badges[0]).toBe('keyframe');
    expect(badges[badges.length - 1]).toBe('keyframe');
    const interpolated = badges.filter((b) => b === 'interpolated').length;
    expect(interpolated).toBeGreaterThanOrEqual(1);
    expect(interpolated).toBeLessThanOrEqual(3);

    // alternatives appear only with keyframe neighbors
    await store.selectPiece(1);
    expect(store.state.alternatives.length).toBeGreaterThan(0);
    await store.selectPiece(0);
    expect(store.state.alternatives).toEqual([]);

    // edit the first keyframe, then re-interpolate the segment
    await store.selectPiece(0);
    await store.updateDraft((draft) => { draft.breakdown = 'Sport'; });
    expect(store.state.draftProblems).toEqual([]);
    await store.submitDraft('by sport');
    expect(store.state.editedKeyframe).toBe(0);
    await store.reinterpolateAround(0, 2, 9);
    const after = store.badges();
    expect(after.filter((b) => b === 'interpolated').length).toBeGreaterThanOrEqual(1);

    const doc = await new HttpClient(BASE).exportStory(store.state.story!.id, 'factsheet');
    expect(doc.form).toBe('factsheet');
    expect(doc.pieces.some((p) => p.provenance === 'interpolated')).toBe(true);
  }, 120_000);
});
