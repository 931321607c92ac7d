import { beforeEach, describe, expect, it } from 'vitest';

import { EditorStore } from '../src/store.js';
import { FactSpec } from '../src/model.js';
import { MockClient } from './mock_service.js';

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

function keyframe(breakdown: string): FactSpec {
  return {
    type: 'distribution',
    subspace: [],
    breakdown,
    measure: { field: 'Gold', aggregation: 'sum' },
    focus: [],
    meta: { extra: '' },
  };
}

describe('editor cooperation loop (mocked service)', () => {
  let client: MockClient;
  let store: EditorStore;

  beforeEach(() => {
    client = new MockClient();
    store = new EditorStore(client);
  });

  it('runs upload -> recommend -> keyframes -> interpolate -> edit -> re-interpolate', async () => {
    // upload: schema shown, recommendations fetched automatically
    await store.uploadDataset(CSV, 'olympics');
    expect(store.state.dataset?.rowCount).toBe(10);
    expect(store.state.dataset?.schema.map((f) => f.kind)).toContain('numerical');
    expect(store.state.recommendations.length).toBeGreaterThan(0);
    expect(client.calls).toContain('recommendations');

    // two keyframes placed on the storyline
    await store.addKeyframe(keyframe('Country'), 'by country');
    await store.addKeyframe(keyframe('Sport'), 'by sport');
    expect(store.badges()).toEqual(['keyframe', 'keyframe']);
    expect(store.canInterpolate()).toBe(true);

    // interpolate N=3: exactly 3 badged pieces appear between the keyframes
    await store.runInterpolation(0, 3);
    expect(store.badges()).toEqual(
      ['keyframe', 'interpolated', 'interpolated', 'interpolated', 'keyframe'],
    );

    // edit the first keyframe: draft panel validates locally, preview refreshes
    await store.selectPiece(0);
    expect(store.state.draft).not.toBeNull();
    await store.updateDraft((draft) => { draft.breakdown = 'Sex'; });
    expect(store.state.draftProblems).toEqual([]);
    expect(store.state.draftPreview).not.toBeNull();
    await store.submitDraft('by sex');
    expect(store.state.story?.pieces[0].caption).toBe('by sex');
    expect(store.state.editedKeyframe).toBe(0);

    // re-interpolation replaces the previously badged pieces
    const before = store.state.story!.pieces
      .filter((p) => p.provenance === 'interpolated').length;
    await store.reinterpolateAround(0, 2);
    const badges = store.badges();
    expect(badges.filter((b) => b === 'interpolated').length).toBe(2);
    expect(badges.filter((b) => b === 'interpolated').length).not.toBe(before);
    expect(badges[0]).toBe('keyframe');
    expect(badges[badges.length - 1]).toBe('keyframe');
    expect(store.state.editedKeyframe).toBeNull();
  });

  it('shows alternatives only for pieces with keyframe neighbors', async () => {
    await store.uploadDataset(CSV);
    await store.addKeyframe(keyframe('Country'));
    await store.insertEmptySlot(1);
    await store.addKeyframe(keyframe('Sport'));
    expect(store.badges()).toEqual(['keyframe', 'empty-slot', 'keyframe']);

    await store.selectPiece(0); // first piece: no predecessor
    expect(store.state.alternatives).toEqual([]);

    await store.selectPiece(1); // middle piece: keyframes on both sides
    expect(store.state.alternatives.length).toBeGreaterThan(0);

    await store.selectPiece(2); // last piece: no successor
    expect(store.state.alternatives).toEqual([]);
  });

  it('rolls back optimistic edits when the server rejects them', async () => {
    await store.uploadDataset(CSV);
    await store.addKeyframe(keyframe('Country'));
    const good = store.state.story!.pieces;

    const invalid: FactSpec = {
      ...keyframe('Country'),
      type: 'trend', // trend over a categorical breakdown is rejected
      meta: { extra: 'increasing' },
    };
    await store.addKeyframe(invalid);
    expect(store.state.story!.pieces).toEqual(good);
    expect(store.state.error).toContain('ValidationError');
  });

  it('blocks structurally invalid drafts before they reach the wire', async () => {
    await store.uploadDataset(CSV);
    await store.addKeyframe(keyframe('Country'));
    await store.selectPiece(0);
    const previews = client.calls.filter((c) => c === 'previewFact').length;
    await store.updateDraft((draft) => { draft.breakdown = null; });
    expect(store.state.draftProblems.length).toBeGreaterThan(0);
    expect(store.state.draftPreview).toBeNull();
    // no preview request was made for the invalid draft
    expect(client.calls.filter((c) => c === 'previewFact').length).toBe(previews);
    await store.submitDraft();
    expect(store.state.error).toContain('invalid');
  });

  it('surfaces upload errors inline', async () => {
    await store.uploadDataset('just-a-header\n');
    expect(store.state.dataset).toBeNull();
    expect(store.state.error).toContain('EmptyDataset');
  });

  it('ignores stale-version conflicts by rolling back', async () => {
    await store.uploadDataset(CSV);
    await store.addKeyframe(keyframe('Country'));
    // another client bumps the version behind our back
    await client.putPieces(store.state.story!.id, store.state.story!.pieces);
    await store.addKeyframe(keyframe('Sport'));
    expect(store.state.error).toContain('VersionConflict');
    expect(store.badges()).toEqual(['keyframe']);
  });

  it('switches between the three story views', () => {
    expect(store.state.viewMode).toBe('storyline');
    store.switchView('factsheet');
    expect(store.state.viewMode).toBe('factsheet');
    store.switchView('scrollup');
    expect(store.state.viewMode).toBe('scrollup');
  });
});
