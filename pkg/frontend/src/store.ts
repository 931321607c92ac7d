/** Editor state machine: storyline editing, fact drafting with live preview,
 * interpolation, recommendations, and view switching.
 *
 * DOM-free so the whole cooperation loop is testable against a mocked
 * service. Server mutations are optimistic and roll back on failure; one
 * operation runs at a time (the pending flag gates the UI's buttons).
 */

import { ApiError, EditorClient, PreviewResult } from './api.js';
import {
  DatasetInfo,
  FactSpec,
  PieceSpec,
  Provenance,
  ScoredFactEntry,
  StoryForm,
  StoryRecord,
  cloneFact,
  structuralProblems,
} from './model.js';

export interface EditorState {
  dataset: DatasetInfo | null;
  rows: Record<string, string>[];
  story: StoryRecord | null;
  selected: number | null;
  draft: FactSpec | null;
  draftProblems: string[];
  draftPreview: PreviewResult | null;
  recommendations: ScoredFactEntry[];
  alternatives: ScoredFactEntry[];
  viewMode: StoryForm;
  pending: boolean;
  editedKeyframe: number | null; // keyframe changed since its last interpolation
  error: string | null;
  notice: string | null;
}

type Listener = (state: EditorState) => void;

export class EditorStore {
  state: EditorState = {
    dataset: null,
    rows: [],
    story: null,
    selected: null,
    draft: null,
    draftProblems: [],
    draftPreview: null,
    recommendations: [],
    alternatives: [],
    viewMode: 'storyline',
    pending: false,
    editedKeyframe: null,
    error: null,
    notice: null,
  };

  private listeners: Listener[] = [];

  constructor(private client: EditorClient, private recommendationCount = 8) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit() {
    for (const listener of this.listeners) listener(this.state);
  }

  private patch(changes: Partial<EditorState>) {
    this.state = { ...this.state, ...changes };
    this.emit();
  }

  private async guarded<T>(work: () => Promise<T>): Promise<T | undefined> {
    if (this.state.pending) return undefined;
    this.patch({ pending: true, error: null });
    try {
      return await work();
    } catch (error) {
      this.patch({ error: describeError(error) });
      return undefined;
    } finally {
      this.patch({ pending: false });
    }
  }

  // -- dataset ---------------------------------------------------------------

  /** Upload a CSV; on success the schema is shown and recommendations are
   * fetched immediately (no cold start). */
  async uploadDataset(content: string | File, title = 'Untitled story') {
    return this.guarded(async () => {
      const dataset = await this.client.uploadDataset(content);
      const story = await this.client.createStory(dataset.datasetId, title);
      const rows = await this.client.getRows(dataset.datasetId, 0, 20);
      this.patch({
        dataset,
        story,
        rows: rows.rows,
        selected: null,
        draft: null,
        draftPreview: null,
        alternatives: [],
        editedKeyframe: null,
      });
      const recommendations = await this.client.recommendations(
        dataset.datasetId, this.recommendationCount,
      );
      this.patch({ recommendations });
      return dataset;
    });
  }

  // -- storyline editing -------------------------------------------------------

  private async replacePieces(pieces: PieceSpec[]): Promise<StoryRecord | undefined> {
    const story = this.state.story;
    if (!story) return undefined;
    const before = story;
    // optimistic update; roll back if the server rejects the new list
    this.patch({ story: { ...story, pieces } });
    try {
      const updated = await this.client.putPieces(story.id, pieces, story.version);
      this.patch({ story: updated });
      return updated;
    } catch (error) {
      this.patch({ story: before, error: describeError(error) });
      return undefined;
    }
  }

  async addKeyframe(fact: FactSpec, caption: string | null = null, index?: number) {
    return this.guarded(async () => {
      const pieces = [...(this.state.story?.pieces ?? [])];
      const piece: PieceSpec = { fact: cloneFact(fact), provenance: 'keyframe', caption };
      pieces.splice(index ?? pieces.length, 0, piece);
      return this.replacePieces(pieces);
    });
  }

  async insertEmptySlot(index: number) {
    return this.guarded(async () => {
      const pieces = [...(this.state.story?.pieces ?? [])];
      pieces.splice(index, 0, { fact: null, provenance: 'empty-slot', caption: null });
      return this.replacePieces(pieces);
    });
  }

  async reorderPiece(from: number, to: number) {
    return this.guarded(async () => {
      const pieces = [...(this.state.story?.pieces ?? [])];
      if (from < 0 || from >= pieces.length || to < 0 || to >= pieces.length) return;
      const [moved] = pieces.splice(from, 1);
      pieces.splice(to, 0, moved);
      return this.replacePieces(pieces);
    });
  }

  async deletePiece(index: number) {
    return this.guarded(async () => {
      const pieces = [...(this.state.story?.pieces ?? [])];
      pieces.splice(index, 1);
      const selected = this.state.selected === index ? null : this.state.selected;
      this.patch({ selected, alternatives: [] });
      return this.replacePieces(pieces);
    });
  }

  /** True when two succeeding keyframes exist, i.e. interpolation is possible. */
  canInterpolate(): boolean {
    const keyframes = (this.state.story?.pieces ?? [])
      .filter((p) => p.provenance === 'keyframe');
    return keyframes.length >= 2;
  }

  // -- fact panel ----------------------------------------------------------------

  hasKeyframeNeighbors(index: number): boolean {
    const pieces = this.state.story?.pieces ?? [];
    const before = pieces.slice(0, index).some((p) => p.provenance === 'keyframe');
    const after = pieces.slice(index + 1).some((p) => p.provenance === 'keyframe');
    return before && after;
  }

  /** Select a piece: load its fact into the draft panel, refresh the preview,
   * and fetch the alternatives list when the piece has keyframe neighbors. */
  async selectPiece(index: number) {
    return this.guarded(async () => {
      const story = this.state.story;
      if (!story || index < 0 || index >= story.pieces.length) return;
      const piece = story.pieces[index];
      const draft = piece.fact ? cloneFact(piece.fact) : null;
      this.patch({
        selected: index,
        draft,
        draftProblems: draft && this.state.dataset
          ? structuralProblems(draft, this.state.dataset.schema) : [],
        draftPreview: null,
        alternatives: [],
      });
      if (draft && this.state.dataset) {
        await this.refreshPreview();
      }
      if (this.hasKeyframeNeighbors(index)) {
        const alternatives = await this.client.alternatives(story.id, index);
        this.patch({ alternatives });
      }
    });
  }

  /** Edit the draft; the preview refreshes only for locally valid drafts. */
  async updateDraft(mutate: (draft: FactSpec) => void) {
    const { draft, dataset } = this.state;
    if (!draft || !dataset) return;
    const next = cloneFact(draft);
    mutate(next);
    const problems = structuralProblems(next, dataset.schema);
    this.patch({ draft: next, draftProblems: problems });
    if (!problems.length) {
      await this.refreshPreview();
    } else {
      this.patch({ draftPreview: null });
    }
  }

  private async refreshPreview() {
    const { draft, dataset } = this.state;
    if (!draft || !dataset) return;
    try {
      const preview = await this.client.previewFact(dataset.datasetId, draft);
      this.patch({ draftPreview: preview });
    } catch (error) {
      this.patch({
        draftPreview: null,
        draftProblems: [describeError(error)],
      });
    }
  }

  /** Adopt an alternative from the recommendation list as the current draft. */
  async chooseAlternative(entry: ScoredFactEntry) {
    const { dataset } = this.state;
    if (!dataset) return;
    const draft = cloneFact(entry.fact);
    this.patch({
      draft,
      draftProblems: structuralProblems(draft, dataset.schema),
    });
    await this.refreshPreview();
  }

  /** Write the draft back into the selected piece (full-list PUT). */
  async submitDraft(caption?: string | null) {
    return this.guarded(async () => {
      const { story, selected, draft, dataset } = this.state;
      if (!story || selected === null || !draft || !dataset) return;
      if (structuralProblems(draft, dataset.schema).length) {
        this.patch({ error: 'draft is structurally invalid' });
        return;
      }
      const pieces = [...story.pieces];
      const old = pieces[selected];
      pieces[selected] = {
        fact: cloneFact(draft),
        provenance: old.provenance === 'empty-slot' ? 'keyframe' : old.provenance,
        caption: caption !== undefined ? caption : old.caption,
      };
      const updated = await this.replacePieces(pieces);
      if (updated && pieces[selected].provenance === 'keyframe') {
        // editing a keyframe invites re-interpolating the segments around it
        this.patch({ editedKeyframe: selected });
      }
      return updated;
    });
  }

  // -- interpolation -----------------------------------------------------------------

  /** Run interpolation after the given keyframe; the returned record replaces
   * whatever sat between it and the next keyframe (badged as interpolated). */
  async runInterpolation(afterPieceIndex: number, n = 3, rngSeed?: number) {
    return this.guarded(async () => {
      const story = this.state.story;
      if (!story) return;
      const updated = await this.client.interpolate(story.id, afterPieceIndex, n, rngSeed);
      this.patch({ story: updated, editedKeyframe: null, alternatives: [] });
      return updated;
    });
  }

  /** One-click re-interpolation around an edited keyframe: re-runs the
   * segment before and after it where both ends are keyframes. */
  async reinterpolateAround(index: number, n = 3, rngSeed?: number) {
    return this.guarded(async () => {
      const story = this.state.story;
      if (!story) return;
      let record = story;
      const keyframePositions = record.pieces
        .map((p, i) => ({ p, i }))
        .filter(({ p }) => p.provenance === 'keyframe')
        .map(({ i }) => i);
      const slot = keyframePositions.indexOf(index);
      if (slot === -1) return;
      if (slot > 0) {
        record = await this.client.interpolate(
          record.id, keyframePositions[slot - 1], n, rngSeed,
        );
        this.patch({ story: record });
      }
      // indices shift after the first segment is rewritten; find the keyframe again
      const positions = record.pieces
        .map((p, i) => ({ p, i }))
        .filter(({ p }) => p.provenance === 'keyframe')
        .map(({ i }) => i);
      const at = positions[slot];
      if (slot < positions.length - 1) {
        record = await this.client.interpolate(record.id, at, n, rngSeed);
        this.patch({ story: record });
      }
      this.patch({ editedKeyframe: null });
      return record;
    });
  }

  // -- views ---------------------------------------------------------------------------

  switchView(mode: StoryForm) {
    this.patch({ viewMode: mode });
  }

  badges(): Provenance[] {
    return (this.state.story?.pieces ?? []).map((p) => p.provenance);
  }
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) {
    return `${error.errorClass}: ${error.message}`;
  }
  return error instanceof Error ? error.message : String(error);
}
