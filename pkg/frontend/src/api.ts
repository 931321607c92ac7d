/** Typed client for the authoring service. The editor talks to the backend
 * exclusively through this interface, which also makes mocking trivial. */

import type {
  DatasetInfo,
  FactSpec,
  FactView,
  PieceSpec,
  ScoredFactEntry,
  StoryDocument,
  StoryForm,
  StoryRecord,
} from './model.js';

export class ApiError extends Error {
  constructor(
    public status: number,
    public errorClass: string,
    message: string,
    public body?: unknown,
  ) {
    super(message);
  }
}

export interface ValidityReport {
  valid: boolean;
  violations: { rule: string; message: string; errorClass: string }[];
}

export interface PreviewResult {
  view: FactView;
  caption: string;
}

export interface EditorClient {
  uploadDataset(content: string | File): Promise<DatasetInfo>;
  getRows(datasetId: string, offset: number, limit: number):
    Promise<{ rows: Record<string, string>[]; total: number }>;
  recommendations(datasetId: string, k: number): Promise<ScoredFactEntry[]>;
  validateFact(datasetId: string, fact: FactSpec): Promise<ValidityReport>;
  previewFact(datasetId: string, fact: FactSpec): Promise<PreviewResult>;
  createStory(datasetId: string, title: string): Promise<StoryRecord>;
  getStory(storyId: string): Promise<StoryRecord>;
  putPieces(storyId: string, pieces: PieceSpec[], baseVersion?: number):
    Promise<StoryRecord>;
  interpolate(storyId: string, afterPieceIndex: number, n: number, rngSeed?: number):
    Promise<StoryRecord>;
  alternatives(storyId: string, pieceIndex: number): Promise<ScoredFactEntry[]>;
  exportStory(storyId: string, form: StoryForm): Promise<StoryDocument>;
}

async function decode(response: Response): Promise<unknown> {
  const text = await response.text();
  try {
    return text ? JSON.parse(text) : null;
  } catch {
    return text;
  }
}

export class HttpClient implements EditorClient {
  constructor(private baseUrl: string = '') {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const response = await fetch(`${this.baseUrl}${path}`, init);
    const body = await decode(response);
    if (!response.ok) {
      const record = (body ?? {}) as Record<string, unknown>;
      throw new ApiError(
        response.status,
        String(record.error ?? 'HttpError'),
        String(record.message ?? `HTTP ${response.status}`),
        body,
      );
    }
    return body;
  }

  private json(path: string, method: string, payload: unknown): Promise<unknown> {
    return this.request(path, {
      method,
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(payload),
    });
  }

  async uploadDataset(content: string | File): Promise<DatasetInfo> {
    if (typeof content === 'string') {
      return (await this.request('/datasets', {
        method: 'POST',
        headers: { 'Content-Type': 'text/csv' },
        body: content,
      })) as DatasetInfo;
    }
    const form = new FormData();
    form.append('file', content);
    return (await this.request('/datasets', { method: 'POST', body: form })) as DatasetInfo;
  }

  async getRows(datasetId: string, offset: number, limit: number) {
    return (await this.request(
      `/datasets/${datasetId}/rows?offset=${offset}&limit=${limit}`,
    )) as { rows: Record<string, string>[]; total: number };
  }

  async recommendations(datasetId: string, k: number): Promise<ScoredFactEntry[]> {
    const body = (await this.request(
      `/datasets/${datasetId}/recommendations?k=${k}`,
    )) as { recommendations: ScoredFactEntry[] };
    return body.recommendations;
  }

  async validateFact(datasetId: string, fact: FactSpec): Promise<ValidityReport> {
    return (await this.json('/facts/validate', 'POST', { datasetId, fact })) as ValidityReport;
  }

  async previewFact(datasetId: string, fact: FactSpec): Promise<PreviewResult> {
    return (await this.json('/facts/preview', 'POST', { datasetId, fact })) as PreviewResult;
  }

  async createStory(datasetId: string, title: string): Promise<StoryRecord> {
    return (await this.json('/stories', 'POST', { datasetId, title })) as StoryRecord;
  }

  async getStory(storyId: string): Promise<StoryRecord> {
    return (await this.request(`/stories/${storyId}`)) as StoryRecord;
  }

  async putPieces(storyId: string, pieces: PieceSpec[], baseVersion?: number):
    Promise<StoryRecord> {
    return (await this.json(`/stories/${storyId}/pieces`, 'PUT', {
      pieces,
      ...(baseVersion !== undefined ? { baseVersion } : {}),
    })) as StoryRecord;
  }

  async interpolate(storyId: string, afterPieceIndex: number, n: number,
                    rngSeed?: number): Promise<StoryRecord> {
    return (await this.json(`/stories/${storyId}/interpolate`, 'POST', {
      afterPieceIndex,
      N: n,
      configOverrides: rngSeed !== undefined ? { rngSeed } : {},
    })) as StoryRecord;
  }

  async alternatives(storyId: string, pieceIndex: number): Promise<ScoredFactEntry[]> {
    const body = (await this.json(`/stories/${storyId}/alternatives`, 'POST', {
      pieceIndex,
    })) as { alternatives: ScoredFactEntry[] };
    return body.alternatives;
  }

  async exportStory(storyId: string, form: StoryForm): Promise<StoryDocument> {
    return (await this.request(`/stories/${storyId}/export?form=${form}`)) as StoryDocument;
  }
}
