/** Fact-spec documents and the local (structural) validity rules.
 *
 * The engine owns full validation; the editor mirrors the structural matrix
 * so drafts can be gated before they ever reach the wire.
 */

export type FactType =
  | 'value'
  | 'difference'
  | 'proportion'
  | 'trend'
  | 'categorization'
  | 'distribution'
  | 'rank'
  | 'association'
  | 'extreme'
  | 'outlier';

export const FACT_TYPES: FactType[] = [
  'value', 'difference', 'proportion', 'trend', 'categorization',
  'distribution', 'rank', 'association', 'extreme', 'outlier',
];

export type Aggregation = 'count' | 'sum' | 'average' | 'minimum' | 'maximum';

export const AGGREGATIONS: Aggregation[] = ['count', 'sum', 'average', 'minimum', 'maximum'];

export interface FilterSpec {
  field: string;
  value: string;
}

export interface FactSpec {
  type: FactType;
  subspace: FilterSpec[];
  breakdown: string | null;
  measure: { field: string | null; aggregation: Aggregation };
  focus: string[];
  meta: { extra: string; secondField?: string };
}

export type Provenance = 'keyframe' | 'interpolated' | 'empty-slot';

export interface PieceSpec {
  fact: FactSpec | null;
  provenance: Provenance;
  caption: string | null;
}

export interface FieldSchema {
  name: string;
  kind: 'categorical' | 'temporal' | 'numerical';
  domain: { values?: string[]; min?: number; max?: number };
}

export interface DatasetInfo {
  datasetId: string;
  schema: FieldSchema[];
  rowCount: number;
}

export interface FactView {
  groups: [string, number][];
  highlighted: string[];
  supportRowCount: number;
  series2: (number | null)[] | null;
}

export interface ScoredFactEntry {
  fact: FactSpec;
  significance: number;
  caption?: string;
}

export interface StoryRecord {
  id: string;
  title: string;
  datasetId: string;
  version: number;
  pieces: PieceSpec[];
}

export interface StoryDocumentPiece {
  fact: FactSpec | null;
  provenance: Provenance;
  caption: string | null;
  view: FactView | null;
}

export interface StoryDocument {
  id: string;
  title: string;
  datasetId: string;
  form: string;
  pieces: StoryDocumentPiece[];
}

export const STORY_FORMS = ['storyline', 'factsheet', 'scrollup'] as const;
export type StoryForm = (typeof STORY_FORMS)[number];

export function emptyFact(): FactSpec {
  return {
    type: 'value',
    subspace: [],
    breakdown: null,
    measure: { field: null, aggregation: 'count' },
    focus: [],
    meta: { extra: '' },
  };
}

export function cloneFact(fact: FactSpec): FactSpec {
  return JSON.parse(JSON.stringify(fact)) as FactSpec;
}

const FOCUS_ARITY: Record<FactType, [number, number]> = {
  value: [0, 0],
  difference: [2, 2],
  proportion: [1, 1],
  trend: [0, 1],
  categorization: [0, 1],
  distribution: [0, 1],
  rank: [0, 1],
  association: [0, 1],
  extreme: [1, 1],
  outlier: [1, 1],
};

const BREAKDOWN_REQUIRED: Record<FactType, boolean> = {
  value: false,
  difference: true,
  proportion: true,
  trend: true,
  categorization: true,
  distribution: true,
  rank: true,
  association: false,
  extreme: true,
  outlier: true,
};

/** Structural problems with a draft; empty list means locally valid. */
export function structuralProblems(fact: FactSpec, schema: FieldSchema[]): string[] {
  const problems: string[] = [];
  const byName = new Map(schema.map((f) => [f.name, f]));
  const t = fact.type;

  const [lo, hi] = FOCUS_ARITY[t];
  if (fact.focus.length < lo || fact.focus.length > hi) {
    problems.push(`${t} facts take between ${lo} and ${hi} focus items`);
  }
  if (new Set(fact.focus).size !== fact.focus.length) {
    problems.push('focus items must be distinct');
  }
  if (BREAKDOWN_REQUIRED[t] && !fact.breakdown) {
    problems.push(`${t} facts need a breakdown`);
  }
  if (!BREAKDOWN_REQUIRED[t] && fact.breakdown) {
    problems.push(`${t} facts take no breakdown`);
  }
  if (fact.measure.aggregation !== 'count' && !fact.measure.field) {
    problems.push(`${fact.measure.aggregation} needs a measure field`);
  }
  if (t === 'trend' && !['increasing', 'decreasing'].includes(fact.meta.extra)) {
    problems.push('trend facts need meta increasing or decreasing');
  }
  if (t === 'extreme' && !['minimum', 'maximum'].includes(fact.meta.extra)) {
    problems.push('extreme facts need meta minimum or maximum');
  }
  if (t === 'proportion' && !['sum', 'count'].includes(fact.measure.aggregation)) {
    problems.push('proportion needs a sum or count measure');
  }
  if (t === 'categorization' && fact.measure.aggregation !== 'count') {
    problems.push('categorization uses the count measure');
  }
  if (t === 'association') {
    if (!fact.meta.secondField) {
      problems.push('association needs a second field');
    } else if (fact.meta.secondField === fact.measure.field) {
      problems.push("association's two fields must differ");
    }
    if (fact.measure.aggregation === 'count') {
      problems.push('association needs a numerical measure');
    }
  }

  const seenFields = new Set<string>();
  for (const filter of fact.subspace) {
    if (seenFields.has(filter.field)) {
      problems.push(`duplicate filter on ${filter.field}`);
    }
    seenFields.add(filter.field);
    const field = byName.get(filter.field);
    if (!field) {
      problems.push(`unknown field ${filter.field}`);
    } else if (field.kind === 'numerical') {
      problems.push(`cannot filter on numerical field ${filter.field}`);
    }
  }
  if (fact.breakdown) {
    const field = byName.get(fact.breakdown);
    if (!field) {
      problems.push(`unknown breakdown field ${fact.breakdown}`);
    } else if (field.kind === 'numerical') {
      problems.push('breakdown must be categorical or temporal');
    } else if (t === 'trend' && field.kind !== 'temporal') {
      problems.push('trend needs a temporal breakdown');
    } else if (t === 'categorization' && field.kind !== 'categorical') {
      problems.push('categorization needs a categorical breakdown');
    }
  }
  if (fact.measure.field) {
    const field = byName.get(fact.measure.field);
    if (!field) {
      problems.push(`unknown measure field ${fact.measure.field}`);
    } else if (field.kind !== 'numerical') {
      problems.push('measure field must be numerical');
    }
  }
  return problems;
}

/** Chart family per fact type (one canonical chart each). */
export function chartKind(type: FactType):
  'bar' | 'line' | 'pie' | 'scatter' | 'highlight-bar' | 'big-number' {
  switch (type) {
    case 'trend':
      return 'line';
    case 'proportion':
      return 'pie';
    case 'association':
      return 'scatter';
    case 'value':
      return 'big-number';
    case 'extreme':
    case 'outlier':
    case 'distribution':
      return 'highlight-bar';
    default:
      return 'bar';
  }
}
