/** DOM rendering for the four editor panels: data view, story configuration,
 * fact configuration, and the storyline. */

import { renderChart } from './charts.js';
import {
  AGGREGATIONS,
  FACT_TYPES,
  FactSpec,
  FieldSchema,
  STORY_FORMS,
  StoryForm,
  emptyFact,
} from './model.js';
import { EditorState, EditorStore } from './store.js';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, attrs: Record<string, string> = {}, ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === 'class') node.className = value;
    else node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function option(value: string, label?: string, selected = false): HTMLOptionElement {
  const node = el('option', { value }, label ?? value);
  node.selected = selected;
  return node;
}

function factSummary(fact: FactSpec): string {
  const filters = fact.subspace.map((f) => `${f.field}=${f.value}`).join(', ');
  const measure = fact.measure.field
    ? `${fact.measure.aggregation}(${fact.measure.field})` : 'count';
  const bits = [fact.type, measure];
  if (fact.breakdown) bits.push(`by ${fact.breakdown}`);
  if (filters) bits.push(`for ${filters}`);
  if (fact.focus.length) bits.push(`focus ${fact.focus.join(' & ')}`);
  if (fact.meta.extra) bits.push(fact.meta.extra);
  if (fact.meta.secondField) bits.push(`vs ${fact.meta.secondField}`);
  return bits.join(' · ');
}

// --- data view ------------------------------------------------------------------

function renderDataView(state: EditorState, store: EditorStore): HTMLElement {
  const root = el('section', { class: 'panel data-view' });
  root.append(el('h2', {}, 'Data'));

  const input = el('input', { type: 'file', accept: '.csv,text/csv' });
  input.addEventListener('change', () => {
    const file = input.files?.[0];
    if (file) void store.uploadDataset(file, file.name.replace(/\.csv$/i, ''));
  });
  root.append(input);

  if (state.error) {
    root.append(el('div', { class: 'error' }, state.error));
  }
  if (!state.dataset) {
    root.append(el('p', { class: 'hint' }, 'Upload a CSV to start a story.'));
    return root;
  }
  const schema = el('ul', { class: 'schema' });
  for (const field of state.dataset.schema) {
    schema.append(el('li', {}, `${field.name} — ${field.kind}`));
  }
  root.append(
    el('p', {}, `${state.dataset.rowCount} rows`),
    schema,
  );
  if (state.rows.length) {
    const table = el('table', { class: 'rows' });
    const header = el('tr');
    for (const field of state.dataset.schema) header.append(el('th', {}, field.name));
    table.append(header);
    for (const row of state.rows.slice(0, 8)) {
      const tr = el('tr');
      for (const field of state.dataset.schema) tr.append(el('td', {}, row[field.name] ?? ''));
      table.append(tr);
    }
    root.append(table);
  }
  return root;
}

// --- story mode panel (recommendations) ----------------------------------------------

function renderStoryPanel(state: EditorState, store: EditorStore): HTMLElement {
  const root = el('section', { class: 'panel story-panel' });
  root.append(el('h2', {}, 'Story'));
  if (!state.dataset) return root;

  const picker = el('label', {}, 'View: ');
  const select = el('select');
  for (const form of STORY_FORMS) {
    select.append(option(form, form, state.viewMode === form));
  }
  select.addEventListener('change', () => store.switchView(select.value as StoryForm));
  picker.append(select);
  root.append(picker);

  root.append(el('h3', {}, 'Recommended facts'));
  const list = el('ul', { class: 'recommendations' });
  for (const entry of state.recommendations) {
    const add = el('button', {}, 'add keyframe');
    add.addEventListener('click', () => void store.addKeyframe(entry.fact, entry.caption ?? null));
    list.append(el(
      'li', {},
      el('span', { class: 'score' }, entry.significance.toFixed(2)),
      ' ',
      el('span', {}, entry.caption ?? factSummary(entry.fact)),
      ' ',
      add,
    ));
  }
  if (!state.recommendations.length) {
    list.append(el('li', { class: 'hint' }, 'no recommendations yet'));
  }
  root.append(list);
  return root;
}

// --- fact configuration panel -----------------------------------------------------------

function fieldOptions(schema: FieldSchema[], kinds: string[], allowNone: boolean,
                      current: string | null): HTMLSelectElement {
  const select = el('select');
  if (allowNone) select.append(option('', '(none)', current === null));
  for (const field of schema) {
    if (kinds.includes(field.kind)) {
      select.append(option(field.name, field.name, current === field.name));
    }
  }
  return select;
}

function renderFactPanel(state: EditorState, store: EditorStore): HTMLElement {
  const root = el('section', { class: 'panel fact-panel' });
  root.append(el('h2', {}, 'Fact'));
  const { draft, dataset } = state;
  if (state.selected === null || !dataset) {
    root.append(el('p', { class: 'hint' }, 'Select a piece from the storyline.'));
    return root;
  }
  if (!draft) {
    const start = el('button', {}, 'start a fact for this slot');
    start.addEventListener('click', () => void store.updateDraft(() => undefined) // no-op
    );
    start.addEventListener('click', () => {
      void store.chooseAlternative({ fact: emptyFact(), significance: 0 });
    });
    root.append(el('p', { class: 'hint' }, 'Empty slot.'), start);
  } else {
    // preview and validity gate: invalid drafts never render a chart
    if (state.draftProblems.length) {
      const problems = el('ul', { class: 'error problems' });
      for (const problem of state.draftProblems) problems.append(el('li', {}, problem));
      root.append(problems);
    } else if (state.draftPreview) {
      const chart = el('div', { class: 'chart' });
      chart.innerHTML = renderChart(draft, state.draftPreview.view);
      root.append(chart, el('p', { class: 'caption' }, state.draftPreview.caption));
    }

    const form = el('div', { class: 'fact-form' });

    const typeSelect = el('select');
    for (const t of FACT_TYPES) typeSelect.append(option(t, t, draft.type === t));
    typeSelect.addEventListener('change', () => void store.updateDraft((d) => {
      d.type = typeSelect.value as FactSpec['type'];
      if (d.type === 'trend' && !['increasing', 'decreasing'].includes(d.meta.extra)) {
        d.meta.extra = 'increasing';
      } else if (d.type === 'extreme' && !['minimum', 'maximum'].includes(d.meta.extra)) {
        d.meta.extra = 'maximum';
      } else if (!['trend', 'extreme'].includes(d.type)) {
        d.meta.extra = '';
      }
    }));
    form.append(el('label', {}, 'type ', typeSelect));

    const measureField = fieldOptions(dataset.schema, ['numerical'], true,
                                      draft.measure.field);
    measureField.addEventListener('change', () => void store.updateDraft((d) => {
      d.measure.field = measureField.value || null;
    }));
    const aggSelect = el('select');
    for (const agg of AGGREGATIONS) {
      aggSelect.append(option(agg, agg, draft.measure.aggregation === agg));
    }
    aggSelect.addEventListener('change', () => void store.updateDraft((d) => {
      d.measure.aggregation = aggSelect.value as FactSpec['measure']['aggregation'];
    }));
    form.append(el('label', {}, 'measure ', measureField, aggSelect));

    const breakdown = fieldOptions(dataset.schema, ['categorical', 'temporal'], true,
                                   draft.breakdown);
    breakdown.addEventListener('change', () => void store.updateDraft((d) => {
      d.breakdown = breakdown.value || null;
    }));
    form.append(el('label', {}, 'breakdown ', breakdown));

    const subspace = el('input', {
      type: 'text', placeholder: 'field=value; field=value',
      value: draft.subspace.map((f) => `${f.field}=${f.value}`).join('; '),
    });
    subspace.addEventListener('change', () => void store.updateDraft((d) => {
      d.subspace = subspace.value.split(';').map((s) => s.trim()).filter(Boolean)
        .map((pair) => {
          const [field, ...rest] = pair.split('=');
          return { field: field.trim(), value: rest.join('=').trim() };
        });
    }));
    form.append(el('label', {}, 'subspace ', subspace));

    const focus = el('input', {
      type: 'text', placeholder: 'focus label(s), ; separated',
      value: draft.focus.join('; '),
    });
    focus.addEventListener('change', () => void store.updateDraft((d) => {
      d.focus = focus.value.split(';').map((s) => s.trim()).filter(Boolean);
    }));
    form.append(el('label', {}, 'focus ', focus));

    if (draft.type === 'trend' || draft.type === 'extreme') {
      const metaSelect = el('select');
      const options = draft.type === 'trend'
        ? ['increasing', 'decreasing'] : ['minimum', 'maximum'];
      for (const value of options) {
        metaSelect.append(option(value, value, draft.meta.extra === value));
      }
      metaSelect.addEventListener('change', () => void store.updateDraft((d) => {
        d.meta.extra = metaSelect.value;
      }));
      form.append(el('label', {}, 'meta ', metaSelect));
    }
    if (draft.type === 'association') {
      const second = fieldOptions(dataset.schema, ['numerical'], true,
                                  draft.meta.secondField ?? null);
      second.addEventListener('change', () => void store.updateDraft((d) => {
        d.meta.secondField = second.value || undefined;
      }));
      form.append(el('label', {}, 'second field ', second));
    }

    const piece = state.story?.pieces[state.selected];
    const caption = el('input', {
      type: 'text', placeholder: 'caption',
      value: piece?.caption ?? '',
    });
    form.append(el('label', {}, 'caption ', caption));

    const submit = el('button', { class: 'primary' }, 'apply to storyline');
    submit.disabled = state.pending || state.draftProblems.length > 0;
    submit.addEventListener('click', () => void store.submitDraft(caption.value || null));
    form.append(submit);
    root.append(form);

    if (state.draftPreview) {
      const snippet = el('table', { class: 'snippet' });
      snippet.append(el('tr', {}, el('th', {}, 'group'), el('th', {}, 'value')));
      for (const [label, value] of state.draftPreview.view.groups.slice(0, 10)) {
        const tr = el('tr', {}, el('td', {}, label), el('td', {}, String(value)));
        if (state.draftPreview.view.highlighted.includes(label)) {
          tr.className = 'highlight';
        }
        snippet.append(tr);
      }
      root.append(el('h3', {}, 'Data snippet'), snippet);
    }
  }

  if (state.alternatives.length) {
    root.append(el('h3', {}, 'Alternatives'));
    const list = el('ul', { class: 'alternatives' });
    for (const alt of state.alternatives) {
      const use = el('button', {}, 'use');
      use.addEventListener('click', () => void store.chooseAlternative(alt));
      list.append(el(
        'li', {},
        el('span', { class: 'score' }, alt.significance.toFixed(2)),
        ' ', el('span', {}, factSummary(alt.fact)), ' ', use,
      ));
    }
    root.append(list);
  }
  return root;
}

// --- storyline -----------------------------------------------------------------------------

function renderStoryline(state: EditorState, store: EditorStore): HTMLElement {
  const root = el('section', { class: `panel storyline mode-${state.viewMode}` });
  root.append(el('h2', {}, `Storyline (${state.viewMode})`));
  const story = state.story;
  if (!story) return root;

  const strip = el('div', { class: `pieces ${state.viewMode}` });
  story.pieces.forEach((piece, index) => {
    const card = el('div', {
      class: `piece ${piece.provenance}` + (state.selected === index ? ' selected' : ''),
    });
    card.append(el('span', { class: `badge ${piece.provenance}` }, piece.provenance));
    if (piece.fact) {
      card.append(el('p', {}, piece.caption ?? factSummary(piece.fact)));
    } else {
      card.append(el('p', { class: 'hint' }, '(empty fact)'));
    }
    card.addEventListener('click', () => void store.selectPiece(index));

    const tools = el('div', { class: 'tools' });
    if (index > 0) {
      const left = el('button', { title: 'move left' }, '←');
      left.addEventListener('click', (event) => {
        event.stopPropagation();
        void store.reorderPiece(index, index - 1);
      });
      tools.append(left);
    }
    if (index < story.pieces.length - 1) {
      const right = el('button', { title: 'move right' }, '→');
      right.addEventListener('click', (event) => {
        event.stopPropagation();
        void store.reorderPiece(index, index + 1);
      });
      tools.append(right);
    }
    const remove = el('button', { title: 'delete' }, '✕');
    remove.addEventListener('click', (event) => {
      event.stopPropagation();
      void store.deletePiece(index);
    });
    tools.append(remove);

    if (piece.provenance === 'keyframe') {
      const nextKeyframe = story.pieces.slice(index + 1)
        .some((p) => p.provenance === 'keyframe');
      if (nextKeyframe) {
        const n = el('select', { class: 'n-select', title: 'midpoints' });
        for (const k of [1, 2, 3, 4, 5]) n.append(option(String(k), String(k), k === 3));
        const run = el('button', { class: 'interpolate' }, 'interpolate →');
        run.disabled = state.pending;
        run.addEventListener('click', (event) => {
          event.stopPropagation();
          void store.runInterpolation(index, Number(n.value));
        });
        tools.append(n, run);
      }
      if (state.editedKeyframe === index) {
        const again = el('button', { class: 'reinterpolate' }, 're-interpolate segment');
        again.addEventListener('click', (event) => {
          event.stopPropagation();
          void store.reinterpolateAround(index);
        });
        tools.append(again);
      }
    }
    card.append(tools);
    strip.append(card);
  });
  const addSlot = el('button', {}, '+ empty fact');
  addSlot.disabled = state.pending;
  addSlot.addEventListener('click', () => void store.insertEmptySlot(story.pieces.length));
  root.append(strip, addSlot);
  if (state.pending) root.append(el('div', { class: 'spinner' }, 'working…'));
  return root;
}

export function renderApp(container: HTMLElement, state: EditorState,
                          store: EditorStore): void {
  container.replaceChildren(
    renderDataView(state, store),
    renderStoryPanel(state, store),
    renderFactPanel(state, store),
    renderStoryline(state, store),
  );
}
