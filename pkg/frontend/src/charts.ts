/** Minimal SVG chart rendering: one canonical chart per fact type. */

import { FactSpec, FactView, chartKind } from './model.js';

const W = 320;
const H = 180;
const PAD = 28;

function esc(text: string): string {
  return text.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function svg(inner: string): string {
  return `<svg viewBox="0 0 ${W} ${H}" xmlns="http://www.w3.org/2000/svg" role="img">${inner}</svg>`;
}

function barChart(view: FactView, highlight: boolean): string {
  const groups = view.groups.slice(0, 12);
  if (!groups.length) return svg('');
  const highlighted = new Set(view.highlighted);
  const values = groups.map(([, v]) => v);
  const max = Math.max(...values, 0);
  const min = Math.min(...values, 0);
  const span = max - min || 1;
  const bw = (W - 2 * PAD) / groups.length;
  const zeroY = H - PAD - ((0 - min) / span) * (H - 2 * PAD);
  let out = `<line x1="${PAD}" y1="${zeroY}" x2="${W - PAD}" y2="${zeroY}" stroke="#999"/>`;
  groups.forEach(([label, value], i) => {
    const x = PAD + i * bw + 2;
    const y = H - PAD - ((value - min) / span) * (H - 2 * PAD);
    const top = Math.min(y, zeroY);
    const height = Math.max(Math.abs(zeroY - y), 1);
    const fill = highlight && highlighted.has(label) ? '#e4572e' : '#4c78a8';
    out += `<rect x="${x}" y="${top}" width="${Math.max(bw - 4, 2)}" height="${height}" fill="${fill}"/>`;
    out += `<text x="${x + bw / 2 - 2}" y="${H - 8}" font-size="8" text-anchor="middle">${esc(label.slice(0, 9))}</text>`;
  });
  return svg(out);
}

function lineChart(view: FactView): string {
  const groups = view.groups;
  if (groups.length < 2) return barChart(view, false);
  const values = groups.map(([, v]) => v);
  const max = Math.max(...values);
  const min = Math.min(...values);
  const span = max - min || 1;
  const step = (W - 2 * PAD) / (groups.length - 1);
  const points = groups.map(([, v], i) => {
    const x = PAD + i * step;
    const y = H - PAD - ((v - min) / span) * (H - 2 * PAD);
    return `${x},${y}`;
  });
  let out = `<polyline points="${points.join(' ')}" fill="none" stroke="#4c78a8" stroke-width="2"/>`;
  groups.forEach(([label], i) => {
    if (groups.length <= 8 || i % 2 === 0) {
      out += `<text x="${PAD + i * step}" y="${H - 8}" font-size="8" text-anchor="middle">${esc(label.slice(0, 9))}</text>`;
    }
  });
  return svg(out);
}

function pieChart(view: FactView): string {
  const groups = view.groups.slice(0, 10);
  const total = groups.reduce((acc, [, v]) => acc + Math.max(v, 0), 0);
  if (total <= 0) return barChart(view, true);
  const highlighted = new Set(view.highlighted);
  const cx = W / 2;
  const cy = H / 2;
  const r = H / 2 - 12;
  let angle = -Math.PI / 2;
  let out = '';
  const palette = ['#4c78a8', '#9ecae9', '#f2cf5b', '#83bcb6', '#b5cf6b',
    '#d6a5c9', '#f1a2a9', '#c7c7c7', '#9d755d', '#bab0ac'];
  groups.forEach(([label, value], i) => {
    const share = Math.max(value, 0) / total;
    const next = angle + share * 2 * Math.PI;
    const x1 = cx + r * Math.cos(angle);
    const y1 = cy + r * Math.sin(angle);
    const x2 = cx + r * Math.cos(next);
    const y2 = cy + r * Math.sin(next);
    const large = share > 0.5 ? 1 : 0;
    const fill = highlighted.has(label) ? '#e4572e' : palette[i % palette.length];
    out += `<path d="M ${cx} ${cy} L ${x1} ${y1} A ${r} ${r} 0 ${large} 1 ${x2} ${y2} Z" fill="${fill}" stroke="white"/>`;
    angle = next;
  });
  return svg(out);
}

function scatterChart(view: FactView): string {
  const xs = view.groups.map(([, v]) => v);
  const ys = (view.series2 ?? []).map((v) => v ?? 0);
  if (!xs.length || xs.length !== ys.length) return barChart(view, false);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  const spanX = maxX - minX || 1;
  const spanY = maxY - minY || 1;
  let out = '';
  xs.forEach((x, i) => {
    const px = PAD + ((x - minX) / spanX) * (W - 2 * PAD);
    const py = H - PAD - ((ys[i] - minY) / spanY) * (H - 2 * PAD);
    out += `<circle cx="${px}" cy="${py}" r="4" fill="#4c78a8" opacity="0.8"/>`;
  });
  return svg(out);
}

function bigNumber(view: FactView): string {
  const value = view.groups.length ? view.groups[0][1] : 0;
  const text = Math.abs(value) >= 1000 ? value.toFixed(0) : String(+value.toFixed(3));
  return svg(
    `<text x="${W / 2}" y="${H / 2 + 10}" font-size="42" text-anchor="middle" fill="#4c78a8" font-weight="bold">${esc(text)}</text>`,
  );
}

export function renderChart(fact: FactSpec, view: FactView): string {
  switch (chartKind(fact.type)) {
    case 'line':
      return lineChart(view);
    case 'pie':
      return pieChart(view);
    case 'scatter':
      return scatterChart(view);
    case 'big-number':
      return bigNumber(view);
    case 'highlight-bar':
      return barChart(view, true);
    default:
      return barChart(view, false);
  }
}
