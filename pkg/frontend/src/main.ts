import { HttpClient } from './api.js';
import { EditorStore } from './store.js';
import { renderApp } from './views.js';

const container = document.getElementById('app');
if (!container) {
  throw new Error('missing #app container');
}
const base = (window as unknown as { FACTWEAVE_API?: string }).FACTWEAVE_API ?? '';
const store = new EditorStore(new HttpClient(base));
store.subscribe((state) => renderApp(container, state, store));
renderApp(container, store.state, store);
