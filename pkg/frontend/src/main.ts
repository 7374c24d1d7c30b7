// Browser bootstrap: point the client at the service and wire the panels.

import { ApiClient } from './api.js';
import { buildLayout, UiSession } from './ui.js';

const DEFAULT_BASE = 'http://127.0.0.1:8716';

async function boot(): Promise<void> {
  const root = document.getElementById('app');
  if (!root) {
    throw new Error('missing #app element');
  }
  const base = new URLSearchParams(window.location.search).get('api') ?? DEFAULT_BASE;
  const panels = buildLayout(root);
  try {
    await UiSession.connect(new ApiClient(base), panels, document);
  } catch {
    const retry = document.createElement('button');
    retry.textContent = 'Retry connection';
    retry.addEventListener('click', () => void boot());
    panels.banner.appendChild(retry);
  }
}

void boot();
