// Contract test against a real service instance running offline.
//
// Spawns the backend, connects a UiSession into a jsdom document, and
// checks the rendered panels: hints (one per catalog tool), live
// thought/action rows, inline SVG attachments, and labeled warnings for
// abnormal outcomes.

import { ChildProcess, spawn } from 'node:child_process';
import { mkdtempSync } from 'node:fs';
import { createServer } from 'node:net';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { buildLayout, Panels, UiSession } from '../src/ui.js';

let server: ChildProcess;
let base: string;
let api: ApiClient;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once('error', reject);
    probe.listen(0, '127.0.0.1', () => {
      const address = probe.address();
      if (address && typeof address === 'object') {
        const port = address.port;
        probe.close(() => resolve(port));
      } else {
        reject(new Error('no port'));
      }
    });
  });
}

async function waitForService(url: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const response = await fetch(url);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      throw new Error(`service at ${url} did not come up`);
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
}

beforeAll(async () => {
  const port = await freePort();
  const workspace = mkdtempSync(join(tmpdir(), 'openti-ui-'));
  base = `http://127.0.0.1:${port}`;
  server = spawn(
    'python3',
    ['-m', 'openti.cli', 'serve', '--offline', '--port', String(port), '--workspace', workspace],
    { env: { ...process.env, OPENTI_OFFLINE: '1' }, stdio: 'inherit' },
  );
  await waitForService(`${base}/api/tools`);
  api = new ApiClient(base);
});

afterAll(() => {
  server?.kill('SIGTERM');
});

function freshPanels(): Panels {
  document.body.innerHTML = '<div id="app"></div>';
  return buildLayout(document.getElementById('app') as HTMLElement);
}

describe('ui contract against the live service', () => {
  it('lists one hint per catalog tool on connect', async () => {
    const panels = freshPanels();
    await UiSession.connect(api, panels, document);
    const tools = await api.getTools();
    const hints = panels.hints.querySelectorAll('.hint');
    expect(tools.length).toBeGreaterThanOrEqual(12);
    expect(hints.length).toBe(tools.length);
    for (const hint of hints) {
      expect(hint.textContent?.length).toBeGreaterThan(0);
    }
  });

  it('renders thought rows, an action badge and an inline svg for a map request', async () => {
    const panels = freshPanels();
    const session = await UiSession.connect(api, panels, document);
    const reply = await session.send('Show the map of Arizona State University');

    expect(reply.outcome).toBe('ok');
    const thoughts = panels.trace.querySelectorAll('.trace-thought');
    expect(thoughts.length).toBeGreaterThanOrEqual(1);
    const badges = panels.trace.querySelectorAll('.trace-action .tool-badge');
    expect(badges.length).toBeGreaterThanOrEqual(1);
    expect(badges[0].textContent).toBe('showOnMap');

    // attachments render asynchronously; poll the history panel briefly
    for (let i = 0; i < 40 && !panels.history.querySelector('.attachment svg'); i++) {
      await new Promise((resolve) => setTimeout(resolve, 100));
    }
    const svg = panels.history.querySelector('.attachment svg');
    expect(svg, 'inline svg attachment').not.toBeNull();
    expect(panels.history.querySelectorAll('.bubble-user').length).toBe(1);
    expect(panels.history.querySelectorAll('.bubble-agent').length).toBe(1);
  });

  it('labels abnormal outcomes as warnings', async () => {
    const panels = freshPanels();
    const session = await UiSession.connect(api, panels, document);
    const reply = await session.send('stress test');
    expect(reply.outcome).toBe('mismatch');
    const warning = panels.history.querySelector('.outcome-warning');
    expect(warning).not.toBeNull();
    expect(warning?.textContent).toContain('mismatch');
    expect(warning?.className).toContain('outcome-mismatch');
  });

  it('hint click fills the prompt and enables submit', async () => {
    const panels = freshPanels();
    await UiSession.connect(api, panels, document);
    const hint = panels.hints.querySelector('.hint') as HTMLButtonElement;
    hint.click();
    expect(panels.prompt.value.length).toBeGreaterThan(0);
    expect(panels.submit.disabled).toBe(false);
    panels.clear.click();
    expect(panels.prompt.value).toBe('');
    expect(panels.submit.disabled).toBe(true);
  });

  it('resume rebuilds the transcript from the server', async () => {
    const panels = freshPanels();
    const session = await UiSession.connect(api, panels, document);
    await session.send('where is Arizona State University?');
    panels.history.innerHTML = '';
    panels.trace.innerHTML = '';
    await session.resume();
    expect(panels.history.querySelectorAll('.bubble').length).toBeGreaterThanOrEqual(2);
    expect(panels.trace.querySelectorAll('.trace-row').length).toBeGreaterThanOrEqual(2);
  });

  it('shows a banner instead of crashing when the service is down', async () => {
    const panels = freshPanels();
    const deadApi = new ApiClient('http://127.0.0.1:9');
    await expect(UiSession.connect(deadApi, panels, document)).rejects.toThrow();
    expect(panels.banner.hidden).toBe(false);
    expect(panels.banner.textContent).toContain('Cannot reach');
  });

  it('unknown attachment kinds degrade to download links', async () => {
    const panels = freshPanels();
    const session = await UiSession.connect(api, panels, document);
    const box = await session.renderAttachment({
      kind: 'hologram',
      uri: '/api/artifacts/none/none.bin',
      label: 'mystery',
    });
    const link = box.querySelector('a.download-link');
    expect(link).not.toBeNull();
    expect(link?.textContent).toContain('mystery');
  });
});
