// Four-panel conversational UI, framework-free so the contract test can
// drive it straight against a jsdom document.
//
// Panels: prompt entry (top left), clickable hints (middle left), live
// thought/action trace (bottom left), reply + attachment history (right).

import { ApiClient, Attachment, Reply, TraceEvent } from './api.js';

export interface Panels {
  prompt: HTMLTextAreaElement;
  submit: HTMLButtonElement;
  clear: HTMLButtonElement;
  hints: HTMLElement;
  trace: HTMLElement;
  history: HTMLElement;
  banner: HTMLElement;
}

const OUTCOME_LABELS: Record<string, string> = {
  no_api_call: 'no_api_call — the agent answered without calling a tool',
  mismatch: 'mismatch — the wrong tool handled the request',
  error_raise: 'error_raise — the call failed or used bad inputs',
};

export function buildLayout(root: HTMLElement): Panels {
  root.innerHTML = `
    <div class="layout">
      <section class="left">
        <div class="panel panel-prompt">
          <h2>Prompt or question</h2>
          <textarea class="prompt-input" rows="3" placeholder="Ask about maps, demand, simulation, signals..."></textarea>
          <div class="prompt-buttons">
            <button class="submit-button" disabled>Submit</button>
            <button class="clear-button">Clear text</button>
          </div>
        </div>
        <div class="panel panel-hints">
          <h2>Hints of questions</h2>
          <div class="hints-list"></div>
        </div>
        <div class="panel panel-trace">
          <h2>Thought and action</h2>
          <div class="trace-list"></div>
        </div>
      </section>
      <section class="right">
        <div class="banner" hidden></div>
        <div class="panel panel-history">
          <h2>Response and chat history</h2>
          <div class="history-list"></div>
        </div>
      </section>
    </div>`;
  return {
    prompt: root.querySelector('.prompt-input') as HTMLTextAreaElement,
    submit: root.querySelector('.submit-button') as HTMLButtonElement,
    clear: root.querySelector('.clear-button') as HTMLButtonElement,
    hints: root.querySelector('.hints-list') as HTMLElement,
    trace: root.querySelector('.trace-list') as HTMLElement,
    history: root.querySelector('.history-list') as HTMLElement,
    banner: root.querySelector('.banner') as HTMLElement,
  };
}

export class UiSession {
  sessionId = '';
  pending = false;
  private seenTrace = new Set<number>();
  private streamAbort: AbortController | null = null;

  constructor(
    readonly api: ApiClient,
    readonly panels: Panels,
    readonly doc: Document,
  ) {}

  /** Create the backend session and populate the hints panel. */
  static async connect(api: ApiClient, panels: Panels, doc: Document): Promise<UiSession> {
    const session = new UiSession(api, panels, doc);
    try {
      session.sessionId = await api.createSession();
      const hints = await api.getHints();
      session.renderHints(hints.map((hint) => hint.text));
      session.hideBanner();
    } catch (error) {
      session.showBanner(`Cannot reach the analysis service: ${(error as Error).message}`);
      throw error;
    }
    session.wireControls();
    return session;
  }

  /** Rebuild transcript + trace from the server after a reload. */
  async resume(): Promise<void> {
    const snapshot = await this.api.getSession(this.sessionId);
    this.panels.history.innerHTML = '';
    this.panels.trace.innerHTML = '';
    this.seenTrace.clear();
    for (const entry of snapshot.transcript) {
      this.appendBubble(entry.speaker, entry.text);
    }
    for (const event of snapshot.trace) {
      this.renderTraceEvent(event);
    }
  }

  private wireControls(): void {
    this.panels.prompt.addEventListener('input', () => this.syncSubmitState());
    this.panels.clear.addEventListener('click', () => {
      this.panels.prompt.value = ''; // clears only the input box
      this.syncSubmitState();
    });
    this.panels.submit.addEventListener('click', () => {
      void this.send(this.panels.prompt.value);
    });
    this.syncSubmitState();
  }

  private syncSubmitState(): void {
    this.panels.submit.disabled = this.pending || !this.panels.prompt.value.trim();
  }

  renderHints(texts: string[]): void {
    this.panels.hints.innerHTML = '';
    for (const text of texts) {
      const button = this.doc.createElement('button');
      button.className = 'hint';
      button.textContent = text;
      button.addEventListener('click', () => {
        this.panels.prompt.value = text;
        this.syncSubmitState();
      });
      this.panels.hints.appendChild(button);
    }
  }

  /** One in-flight message at a time; trace streams in while pending. */
  async send(text: string): Promise<Reply> {
    if (!text.trim()) {
      throw new Error('empty message');
    }
    if (this.pending) {
      throw new Error('a message is already in flight');
    }
    this.pending = true;
    this.syncSubmitState();
    this.appendBubble('user', text);

    this.streamAbort = new AbortController();
    const streaming = this.api
      .streamTrace(this.sessionId, (event) => this.renderTraceEvent(event), {
        signal: this.streamAbort.signal,
      })
      .catch(() => this.markTraceGap());

    try {
      const reply = await this.api.sendMessage(this.sessionId, text);
      await this.drainTrace();
      this.renderReply(reply);
      this.hideBanner();
      return reply;
    } catch (error) {
      this.showBanner(`Request failed: ${(error as Error).message}`);
      throw error;
    } finally {
      this.streamAbort.abort();
      await streaming.catch(() => undefined);
      this.streamAbort = null;
      this.pending = false;
      this.panels.prompt.value = '';
      this.syncSubmitState();
    }
  }

  /** The SSE socket may lag the POST; pull the authoritative trace once. */
  private async drainTrace(): Promise<void> {
    try {
      const snapshot = await this.api.getSession(this.sessionId);
      for (const event of snapshot.trace) {
        this.renderTraceEvent(event);
      }
    } catch {
      this.markTraceGap();
    }
  }

  renderTraceEvent(event: TraceEvent): void {
    if (this.seenTrace.has(event.timestamp)) {
      return;
    }
    this.seenTrace.add(event.timestamp);
    const row = this.doc.createElement('div');
    row.className = `trace-row trace-${event.kind}`;
    if (event.kind === 'action') {
      const badge = this.doc.createElement('span');
      badge.className = 'tool-badge';
      badge.textContent = event.tool_name;
      row.appendChild(badge);
    }
    const body = this.doc.createElement('span');
    body.className = 'trace-text';
    body.textContent = shorten(event.text, 200);
    row.appendChild(body);
    this.panels.trace.appendChild(row);
  }

  private markTraceGap(): void {
    const row = this.doc.createElement('div');
    row.className = 'trace-row trace-gap';
    row.textContent = '— stream interrupted, events may be missing —';
    this.panels.trace.appendChild(row);
  }

  private appendBubble(speaker: 'user' | 'agent', text: string): HTMLElement {
    const bubble = this.doc.createElement('div');
    bubble.className = `bubble bubble-${speaker}`;
    bubble.textContent = text;
    this.panels.history.appendChild(bubble);
    return bubble;
  }

  renderReply(reply: Reply): void {
    if (reply.outcome !== 'ok') {
      const warning = this.doc.createElement('div');
      warning.className = `outcome-warning outcome-${reply.outcome}`;
      warning.textContent = OUTCOME_LABELS[reply.outcome] ?? reply.outcome;
      this.panels.history.appendChild(warning);
    }
    this.appendBubble('agent', reply.reply);
    for (const attachment of reply.attachments) {
      void this.renderAttachment(attachment);
    }
  }

  async renderAttachment(attachment: Attachment): Promise<HTMLElement> {
    const box = this.doc.createElement('div');
    box.className = `attachment attachment-${attachment.kind}`;
    if (attachment.kind === 'image' && attachment.uri.endsWith('.svg')) {
      try {
        box.innerHTML = await this.api.fetchText(attachment.uri);
      } catch {
        box.appendChild(this.downloadLink(attachment));
      }
    } else if (attachment.kind === 'link') {
      const anchor = this.doc.createElement('a');
      anchor.href = attachment.uri;
      anchor.target = '_blank';
      anchor.textContent = attachment.label || attachment.uri;
      box.appendChild(anchor);
    } else if (attachment.kind === 'table') {
      try {
        const rows = JSON.parse(await this.api.fetchText(attachment.uri)) as Record<
          string,
          { delta: number; winner: string }
        >;
        box.appendChild(this.renderTable(rows));
      } catch {
        box.appendChild(this.downloadLink(attachment));
      }
    } else if (attachment.kind === 'file') {
      const code = this.doc.createElement('code');
      code.className = 'file-path';
      code.textContent = `${attachment.label}: ${attachment.uri}`;
      box.appendChild(code);
      box.appendChild(this.downloadLink(attachment));
    } else {
      // Unknown kinds degrade to a plain download link.
      box.appendChild(this.downloadLink(attachment));
    }
    this.panels.history.appendChild(box);
    return box;
  }

  private renderTable(rows: Record<string, { delta: number; winner: string }>): HTMLElement {
    const table = this.doc.createElement('table');
    table.className = 'delta-table';
    const header = this.doc.createElement('tr');
    for (const title of ['metric', 'delta', 'winner']) {
      const cell = this.doc.createElement('th');
      cell.textContent = title;
      header.appendChild(cell);
    }
    table.appendChild(header);
    for (const [metric, entry] of Object.entries(rows)) {
      const row = this.doc.createElement('tr');
      for (const value of [metric, String(entry.delta), entry.winner]) {
        const cell = this.doc.createElement('td');
        cell.textContent = value;
        row.appendChild(cell);
      }
      table.appendChild(row);
    }
    return table;
  }

  private downloadLink(attachment: Attachment): HTMLElement {
    const anchor = this.doc.createElement('a');
    anchor.href = attachment.uri;
    anchor.download = '';
    anchor.className = 'download-link';
    anchor.textContent = `download ${attachment.label || attachment.kind}`;
    return anchor;
  }

  showBanner(message: string): void {
    this.panels.banner.textContent = `${message} — retrying may help.`;
    this.panels.banner.hidden = false;
  }

  hideBanner(): void {
    this.panels.banner.hidden = true;
  }
}

function shorten(text: string, limit: number): string {
  return text.length <= limit ? text : text.slice(0, limit - 1) + '…';
}
