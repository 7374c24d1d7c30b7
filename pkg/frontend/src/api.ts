// Typed client for the traffic-intelligence HTTP/SSE API.
// This is the only way the UI touches analysis state.

export interface Attachment {
  kind: 'image' | 'file' | 'link' | 'table' | string;
  uri: string;
  label: string;
}

export interface Reply {
  reply: string;
  outcome: 'ok' | 'no_api_call' | 'mismatch' | 'error_raise';
  matched_tool: string;
  attachments: Attachment[];
}

export interface TraceEvent {
  kind: 'thought' | 'action' | 'observation' | 'error';
  text: string;
  tool_name: string;
  timestamp: number;
}

export interface Hint {
  tool: string;
  text: string;
}

export interface ToolInfo {
  name: string;
  description: string;
  params: { name: string; kind: string; required: boolean; doc: string }[];
}

export interface TranscriptEntry {
  speaker: 'user' | 'agent';
  text: string;
}

export interface SessionSnapshot {
  session_id: string;
  transcript: TranscriptEntry[];
  trace: TraceEvent[];
  attachments?: Attachment[];
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    throw new Error(`${response.status} ${response.statusText}`);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(readonly base: string) {}

  private url(path: string): string {
    return this.base.replace(/\/$/, '') + path;
  }

  async createSession(): Promise<string> {
    const payload = await asJson<{ session_id: string }>(
      await fetch(this.url('/api/sessions'), { method: 'POST' }),
    );
    return payload.session_id;
  }

  async sendMessage(sessionId: string, text: string): Promise<Reply> {
    return asJson<Reply>(
      await fetch(this.url(`/api/sessions/${sessionId}/messages`), {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ text }),
      }),
    );
  }

  async getSession(sessionId: string): Promise<SessionSnapshot> {
    return asJson<SessionSnapshot>(await fetch(this.url(`/api/sessions/${sessionId}`)));
  }

  async getTools(): Promise<ToolInfo[]> {
    return asJson<ToolInfo[]>(await fetch(this.url('/api/tools')));
  }

  async getHints(): Promise<Hint[]> {
    return asJson<Hint[]>(await fetch(this.url('/api/hints')));
  }

  async fetchText(uri: string): Promise<string> {
    const response = await fetch(uri.startsWith('http') ? uri : this.url(uri));
    if (!response.ok) {
      throw new Error(`${response.status} fetching ${uri}`);
    }
    return response.text();
  }

  /**
   * Subscribe to the SSE trace channel. Events recorded before the
   * subscription are replayed first, then live ones follow. Returns when
   * the server closes (e.g. `limit` reached) or the signal aborts.
   */
  async streamTrace(
    sessionId: string,
    onEvent: (event: TraceEvent) => void,
    options: { limit?: number; signal?: AbortSignal } = {},
  ): Promise<void> {
    const query = options.limit ? `?limit=${options.limit}` : '';
    let response: Response;
    try {
      response = await fetch(this.url(`/api/sessions/${sessionId}/stream${query}`), {
        signal: options.signal,
      });
    } catch (error) {
      if ((error as Error).name === 'AbortError') return;
      throw error;
    }
    if (!response.ok || !response.body) {
      throw new Error(`stream failed: ${response.status}`);
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = '';
    try {
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        buffer += decoder.decode(value, { stream: true });
        let boundary = buffer.indexOf('\n\n');
        while (boundary !== -1) {
          const frame = buffer.slice(0, boundary);
          buffer = buffer.slice(boundary + 2);
          for (const line of frame.split('\n')) {
            if (line.startsWith('data: ')) {
              onEvent(JSON.parse(line.slice('data: '.length)) as TraceEvent);
            }
          }
          boundary = buffer.indexOf('\n\n');
        }
      }
    } catch (error) {
      if ((error as Error).name !== 'AbortError') throw error;
    } finally {
      reader.releaseLock();
    }
  }
}
