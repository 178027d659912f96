// Thin typed client for the /v1/ editor service.  The fetch implementation
// is injectable so tests can run without a browser or a live server.

import type {
  EditPayload, FrameMode, FramePayload, ServerState, ServiceMeta,
} from './types';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;
  readonly field: string | null;

  constructor(status: number, message: string, field: string | null = null) {
    super(message);
    this.status = status;
    this.field = field;
  }
}

async function raiseFor(resp: Response): Promise<never> {
  let field: string | null = null;
  let message = `request failed with status ${resp.status}`;
  try {
    const body = await resp.json();
    if (body?.error) {
      field = body.error.field ?? null;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the generic message
  }
  throw new ApiError(resp.status, message, field);
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/$/, '');
    this.fetchFn = fetchFn ?? ((url, init) => globalThis.fetch(url, init));
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(`${this.base}${path}`);
    if (!resp.ok) await raiseFor(resp);
    return resp.json() as Promise<T>;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchFn(`${this.base}${path}`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (!resp.ok) await raiseFor(resp);
    return resp.json() as Promise<T>;
  }

  getState(): Promise<ServerState> {
    return this.getJson('/v1/state');
  }

  getMeta(): Promise<ServiceMeta> {
    return this.getJson('/v1/meta');
  }

  postEdit(payload: EditPayload): Promise<ServerState> {
    return this.postJson('/v1/edit', payload);
  }

  postReset(): Promise<ServerState> {
    return this.postJson('/v1/reset', {});
  }

  async getFrame(mode: FrameMode): Promise<FramePayload> {
    const resp = await this.fetchFn(`${this.base}/v1/frame?mode=${mode}`);
    if (!resp.ok) await raiseFor(resp);
    const seq = Number(resp.headers.get('X-State-Seq') ?? '-1');
    const bytes = new Uint8Array(await resp.arrayBuffer());
    return { bytes, seq };
  }
}
