import { describe, expect, it, vi } from 'vitest';

import { ApiClient, ApiError } from '../src/api';

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

describe('ApiClient', () => {
  it('fetches state from the versioned endpoint', async () => {
    const fetchFn = vi.fn().mockResolvedValue(jsonResponse({ seq: 3 }));
    const api = new ApiClient('http://svc:8099/', fetchFn);
    const state = await api.getState();
    expect(state.seq).toBe(3);
    expect(fetchFn).toHaveBeenCalledWith('http://svc:8099/v1/state');
  });

  it('posts edits as JSON', async () => {
    const fetchFn = vi.fn().mockResolvedValue(jsonResponse({ seq: 4, client_seq: 1 }));
    const api = new ApiClient('http://svc:8099', fetchFn);
    const state = await api.postEdit({ gaze: [0.1, 0, 0, 0], client_seq: 1 });
    expect(state.client_seq).toBe(1);
    const [url, init] = fetchFn.mock.calls[0];
    expect(url).toBe('http://svc:8099/v1/edit');
    expect(init.method).toBe('POST');
    expect(JSON.parse(init.body)).toEqual({ gaze: [0.1, 0, 0, 0], client_seq: 1 });
  });

  it('surfaces field-level validation errors', async () => {
    const fetchFn = vi.fn().mockResolvedValue(jsonResponse(
      { error: { field: 'gaze', message: 'expected 4 values' } }, 400));
    const api = new ApiClient('http://svc:8099', fetchFn);
    const err = await api.postEdit({ gaze: [1] }).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(400);
    expect(err.field).toBe('gaze');
    expect(err.message).toBe('expected 4 values');
  });

  it('reads the state sequence stamp off frame responses', async () => {
    const fetchFn = vi.fn().mockResolvedValue(new Response(
      new Uint8Array([137, 80, 78, 71]),
      { status: 200, headers: { 'X-State-Seq': '17' } }));
    const api = new ApiClient('http://svc:8099', fetchFn);
    const frame = await api.getFrame('output');
    expect(fetchFn).toHaveBeenCalledWith('http://svc:8099/v1/frame?mode=output');
    expect(frame.seq).toBe(17);
    expect(Array.from(frame.bytes)).toEqual([137, 80, 78, 71]);
  });

  it('maps missing weights to a plain error', async () => {
    const fetchFn = vi.fn().mockResolvedValue(jsonResponse(
      { error: { message: 'no network weights loaded' } }, 404));
    const api = new ApiClient('http://svc:8099', fetchFn);
    const err = await api.getFrame('output').catch((e) => e);
    expect(err.status).toBe(404);
    expect(err.field).toBeNull();
  });
});
