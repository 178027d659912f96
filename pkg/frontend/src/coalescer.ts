// Edit stream with coalescing.  Slider drags fire far faster than we want to
// hit the service, so deltas accumulate locally and flush at most once per
// interval with a single request in flight.  Each flush carries a client
// sequence number; a retry after a network failure resends the identical
// payload, so the stream stays idempotent under retry.

import type { ApiClient } from './api';
import type { EditPayload, ServerState } from './types';
import { quatFromAxisAngle, quatMultiply, quatToAxisAngle, Quat } from './quat';

export const MAX_EDIT_HZ = 30;

export interface CoalescerOptions {
  minIntervalMs?: number;
  maxRetries?: number;
  onState?: (state: ServerState) => void;
  onError?: (err: unknown) => void;
}

function addInto(target: EditPayload, key: 'translation' | 'expression' | 'gaze',
                 values: number[]): void {
  const prev = target[key];
  if (prev === undefined) {
    target[key] = values.slice();
  } else {
    if (prev.length !== values.length) throw new Error(`${key} length changed mid-drag`);
    target[key] = prev.map((v, i) => v + values[i]);
  }
}

export class EditCoalescer {
  private readonly api: ApiClient;
  private readonly minInterval: number;
  private readonly maxRetries: number;
  private readonly onState?: (state: ServerState) => void;
  private readonly onError?: (err: unknown) => void;

  private pending: EditPayload | null = null;
  private inFlight = false;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private lastSendMs = -Infinity;
  private clientSeq = 0;

  constructor(api: ApiClient, opts: CoalescerOptions = {}) {
    this.api = api;
    this.minInterval = opts.minIntervalMs ?? 1000 / MAX_EDIT_HZ;
    this.maxRetries = opts.maxRetries ?? 2;
    this.onState = opts.onState;
    this.onError = opts.onError;
  }

  get hasPending(): boolean {
    return this.pending !== null || this.inFlight;
  }

  // Merge a delta into the pending payload.  Rotation increments compose as
  // quaternions, additive components sum, alpha keeps the latest replacement.
  push(delta: EditPayload): void {
    const p = this.pending ?? {};
    if (delta.rotation) {
      if (p.rotation) {
        const combined = quatMultiply(
          quatFromAxisAngle(delta.rotation as [number, number, number]),
          quatFromAxisAngle(p.rotation as [number, number, number]));
        p.rotation = quatToAxisAngle(combined as Quat);
      } else {
        p.rotation = delta.rotation.slice();
      }
    }
    if (delta.translation) addInto(p, 'translation', delta.translation);
    if (delta.expression) addInto(p, 'expression', delta.expression);
    if (delta.gaze) addInto(p, 'gaze', delta.gaze);
    if (delta.alpha) p.alpha = delta.alpha.slice();
    this.pending = p;
    this.schedule();
  }

  private schedule(): void {
    if (this.inFlight || this.timer !== null || this.pending === null) return;
    const wait = Math.max(0, this.lastSendMs + this.minInterval - Date.now());
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.flush();
    }, wait);
  }

  private async flush(): Promise<void> {
    if (this.inFlight || this.pending === null) return;
    const payload: EditPayload = { ...this.pending, client_seq: ++this.clientSeq };
    this.pending = null;
    this.inFlight = true;
    this.lastSendMs = Date.now();
    try {
      const state = await this.send(payload);
      this.onState?.(state);
    } catch (err) {
      this.onError?.(err);
    } finally {
      this.inFlight = false;
      this.schedule();
    }
  }

  private async send(payload: EditPayload): Promise<ServerState> {
    let lastErr: unknown;
    for (let attempt = 0; attempt <= this.maxRetries; attempt++) {
      try {
        return await this.api.postEdit(payload);   // same client_seq on retry
      } catch (err) {
        lastErr = err;
      }
    }
    throw lastErr;
  }
}
