// Live preview polling, independent of the edit stream.  The service stamps
// each PNG with the state sequence it was rendered from (X-State-Seq); the
// poller keeps frames monotonic in that stamp and flags the panel as stale
// whenever the displayed frame lags the last acknowledged state.

import type { ApiClient } from './api';
import type { FrameMode, FramePayload } from './types';

export interface PreviewView {
  showFrame(frame: FramePayload): void;
  setStale(stale: boolean): void;
  setError(failed: boolean): void;
}

export class PreviewPoller {
  private readonly api: ApiClient;
  private readonly view: PreviewView;
  mode: FrameMode;

  private displayedSeq = -1;
  private stateSeq = 0;
  private fetching = false;

  constructor(api: ApiClient, view: PreviewView, mode: FrameMode = 'conditioning') {
    this.api = api;
    this.view = view;
    this.mode = mode;
  }

  get currentSeq(): number {
    return this.displayedSeq;
  }

  // Called whenever the server acknowledges a new state.
  noteStateSeq(seq: number): void {
    this.stateSeq = Math.max(this.stateSeq, seq);
    this.view.setStale(this.displayedSeq < this.stateSeq);
  }

  setMode(mode: FrameMode): void {
    if (mode === this.mode) return;
    this.mode = mode;
    this.displayedSeq = -1;   // force the next fetched frame through
  }

  async poll(): Promise<void> {
    if (this.fetching) return;
    this.fetching = true;
    try {
      const frame = await this.api.getFrame(this.mode);
      // a slow response from an older state must not overwrite a newer frame
      if (frame.seq >= this.displayedSeq) {
        this.displayedSeq = frame.seq;
        this.view.showFrame(frame);
      }
      this.view.setError(false);
    } catch {
      this.view.setError(true);   // retain the last good frame
    } finally {
      this.fetching = false;
      this.view.setStale(this.displayedSeq < this.stateSeq);
    }
  }

  start(intervalMs: number): () => void {
    const id = setInterval(() => void this.poll(), intervalMs);
    void this.poll();
    return () => clearInterval(id);
  }
}
