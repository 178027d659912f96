// Wire types for the /v1/ editor service.

export interface WireParams {
  rotation: number[];     // unit quaternion, scalar-first (w, x, y, z)
  translation: number[];
  alpha: number[];
  beta: number[];
  delta: number[];
  gaze: number[];         // (left yaw, left pitch, right yaw, right pitch)
  sh_coeffs: number[];
}

export interface ServerState {
  seq: number;
  params: WireParams;
  bounds: {
    gaze: number;
    dims: number[];       // (n_alpha, n_beta, n_delta)
  };
  warnings: string[];
  client_seq?: number;
}

export interface ServiceMeta {
  version: string;
  resolution: number[];
  window_size: number;
  dims: number[];
  has_weights: boolean;
}

// Edit payloads mirror the server's EditDeltas: rotation is an axis-angle
// increment composed onto the current pose, translation/expression/gaze are
// additive, alpha replaces the coefficient vector outright.
export interface EditPayload {
  rotation?: number[];
  translation?: number[];
  expression?: number[];
  gaze?: number[];
  alpha?: number[];
  client_seq?: number;
}

export type FrameMode = 'conditioning' | 'output';

export interface FramePayload {
  bytes: Uint8Array;
  seq: number;            // X-State-Seq of the state that produced the image
}

export interface EulerAngles {
  yaw: number;
  pitch: number;
  roll: number;
}
