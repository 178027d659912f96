// Quaternion helpers matching the service's scalar-first (w, x, y, z)
// convention.  The quaternion stays the wire truth; Euler angles exist only
// for the sliders, as yaw-pitch-roll about Y, X, Z (R = Ry Rx Rz).

import type { EulerAngles } from './types';

export type Quat = [number, number, number, number];

export function quatMultiply(a: Quat, b: Quat): Quat {
  const [w1, x1, y1, z1] = a;
  const [w2, x2, y2, z2] = b;
  return [
    w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
    w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
    w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
    w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
  ];
}

export function quatConjugate(q: Quat): Quat {
  return [q[0], -q[1], -q[2], -q[3]];
}

export function quatNormalize(q: Quat): Quat {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  if (n === 0) throw new Error('cannot normalize zero quaternion');
  const s = q[0] < 0 ? -1 / n : 1 / n;   // canonical sign: w >= 0
  return [q[0] * s, q[1] * s, q[2] * s, q[3] * s];
}

export function quatFromAxisAngle(aa: [number, number, number]): Quat {
  const angle = Math.hypot(aa[0], aa[1], aa[2]);
  if (angle < 1e-12) return [1, 0, 0, 0];
  const s = Math.sin(angle / 2) / angle;
  return [Math.cos(angle / 2), aa[0] * s, aa[1] * s, aa[2] * s];
}

export function quatToAxisAngle(q: Quat): [number, number, number] {
  const [w, x, y, z] = quatNormalize(q);
  const sin = Math.hypot(x, y, z);
  if (sin < 1e-12) return [0, 0, 0];
  const angle = 2 * Math.atan2(sin, w);
  return [(x / sin) * angle, (y / sin) * angle, (z / sin) * angle];
}

export function eulerToQuat(e: EulerAngles): Quat {
  const qy: Quat = [Math.cos(e.yaw / 2), 0, Math.sin(e.yaw / 2), 0];
  const qx: Quat = [Math.cos(e.pitch / 2), Math.sin(e.pitch / 2), 0, 0];
  const qz: Quat = [Math.cos(e.roll / 2), 0, 0, Math.sin(e.roll / 2)];
  return quatNormalize(quatMultiply(qy, quatMultiply(qx, qz)));
}

export function quatToEuler(q: Quat): EulerAngles {
  const [w, x, y, z] = quatNormalize(q);
  // rotation matrix entries needed for the Ry Rx Rz factorization
  const m02 = 2 * (x * z + w * y);
  const m12 = 2 * (y * z - w * x);
  const m22 = 1 - 2 * (x * x + y * y);
  const m10 = 2 * (x * y + w * z);
  const m11 = 1 - 2 * (x * x + z * z);
  const pitch = Math.asin(Math.max(-1, Math.min(1, -m12)));
  return { yaw: Math.atan2(m02, m22), pitch, roll: Math.atan2(m10, m11) };
}

// Axis-angle increment that takes `from` to the pose described by `to`;
// this is what the /edit endpoint composes onto the server state.
export function rotationDelta(from: Quat, to: Quat): [number, number, number] {
  return quatToAxisAngle(quatMultiply(to, quatConjugate(from)));
}
