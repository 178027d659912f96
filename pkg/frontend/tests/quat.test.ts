import { describe, expect, it } from 'vitest';

import {
  eulerToQuat, Quat, quatConjugate, quatFromAxisAngle, quatMultiply,
  quatNormalize, quatToAxisAngle, quatToEuler, rotationDelta,
} from '../src/quat';

const DEG = Math.PI / 180;

function expectClose(a: number[], b: number[], tol = 1e-12) {
  expect(a.length).toBe(b.length);
  a.forEach((v, i) => expect(Math.abs(v - b[i])).toBeLessThan(tol));
}

describe('quaternion algebra', () => {
  it('multiplies by identity', () => {
    const q: Quat = quatNormalize([0.9, 0.1, -0.3, 0.2]);
    expectClose(quatMultiply(q, [1, 0, 0, 0]), q);
    expectClose(quatMultiply([1, 0, 0, 0], q), q);
  });

  it('conjugate inverts a unit quaternion', () => {
    const q: Quat = quatNormalize([0.7, 0.4, -0.2, 0.5]);
    expectClose(quatMultiply(q, quatConjugate(q)), [1, 0, 0, 0]);
  });

  it('axis-angle round trip', () => {
    const aa: [number, number, number] = [0.3, -0.8, 0.25];
    expectClose(quatToAxisAngle(quatFromAxisAngle(aa)), aa);
  });

  it('zero rotation maps to identity and back', () => {
    expectClose(quatFromAxisAngle([0, 0, 0]), [1, 0, 0, 0]);
    expectClose(quatToAxisAngle([1, 0, 0, 0]), [0, 0, 0]);
  });

  it('normalization picks the w >= 0 representative', () => {
    const q = quatNormalize([-0.5, 0.5, 0.5, 0.5]);
    expect(q[0]).toBeGreaterThan(0);
  });
});

describe('euler view', () => {
  it('round trips within the gimbal guard', () => {
    const cases = [
      { yaw: 0.4, pitch: -0.7, roll: 1.1 },
      { yaw: -2.9, pitch: 1.2, roll: -0.1 },
      { yaw: 0, pitch: 0, roll: 0 },
      { yaw: 3.0, pitch: -1.3, roll: 2.8 },
    ];
    for (const e of cases) {
      const back = quatToEuler(eulerToQuat(e));
      expect(Math.abs(back.yaw - e.yaw)).toBeLessThan(1e-10);
      expect(Math.abs(back.pitch - e.pitch)).toBeLessThan(1e-10);
      expect(Math.abs(back.roll - e.roll)).toBeLessThan(1e-10);
    }
  });

  it('pure single-axis rotations map to single angles', () => {
    const e = quatToEuler(eulerToQuat({ yaw: 30 * DEG, pitch: 0, roll: 0 }));
    expect(e.yaw).toBeCloseTo(30 * DEG, 12);
    expect(e.pitch).toBeCloseTo(0, 12);
    expect(e.roll).toBeCloseTo(0, 12);
  });
});

describe('rotationDelta', () => {
  it('composes from back to to', () => {
    const from = eulerToQuat({ yaw: 0.2, pitch: -0.1, roll: 0.3 });
    const to = eulerToQuat({ yaw: -0.5, pitch: 0.4, roll: 0.0 });
    const delta = rotationDelta(from, to);
    const rebuilt = quatMultiply(quatFromAxisAngle(delta), from);
    expectClose(quatNormalize(rebuilt), quatNormalize(to), 1e-10);
  });

  it('is zero for identical poses', () => {
    const q = eulerToQuat({ yaw: 1.0, pitch: 0.2, roll: -0.4 });
    expectClose(rotationDelta(q, q), [0, 0, 0]);
  });
});
