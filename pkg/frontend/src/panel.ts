// Control panel: grouped sliders mirroring the server's parameter state.
// The panel never shows optimistic values; sliders re-sync from every
// acknowledged server state, and user input only emits deltas.

import type { ApiClient } from './api';
import type { EditCoalescer } from './coalescer';
import type { ServerState, ServiceMeta, WireParams } from './types';
import { eulerToQuat, quatToEuler, rotationDelta, Quat } from './quat';

export const PRIMARY_EXPRESSION_COUNT = 8;
export const PITCH_LIMIT_DEG = 80;   // gimbal guard for the Euler view

const DEG = Math.PI / 180;

interface SliderSpec {
  label: string;
  min: number;
  max: number;
  step: number;
  read: (p: WireParams) => number;
  emit: (value: number, ack: WireParams) => void;
}

export class ControlPanel {
  private readonly api: ApiClient;
  private readonly coalescer: EditCoalescer;
  private readonly root: HTMLElement;
  private readonly banner: HTMLElement;
  private readonly sliders: { input: HTMLInputElement; spec: SliderSpec }[] = [];

  private ack: ServerState;
  private initial: WireParams;
  onState?: (state: ServerState) => void;

  constructor(root: HTMLElement, api: ApiClient, coalescer: EditCoalescer,
              state: ServerState, meta: ServiceMeta) {
    this.root = root;
    this.api = api;
    this.coalescer = coalescer;
    this.ack = state;
    this.initial = structuredClone(state.params);

    this.banner = document.createElement('div');
    this.banner.className = 'banner';
    this.banner.hidden = true;
    this.banner.textContent = 'service unreachable';
    root.appendChild(this.banner);

    this.buildPose();
    this.buildExpression(meta.dims[2]);
    this.buildGaze(state.bounds.gaze);
    this.buildIdentity(meta.dims[0]);
    this.buildMasterReset();
    this.applyState(state);
  }

  // --- construction -------------------------------------------------------

  private group(title: string, open = true): [HTMLElement, HTMLElement] {
    const details = document.createElement('details');
    details.open = open;
    details.className = 'group';
    const summary = document.createElement('summary');
    summary.textContent = title;
    details.appendChild(summary);
    const body = document.createElement('div');
    details.appendChild(body);
    this.root.appendChild(details);
    return [details, body];
  }

  private addSlider(parent: HTMLElement, spec: SliderSpec): void {
    const row = document.createElement('label');
    row.className = 'slider-row';
    row.textContent = spec.label;
    const input = document.createElement('input');
    input.type = 'range';
    input.min = String(spec.min);
    input.max = String(spec.max);
    input.step = String(spec.step);
    input.addEventListener('input', () => {
      spec.emit(Number(input.value), this.ack.params);
    });
    row.appendChild(input);
    parent.appendChild(row);
    this.sliders.push({ input, spec });
  }

  private addGroupReset(parent: HTMLElement, label: string,
                        emit: () => void): void {
    const btn = document.createElement('button');
    btn.textContent = label;
    btn.addEventListener('click', emit);
    parent.appendChild(btn);
  }

  // Desired Euler pose from the three pose sliders, clamped at the guard.
  private desiredEuler(): { yaw: number; pitch: number; roll: number } {
    const get = (label: string) => Number(
      this.sliders.find((s) => s.spec.label === label)!.input.value);
    const clamp = Math.max(-PITCH_LIMIT_DEG, Math.min(PITCH_LIMIT_DEG, get('pitch')));
    return { yaw: get('yaw') * DEG, pitch: clamp * DEG, roll: get('roll') * DEG };
  }

  private emitRotation(): void {
    const target = eulerToQuat(this.desiredEuler());
    const delta = rotationDelta(this.ack.params.rotation as Quat, target);
    if (delta.some((v) => v !== 0)) this.coalescer.push({ rotation: delta });
  }

  private buildPose(): void {
    const [, body] = this.group('pose');
    const angles: ('yaw' | 'pitch' | 'roll')[] = ['yaw', 'pitch', 'roll'];
    for (const name of angles) {
      const limit = name === 'pitch' ? PITCH_LIMIT_DEG : 180;
      this.addSlider(body, {
        label: name, min: -limit, max: limit, step: 0.5,
        read: (p) => quatToEuler(p.rotation as Quat)[name] / DEG,
        emit: () => this.emitRotation(),
      });
    }
    ['tx', 'ty', 'tz'].forEach((name, axis) => {
      this.addSlider(body, {
        label: name, min: -2, max: 2, step: 0.01,
        read: (p) => p.translation[axis],
        emit: (value, ack) => {
          const delta = [0, 0, 0];
          delta[axis] = value - ack.translation[axis];
          if (delta[axis] !== 0) this.coalescer.push({ translation: delta });
        },
      });
    });
    this.addGroupReset(body, 'reset pose', () => {
      this.coalescer.push({
        rotation: rotationDelta(this.ack.params.rotation as Quat,
                                this.initial.rotation as Quat),
        translation: this.initial.translation.map(
          (v, i) => v - this.ack.params.translation[i]),
      });
    });
  }

  private expressionSlider(parent: HTMLElement, index: number, dim: number): void {
    this.addSlider(parent, {
      label: `expr ${index}`, min: -3, max: 3, step: 0.01,
      read: (p) => p.delta[index],
      emit: (value, ack) => {
        const delta = new Array(dim).fill(0);
        delta[index] = value - ack.delta[index];
        if (delta[index] !== 0) this.coalescer.push({ expression: delta });
      },
    });
  }

  private buildExpression(dim: number): void {
    const [, body] = this.group('expression');
    const primary = Math.min(PRIMARY_EXPRESSION_COUNT, dim);
    for (let i = 0; i < primary; i++) this.expressionSlider(body, i, dim);
    if (dim > primary) {
      const [, drawer] = this.group('more expression dimensions', false);
      body.appendChild(drawer.parentElement!);
      for (let i = primary; i < dim; i++) this.expressionSlider(drawer, i, dim);
    }
    this.addGroupReset(body, 'reset expression', () => {
      this.coalescer.push({
        expression: this.initial.delta.map((v, i) => v - this.ack.params.delta[i]),
      });
    });
  }

  private buildGaze(bound: number): void {
    const [, body] = this.group('gaze');
    ['left yaw', 'left pitch', 'right yaw', 'right pitch'].forEach((name, i) => {
      this.addSlider(body, {
        label: name, min: -bound, max: bound, step: 0.01,
        read: (p) => p.gaze[i],
        emit: (value, ack) => {
          const delta = [0, 0, 0, 0];
          delta[i] = value - ack.gaze[i];
          if (delta[i] !== 0) this.coalescer.push({ gaze: delta });
        },
      });
    });
    this.addGroupReset(body, 'reset gaze', () => {
      this.coalescer.push({
        gaze: this.initial.gaze.map((v, i) => v - this.ack.params.gaze[i]),
      });
    });
  }

  private buildIdentity(dim: number): void {
    const [, body] = this.group('identity', false);
    for (let i = 0; i < dim; i++) {
      this.addSlider(body, {
        label: `alpha ${i}`, min: -3, max: 3, step: 0.01,
        read: (p) => p.alpha[i],
        emit: (value, ack) => {
          const alpha = ack.alpha.slice();   // replacement semantics
          alpha[i] = value;
          this.coalescer.push({ alpha });
        },
      });
    }
    this.addGroupReset(body, 'reset identity', () => {
      this.coalescer.push({ alpha: this.initial.alpha.slice() });
    });
  }

  private buildMasterReset(): void {
    const btn = document.createElement('button');
    btn.className = 'master-reset';
    btn.textContent = 'reset all';
    btn.addEventListener('click', () => {
      void this.api.postReset().then((state) => {
        this.applyState(state);
        this.onState?.(state);
      });
    });
    this.root.appendChild(btn);
  }

  // --- state sync ---------------------------------------------------------

  applyState(state: ServerState): void {
    this.ack = state;
    for (const { input, spec } of this.sliders) {
      input.value = String(spec.read(state.params));
    }
  }

  get lastAck(): ServerState {
    return this.ack;
  }

  setConnected(connected: boolean): void {
    this.banner.hidden = connected;
    for (const { input } of this.sliders) input.disabled = !connected;
    for (const btn of this.root.querySelectorAll('button')) {
      (btn as HTMLButtonElement).disabled = !connected;
    }
  }
}
