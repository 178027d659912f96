// Application wiring: connect to the service, build the control panel, and
// run the two preview panes (conditioning input and network output) with
// staleness badges driven by the acknowledged state sequence.

import { ApiClient } from './api';
import { EditCoalescer } from './coalescer';
import { ControlPanel } from './panel';
import { PreviewPoller, PreviewView } from './preview';
import type { FrameMode, FramePayload, ServerState } from './types';

const POLL_INTERVAL_MS = 250;

function imagePane(root: HTMLElement, title: string): PreviewView & { el: HTMLElement } {
  const pane = document.createElement('figure');
  pane.className = 'preview';
  const caption = document.createElement('figcaption');
  caption.textContent = title;
  const img = document.createElement('img');
  const badge = document.createElement('span');
  badge.className = 'badge';
  badge.hidden = true;
  pane.append(caption, img, badge);
  root.appendChild(pane);
  let url: string | null = null;
  return {
    el: pane,
    showFrame(frame: FramePayload) {
      if (url) URL.revokeObjectURL(url);
      url = URL.createObjectURL(new Blob([frame.bytes.buffer as ArrayBuffer],
                                         { type: 'image/png' }));
      img.src = url;
      caption.textContent = `${title} (${new Date().toLocaleTimeString()})`;
    },
    setStale(stale: boolean) {
      badge.hidden = !stale;
      badge.textContent = 'stale';
    },
    setError(failed: boolean) {
      if (failed) {
        badge.hidden = false;
        badge.textContent = 'fetch failed';
      }
    },
  };
}

export async function startApp(root: HTMLElement,
                               baseUrl = ''): Promise<void> {
  const api = new ApiClient(baseUrl);
  const controls = document.createElement('div');
  controls.className = 'controls';
  const previews = document.createElement('div');
  previews.className = 'previews';
  root.append(controls, previews);

  let meta;
  let state: ServerState;
  try {
    [meta, state] = await Promise.all([api.getMeta(), api.getState()]);
  } catch {
    const banner = document.createElement('div');
    banner.className = 'banner';
    banner.textContent = 'service unreachable';
    controls.appendChild(banner);
    return;
  }

  const condPoller = new PreviewPoller(
    api, imagePane(previews, 'conditioning'), 'conditioning');
  const pollers = [condPoller];
  if (meta.has_weights) {
    const outPane = imagePane(previews, 'output');
    const outPoller = new PreviewPoller(api, outPane, 'output');
    pollers.push(outPoller);

    const toggle = document.createElement('select');
    for (const mode of ['output', 'conditioning'] as FrameMode[]) {
      const opt = document.createElement('option');
      opt.value = mode;
      opt.textContent = mode;
      toggle.appendChild(opt);
    }
    toggle.addEventListener('change', () => {
      outPoller.setMode(toggle.value as FrameMode);
    });
    outPane.el.appendChild(toggle);
  }

  const onState = (s: ServerState) => {
    panel.applyState(s);
    panel.setConnected(true);
    for (const p of pollers) p.noteStateSeq(s.seq);
  };
  const coalescer = new EditCoalescer(api, {
    onState,
    onError: () => panel.setConnected(false),
  });
  const panel = new ControlPanel(controls, api, coalescer, state, meta);
  panel.onState = onState;

  for (const p of pollers) {
    p.noteStateSeq(state.seq);
    p.start(POLL_INTERVAL_MS);
  }
}
