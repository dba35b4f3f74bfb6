// Browser entry point: wires the socket client, the flicker loop and the
// feedback panel onto the DOM. All decision logic stays server-side; this
// file only draws.

import { ConsoleClient } from './client.js';
import { applyEvent, emptyPanel, type FeedbackPanelState } from './feedback.js';
import {
  makePatchView,
  refreshMismatch,
  renderFlicker,
  RefreshEstimator,
  type StimulusPatchView,
} from './flicker.js';
import { frameSchedule } from './schedule.js';
import { SessionControls } from './session.js';
import type { ServerInfo, ServerMessage } from './wire.js';

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el as T;
};

const panel: FeedbackPanelState = emptyPanel();
const controls = new SessionControls();
let serverInfo: ServerInfo | null = null;
let patches: StimulusPatchView[] = [];
const estimator = new RefreshEstimator();

function rebuildPatches(): void {
  const refresh = estimator.estimateHz() ?? 60;
  // schedules are vsync-locked: recompute against the measured refresh and
  // mark frequencies without an integer frame period unavailable
  patches = controls.settings.probeFreqs.map((freq) => {
    const duty = controls.settings.duties[String(freq)] ?? 0.5;
    const result = frameSchedule(freq, Math.round(refresh), duty);
    return makePatchView(freq, result.available ? result.schedule : null);
  });
}

function handleMessage(msg: ServerMessage): void {
  if (msg.type === 'hello' || msg.type === 'config') {
    serverInfo = msg;
    controls.settings.probeFreqs = msg.probe_freqs;
    rebuildPatches();
  }
  applyEvent(panel, msg);
  drawPanel();
}

const client = new ConsoleClient(handleMessage, (connected) => {
  controls.setConnected(connected);
  panel.connection = connected ? 'connected' : 'disconnected';
  $('status').textContent = connected ? 'connected' : 'disconnected';
  ($('start') as HTMLButtonElement).disabled = !connected;
  ($('stop') as HTMLButtonElement).disabled = !connected;
  drawPanel();
});

// --- flicker loop ----------------------------------------------------------

let frameTick = 0;

function flickerLoop(timestampMs: number): void {
  estimator.tick(timestampMs);
  const container = $('patches');
  patches.forEach((view, i) => {
    const el = container.children[i] as HTMLElement | undefined;
    if (el === undefined) return;
    const draw = renderFlicker(view, frameTick);
    if (draw.ok) {
      el.style.width = el.style.height = `${draw.sizePx}px`;
      el.style.background = draw.visible ? draw.color : '#000000';
      el.dataset.error = '';
    } else {
      el.style.background = '#402020';
      el.dataset.error = draw.reason;
    }
  });
  const measured = estimator.estimateHz();
  const configured = patches[0]?.schedule?.refreshHz;
  const warning =
    measured !== null && configured !== undefined
      ? refreshMismatch(measured, configured)
      : null;
  $('refresh-warning').textContent = warning ?? '';
  frameTick += 1;
  requestAnimationFrame(flickerLoop);
}

// --- feedback panel ---------------------------------------------------------

const TRACE_COLORS = ['#4aa3ff', '#ff6a4a', '#62d26f', '#d8c24a'];

function drawPanel(): void {
  const canvas = $('traces') as HTMLCanvasElement;
  const ctx = canvas.getContext('2d');
  if (ctx === null) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const freqs = [...panel.series.keys()].sort((a, b) => Number(a) - Number(b));
  let maxT = 1;
  for (const trace of panel.series.values()) {
    for (const p of trace) maxT = Math.max(maxT, p.value);
  }
  freqs.forEach((freq, i) => {
    const trace = panel.series.get(freq)!;
    ctx.strokeStyle = TRACE_COLORS[i % TRACE_COLORS.length]!;
    ctx.beginPath();
    trace.forEach((p, j) => {
      const x = (j / Math.max(trace.length - 1, 1)) * canvas.width;
      const y = canvas.height - (p.value / maxT) * (canvas.height - 4) - 2;
      j === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    });
    ctx.stroke();
  });
  ctx.fillStyle = '#888';
  panel.markers.forEach((m) => ctx.fillText(`! ${m.reason}`, 4, 12));

  const decisionEl = $('decision');
  if (panel.lastDecision === null) {
    decisionEl.textContent = 'no decision yet';
    decisionEl.className = 'empty';
  } else if (panel.lastDecision.undecided) {
    decisionEl.textContent = 'undecided';
    decisionEl.className = 'undecided';
  } else {
    const margin =
      panel.lastDecision.margin !== null
        ? ` (margin ${panel.lastDecision.margin.toFixed(2)})`
        : '';
    decisionEl.textContent = `${panel.lastDecision.freq} Hz${margin}`;
    decisionEl.className = 'decided';
  }
}

// --- controls ----------------------------------------------------------------

function sendOrReport(result: ReturnType<SessionControls['start']>): void {
  if (!result.ok) {
    $('status').textContent = result.reason;
    return;
  }
  if (!client.send(result.messages)) $('status').textContent = 'send failed';
}

export function boot(): void {
  $('connect').addEventListener('click', () => {
    const url = ($('server-url') as HTMLInputElement).value;
    client.connect(url);
  });
  $('start').addEventListener('click', () => sendOrReport(controls.start()));
  $('stop').addEventListener('click', () => sendOrReport(controls.stop()));
  $('depth').addEventListener('change', (ev) => {
    const depth = Number((ev.target as HTMLInputElement).value);
    sendOrReport(controls.setSmootherDepth(depth));
  });
  rebuildPatches();
  requestAnimationFrame(flickerLoop);
}

if (typeof document !== 'undefined' && document.readyState !== 'loading') {
  boot();
} else if (typeof document !== 'undefined') {
  document.addEventListener('DOMContentLoaded', boot);
}
