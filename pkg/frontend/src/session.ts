// Session controls: translate operator actions into wire messages. Every
// action is gated on connection state; when disconnected nothing is queued,
// the caller disables the controls instead.

import type { ClientMessage } from './wire.js';

export interface SessionSettings {
  probeFreqs: number[];
  duties: Record<string, number>; // freq label -> duty fraction
  smootherDepth: number;
  source: 'replay' | 'live';
}

export type ActionResult =
  | { ok: true; messages: ClientMessage[] }
  | { ok: false; reason: string };

const DISCONNECTED: ActionResult = {
  ok: false,
  reason: 'not connected to the detection daemon',
};

export class SessionControls {
  connected = false;
  running = false;
  settings: SessionSettings;

  constructor(settings?: Partial<SessionSettings>) {
    this.settings = {
      probeFreqs: [12, 15],
      duties: { '12': 0.4, '15': 0.5 },
      smootherDepth: 3,
      source: 'replay',
      ...settings,
    };
  }

  setConnected(connected: boolean): void {
    this.connected = connected;
    if (!connected) this.running = false;
  }

  selectFrequencies(freqs: number[], duties: Record<string, number>): ActionResult {
    if (freqs.length === 0) return { ok: false, reason: 'select at least one frequency' };
    this.settings.probeFreqs = [...freqs];
    this.settings.duties = { ...duties };
    if (!this.connected) return DISCONNECTED;
    return { ok: true, messages: [{ type: 'config' }] };
  }

  setSmootherDepth(depth: number): ActionResult {
    if (!Number.isInteger(depth) || depth < 1) {
      return { ok: false, reason: `smoother depth must be a positive integer, got ${depth}` };
    }
    this.settings.smootherDepth = depth;
    if (!this.connected) return DISCONNECTED;
    return { ok: true, messages: [{ type: 'config', smoother_depth: depth }] };
  }

  selectSource(source: 'replay' | 'live'): void {
    this.settings.source = source;
  }

  /** Start a trial: handshake, push settings, subscribe to events. */
  start(): ActionResult {
    if (!this.connected) return DISCONNECTED;
    if (this.running) return { ok: false, reason: 'a trial is already running' };
    this.running = true;
    return {
      ok: true,
      messages: [
        { type: 'hello' },
        { type: 'config', smoother_depth: this.settings.smootherDepth },
        { type: 'subscribe' },
      ],
    };
  }

  /** Stop the running trial; bye goes out after the last acknowledged batch. */
  stop(): ActionResult {
    if (!this.connected) return DISCONNECTED;
    if (!this.running) return { ok: false, reason: 'no trial is running' };
    this.running = false;
    return { ok: true, messages: [{ type: 'bye' }] };
  }
}
