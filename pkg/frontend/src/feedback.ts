// Feedback panel state: a pure fold over server events. T traces come from
// `feature` events, the decision indicator only ever from `decision` events
// (the console never classifies client-side), and gap/error events become
// timeline markers.

import type { ServerMessage } from './wire.js';

export interface TracePoint {
  windowIndex: number;
  endCounter: number;
  value: number;
}

export interface TimelineMarker {
  endCounter: number | null;
  reason: string;
}

export interface Decision {
  freq: number | null; // null while undecided
  undecided: boolean;
  windowIndex: number;
  margin: number | null; // leader T minus runner-up T of the same window
}

export type ConnectionStatus = 'disconnected' | 'connecting' | 'connected';

export interface FeedbackPanelState {
  series: Map<string, TracePoint[]>;
  lastDecision: Decision | null;
  markers: TimelineMarker[];
  connection: ConnectionStatus;
  maxPoints: number;
}

export function emptyPanel(maxPoints = 512): FeedbackPanelState {
  return {
    series: new Map(),
    lastDecision: null,
    markers: [],
    connection: 'disconnected',
    maxPoints,
  };
}

/** Fold one server event into the panel state (mutates and returns it). */
export function applyEvent(
  state: FeedbackPanelState,
  msg: ServerMessage,
): FeedbackPanelState {
  switch (msg.type) {
    case 'feature': {
      for (const [freq, value] of Object.entries(msg.t_values)) {
        let trace = state.series.get(freq);
        if (trace === undefined) {
          trace = [];
          state.series.set(freq, trace);
        }
        trace.push({ windowIndex: msg.window_index, endCounter: msg.end_counter, value });
        // keep the UI responsive under event bursts
        if (trace.length > state.maxPoints) {
          trace.splice(0, trace.length - state.maxPoints);
        }
      }
      break;
    }
    case 'decision': {
      state.lastDecision = {
        freq: msg.freq,
        undecided: msg.undecided,
        windowIndex: msg.window_index,
        margin: decisionMargin(state, msg.window_index),
      };
      break;
    }
    case 'error': {
      state.markers.push({
        endCounter: typeof msg.actual === 'number' ? msg.actual : null,
        reason: msg.reason,
      });
      if (state.markers.length > state.maxPoints) {
        state.markers.splice(0, state.markers.length - state.maxPoints);
      }
      break;
    }
    case 'bye':
      state.connection = 'disconnected';
      break;
    case 'hello':
    case 'config':
      state.connection = 'connected';
      break;
  }
  return state;
}

/** Leader-minus-runner-up T for the given window, from the stored traces. */
function decisionMargin(
  state: FeedbackPanelState,
  windowIndex: number,
): number | null {
  const values: number[] = [];
  for (const trace of state.series.values()) {
    const point = trace.findLast((p) => p.windowIndex === windowIndex);
    if (point !== undefined) values.push(point.value);
  }
  if (values.length < 2) return null;
  values.sort((a, b) => b - a);
  return values[0]! - values[1]!;
}
