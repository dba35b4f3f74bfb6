// Wire schema shared with the streamd daemon: newline-delimited JSON objects
// with a `type` discriminator. The console never computes features itself;
// it only renders what arrives on this channel.

export interface ServerInfo {
  type: 'hello' | 'config';
  server?: string;
  fs: number;
  probe_freqs: number[];
  window_s: number;
  hop_s: number;
  smoother_depth: number;
}

export interface FeatureEvent {
  type: 'feature';
  window_index: number;
  end_counter: number;
  t_values: Record<string, number>;
}

export interface DecisionEvent {
  type: 'decision';
  window_index: number;
  end_counter: number;
  freq: number | null;
  undecided: boolean;
}

export interface ErrorEvent {
  type: 'error';
  reason: string;
  expected?: number;
  actual?: number;
  resync?: boolean;
}

export interface ByeMessage {
  type: 'bye';
}

export type ServerMessage =
  | ServerInfo
  | FeatureEvent
  | DecisionEvent
  | ErrorEvent
  | ByeMessage;

// Client -> server.
export interface HelloMessage {
  type: 'hello';
}

export interface ConfigRequest {
  type: 'config';
  smoother_depth?: number;
}

export interface SubscribeMessage {
  type: 'subscribe';
}

export interface SamplesMessage {
  type: 'samples';
  counter: number;
  values: number[];
}

export type ClientMessage =
  | HelloMessage
  | ConfigRequest
  | SubscribeMessage
  | SamplesMessage
  | ByeMessage;

const isNum = (v: unknown): v is number => typeof v === 'number' && isFinite(v);

function isTValues(v: unknown): v is Record<string, number> {
  if (typeof v !== 'object' || v === null || Array.isArray(v)) return false;
  return Object.values(v).every(isNum);
}

/**
 * Parse one raw wire line into a server message. Malformed JSON or a message
 * that fails validation returns null; an unknown `type` also returns null
 * (forward compatibility: ignored with a warning via the optional logger).
 */
export function parseServerMessage(
  raw: string,
  warn: (msg: string) => void = () => {},
): ServerMessage | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    warn(`unparseable wire message: ${raw.slice(0, 120)}`);
    return null;
  }
  if (typeof obj !== 'object' || obj === null || Array.isArray(obj)) {
    warn('wire message is not a JSON object');
    return null;
  }
  const m = obj as Record<string, unknown>;
  switch (m.type) {
    case 'hello':
    case 'config':
      if (
        isNum(m.fs) &&
        Array.isArray(m.probe_freqs) &&
        m.probe_freqs.every(isNum) &&
        isNum(m.window_s) &&
        isNum(m.hop_s) &&
        isNum(m.smoother_depth)
      ) {
        return m as unknown as ServerInfo;
      }
      break;
    case 'feature':
      if (isNum(m.window_index) && isNum(m.end_counter) && isTValues(m.t_values)) {
        return m as unknown as FeatureEvent;
      }
      break;
    case 'decision':
      if (
        isNum(m.window_index) &&
        isNum(m.end_counter) &&
        typeof m.undecided === 'boolean' &&
        (m.freq === null || isNum(m.freq))
      ) {
        return m as unknown as DecisionEvent;
      }
      break;
    case 'error':
      if (typeof m.reason === 'string') return m as unknown as ErrorEvent;
      break;
    case 'bye':
      return { type: 'bye' };
    default:
      warn(`ignoring unknown wire message type ${JSON.stringify(m.type)}`);
      return null;
  }
  warn(`malformed ${String(m.type)} message`);
  return null;
}

export function serialize(msg: ClientMessage): string {
  return JSON.stringify(msg) + '\n';
}
