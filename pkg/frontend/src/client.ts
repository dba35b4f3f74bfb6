// Thin WebSocket transport: parses incoming frames with the shared schema
// and hands valid messages to a single listener. Reconnection is manual
// (operator-driven) to keep session semantics obvious.

import { parseServerMessage, serialize, type ClientMessage, type ServerMessage } from './wire.js';

export class ConsoleClient {
  private ws: WebSocket | null = null;

  constructor(
    private readonly onMessage: (msg: ServerMessage) => void,
    private readonly onStatus: (connected: boolean) => void,
    private readonly warn: (msg: string) => void = (m) => console.warn(m),
  ) {}

  connect(url: string): void {
    if (this.ws !== null) return;
    const ws = new WebSocket(url);
    this.ws = ws;
    ws.onopen = () => this.onStatus(true);
    ws.onclose = () => {
      this.ws = null;
      this.onStatus(false);
    };
    ws.onerror = () => this.warn(`websocket error on ${url}`);
    ws.onmessage = (ev) => {
      const msg = parseServerMessage(String(ev.data), this.warn);
      if (msg !== null) this.onMessage(msg);
    };
  }

  send(messages: ClientMessage[]): boolean {
    if (this.ws === null || this.ws.readyState !== WebSocket.OPEN) return false;
    for (const msg of messages) this.ws.send(serialize(msg).trimEnd());
    return true;
  }

  disconnect(): void {
    this.ws?.close();
    this.ws = null;
  }

  get connected(): boolean {
    return this.ws !== null && this.ws.readyState === WebSocket.OPEN;
  }
}
