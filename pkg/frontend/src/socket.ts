// Reconnecting WebSocket client for the prediction gateway.
//
// Touch frames are rate-limited (coalescing to the most recent) and
// buffered for up to one second while the socket is down; everything
// here is synchronous and non-blocking so the UI thread never stalls
// on I/O.

import {
  ConfigFrame,
  OutboundFrame,
  PadEvent,
  PredictionFrame,
  parsePrediction,
  touchFrame,
} from './protocol.js';

export interface WebSocketLike {
  readyState: number;
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
}

const OPEN = 1;

export interface PadSocketOptions {
  url: string;
  /** maximum touch frames per second (default 100) */
  maxRate?: number;
  /** seconds a frame may wait in the offline buffer (default 1) */
  bufferSeconds?: number;
  reconnectBaseMs?: number;
  reconnectMaxMs?: number;
  webSocketFactory?: (url: string) => WebSocketLike;
  now?: () => number;
  schedule?: (fn: () => void, ms: number) => unknown;
}

interface BufferedFrame {
  at: number;
  text: string;
}

export class PadSocket {
  onPrediction: ((frame: PredictionFrame) => void) | null = null;
  onStatus: ((connected: boolean) => void) | null = null;

  sentFrames = 0;
  droppedFrames = 0;

  private readonly url: string;
  private readonly minIntervalMs: number;
  private readonly bufferMs: number;
  private readonly reconnectBaseMs: number;
  private readonly reconnectMaxMs: number;
  private readonly makeSocket: (url: string) => WebSocketLike;
  private readonly now: () => number;
  private readonly schedule: (fn: () => void, ms: number) => unknown;

  private socket: WebSocketLike | null = null;
  private buffer: BufferedFrame[] = [];
  private pendingTouch: PadEvent | null = null;
  private lastTouchSent = -Infinity;
  private retries = 0;
  private closed = false;

  constructor(opts: PadSocketOptions) {
    this.url = opts.url;
    this.minIntervalMs = 1000 / (opts.maxRate ?? 100);
    this.bufferMs = (opts.bufferSeconds ?? 1) * 1000;
    this.reconnectBaseMs = opts.reconnectBaseMs ?? 250;
    this.reconnectMaxMs = opts.reconnectMaxMs ?? 4000;
    this.makeSocket = opts.webSocketFactory ?? ((url) => new WebSocket(url) as WebSocketLike);
    this.now = opts.now ?? (() => performance.now());
    this.schedule = opts.schedule ?? ((fn, ms) => setTimeout(fn, ms));
  }

  connect(): void {
    this.closed = false;
    const socket = this.makeSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.retries = 0;
      this.flushBuffer();
      this.onStatus?.(true);
    };
    socket.onmessage = (ev) => {
      const frame = parsePrediction(String(ev.data));
      if (frame) this.onPrediction?.(frame);
    };
    socket.onclose = () => {
      this.socket = null;
      this.onStatus?.(false);
      if (!this.closed) this.scheduleReconnect();
    };
    socket.onerror = () => {
      // close always follows; reconnect is handled there
    };
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
    this.socket = null;
  }

  get connected(): boolean {
    return this.socket !== null && this.socket.readyState === OPEN;
  }

  /** Rate-limited; coalesces to the newest event inside the window. */
  sendTouch(event: PadEvent): void {
    const now = this.now();
    if (now - this.lastTouchSent < this.minIntervalMs) {
      this.pendingTouch = event; // newest wins
      return;
    }
    this.lastTouchSent = now;
    this.pendingTouch = null;
    this.deliver(touchFrame(event), now);
  }

  sendConfig(frame: ConfigFrame): void {
    this.deliver(frame, this.now());
  }

  /** Call once per animation frame: flushes a coalesced trailing touch. */
  tick(): void {
    if (this.pendingTouch === null) return;
    const now = this.now();
    if (now - this.lastTouchSent >= this.minIntervalMs) {
      const event = this.pendingTouch;
      this.pendingTouch = null;
      this.lastTouchSent = now;
      this.deliver(touchFrame(event), now);
    }
  }

  private deliver(frame: OutboundFrame, now: number): void {
    const text = JSON.stringify(frame);
    if (this.connected) {
      this.socket!.send(text);
      this.sentFrames += 1;
      return;
    }
    this.buffer.push({ at: now, text });
    this.pruneBuffer(now);
  }

  private pruneBuffer(now: number): void {
    const limit = now - this.bufferMs;
    while (this.buffer.length > 0 && this.buffer[0].at < limit) {
      this.buffer.shift();
      this.droppedFrames += 1;
    }
  }

  private flushBuffer(): void {
    this.pruneBuffer(this.now());
    for (const item of this.buffer) {
      this.socket!.send(item.text);
      this.sentFrames += 1;
    }
    this.buffer = [];
  }

  private scheduleReconnect(): void {
    const delay = Math.min(this.reconnectBaseMs * 2 ** this.retries, this.reconnectMaxMs);
    this.retries += 1;
    this.schedule(() => {
      if (!this.closed) this.connect();
    }, delay);
  }
}
