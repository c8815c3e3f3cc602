// JSON frame protocol shared with the prediction server's WebSocket
// gateway. Inbound to the server: /interface and /config; outbound
// from the server: /prediction.

export interface InterfaceFrame {
  address: '/interface';
  args: number[];
}

export interface PredictionFrame {
  address: '/prediction';
  args: number[];
}

export interface ConfigFrame {
  address: '/config';
  mode?: string;
  pi_temp?: number;
  sigma_temp?: number;
}

export type OutboundFrame = InterfaceFrame | ConfigFrame;

export const MODES = ['nopredictions', 'filter', 'callresponse', 'battle'] as const;
export type Mode = (typeof MODES)[number];

export function clamp01(v: number): number {
  if (!Number.isFinite(v)) return 0;
  return Math.min(1, Math.max(0, v));
}

export interface PadEvent {
  x: number;
  y: number;
  pressure: number;
  /** client wall-clock time in milliseconds */
  time: number;
}

export function padEvent(x: number, y: number, pressure: number, time: number): PadEvent {
  return { x: clamp01(x), y: clamp01(y), pressure: clamp01(pressure), time };
}

export function touchFrame(event: PadEvent): InterfaceFrame {
  return { address: '/interface', args: [event.x, event.y, event.pressure] };
}

export function configFrame(opts: {
  mode?: Mode;
  piTemp?: number;
  sigmaTemp?: number;
}): ConfigFrame {
  const frame: ConfigFrame = { address: '/config' };
  if (opts.mode !== undefined) frame.mode = opts.mode;
  if (opts.piTemp !== undefined) frame.pi_temp = Math.max(0, opts.piTemp);
  if (opts.sigmaTemp !== undefined) frame.sigma_temp = Math.max(0, opts.sigmaTemp);
  return frame;
}

/** Parse one message off the socket; null for anything malformed. */
export function parsePrediction(text: string): PredictionFrame | null {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof data !== 'object' || data === null) return null;
  const frame = data as { address?: unknown; args?: unknown };
  if (frame.address !== '/prediction' || !Array.isArray(frame.args)) return null;
  if (!frame.args.every((v) => typeof v === 'number' && Number.isFinite(v))) return null;
  return { address: '/prediction', args: frame.args as number[] };
}
