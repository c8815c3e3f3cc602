// Canvas touch surface: pointer events in, two-color fading trails out.
// User strokes and model predictions render in distinct colors so the
// performer can tell who played what.

import { PadEvent, padEvent } from './protocol.js';
import { TrailBuffer } from './trails.js';

export const USER_COLOR = '56, 189, 248'; // sky
export const PREDICTION_COLOR = '251, 146, 60'; // amber

export class Pad {
  readonly userTrail = new TrailBuffer(2000);
  readonly predictionTrail = new TrailBuffer(2000);
  onTouch: ((event: PadEvent) => void) | null = null;

  private drawing = false;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly now: () => number = () => performance.now(),
  ) {
    canvas.addEventListener('pointerdown', (e) => this.pointer(e, true));
    canvas.addEventListener('pointermove', (e) => this.pointer(e, this.drawing));
    canvas.addEventListener('pointerup', () => (this.drawing = false));
    canvas.addEventListener('pointercancel', () => (this.drawing = false));
    canvas.addEventListener('pointerleave', () => (this.drawing = false));
  }

  private pointer(e: PointerEvent, active: boolean): void {
    if (e.type === 'pointerdown') {
      this.canvas.setPointerCapture(e.pointerId);
      this.drawing = true;
    }
    if (!active || !this.drawing) return;
    const rect = this.canvas.getBoundingClientRect();
    const x = (e.clientX - rect.left) / rect.width;
    const y = (e.clientY - rect.top) / rect.height;
    // browsers report 0 pressure for mice; fall back to a neutral touch
    const pressure = e.pressure > 0 ? e.pressure : 0.5;
    const event = padEvent(x, y, pressure, this.now());
    this.userTrail.push({ x: event.x, y: event.y, size: event.pressure, t: event.time });
    this.onTouch?.(event);
  }

  /** A prediction frame arrived: [x, y, pressure]. */
  showPrediction(args: number[]): void {
    if (args.length < 2) return;
    this.predictionTrail.push({
      x: args[0],
      y: args[1],
      size: args.length > 2 ? args[2] : 0.5,
      t: this.now(),
    });
  }

  render(): void {
    const ctx = this.canvas.getContext('2d');
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    const now = this.now();
    this.drawTrail(ctx, this.userTrail.visible(now), USER_COLOR, width, height);
    this.drawTrail(ctx, this.predictionTrail.visible(now), PREDICTION_COLOR, width, height);
  }

  private drawTrail(
    ctx: CanvasRenderingContext2D,
    points: { x: number; y: number; size: number; alpha: number }[],
    color: string,
    width: number,
    height: number,
  ): void {
    for (const p of points) {
      const radius = 4 + 18 * p.size;
      ctx.beginPath();
      ctx.fillStyle = `rgba(${color}, ${(0.8 * p.alpha).toFixed(3)})`;
      ctx.arc(p.x * width, p.y * height, radius, 0, Math.PI * 2);
      ctx.fill();
    }
  }
}
