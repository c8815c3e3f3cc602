// Fading trail bookkeeping for the pad display. Pure data; the canvas
// layer decides colors. Every prediction point pushed here came off
// the socket; the client never extrapolates its own prediction marks.

export interface TrailPoint {
  x: number;
  y: number;
  /** marker radius scale, driven by pressure */
  size: number;
  /** time the point was added, in ms */
  t: number;
}

export interface VisiblePoint extends TrailPoint {
  /** 1 when fresh, 0 at the fade horizon */
  alpha: number;
}

export class TrailBuffer {
  private points: TrailPoint[] = [];

  constructor(readonly fadeMs: number = 2000, readonly maxPoints: number = 4096) {}

  push(point: TrailPoint): void {
    this.points.push(point);
    if (this.points.length > this.maxPoints) {
      this.points.splice(0, this.points.length - this.maxPoints);
    }
  }

  prune(now: number): void {
    const horizon = now - this.fadeMs;
    let firstLive = 0;
    while (firstLive < this.points.length && this.points[firstLive].t < horizon) {
      firstLive += 1;
    }
    if (firstLive > 0) this.points.splice(0, firstLive);
  }

  visible(now: number): VisiblePoint[] {
    this.prune(now);
    return this.points.map((p) => ({
      ...p,
      alpha: Math.max(0, 1 - (now - p.t) / this.fadeMs),
    }));
  }

  get length(): number {
    return this.points.length;
  }

  clear(): void {
    this.points = [];
  }
}
