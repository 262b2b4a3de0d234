// Virtual joystick: pure stick-to-twist mapping plus a pointer widget.
// Release always produces one explicit zero command (dead-man friendly);
// while engaged, the current value is re-sent at a fixed cadence.

export interface SpeedLimits {
  maxLinear: number;   // m/s
  maxAngular: number;  // rad/s
}

export interface PlanarTwist {
  vx: number;
  vy: number;
  wz: number;
}

// stickX: right positive; stickY: forward positive; twist: CCW positive.
// The stick deflection is clamped to the unit disc, so diagonals scale
// onto the limit ellipse instead of exceeding it.
export function stickToVelocity(
  stickX: number,
  stickY: number,
  twist: number,
  limits: SpeedLimits,
): PlanarTwist {
  let x = stickX;
  let y = stickY;
  const mag = Math.hypot(x, y);
  if (mag > 1) {
    x /= mag;
    y /= mag;
  }
  const t = Math.max(-1, Math.min(1, twist));
  // robot frame: x forward, y left
  return {
    vx: y * limits.maxLinear,
    vy: -x * limits.maxLinear,
    wz: t * limits.maxAngular,
  };
}

export class JoystickWidget {
  stickX = 0;
  stickY = 0;
  engaged = false;
  private pointerId: number | null = null;

  constructor(
    private canvas: HTMLCanvasElement,
    private onChange: () => void,
  ) {
    canvas.addEventListener("pointerdown", (ev) => this.down(ev));
    canvas.addEventListener("pointermove", (ev) => this.move(ev));
    canvas.addEventListener("pointerup", (ev) => this.up(ev));
    canvas.addEventListener("pointercancel", (ev) => this.up(ev));
  }

  private toStick(ev: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    const cx = rect.width / 2;
    const cy = rect.height / 2;
    const r = Math.min(cx, cy) * 0.9;
    const x = (ev.clientX - rect.left - cx) / r;
    const y = -(ev.clientY - rect.top - cy) / r;
    return [x, y];
  }

  private down(ev: PointerEvent) {
    this.canvas.setPointerCapture(ev.pointerId);
    this.pointerId = ev.pointerId;
    this.engaged = true;
    [this.stickX, this.stickY] = this.toStick(ev);
    this.onChange();
  }

  private move(ev: PointerEvent) {
    if (!this.engaged || ev.pointerId !== this.pointerId) return;
    [this.stickX, this.stickY] = this.toStick(ev);
    this.onChange();
  }

  private up(ev: PointerEvent) {
    if (ev.pointerId !== this.pointerId) return;
    this.pointerId = null;
    this.engaged = false;
    this.stickX = 0;
    this.stickY = 0;
    this.onChange();
  }

  draw() {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const w = this.canvas.width;
    const h = this.canvas.height;
    const cx = w / 2;
    const cy = h / 2;
    const r = Math.min(cx, cy) * 0.9;
    ctx.clearRect(0, 0, w, h);
    ctx.strokeStyle = "#445";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(cx, cy, r, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.beginPath();
    ctx.moveTo(cx - r, cy);
    ctx.lineTo(cx + r, cy);
    ctx.moveTo(cx, cy - r);
    ctx.lineTo(cx, cy + r);
    ctx.strokeStyle = "#2a2a3a";
    ctx.stroke();
    const px = cx + this.stickX * r;
    const py = cy - this.stickY * r;
    ctx.fillStyle = this.engaged ? "#6cf" : "#48a";
    ctx.beginPath();
    ctx.arc(px, py, 14, 0, 2 * Math.PI);
    ctx.fill();
  }
}
