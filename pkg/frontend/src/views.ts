// Canvas painters for the scenes. Pure draw calls over the latest scene;
// each is a straight function of its input.

import { GanttRow, SideScene, TopDownScene, ChartSeries } from "./scene.js";

const STANCE_COLOR = "#3a7";
const SWING_COLOR = "#e94";
const BODY_COLOR = "#9ab";
const WALKSPACE_COLOR = "rgba(110, 160, 255, 0.5)";

interface Camera2D {
  scale: number;   // px per metre
  cx: number;      // world coords mapped to the canvas centre
  cy: number;
}

function fitCamera(canvas: HTMLCanvasElement, x: number, y: number, span: number): Camera2D {
  const scale = Math.min(canvas.width, canvas.height) / span;
  return { scale, cx: x, cy: y };
}

export function drawTopDown(canvas: HTMLCanvasElement, scene: TopDownScene) {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const cam = fitCamera(canvas, scene.bodyXY[0], scene.bodyXY[1], 1.6);
  const px = (x: number) => canvas.width / 2 + (x - cam.cx) * cam.scale;
  const py = (y: number) => canvas.height / 2 - (y - cam.cy) * cam.scale;

  for (const polygon of scene.walkspacePolygons) {
    ctx.beginPath();
    polygon.forEach(([x, y], i) => {
      if (i === 0) ctx.moveTo(px(x), py(y));
      else ctx.lineTo(px(x), py(y));
    });
    ctx.closePath();
    ctx.strokeStyle = WALKSPACE_COLOR;
    ctx.stroke();
  }

  // body heading triangle
  const yaw = scene.bodyYaw;
  const [bx, by] = scene.bodyXY;
  ctx.beginPath();
  const nose: [number, number] = [bx + 0.22 * Math.cos(yaw), by + 0.22 * Math.sin(yaw)];
  const tailL: [number, number] = [bx + 0.16 * Math.cos(yaw + 2.5), by + 0.16 * Math.sin(yaw + 2.5)];
  const tailR: [number, number] = [bx + 0.16 * Math.cos(yaw - 2.5), by + 0.16 * Math.sin(yaw - 2.5)];
  ctx.moveTo(px(nose[0]), py(nose[1]));
  ctx.lineTo(px(tailL[0]), py(tailL[1]));
  ctx.lineTo(px(tailR[0]), py(tailR[1]));
  ctx.closePath();
  ctx.fillStyle = BODY_COLOR;
  ctx.fill();

  for (let i = 0; i < scene.tipsXY.length; i++) {
    const tip = scene.tipsXY[i];
    const hip = scene.hipsXY[i];
    ctx.beginPath();
    ctx.moveTo(px(hip[0]), py(hip[1]));
    ctx.lineTo(px(tip.x), py(tip.y));
    ctx.strokeStyle = tip.stance ? STANCE_COLOR : SWING_COLOR;
    ctx.lineWidth = 2;
    ctx.stroke();
    ctx.beginPath();
    ctx.arc(px(tip.x), py(tip.y), tip.contact ? 6 : 4, 0, 2 * Math.PI);
    ctx.fillStyle = tip.stance ? STANCE_COLOR : SWING_COLOR;
    ctx.fill();
  }
}

export function drawSide(canvas: HTMLCanvasElement, scene: SideScene) {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const cam = fitCamera(canvas, scene.bodyX, scene.bodyZ - 0.1, 1.0);
  const px = (x: number) => canvas.width / 2 + (x - cam.cx) * cam.scale;
  const pz = (z: number) => canvas.height / 2 - (z - cam.cy) * cam.scale;

  ctx.strokeStyle = "#666";
  ctx.beginPath();
  ctx.moveTo(0, pz(scene.groundZ));
  ctx.lineTo(canvas.width, pz(scene.groundZ));
  ctx.stroke();

  // body as a pitched bar
  const c = Math.cos(scene.bodyPitch);
  const s = Math.sin(scene.bodyPitch);
  ctx.beginPath();
  ctx.moveTo(px(scene.bodyX - 0.25 * c), pz(scene.bodyZ + 0.25 * s));
  ctx.lineTo(px(scene.bodyX + 0.25 * c), pz(scene.bodyZ - 0.25 * s));
  ctx.strokeStyle = BODY_COLOR;
  ctx.lineWidth = 6;
  ctx.stroke();
  ctx.lineWidth = 1;

  for (const tip of scene.tips) {
    ctx.beginPath();
    ctx.arc(px(tip.x), pz(tip.z), 4, 0, 2 * Math.PI);
    ctx.fillStyle = tip.stance ? STANCE_COLOR : SWING_COLOR;
    ctx.fill();
    ctx.beginPath();
    ctx.moveTo(px(scene.bodyX), pz(scene.bodyZ));
    ctx.lineTo(px(tip.x), pz(tip.z));
    ctx.strokeStyle = "rgba(150,150,170,0.35)";
    ctx.stroke();
  }
}

export function drawGantt(canvas: HTMLCanvasElement, rows: GanttRow[],
                          windowSeconds: number) {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (rows.length === 0) return;
  const tEnd = Math.max(...rows.map((r) => r.segments.length
    ? r.segments[r.segments.length - 1].t1 : 0));
  const t0 = tEnd - windowSeconds;
  const rowH = canvas.height / rows.length;
  rows.forEach((row, i) => {
    for (const seg of row.segments) {
      const a = Math.max(seg.t0, t0);
      if (seg.t1 <= t0) continue;
      const x0 = ((a - t0) / windowSeconds) * canvas.width;
      const x1 = ((seg.t1 - t0) / windowSeconds) * canvas.width;
      ctx.fillStyle = seg.phase === "stance" ? STANCE_COLOR : SWING_COLOR;
      ctx.fillRect(x0, i * rowH + 2, Math.max(x1 - x0, 1), rowH - 4);
    }
    ctx.fillStyle = "#ccc";
    ctx.font = "10px sans-serif";
    ctx.fillText(`L${row.legId}`, 2, i * rowH + rowH / 2 + 3);
  });
}

export function drawChart(canvas: HTMLCanvasElement, series: ChartSeries,
                          which: "power" | "cot") {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const values = which === "power"
    ? series.power
    : series.cot.map((v) => (v === null ? NaN : v));
  const finite = values.filter((v) => Number.isFinite(v));
  if (finite.length < 2) return;
  const vMax = Math.max(...finite) * 1.1 + 1e-9;
  const n = values.length;
  ctx.beginPath();
  let started = false;
  values.forEach((v, i) => {
    if (!Number.isFinite(v)) return;
    const x = (i / (n - 1)) * canvas.width;
    const y = canvas.height - (v / vMax) * canvas.height;
    if (!started) {
      ctx.moveTo(x, y);
      started = true;
    } else ctx.lineTo(x, y);
  });
  ctx.strokeStyle = which === "power" ? "#fa5" : "#5af";
  ctx.lineWidth = 1.5;
  ctx.stroke();
  ctx.fillStyle = "#aaa";
  ctx.font = "10px sans-serif";
  const last = finite[finite.length - 1];
  ctx.fillText(`${which}: ${last.toFixed(which === "power" ? 0 : 2)}`, 4, 12);
}
