// Pure scene builders: turn the latest snapshot into drawable geometry
// (world/body coordinates in metres). The canvas painters consume these;
// tests drive them directly with recorded frames.

import { Hello, StateMessage } from "./protocol.js";
import { PhaseSample, MetricSample } from "./store.js";

export interface TopDownScene {
  bodyXY: [number, number];
  bodyYaw: number;
  hipsXY: Array<[number, number]>;                 // world frame
  tipsXY: Array<{ id: number; x: number; y: number; stance: boolean; contact: boolean }>;
  walkspacePolygons: Array<Array<[number, number]>>;  // one polygon per leg, world frame
}

function yawRotate(x: number, y: number, yaw: number): [number, number] {
  const c = Math.cos(yaw);
  const s = Math.sin(yaw);
  return [c * x - s * y, s * x + c * y];
}

export function buildTopDown(hello: Hello, state: StateMessage): TopDownScene {
  const [bx, by] = [state.body.world_xyz[0], state.body.world_xyz[1]];
  const yaw = state.body.world_rpy[2];
  const hips: Array<[number, number]> = hello.robot.legs.map((leg) => {
    const [hx, hy] = yawRotate(leg.base_xy[0], leg.base_xy[1], yaw);
    return [bx + hx, by + hy];
  });
  const polygons = hello.robot.legs.map((leg) => {
    return hello.walkspace.map(([bearing, radius]) => {
      const lx = leg.default_tip[0] + radius * Math.cos(bearing);
      const ly = leg.default_tip[1] + radius * Math.sin(bearing);
      const [wx, wy] = yawRotate(lx, ly, yaw);
      return [bx + wx, by + wy] as [number, number];
    });
  });
  const tips = state.legs.map((leg) => ({
    id: leg.id,
    x: leg.tip_world[0],
    y: leg.tip_world[1],
    stance: leg.phase === "stance",
    contact: leg.contact,
  }));
  return { bodyXY: [bx, by], bodyYaw: yaw, hipsXY: hips, tipsXY: tips, walkspacePolygons: polygons };
}

export interface SideScene {
  bodyX: number;
  bodyZ: number;
  bodyPitch: number;
  groundZ: number;
  tips: Array<{ id: number; x: number; z: number; stance: boolean }>;
  apexZ: number;            // configured swing apex over the ground
}

export function buildSide(hello: Hello, state: StateMessage): SideScene {
  return {
    bodyX: state.body.world_xyz[0],
    bodyZ: state.body.world_xyz[2],
    bodyPitch: state.body.world_rpy[1],
    groundZ: 0,
    tips: state.legs.map((leg) => ({
      id: leg.id,
      x: leg.tip_world[0],
      z: leg.tip_world[2],
      stance: leg.phase === "stance",
    })),
    apexZ: hello.robot.step_clearance,
  };
}

export interface GanttRow {
  legId: number;
  segments: Array<{ t0: number; t1: number; phase: "stance" | "swing" }>;
}

export function buildGantt(history: PhaseSample[]): GanttRow[] {
  if (history.length === 0) return [];
  const legIds = Array.from(history[history.length - 1].phases.keys()).sort((a, b) => a - b);
  return legIds.map((legId) => {
    const segments: GanttRow["segments"] = [];
    for (let i = 0; i < history.length; i++) {
      const sample = history[i];
      const phase = sample.phases.get(legId);
      if (phase === undefined) continue;
      const t1 = i + 1 < history.length ? history[i + 1].simTime : sample.simTime;
      const last = segments[segments.length - 1];
      if (last && last.phase === phase) {
        last.t1 = t1;
      } else {
        segments.push({ t0: sample.simTime, t1, phase });
      }
    }
    return { legId, segments };
  });
}

// number of swing segments per cycle-second: distinguishes gait patterns
export function swingsPerRow(rows: GanttRow[]): number[] {
  return rows.map((row) => row.segments.filter((s) => s.phase === "swing").length);
}

export interface ChartSeries {
  times: number[];
  power: number[];
  cot: Array<number | null>;
  speed: number[];
}

export function buildCharts(history: MetricSample[]): ChartSeries {
  return {
    times: history.map((m) => m.simTime),
    power: history.map((m) => m.power),
    cot: history.map((m) => m.cot),
    speed: history.map((m) => m.speed),
  };
}
