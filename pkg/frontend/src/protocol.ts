// Wire protocol schemas, mirroring the server's frozen field lists
// (src/hexgait/protocol/teleop.json). Everything the console sends or
// accepts passes through these validators.

import { z } from "zod";

export const PROTO_VERSION = 1;

const finite = z.number().finite();
const vec3 = z.array(finite).length(3);
const vec6 = z.array(finite).length(6);

export const VelocityCommand = z.object({
  type: z.literal("velocity"),
  proto: z.number().int(),
  seq: z.number().int(),
  linear: vec3,
  angular: vec3,
});

export const PoseVelocityCommand = z.object({
  type: z.literal("pose_velocity"),
  proto: z.number().int(),
  seq: z.number().int(),
  linear: vec3,
  angular: vec3,
});

export const GaitSelectCommand = z.object({
  type: z.literal("gait_select"),
  proto: z.number().int(),
  seq: z.number().int(),
  gait: z.string(),
});

export const ModeCommand = z.object({
  type: z.literal("mode"),
  proto: z.number().int(),
  seq: z.number().int(),
  mode: z.enum(["startup", "shutdown"]),
});

export const LegipulateCommand = z.object({
  type: z.literal("legipulate"),
  proto: z.number().int(),
  seq: z.number().int(),
  leg: z.number().int(),
  action: z.enum(["velocity", "pose", "off"]),
  vector: vec3.nullable(),
  frame: z.enum(["leg", "body"]),
});

export const ParamsCommand = z.object({
  type: z.literal("params"),
  proto: z.number().int(),
  seq: z.number().int(),
  params: z.record(z.string(), finite),
});

export const Command = z.discriminatedUnion("type", [
  VelocityCommand,
  PoseVelocityCommand,
  GaitSelectCommand,
  ModeCommand,
  LegipulateCommand,
  ParamsCommand,
]);
export type Command = z.infer<typeof Command>;

export const Ack = z.object({
  type: z.literal("ack"),
  proto: z.number().int(),
  seq: z.number().int(),
});

export const ErrorReply = z.object({
  type: z.literal("error"),
  proto: z.number().int(),
  seq: z.number().int().nullable(),
  detail: z.string(),
});

export const LegInfo = z.object({
  id: z.number().int(),
  joint_names: z.array(z.string()),
  base_xy: z.array(finite).length(2),
  default_tip: vec3,
});

export const Hello = z.object({
  type: z.literal("hello"),
  proto: z.number().int(),
  robot: z.object({
    name: z.string(),
    mass: finite,
    body_clearance: finite,
    step_clearance: finite,
    legs: z.array(LegInfo),
  }),
  gaits: z.array(z.string()),
  walkspace: z.array(z.array(finite).length(2)),
  limits: z.object({
    max_linear_speed: finite,
    max_angular_speed: finite,
    max_translation: vec3,
    max_rotation: vec3,
  }),
  tick_rate: finite,
  stream_rate: finite,
});
export type Hello = z.infer<typeof Hello>;

export const LegState = z.object({
  id: z.number().int(),
  joints: z.array(finite),
  tip_body: vec3,
  tip_world: vec3,
  phase: z.enum(["stance", "swing"]),
  phase_t: finite,
  contact: z.boolean(),
  clamped: z.boolean(),
});
export type LegState = z.infer<typeof LegState>;

export const StateMessage = z.object({
  type: z.literal("state"),
  proto: z.number().int(),
  tick: z.number().int(),
  sim_time: finite,
  mode: z.string(),
  gait: z.string(),
  walk_state: z.string(),
  body: z.object({
    world_xyz: vec3,
    world_rpy: vec3,
    offsets: z.record(z.string(), vec6),
  }),
  legs: z.array(LegState),
  metrics: z.object({
    power: finite,
    cot: finite.nullable(),
    commanded_velocity: vec3,
    limited_velocity: vec3,
    speed: finite,
    distance: finite,
  }),
  legipulating: z.array(z.number().int()),
});
export type StateMessage = z.infer<typeof StateMessage>;

export const ServerMessage = z.discriminatedUnion("type", [
  Ack,
  ErrorReply,
  Hello,
  StateMessage,
]);
export type ServerMessage = z.infer<typeof ServerMessage>;

export function parseServerMessage(raw: string): ServerMessage {
  return ServerMessage.parse(JSON.parse(raw));
}
