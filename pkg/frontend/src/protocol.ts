/** Wire types for the JSON-over-WebSocket teleop protocol.
 *
 * Requests carry a `type` and optional `id`; every request receives exactly
 * one response (`ok: true` payload or `ok: false` with an error object).
 * `state` frames arrive unsolicited on subscribed sessions.
 */
import type { Quat, Vec3 } from "./math.js";

export interface Caps {
  max_position_step: number; // meters per command
  max_rotation_step: number; // radians per command
}

export interface HelloFrame {
  ok: true;
  type: "hello";
  role: "driver" | "observer";
  caps: Caps;
}

export interface EffectorState {
  position: Vec3;
  quaternion: Quat;
  gripper: "open" | "closed";
}

export interface StateFrame {
  type: "state";
  t: number;
  step: number;
  stride: number;
  effectors: EffectorState[];
  /** Flattened xyz triples of every stride-th particle. */
  positions: number[];
}

export interface ErrorResponse {
  ok: false;
  id?: number;
  error: { code: string; message: string };
}

export interface OkResponse {
  ok: true;
  id?: number;
  [key: string]: unknown;
}

export type Response = OkResponse | ErrorResponse;
export type ServerMessage = HelloFrame | StateFrame | Response;

export type RequestType =
  | "load_scene"
  | "step"
  | "grasp"
  | "move_effector"
  | "release"
  | "reset"
  | "subscribe_state"
  | "record_start"
  | "record_stop"
  | "get_metrics";

export interface Request {
  type: RequestType;
  id?: number;
  [key: string]: unknown;
}

export function isStateFrame(msg: ServerMessage): msg is StateFrame {
  return (msg as StateFrame).type === "state";
}

export function isHello(msg: ServerMessage): msg is HelloFrame {
  return (msg as HelloFrame).type === "hello";
}

export function isResponse(msg: ServerMessage): msg is Response {
  return typeof (msg as Response).ok === "boolean" && !isHello(msg);
}

/** Parse one raw socket payload; throws on anything that is not a JSON object. */
export function parseServerMessage(raw: string): ServerMessage {
  const doc: unknown = JSON.parse(raw);
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new Error("server message must be a JSON object");
  }
  return doc as ServerMessage;
}

/** Unpack a state frame's flattened positions into [x, y, z] triples. */
export function framePoints(frame: StateFrame): Vec3[] {
  const pts: Vec3[] = [];
  for (let i = 0; i + 2 < frame.positions.length; i += 3) {
    pts.push([frame.positions[i]!, frame.positions[i + 1]!, frame.positions[i + 2]!]);
  }
  return pts;
}
