/** Client-side mirror of the server's effector rate limiting.
 *
 * The server clamps every move_effector target to its advertised caps; the
 * client applies the same clamp before sending so the session log never
 * contains a target the server would shorten.
 */
import {
  add,
  norm,
  quatAngleBetween,
  quatSlerp,
  scale,
  sub,
  type Quat,
  type Vec3,
} from "./math.js";
import type { Caps } from "./protocol.js";

export interface PoseTarget {
  position: Vec3;
  quaternion: Quat;
}

export function limitPosition(prev: Vec3, target: Vec3, maxStep: number): Vec3 {
  if (maxStep <= 0) throw new Error("maxStep must be > 0");
  const dp = sub(target, prev);
  const dist = norm(dp);
  if (dist <= maxStep) return target;
  return add(prev, scale(dp, maxStep / dist));
}

export function limitRotation(prev: Quat, target: Quat, maxStep: number): Quat {
  if (maxStep <= 0) throw new Error("maxStep must be > 0");
  const angle = quatAngleBetween(prev, target);
  if (angle <= maxStep || angle < 1e-12) return target;
  return quatSlerp(prev, target, maxStep / angle);
}

export function limitPose(prev: PoseTarget, target: PoseTarget, caps: Caps): PoseTarget {
  return {
    position: limitPosition(prev.position, target.position, caps.max_position_step),
    quaternion: limitRotation(prev.quaternion, target.quaternion, caps.max_rotation_step),
  };
}

/**
 * Stateful limiter for a mouse-drag stream: feed raw targets at any event
 * rate, each emitted target moves at most one cap step from the previous
 * emitted one.
 */
export class DragLimiter {
  private last: PoseTarget;

  constructor(start: PoseTarget, private caps: Caps) {
    this.last = start;
  }

  next(raw: PoseTarget): PoseTarget {
    this.last = limitPose(this.last, raw, this.caps);
    return this.last;
  }

  get current(): PoseTarget {
    return this.last;
  }
}
