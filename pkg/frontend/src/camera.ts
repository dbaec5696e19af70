/** Orbit camera and the screen<->world mapping used for picking.
 *
 * Right-handed world with +z up. The camera orbits a target point at a
 * distance, looking at the target; projection is a simple pinhole.
 */
import { add, cross, dot, normalize, scale, sub, type Vec3 } from "./math.js";

export interface Ray {
  origin: Vec3;
  direction: Vec3; // unit length
}

export class OrbitCamera {
  target: Vec3 = [0.3, 0.3, 0.05];
  distance = 1.5;
  azimuth = -Math.PI / 4; // around +z
  elevation = Math.PI / 5; // up from the xy plane
  fovY = Math.PI / 4;

  get position(): Vec3 {
    const ce = Math.cos(this.elevation);
    return add(this.target, [
      this.distance * ce * Math.cos(this.azimuth),
      this.distance * ce * Math.sin(this.azimuth),
      this.distance * Math.sin(this.elevation),
    ]);
  }

  /** forward / right / up unit vectors of the view frame. */
  basis(): { forward: Vec3; right: Vec3; up: Vec3 } {
    const forward = normalize(sub(this.target, this.position));
    const right = normalize(cross(forward, [0, 0, 1]));
    const up = cross(right, forward);
    return { forward, right, up };
  }

  orbit(dAzimuth: number, dElevation: number): void {
    this.azimuth += dAzimuth;
    const cap = Math.PI / 2 - 0.01;
    this.elevation = Math.max(-cap, Math.min(cap, this.elevation + dElevation));
  }

  zoom(factor: number): void {
    this.distance = Math.max(0.1, Math.min(20, this.distance * factor));
  }

  /**
   * World point -> canvas pixel (origin top-left) plus view depth.
   * Returns null for points at or behind the eye plane.
   */
  project(p: Vec3, width: number, height: number): { x: number; y: number; depth: number } | null {
    const { forward, right, up } = this.basis();
    const rel = sub(p, this.position);
    const depth = dot(rel, forward);
    if (depth <= 1e-6) return null;
    const fy = height / 2 / Math.tan(this.fovY / 2);
    const x = width / 2 + (dot(rel, right) / depth) * fy;
    const y = height / 2 - (dot(rel, up) / depth) * fy;
    return { x, y, depth };
  }

  /** Canvas pixel -> world-space ray through it. */
  rayThrough(x: number, y: number, width: number, height: number): Ray {
    const { forward, right, up } = this.basis();
    const fy = height / 2 / Math.tan(this.fovY / 2);
    const dir = add(
      forward,
      add(scale(right, (x - width / 2) / fy), scale(up, (height / 2 - y) / fy)),
    );
    return { origin: this.position, direction: normalize(dir) };
  }
}
