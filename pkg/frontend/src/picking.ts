/** Particle picking: nearest rendered point to a screen click. */
import type { OrbitCamera } from "./camera.js";
import type { Vec3 } from "./math.js";

export interface PickResult {
  index: number;
  point: Vec3;
  screenDistance: number;
}

/**
 * Find the particle whose projection is closest to the click, within a
 * screen-space radius (pixels). Returns null when nothing is close enough —
 * the caller surfaces that as a "no particle" miss.
 */
export function pickParticle(
  points: Vec3[],
  camera: OrbitCamera,
  clickX: number,
  clickY: number,
  width: number,
  height: number,
  radiusPx = 12,
): PickResult | null {
  let best: PickResult | null = null;
  for (let i = 0; i < points.length; i++) {
    const p = points[i]!;
    const proj = camera.project(p, width, height);
    if (!proj) continue;
    const d = Math.hypot(proj.x - clickX, proj.y - clickY);
    if (d <= radiusPx && (best === null || d < best.screenDistance)) {
      best = { index: i, point: p, screenDistance: d };
    }
  }
  return best;
}
