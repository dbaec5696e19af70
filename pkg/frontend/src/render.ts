/** Canvas point-cloud renderer. Pure drawing; never mutates simulation
 * state — everything it shows came from a received state frame. */
import type { OrbitCamera } from "./camera.js";
import type { StateFrame } from "./protocol.js";
import { framePoints } from "./protocol.js";

export type ColorBy = "body" | "height" | "group";

export interface RenderOptions {
  pointSize: number;
  colorBy: ColorBy;
}

function heightColor(z: number, zMin: number, zMax: number): string {
  const t = zMax > zMin ? (z - zMin) / (zMax - zMin) : 0;
  const hue = 240 - 200 * t; // blue (low) to orange (high)
  return `hsl(${hue}, 80%, 55%)`;
}

export function drawFrame(
  ctx: CanvasRenderingContext2D,
  frame: StateFrame,
  camera: OrbitCamera,
  opts: RenderOptions,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  const points = framePoints(frame);
  if (points.length === 0) return;

  let zMin = Infinity;
  let zMax = -Infinity;
  for (const p of points) {
    if (p[2] < zMin) zMin = p[2];
    if (p[2] > zMax) zMax = p[2];
  }

  // painter's order: far points first
  const projected = points
    .map((p, i) => ({ p, i, proj: camera.project(p, width, height) }))
    .filter((e) => e.proj !== null)
    .sort((a, b) => b.proj!.depth - a.proj!.depth);

  for (const { p, proj } of projected) {
    const size = Math.max(1, opts.pointSize / proj!.depth);
    ctx.fillStyle =
      opts.colorBy === "height" ? heightColor(p[2], zMin, zMax) : "#4a90d9";
    ctx.beginPath();
    ctx.arc(proj!.x, proj!.y, size, 0, 2 * Math.PI);
    ctx.fill();
  }

  // effectors as crosshairs
  for (const eff of frame.effectors) {
    const proj = camera.project(eff.position, width, height);
    if (!proj) continue;
    ctx.strokeStyle = eff.gripper === "closed" ? "#d94a4a" : "#4ad96a";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(proj.x - 8, proj.y);
    ctx.lineTo(proj.x + 8, proj.y);
    ctx.moveTo(proj.x, proj.y - 8);
    ctx.lineTo(proj.x, proj.y + 8);
    ctx.stroke();
  }
}
