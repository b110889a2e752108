// Top-down arena view plus a per-drone altitude strip.
// Color scheme: white runner, blue chasers, red target box.

import type { StateFrame } from "./protocol.js";
import type { InterpolatedDrone } from "./viewmodel.js";

export interface Viewport {
  scale: number; // pixels per metre
  offsetX: number;
  offsetY: number;
  worldLength: number; // arena y extent, for the screen-space flip
}

export const ARENA_MARGIN_PX = 20;
export const STRIP_WIDTH_PX = 90;

/** Fit the arena floor into the canvas, leaving room for the altitude strip. */
export function fitViewport(
  bounds: [number, number, number],
  canvasWidth: number,
  canvasHeight: number,
): Viewport {
  const usableW = canvasWidth - STRIP_WIDTH_PX - 2 * ARENA_MARGIN_PX;
  const usableH = canvasHeight - 2 * ARENA_MARGIN_PX;
  const scale = Math.min(usableW / bounds[0], usableH / bounds[1]);
  return {
    scale,
    offsetX: ARENA_MARGIN_PX,
    offsetY: ARENA_MARGIN_PX,
    worldLength: bounds[1],
  };
}

/** World floor position (metres) to canvas pixels; y grows upward in world. */
export function worldToCanvas(vp: Viewport, x: number, y: number): [number, number] {
  return [vp.offsetX + x * vp.scale, vp.offsetY + (vp.worldLength - y) * vp.scale];
}

export interface Scene {
  frame: StateFrame;
  runner: InterpolatedDrone;
  chasers: InterpolatedDrone[];
  banner: string | null;
  connectionLost: boolean;
  hud: string;
}

const COLORS = {
  runner: "#ffffff",
  chaser: "#3b82f6",
  deadChaser: "#6b7280",
  target: "#dc2626",
  wall: "#d1d5db",
  floor: "#111827",
};

export function drawScene(ctx: CanvasRenderingContext2D, width: number, height: number, scene: Scene): void {
  const { frame } = scene;
  const vp = fitViewport(frame.bounds, width, height);
  ctx.fillStyle = COLORS.floor;
  ctx.fillRect(0, 0, width, height);

  // arena outline
  const [x0, y0] = worldToCanvas(vp, 0, frame.bounds[1]);
  ctx.strokeStyle = COLORS.wall;
  ctx.lineWidth = 2;
  ctx.strokeRect(x0, y0, frame.bounds[0] * vp.scale, frame.bounds[1] * vp.scale);

  // target box footprint
  const targetSize = 0.2 * vp.scale;
  const [tx, ty] = worldToCanvas(vp, frame.target[0], frame.target[1]);
  ctx.fillStyle = COLORS.target;
  ctx.fillRect(tx - targetSize / 2, ty - targetSize / 2, targetSize, targetSize);

  const drone = (d: InterpolatedDrone, color: string) => {
    const [px, py] = worldToCanvas(vp, d.x, d.y);
    const r = 0.15 * vp.scale;
    ctx.beginPath();
    ctx.arc(px, py, r, 0, Math.PI * 2);
    ctx.fillStyle = color;
    ctx.fill();
    // heading tick
    ctx.beginPath();
    ctx.moveTo(px, py);
    ctx.lineTo(px + Math.cos(d.psi) * r * 1.8, py - Math.sin(d.psi) * r * 1.8);
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.stroke();
  };

  for (const c of scene.chasers) drone(c, c.alive ? COLORS.chaser : COLORS.deadChaser);
  drone(scene.runner, COLORS.runner);

  drawAltitudeStrip(ctx, width, height, scene, vp);

  ctx.fillStyle = "#e5e7eb";
  ctx.font = "13px monospace";
  ctx.fillText(scene.hud, ARENA_MARGIN_PX, height - 6);

  if (scene.banner) {
    ctx.font = "bold 28px sans-serif";
    ctx.fillStyle = "#fbbf24";
    ctx.fillText(scene.banner, ARENA_MARGIN_PX + 10, ARENA_MARGIN_PX + 34);
  }
  if (scene.connectionLost) {
    ctx.fillStyle = "rgba(17, 24, 39, 0.8)";
    ctx.fillRect(0, 0, width, height);
    ctx.fillStyle = "#f87171";
    ctx.font = "bold 24px sans-serif";
    ctx.fillText("connection lost", width / 2 - 90, height / 2);
  }
}

function drawAltitudeStrip(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  scene: Scene,
  vp: Viewport,
): void {
  const stripX = width - STRIP_WIDTH_PX + 10;
  const top = ARENA_MARGIN_PX;
  const stripH = height - 2 * ARENA_MARGIN_PX;
  const ceiling = scene.frame.bounds[2];
  const bars = [
    { z: scene.runner.z, color: COLORS.runner },
    ...scene.chasers.map((c) => ({ z: c.z, color: c.alive ? COLORS.chaser : COLORS.deadChaser })),
    { z: scene.frame.target[2], color: COLORS.target },
  ];
  const barW = (STRIP_WIDTH_PX - 20) / bars.length;
  bars.forEach((bar, i) => {
    const x = stripX + i * barW;
    ctx.strokeStyle = COLORS.wall;
    ctx.lineWidth = 1;
    ctx.strokeRect(x, top, barW - 3, stripH);
    const frac = Math.min(1, Math.max(0, bar.z / ceiling));
    const y = top + (1 - frac) * stripH;
    ctx.fillStyle = bar.color;
    ctx.fillRect(x, y - 3, barW - 3, 6);
  });
}
