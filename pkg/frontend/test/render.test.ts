import { describe, expect, it } from "vitest";
import type { StateFrame } from "../src/protocol.js";
import { drawScene, fitViewport, worldToCanvas } from "../src/render.js";

const WIDTH = 760;
const HEIGHT = 600;

const FRAME: StateFrame = {
  type: "state",
  tick: 100,
  episode: 2,
  runner: { p: [2.5, 2.5, 1.5], psi: 0.3 },
  chasers: [
    { p: [1.0, 4.0, 1.0], psi: 0, alive: true },
    { p: [4.0, 1.0, 2.0], psi: 0, alive: false },
  ],
  target: [1.0, 3.5, 0.5],
  bounds: [5, 5, 3],
};

class MockContext {
  arcs: Array<{ x: number; y: number; r: number; fill: string }> = [];
  rects: Array<{ x: number; y: number; w: number; h: number; fill: string }> = [];
  fillStyle = "";
  strokeStyle = "";
  lineWidth = 0;
  font = "";
  private pendingArc: { x: number; y: number; r: number } | null = null;

  beginPath() {
    this.pendingArc = null;
  }
  arc(x: number, y: number, r: number) {
    this.pendingArc = { x, y, r };
  }
  fill() {
    if (this.pendingArc) this.arcs.push({ ...this.pendingArc, fill: String(this.fillStyle) });
  }
  fillRect(x: number, y: number, w: number, h: number) {
    this.rects.push({ x, y, w, h, fill: String(this.fillStyle) });
  }
  strokeRect() {}
  moveTo() {}
  lineTo() {}
  stroke() {}
  fillText() {}
}

function renderedScene() {
  const ctx = new MockContext();
  drawScene(ctx as unknown as CanvasRenderingContext2D, WIDTH, HEIGHT, {
    frame: FRAME,
    runner: { x: 2.5, y: 2.5, z: 1.5, psi: 0.3, alive: true },
    chasers: FRAME.chasers.map((c) => ({ x: c.p[0], y: c.p[1], z: c.p[2], psi: c.psi, alive: c.alive })),
    banner: null,
    connectionLost: false,
    hud: "",
  });
  return ctx;
}

describe("affine mapping", () => {
  it("keeps markers within one pixel of the mapping", () => {
    const ctx = renderedScene();
    const vp = fitViewport(FRAME.bounds, WIDTH, HEIGHT);

    const runner = ctx.arcs.find((a) => a.fill === "#ffffff");
    const [rx, ry] = worldToCanvas(vp, 2.5, 2.5);
    expect(runner).toBeDefined();
    expect(Math.abs(runner!.x - rx)).toBeLessThanOrEqual(1);
    expect(Math.abs(runner!.y - ry)).toBeLessThanOrEqual(1);

    const chaser = ctx.arcs.find((a) => a.fill === "#3b82f6");
    const [cx, cy] = worldToCanvas(vp, 1.0, 4.0);
    expect(Math.abs(chaser!.x - cx)).toBeLessThanOrEqual(1);
    expect(Math.abs(chaser!.y - cy)).toBeLessThanOrEqual(1);

    const target = ctx.rects.find((r) => r.fill === "#dc2626");
    const [tx, ty] = worldToCanvas(vp, 1.0, 3.5);
    expect(Math.abs(target!.x + target!.w / 2 - tx)).toBeLessThanOrEqual(1);
    expect(Math.abs(target!.y + target!.h / 2 - ty)).toBeLessThanOrEqual(1);
  });

  it("arena center lands at the viewport center", () => {
    const vp = fitViewport(FRAME.bounds, WIDTH, HEIGHT);
    const [px, py] = worldToCanvas(vp, 2.5, 2.5);
    expect(px).toBeCloseTo(vp.offsetX + 2.5 * vp.scale, 9);
    expect(py).toBeCloseTo(vp.offsetY + 2.5 * vp.scale, 9);
  });

  it("colors: white runner, blue chasers, grey when deactivated", () => {
    const ctx = renderedScene();
    expect(ctx.arcs.some((a) => a.fill === "#ffffff")).toBe(true);
    expect(ctx.arcs.some((a) => a.fill === "#3b82f6")).toBe(true);
    expect(ctx.arcs.some((a) => a.fill === "#6b7280")).toBe(true);
  });
});
