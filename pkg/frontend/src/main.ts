// Browser entry point: connect, render at the display rate, pilot at 20 Hz.

import { attachKeyTracker, keyboardToCommand } from "./keyboard.js";
import { MatchClient } from "./net.js";
import type { Role } from "./protocol.js";
import { drawScene } from "./render.js";
import { ViewModel } from "./viewmodel.js";

const CONTROL_HZ = 20;
const DEFAULT_V_MAX = 1.0;
const PILOT_YAW_RATE = 1.5; // rad/s; full yaw authority is unflyable by hand

function query(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

function main(): void {
  const canvas = document.getElementById("arena") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");

  const role = (query("role", "pilot") === "spectator" ? "spectator" : "pilot") as Role;
  const server = query(
    "server",
    `${window.location.protocol === "https:" ? "wss" : "ws"}://${window.location.host}/ws`,
  );
  const vMax = Number(query("vmax", String(DEFAULT_V_MAX)));

  const vm = new ViewModel();
  vm.role = role;
  const client = new MatchClient(server, role, query("name", "pilot-ui"));
  client.onFrame((frame) => vm.ingest(frame, performance.now()));

  const pressed = new Set<string>();
  attachKeyTracker(window, pressed);
  window.addEventListener("keydown", (ev) => {
    if (ev.code === "Space" && role === "pilot") client.sendReset();
  });

  client
    .connect()
    .then(() => {
      if (role === "pilot") {
        setInterval(() => {
          client.sendControl(keyboardToCommand(pressed, vMax, PILOT_YAW_RATE));
        }, 1000 / CONTROL_HZ);
      }
    })
    .catch((err) => {
      vm.lastError = String(err);
    });

  const redraw = () => {
    const now = performance.now();
    const world = vm.interpolated(now);
    if (vm.latest && world) {
      const banner = vm.lastOutcome && vm.lastOutcome.episode >= vm.latest.episode - 1
        ? `episode ${vm.lastOutcome.episode}: ${vm.lastOutcome.result}`
        : null;
      const hud =
        `${role} | episode ${vm.latest.episode} | tick ${vm.latest.tick} | ` +
        `runner SR ${(vm.ledger.sr_runner * 100).toFixed(1)}% over ${vm.ledger.episodes}` +
        (vm.lastError ? ` | ${vm.lastError}` : "");
      drawScene(ctx, canvas.width, canvas.height, {
        frame: vm.latest,
        runner: world.runner,
        chasers: world.chasers,
        banner,
        connectionLost: vm.connectionLost(now),
        hud,
      });
    }
    requestAnimationFrame(redraw);
  };
  requestAnimationFrame(redraw);
}

main();
