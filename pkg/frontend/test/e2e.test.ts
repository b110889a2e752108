// Manual-loop end to end: a scripted pilot (replayed key sequence) flies a
// full episode against the proportional-pursuit chasers on the real match
// server; the session ledger must record exactly one outcome.

import { spawn, type ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { WebSocket as WsWebSocket } from "ws";
import { keyboardToCommand } from "../src/keyboard.js";
import { MatchClient, type SocketLike } from "../src/net.js";
import type { OutcomeFrame } from "../src/protocol.js";

const PORT = 8971;
let serverProcess: ChildProcess;

async function waitForHealth(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`http://127.0.0.1:${PORT}/healthz`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("match server did not come up");
}

beforeAll(async () => {
  serverProcess = spawn(
    "python3",
    ["-m", "pelab.cli", "serve", "--port", String(PORT), "--runner", "manual",
     "--chaser", "pid", "--seed", "5", "--tick-hz", "100"],
    { stdio: "ignore" },
  );
  await waitForHealth(20000);
});

afterAll(async () => {
  serverProcess.kill();
  await new Promise((r) => setTimeout(r, 300));
});

const nodeSocketFactory = (url: string) => new WsWebSocket(url) as unknown as SocketLike;

describe("manual loop", () => {
  it("a replayed key sequence completes one scored episode", async () => {
    const client = new MatchClient(`ws://127.0.0.1:${PORT}/ws`, "pilot", "scripted", nodeSocketFactory);
    let outcome: OutcomeFrame | null = null;
    client.onFrame((frame) => {
      if (frame.type === "outcome" && outcome === null) outcome = frame;
    });
    await client.connect();

    // replayed piloting: climb briefly, then hold full forward until the wall
    // or a chaser ends the episode
    const script: Array<Set<string>> = [
      ...Array(10).fill(new Set(["KeyR"])),
      ...Array(2000).fill(new Set(["KeyW"])),
    ];
    for (const keys of script) {
      if (outcome) break;
      client.sendControl(keyboardToCommand(keys, 1.0, 1.0));
      await new Promise((r) => setTimeout(r, 10));
    }
    client.close();

    expect(outcome).not.toBeNull();
    const got = outcome as unknown as OutcomeFrame;
    expect(["reached", "captured", "wall", "timeout"]).toContain(got.result);
    expect(got.ledger.episodes).toBe(1);

    const summary = await (await fetch(`http://127.0.0.1:${PORT}/session`)).json();
    expect(summary.ledger.episodes).toBeGreaterThanOrEqual(1);
  });
});
