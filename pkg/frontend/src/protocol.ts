// Wire schema of the live-match server: JSON text frames over a websocket.

export interface DroneFrame {
  p: [number, number, number];
  psi: number;
}

export interface ChaserFrame extends DroneFrame {
  alive: boolean;
}

export interface StateFrame {
  type: "state";
  tick: number;
  episode: number;
  runner: DroneFrame;
  chasers: ChaserFrame[];
  target: [number, number, number];
  bounds: [number, number, number];
}

export interface OutcomeFrame {
  type: "outcome";
  episode: number;
  result: "reached" | "captured" | "wall" | "timeout";
  ledger: { sr_runner: number; episodes: number };
}

export interface ErrorFrame {
  type: "error";
  message: string;
}

export type ServerFrame = StateFrame | OutcomeFrame | ErrorFrame;

export interface ControlCommand {
  vx: number;
  vy: number;
  vz: number;
  wz: number;
}

export type Role = "pilot" | "spectator";

export function helloMessage(role: Role, name: string): string {
  return JSON.stringify({ type: "hello", role, name });
}

export function controlMessage(cmd: ControlCommand, seq: number): string {
  return JSON.stringify({ type: "control", vx: cmd.vx, vy: cmd.vy, vz: cmd.vz, wz: cmd.wz, seq });
}

export function resetMessage(): string {
  return JSON.stringify({ type: "reset" });
}

function isVec3(v: unknown): v is [number, number, number] {
  return Array.isArray(v) && v.length === 3 && v.every((x) => typeof x === "number");
}

/** Parse one server frame; returns null for anything malformed. */
export function parseServerFrame(text: string): ServerFrame | null {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const frame = data as Record<string, unknown>;
  if (frame.type === "state") {
    const runner = frame.runner as DroneFrame | undefined;
    if (!runner || !isVec3(runner.p) || typeof runner.psi !== "number") return null;
    if (!isVec3(frame.target) || !isVec3(frame.bounds)) return null;
    if (!Array.isArray(frame.chasers)) return null;
    for (const c of frame.chasers as ChaserFrame[]) {
      if (!isVec3(c.p) || typeof c.psi !== "number" || typeof c.alive !== "boolean") return null;
    }
    if (typeof frame.tick !== "number" || typeof frame.episode !== "number") return null;
    return frame as unknown as StateFrame;
  }
  if (frame.type === "outcome") {
    const ledger = frame.ledger as { sr_runner?: unknown; episodes?: unknown } | undefined;
    if (!ledger || typeof ledger.sr_runner !== "number" || typeof ledger.episodes !== "number") {
      return null;
    }
    if (typeof frame.result !== "string" || typeof frame.episode !== "number") return null;
    return frame as unknown as OutcomeFrame;
  }
  if (frame.type === "error") {
    return typeof frame.message === "string" ? (frame as unknown as ErrorFrame) : null;
  }
  return null;
}
