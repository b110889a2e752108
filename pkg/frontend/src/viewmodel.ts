// Client-side state: the last two frames for interpolation, the role, the
// ledger and connection health. Positions shown on screen always come from
// received frames; nothing is simulated locally.

import type { OutcomeFrame, Role, ServerFrame, StateFrame } from "./protocol.js";

export const STALE_AFTER_MS = 1000;

export interface InterpolatedDrone {
  x: number;
  y: number;
  z: number;
  psi: number;
  alive: boolean;
}

export class ViewModel {
  role: Role = "spectator";
  previous: StateFrame | null = null;
  latest: StateFrame | null = null;
  previousAt = 0;
  latestAt = 0;
  lastOutcome: OutcomeFrame | null = null;
  lastError: string | null = null;
  ledger = { sr_runner: 0, episodes: 0 };

  ingest(frame: ServerFrame, now: number): void {
    if (frame.type === "state") {
      // reset the interpolation pair across episode boundaries so the view
      // never sweeps drones from the old spawn to the new one
      if (this.latest && frame.episode !== this.latest.episode) {
        this.previous = null;
        this.latest = null;
      }
      this.previous = this.latest;
      this.previousAt = this.latestAt;
      this.latest = frame;
      this.latestAt = now;
    } else if (frame.type === "outcome") {
      this.lastOutcome = frame;
      this.ledger = frame.ledger;
    } else {
      this.lastError = frame.message;
    }
  }

  connectionLost(now: number): boolean {
    return this.latest === null || now - this.latestAt > STALE_AFTER_MS;
  }

  /** Blend factor between the two retained frames at wall time `now`. */
  private alpha(now: number): number {
    if (!this.previous || this.latestAt <= this.previousAt) return 1;
    const interval = this.latestAt - this.previousAt;
    return Math.min(1, Math.max(0, (now - this.latestAt) / interval + 1));
  }

  interpolated(now: number): { runner: InterpolatedDrone; chasers: InterpolatedDrone[] } | null {
    if (!this.latest) return null;
    const a = this.alpha(now);
    const prev = this.previous ?? this.latest;

    const blend = (p: number, q: number) => p + (q - p) * a;
    const drone = (
      before: { p: [number, number, number]; psi: number },
      after: { p: [number, number, number]; psi: number },
      alive: boolean,
    ): InterpolatedDrone => ({
      x: blend(before.p[0], after.p[0]),
      y: blend(before.p[1], after.p[1]),
      z: blend(before.p[2], after.p[2]),
      psi: after.psi,
      alive,
    });

    const chasers = this.latest.chasers.map((c, i) => {
      const b = prev.chasers[i] ?? c;
      return drone(b, c, c.alive);
    });
    return { runner: drone(prev.runner, this.latest.runner, true), chasers };
  }
}
