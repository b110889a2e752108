// Keyboard piloting: WASD strafe, R/F climb/descend, Q/E yaw.
// Axes are body-frame; diagonal combinations stay per-axis (the server clamps
// per axis too, so no vector normalization happens anywhere).

import type { ControlCommand } from "./protocol.js";

export function keyboardToCommand(
  pressed: ReadonlySet<string>,
  vMax: number,
  wMax: number,
): ControlCommand {
  let vx = 0;
  let vy = 0;
  let vz = 0;
  let wz = 0;
  if (pressed.has("KeyW")) vx += vMax;
  if (pressed.has("KeyS")) vx -= vMax;
  if (pressed.has("KeyA")) vy += vMax;
  if (pressed.has("KeyD")) vy -= vMax;
  if (pressed.has("KeyR")) vz += vMax;
  if (pressed.has("KeyF")) vz -= vMax;
  if (pressed.has("KeyQ")) wz += wMax;
  if (pressed.has("KeyE")) wz -= wMax;
  return { vx, vy, vz, wz };
}

/** Track currently held keys on a DOM target; returns a detach function. */
export function attachKeyTracker(target: Window | HTMLElement, pressed: Set<string>): () => void {
  const down = (ev: Event) => pressed.add((ev as KeyboardEvent).code);
  const up = (ev: Event) => pressed.delete((ev as KeyboardEvent).code);
  const blur = () => pressed.clear();
  target.addEventListener("keydown", down);
  target.addEventListener("keyup", up);
  target.addEventListener("blur", blur);
  return () => {
    target.removeEventListener("keydown", down);
    target.removeEventListener("keyup", up);
    target.removeEventListener("blur", blur);
  };
}
