"""Closed-form comparison policies: random motion, proportional pursuit and
potential-field navigation.

All of them reason in world coordinates and rotate the resulting velocity
into the commanding drone's body frame, since that is what the arena's
action interface expects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ControlCommand, clamp_command, world_to_body
from .errors import InvalidInputError

REPULSIVE_DISTANCE_FLOOR = 0.01  # the 1/D terms blow up long after a capture would fire


@dataclass(frozen=True, slots=True)
class ApfConfig:
    xi: float = 2.0        # attractive gain
    zeta: float = 2.0      # repulsive gain
    d_star_g: float = 0.5  # attractive switch distance (m)
    d_star: float = 0.5    # repulsive safe distance (m)

    def validate(self) -> None:
        if min(self.xi, self.zeta, self.d_star_g, self.d_star) <= 0.0:
            raise InvalidInputError("APF gains and distances must be positive")


@dataclass(frozen=True, slots=True)
class PidConfig:
    kp: float = 2.0

    def validate(self) -> None:
        if self.kp <= 0.0:
            raise InvalidInputError("kp must be positive")


def random_policy(rng: np.random.Generator, v_max: float) -> ControlCommand:
    """Uniform linear velocity per axis, no yaw."""
    v = rng.uniform(-v_max, v_max, size=3)
    return ControlCommand(float(v[0]), float(v[1]), float(v[2]), 0.0)


def pid_pursuit(obs_chaser: np.ndarray, cfg: PidConfig, v_max: float) -> ControlCommand:
    """Proportional chase of the runner-relative vector (last three obs entries).

    Chaser observations are egocentric, so the gain acts directly in the
    body frame; clamping is per axis.
    """
    rel = np.asarray(obs_chaser, dtype=float)[-3:]
    cmd = ControlCommand(cfg.kp * float(rel[0]), cfg.kp * float(rel[1]),
                         cfg.kp * float(rel[2]), 0.0)
    return clamp_command(cmd, v_max, 1.0)


def apf_attractive_gradient(p_r: np.ndarray, p_g: np.ndarray, cfg: ApfConfig) -> np.ndarray:
    """Gradient of the attractive potential: quadratic near, conic far."""
    p_r = np.asarray(p_r, dtype=float)
    p_g = np.asarray(p_g, dtype=float)
    diff = p_r - p_g
    d = float(np.linalg.norm(diff))
    if d <= cfg.d_star_g:
        return cfg.xi * diff
    return cfg.d_star_g * cfg.xi * diff / d


def apf_repulsive_gradient(p_r: np.ndarray, chaser_positions: list[np.ndarray] | np.ndarray,
                           cfg: ApfConfig) -> np.ndarray:
    """Gradient of the repulsive potential of the nearest chaser; zero beyond d_star."""
    p_r = np.asarray(p_r, dtype=float)
    positions = [np.asarray(c, dtype=float) for c in chaser_positions]
    if not positions:
        return np.zeros(3)
    dists = [float(np.linalg.norm(p_r - c)) for c in positions]
    nearest = int(np.argmin(dists))
    d = max(dists[nearest], REPULSIVE_DISTANCE_FLOOR)
    if d > cfg.d_star:
        return np.zeros(3)
    grad_d = (p_r - positions[nearest]) / d
    return cfg.zeta * (1.0 / cfg.d_star - 1.0 / d) * (1.0 / (d * d)) * grad_d


def apf_attractive_potential(p_r: np.ndarray, p_g: np.ndarray, cfg: ApfConfig) -> float:
    d = float(np.linalg.norm(np.asarray(p_r, dtype=float) - np.asarray(p_g, dtype=float)))
    if d <= cfg.d_star_g:
        return 0.5 * cfg.xi * d * d
    return cfg.d_star_g * cfg.xi * d - 0.5 * cfg.xi * cfg.d_star_g ** 2


def apf_repulsive_potential(p_r: np.ndarray, chaser_positions, cfg: ApfConfig) -> float:
    positions = [np.asarray(c, dtype=float) for c in chaser_positions]
    if not positions:
        return 0.0
    d = max(min(float(np.linalg.norm(np.asarray(p_r, dtype=float) - c)) for c in positions),
            REPULSIVE_DISTANCE_FLOOR)
    if d > cfg.d_star:
        return 0.0
    return 0.5 * cfg.zeta * (1.0 / d - 1.0 / cfg.d_star) ** 2


def apf_navigation(p_r: np.ndarray, psi_r: float, p_g: np.ndarray,
                   chaser_positions, cfg: ApfConfig, v_max: float) -> ControlCommand:
    """Descend the combined potential: F = -(grad U_att + grad U_rep)."""
    force = -(apf_attractive_gradient(p_r, p_g, cfg)
              + apf_repulsive_gradient(p_r, chaser_positions, cfg))
    bx, by = world_to_body(float(force[0]), float(force[1]), psi_r)
    cmd = ControlCommand(bx, by, float(force[2]), 0.0)
    return clamp_command(cmd, v_max, 1.0)
