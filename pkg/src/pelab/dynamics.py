"""State-transition math for velocity-commanded drones.

The world frame has x/y spanning the floor and z up.  A drone's planar
heading ``psi`` rotates its body frame about z; linear velocity commands
are expressed in the body frame and mapped to world rates through
:func:`transition_matrix`.  The quaternion / point-mass helpers provide a
higher-fidelity cross-check mode and are not used by the training arena.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

GRAVITY_Z = 9.81


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.remainder(angle, math.tau)
    if wrapped <= -math.pi:
        wrapped += math.tau
    return wrapped


@dataclass(frozen=True, slots=True)
class AgentState:
    """Position (m) and heading (rad) of one drone."""

    x: float
    y: float
    z: float
    psi: float

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True, slots=True)
class ControlCommand:
    """Desired body-frame velocities: three linear (m/s) plus yaw rate (rad/s)."""

    vx_b: float
    vy_b: float
    vz_b: float
    wz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.vx_b, self.vy_b, self.vz_b, self.wz])


ZERO_COMMAND = ControlCommand(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True, slots=True)
class NoiseSpec:
    """Per-step process-noise standard deviations; all zero means deterministic."""

    sigma_x: float = 0.0
    sigma_y: float = 0.0
    sigma_z: float = 0.0
    sigma_psi: float = 0.0

    def any(self) -> bool:
        return (self.sigma_x > 0.0 or self.sigma_y > 0.0
                or self.sigma_z > 0.0 or self.sigma_psi > 0.0)


@dataclass(frozen=True, slots=True)
class Quaternion:
    """Scalar-first unit quaternion (attitude)."""

    q0: float
    q1: float
    q2: float
    q3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.q0, self.q1, self.q2, self.q3])

    def norm(self) -> float:
        return math.sqrt(self.q0 * self.q0 + self.q1 * self.q1
                         + self.q2 * self.q2 + self.q3 * self.q3)

    def normalized(self) -> "Quaternion":
        n = self.norm()
        if n < 1e-12:
            raise InvalidInputError("cannot normalize a near-zero quaternion")
        return Quaternion(self.q0 / n, self.q1 / n, self.q2 / n, self.q3 / n)


IDENTITY_QUATERNION = Quaternion(1.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True, slots=True)
class BodyRate:
    """Body angular rates (rad/s) about x, y, z."""

    wx: float
    wy: float
    wz: float


def _require_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise InvalidInputError(f"non-finite input component: {v!r}")


def clamp_command(cmd: ControlCommand, v_max: float, w_max: float) -> ControlCommand:
    """Clamp each linear component to [-v_max, v_max] and wz to [-w_max, w_max]."""
    if v_max <= 0.0 or w_max <= 0.0:
        raise InvalidInputError("v_max and w_max must be positive")
    _require_finite(cmd.vx_b, cmd.vy_b, cmd.vz_b, cmd.wz)
    return ControlCommand(
        min(max(cmd.vx_b, -v_max), v_max),
        min(max(cmd.vy_b, -v_max), v_max),
        min(max(cmd.vz_b, -v_max), v_max),
        min(max(cmd.wz, -w_max), w_max),
    )


def transition_matrix(psi: float) -> np.ndarray:
    """4x4 matrix mapping body-frame commands [vx, vy, vz, wz] to world rates."""
    _require_finite(psi)
    c, s = math.cos(psi), math.sin(psi)
    return np.array([
        [c, s, 0.0, 0.0],
        [-s, c, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])


def body_to_world(vx_b: float, vy_b: float, psi: float) -> tuple[float, float]:
    """Planar part of :func:`transition_matrix` applied to a body vector."""
    c, s = math.cos(psi), math.sin(psi)
    return c * vx_b + s * vy_b, -s * vx_b + c * vy_b


def world_to_body(dx: float, dy: float, psi: float) -> tuple[float, float]:
    """Inverse of :func:`body_to_world`: express a world-frame vector in the body frame."""
    c, s = math.cos(psi), math.sin(psi)
    return c * dx - s * dy, s * dx + c * dy


def step_kinematic(s: AgentState, cmd: ControlCommand, dt: float,
                   noise: NoiseSpec, rng: np.random.Generator | None) -> AgentState:
    """One Euler step of s' = s + g(s)u dt + w sqrt(dt); expects a pre-clamped command.

    Noise is scaled by sqrt(dt) so the per-unit-time variance does not depend
    on the integration step.  With an all-zero ``noise`` no random numbers are
    drawn and the transition is deterministic.
    """
    if dt <= 0.0:
        raise InvalidInputError("dt must be positive")
    wx, wy = body_to_world(cmd.vx_b, cmd.vy_b, s.psi)
    x = s.x + wx * dt
    y = s.y + wy * dt
    z = s.z + cmd.vz_b * dt
    psi = s.psi + cmd.wz * dt
    if noise.any():
        if rng is None:
            raise InvalidInputError("noise requested but no rng provided")
        sq = math.sqrt(dt)
        e = rng.standard_normal(4)
        x += noise.sigma_x * sq * e[0]
        y += noise.sigma_y * sq * e[1]
        z += noise.sigma_z * sq * e[2]
        psi += noise.sigma_psi * sq * e[3]
    return AgentState(x, y, z, wrap_angle(psi))


def skew_matrix(w: BodyRate) -> np.ndarray:
    """4x4 skew-symmetric body-rate matrix driving the quaternion kinematics."""
    return np.array([
        [0.0, -w.wx, -w.wy, -w.wz],
        [w.wx, 0.0, w.wz, -w.wy],
        [w.wy, -w.wz, 0.0, w.wx],
        [w.wz, w.wy, -w.wx, 0.0],
    ])


def quaternion_derivative(q: Quaternion, w: BodyRate) -> np.ndarray:
    """q_dot = 0.5 * Omega(w) * q as a length-4 array."""
    return 0.5 * skew_matrix(w) @ q.as_array()


def integrate_quaternion(q: Quaternion, w: BodyRate, dt: float) -> Quaternion:
    """Euler step of the quaternion kinematics followed by renormalization."""
    if dt <= 0.0:
        raise InvalidInputError("dt must be positive")
    qn = q.as_array() + quaternion_derivative(q, w) * dt
    return Quaternion(*qn).normalized()


def rotation_matrix(q: Quaternion) -> np.ndarray:
    """Body-to-world rotation matrix of a unit quaternion."""
    q0, q1, q2, q3 = q.q0, q.q1, q.q2, q.q3
    return np.array([
        [1.0 - 2.0 * (q2 * q2 + q3 * q3), 2.0 * (q1 * q2 - q0 * q3), 2.0 * (q1 * q3 + q0 * q2)],
        [2.0 * (q1 * q2 + q0 * q3), 1.0 - 2.0 * (q1 * q1 + q3 * q3), 2.0 * (q2 * q3 - q0 * q1)],
        [2.0 * (q1 * q3 - q0 * q2), 2.0 * (q2 * q3 + q0 * q1), 1.0 - 2.0 * (q1 * q1 + q2 * q2)],
    ])


def point_mass_step(p: np.ndarray, v: np.ndarray, q: Quaternion, f: float,
                    dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Translational Euler step under mass-normalized thrust f along body z and gravity."""
    if dt <= 0.0:
        raise InvalidInputError("dt must be positive")
    thrust_world = rotation_matrix(q) @ np.array([0.0, 0.0, f])
    accel = thrust_world + np.array([0.0, 0.0, -GRAVITY_Z])
    p_next = p + v * dt
    v_next = v + accel * dt
    return p_next, v_next
