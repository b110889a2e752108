"""Pursuit-evasion arena: spawning, observations, rewards and the joint step.

One runner drone tries to reach a target box inside a walled room while N
chaser drones try to collide with it or push it into a wall.  Observations
are egocentric: every relative position is rotated into the observing
drone's heading frame so a policy acting in body-frame velocities sees a
consistent world regardless of its (unobserved) heading.  With heading
zero this reduces to plain world-frame position differences.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import (
    AgentState,
    ControlCommand,
    NoiseSpec,
    clamp_command,
    step_kinematic,
    world_to_body,
)
from .errors import ConfigurationError, ContractViolationError, InvalidInputError

_SPAWN_ATTEMPTS = 200


class Outcome(enum.Enum):
    RUNNING = "running"
    REACHED_TARGET = "reached"
    CAPTURED = "captured"
    RUNNER_WALL_CRASH = "wall"
    TIMEOUT = "timeout"


@dataclass(frozen=True, slots=True)
class WorldConfig:
    """Arena geometry, team size, kinematic limits and episode length."""

    bounds: tuple[float, float, float] = (5.0, 5.0, 3.0)
    n_chasers: int = 2
    drone_collider: tuple[float, float, float] = (0.30, 0.30, 0.05)
    target_size: float = 0.20
    arrival_mode: str = "collider"  # "collider" | "distance"
    arrival_threshold: float = 0.20
    dt: float = 0.05
    t_max: int = 1000
    v_max_runner: float = 1.0
    v_max_chaser: float = 1.0
    w_max: float = 20.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    spawn_clearance: float = 0.8
    wall_margin: float = 0.1
    normalize_observations: bool = False

    def validate(self) -> None:
        if any(b <= 0.0 for b in self.bounds):
            raise ConfigurationError("bounds must be positive")
        if self.n_chasers < 1:
            raise ConfigurationError("n_chasers must be >= 1")
        if any(c <= 0.0 for c in self.drone_collider) or self.target_size <= 0.0:
            raise ConfigurationError("collider dimensions must be positive")
        if self.arrival_mode not in ("collider", "distance"):
            raise ConfigurationError(f"unknown arrival_mode {self.arrival_mode!r}")
        if self.arrival_threshold <= 0.0 or self.spawn_clearance <= 0.0:
            raise ConfigurationError("thresholds must be positive")
        if self.dt <= 0.0 or self.t_max < 1:
            raise ConfigurationError("dt must be positive and t_max >= 1")
        if self.v_max_runner <= 0.0 or self.v_max_chaser <= 0.0 or self.w_max <= 0.0:
            raise ConfigurationError("velocity limits must be positive")

    def diagonal(self) -> float:
        return math.sqrt(sum(b * b for b in self.bounds))

    def v_max_for(self, agent_index: int) -> float:
        return self.v_max_runner if agent_index == 0 else self.v_max_chaser


@dataclass(frozen=True, slots=True)
class RewardWeights:
    """Terminal rewards, existential-penalty weight and chaser risk threshold."""

    c1: float = 1000.0
    c2: float = 1000.0
    w1: float = 10000.0
    d_eps: float = 0.5

    def validate(self) -> None:
        if self.c1 < 0.0 or self.c2 < 0.0 or self.w1 < 0.0 or self.d_eps < 0.0:
            raise ConfigurationError("reward weights must be non-negative")


@dataclass(slots=True)
class EpisodeState:
    """Full world snapshot: agents, target, step counter and alive flags."""

    runner: AgentState
    chasers: list[AgentState]
    target: np.ndarray
    step: int
    initial_runner_target_distance: float
    alive: list[bool]

    def n_alive(self) -> int:
        return sum(self.alive)


@dataclass(frozen=True, slots=True)
class EventSet:
    """Geometric events detected on one state; rewards are applied elsewhere."""

    arrival: bool
    capture: bool
    runner_wall: bool
    chaser_wall: tuple[int, ...]
    proximity: tuple[tuple[int, float], ...]  # (chaser index, distance to nearest live teammate)


@dataclass(slots=True)
class StepResult:
    state: EpisodeState
    rewards: np.ndarray  # index 0 runner, then one entry per chaser
    done: bool
    outcome: Outcome
    events: EventSet


def runner_success(outcome: Outcome) -> bool:
    if outcome is Outcome.RUNNING:
        raise ContractViolationError("success is undefined while the episode is running")
    return outcome is Outcome.REACHED_TARGET


def chaser_success(outcome: Outcome) -> bool:
    if outcome is Outcome.RUNNING:
        raise ContractViolationError("success is undefined while the episode is running")
    return outcome in (Outcome.CAPTURED, Outcome.RUNNER_WALL_CRASH)


def _drone_margins(cfg: WorldConfig) -> tuple[float, float, float]:
    return tuple(c / 2.0 + cfg.wall_margin for c in cfg.drone_collider)


def _sample_position(cfg: WorldConfig, rng: np.random.Generator,
                     margins: tuple[float, float, float]) -> np.ndarray:
    lo = np.array(margins)
    hi = np.array(cfg.bounds) - lo
    return rng.uniform(lo, hi)


def place_with_clearance(cfg: WorldConfig, rng: np.random.Generator, margins, placed: list[np.ndarray]) -> np.ndarray:
    for _ in range(_SPAWN_ATTEMPTS):
        p = _sample_position(cfg, rng, margins)
        if all(float(np.linalg.norm(p - q)) >= cfg.spawn_clearance for q in placed):
            return p
    raise ConfigurationError(
        f"could not place an object with clearance {cfg.spawn_clearance} "
        f"after {_SPAWN_ATTEMPTS} attempts")


def spawn_episode(cfg: WorldConfig, rng: np.random.Generator,
                  n_chasers: int | None = None) -> EpisodeState:
    """Uniformly place target, runner and chasers with pairwise clearance.

    ``n_chasers`` overrides the configured team size (0 spawns no chasers,
    used by the cold-start stage).
    """
    n = cfg.n_chasers if n_chasers is None else n_chasers
    if n > cfg.n_chasers:
        raise ConfigurationError("cannot spawn more chasers than the configured team size")
    drone_m = _drone_margins(cfg)
    target_m = tuple(cfg.target_size / 2.0 + cfg.wall_margin for _ in range(3))
    placed: list[np.ndarray] = []
    target = place_with_clearance(cfg, rng, target_m, placed)
    placed.append(target)
    runner_p = place_with_clearance(cfg, rng, drone_m, placed)
    placed.append(runner_p)
    runner = AgentState(runner_p[0], runner_p[1], runner_p[2],
                        _uniform_heading(rng))
    chasers = []
    for _ in range(n):
        p = place_with_clearance(cfg, rng, drone_m, placed)
        placed.append(p)
        chasers.append(AgentState(p[0], p[1], p[2], _uniform_heading(rng)))
    d0 = math.dist(tuple(target), tuple(runner_p))
    return EpisodeState(runner, chasers, target, 0, d0, [True] * n)


def _uniform_heading(rng: np.random.Generator) -> float:
    # uniform over (-pi, pi]
    return -float(rng.uniform(-math.pi, math.pi))


def _push_relative(vals: list, tx: float, ty: float, tz: float,
                   observer: AgentState) -> None:
    bx, by = world_to_body(tx - observer.x, ty - observer.y, observer.psi)
    vals.append(bx)
    vals.append(by)
    vals.append(tz - observer.z)


def sentinel_vector(cfg: WorldConfig) -> np.ndarray:
    """Constant 'far away' substitute for absent or deactivated chasers."""
    return np.array(cfg.bounds)


def runner_observation(st: EpisodeState, cfg: WorldConfig) -> np.ndarray:
    """Egocentric [target-relative, chaser-relative...] vector of length 3(N+1)."""
    n = cfg.n_chasers
    if len(st.chasers) > n:
        raise InvalidInputError("state holds more chasers than the configured team size")
    vals: list[float] = []
    _push_relative(vals, st.target[0], st.target[1], st.target[2], st.runner)
    for slot in range(n):
        if slot < len(st.chasers) and st.alive[slot]:
            c = st.chasers[slot]
            _push_relative(vals, c.x, c.y, c.z, st.runner)
        else:
            vals.extend(cfg.bounds)
    obs = np.array(vals)
    if cfg.normalize_observations:
        obs /= cfg.diagonal()
    return obs


def chaser_observation(st: EpisodeState, i: int, cfg: WorldConfig) -> np.ndarray:
    """Egocentric [teammate-relatives (ascending j != i), runner-relative] of length 3N."""
    n = cfg.n_chasers
    if i < 0 or i >= len(st.chasers):
        raise InvalidInputError(f"chaser index {i} out of range")
    me = st.chasers[i]
    vals: list[float] = []
    for j in range(n):
        if j == i:
            continue
        if j < len(st.chasers) and st.alive[j]:
            c = st.chasers[j]
            _push_relative(vals, c.x, c.y, c.z, me)
        else:
            vals.extend(cfg.bounds)
    _push_relative(vals, st.runner.x, st.runner.y, st.runner.z, me)
    obs = np.array(vals)
    if cfg.normalize_observations:
        obs /= cfg.diagonal()
    return obs


def _aabb_overlap(pa, a_dims, pb, b_dims) -> bool:
    return (abs(pa[0] - pb[0]) < (a_dims[0] + b_dims[0]) / 2.0
            and abs(pa[1] - pb[1]) < (a_dims[1] + b_dims[1]) / 2.0
            and abs(pa[2] - pb[2]) < (a_dims[2] + b_dims[2]) / 2.0)


def _outside_walls(s: AgentState, cfg: WorldConfig) -> bool:
    hx, hy, hz = (c / 2.0 for c in cfg.drone_collider)
    bx, by, bz = cfg.bounds
    return (s.x - hx < 0.0 or s.x + hx > bx
            or s.y - hy < 0.0 or s.y + hy > by
            or s.z - hz < 0.0 or s.z + hz > bz)


def detect_events(st: EpisodeState, cfg: WorldConfig) -> EventSet:
    """Collision and proximity events on the current state (alive agents only)."""
    runner_p = (st.runner.x, st.runner.y, st.runner.z)
    tgt_dims = (cfg.target_size,) * 3
    target_p = (float(st.target[0]), float(st.target[1]), float(st.target[2]))
    if cfg.arrival_mode == "collider":
        arrival = _aabb_overlap(runner_p, cfg.drone_collider, target_p, tgt_dims)
    else:
        arrival = math.dist(runner_p, target_p) <= cfg.arrival_threshold
    capture = False
    chaser_wall: list[int] = []
    for i, c in enumerate(st.chasers):
        if not st.alive[i]:
            continue
        if _aabb_overlap(runner_p, cfg.drone_collider, (c.x, c.y, c.z), cfg.drone_collider):
            capture = True
        if _outside_walls(c, cfg):
            chaser_wall.append(i)
    runner_wall = _outside_walls(st.runner, cfg)
    proximity: list[tuple[int, float]] = []
    live = [i for i in range(len(st.chasers)) if st.alive[i]]
    if len(live) > 1:
        for i in live:
            ci = st.chasers[i]
            d_min = min(
                math.dist((ci.x, ci.y, ci.z), (st.chasers[j].x, st.chasers[j].y, st.chasers[j].z))
                for j in live if j != i)
            proximity.append((i, d_min))
    return EventSet(arrival, capture, runner_wall, tuple(chaser_wall), tuple(proximity))


def step_env(st: EpisodeState, actions: list[ControlCommand | None], cfg: WorldConfig,
             weights: RewardWeights, rng: np.random.Generator | None) -> StepResult:
    """Advance the world one step and score every agent.

    ``actions`` holds the runner command first, then one entry per chaser;
    deactivated chasers must get ``None``.
    """
    n = len(st.chasers)
    if len(actions) != n + 1:
        raise ContractViolationError(f"expected {n + 1} action slots, got {len(actions)}")
    if actions[0] is None:
        raise ContractViolationError("the runner always acts")
    if st.step >= cfg.t_max:
        raise ContractViolationError("episode already ended at t_max")
    for i in range(n):
        given = actions[i + 1] is not None
        if given != st.alive[i]:
            raise ContractViolationError(
                f"chaser {i} is {'deactivated' if not st.alive[i] else 'alive'} "
                f"but {'received an action' if given else 'got none'}")

    runner_cmd = clamp_command(actions[0], cfg.v_max_runner, cfg.w_max)
    runner = step_kinematic(st.runner, runner_cmd, cfg.dt, cfg.noise, rng)
    chasers = []
    for i in range(n):
        if st.alive[i]:
            cmd = clamp_command(actions[i + 1], cfg.v_max_chaser, cfg.w_max)
            chasers.append(step_kinematic(st.chasers[i], cmd, cfg.dt, cfg.noise, rng))
        else:
            chasers.append(st.chasers[i])

    nxt = EpisodeState(runner, chasers, st.target, st.step + 1,
                       st.initial_runner_target_distance, list(st.alive))
    events = detect_events(nxt, cfg)

    rewards = np.zeros(n + 1)
    penalty = -weights.w1 / cfg.t_max
    rewards[0] += penalty
    for i in range(n):
        if nxt.alive[i]:
            rewards[i + 1] += penalty

    outcome = Outcome.RUNNING
    target_p = (float(nxt.target[0]), float(nxt.target[1]), float(nxt.target[2]))
    if events.arrival:
        d_t = math.dist((runner.x, runner.y, runner.z), target_p)
        rewards[0] += weights.c1 * (1.0 - d_t / nxt.initial_runner_target_distance)
        outcome = Outcome.REACHED_TARGET
    elif events.capture:
        rewards[0] -= weights.c2
        for i in range(n):
            if nxt.alive[i]:
                rewards[i + 1] += weights.c1
        outcome = Outcome.CAPTURED
    elif events.runner_wall:
        # the crash is credited to the pursuit: the team scores as on a capture
        rewards[0] -= weights.c2
        for i in range(n):
            if nxt.alive[i]:
                rewards[i + 1] += weights.c1
        outcome = Outcome.RUNNER_WALL_CRASH
    else:
        for i in events.chaser_wall:
            rewards[i + 1] -= weights.c2
            nxt.alive[i] = False
        for i, d_min in events.proximity:
            if nxt.alive[i] and d_min < weights.d_eps:
                rewards[i + 1] -= weights.c2
        if nxt.step >= cfg.t_max:
            d_t = math.dist((runner.x, runner.y, runner.z), target_p)
            rewards[0] += weights.c1 * (1.0 - d_t / nxt.initial_runner_target_distance)
            outcome = Outcome.TIMEOUT

    return StepResult(nxt, rewards, outcome is not Outcome.RUNNING, outcome, events)


def trace_record(st: EpisodeState, rewards: np.ndarray, outcome: Outcome, t: int) -> dict:
    """One JSONL trace record; schema {t, runner, chasers, target, rewards, outcome}."""
    return {
        "t": t,
        "runner": [st.runner.x, st.runner.y, st.runner.z, st.runner.psi],
        "chasers": [[c.x, c.y, c.z, c.psi] for c in st.chasers],
        "target": [float(v) for v in st.target],
        "rewards": [float(r) for r in rewards],
        "outcome": outcome.value,
    }


def dump_trace_line(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"), sort_keys=True)


def world_from_dict(d: dict) -> WorldConfig:
    """Rebuild a WorldConfig from its JSON dict form (tuples and NoiseSpec restored)."""
    kw = dict(d)
    kw["bounds"] = tuple(kw["bounds"])
    kw["drone_collider"] = tuple(kw["drone_collider"])
    noise = kw.get("noise")
    if isinstance(noise, dict):
        kw["noise"] = NoiseSpec(**noise)
    cfg = WorldConfig(**kw)
    cfg.validate()
    return cfg


def scaled_world(cfg: WorldConfig, v_max_runner: float, v_max_chaser: float,
                 n_chasers: int | None = None) -> WorldConfig:
    kw = {"v_max_runner": v_max_runner, "v_max_chaser": v_max_chaser}
    if n_chasers is not None:
        kw["n_chasers"] = n_chasers
    return replace(cfg, **kw)
