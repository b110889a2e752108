"""Experiment harness: fixed-placement matches, parameter sweeps, geometry
heatmaps, an inference-latency benchmark and deterministic trace replay.

Policies are referenced by name ("random", "pid", "apf", "policy:<path>")
or passed directly as callables.  Every episode derives its own random
stream from (seed, episode index), so per-episode results do not depend on
evaluation order or parallelism.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import arena, baselines, policy
from .arena import EpisodeState, Outcome, RewardWeights, WorldConfig
from .dynamics import AgentState, ControlCommand
from .errors import ConfigurationError, DivergenceError, InvalidInputError
from .policy import PolicyParameters

# geometry-mode anchors: runner near one wall looking across the arena, the
# line of symmetry pointing along +y
GEOMETRY_RUNNER = np.array([2.5, 1.0, 1.5])
GEOMETRY_TARGET = np.array([2.5, 4.0, 1.5])
TABLE3_TARGET = np.array([1.0, 3.5, 0.5])
TABLE3_RUNNER = np.array([1.0, 0.0, 0.2])
PLACEMENT_NOISE_RADIUS = 0.2


@dataclass(frozen=True, slots=True)
class MatchSpec:
    runner: str | object = "apf"
    chaser: str | object = "random"
    episodes: int = 200
    placement: str = "random"            # "random" | "fixed_table3" | "geometry"
    geometry_angle_deg: float = 60.0
    geometry_radius: float = 1.0
    relative_speed: float = 1.0          # runner v_max over chaser v_max (chaser fixed at 1)
    n_chasers: int = 2
    seed: int = 0
    world: WorldConfig | None = None
    weights: RewardWeights = field(default_factory=RewardWeights)

    def validate(self) -> None:
        if self.episodes < 1:
            raise InvalidInputError("episodes must be >= 1")
        if self.relative_speed <= 0.0:
            raise InvalidInputError("relative speed must be positive")
        if self.placement not in ("random", "fixed_table3", "geometry"):
            raise InvalidInputError(f"unknown placement {self.placement!r}")

    def resolved_world(self) -> WorldConfig:
        base = self.world if self.world is not None else WorldConfig()
        cfg = replace(base, n_chasers=self.n_chasers,
                      v_max_chaser=1.0 if self.world is None else base.v_max_chaser,
                      v_max_runner=self.relative_speed * (1.0 if self.world is None
                                                          else base.v_max_chaser))
        cfg.validate()
        return cfg


@dataclass(slots=True)
class MatchResult:
    sr_runner: float
    sr_chaser: float
    timeout_rate: float
    mean_steps: float
    outcomes: list[Outcome]

    def counts(self) -> tuple[int, int, int]:
        r = sum(o is Outcome.REACHED_TARGET for o in self.outcomes)
        c = sum(o in (Outcome.CAPTURED, Outcome.RUNNER_WALL_CRASH) for o in self.outcomes)
        t = sum(o is Outcome.TIMEOUT for o in self.outcomes)
        return r, c, t


# --- policy references ---------------------------------------------------------

class NeuralRunnerPolicy:
    def __init__(self, params: PolicyParameters, deterministic: bool = True):
        self.params = params
        self.deterministic = deterministic

    def __call__(self, st: EpisodeState, world: WorldConfig,
                 rng: np.random.Generator) -> ControlCommand:
        obs = arena.runner_observation(st, world)
        mean, std = policy.forward_policy(self.params, obs)
        bounds = policy.default_bounds(world.v_max_runner, world.w_max)
        dist = policy.ActionDistribution(mean, std, bounds)
        return policy.sample_action(dist, rng, self.deterministic).command


class NeuralChaserPolicy:
    def __init__(self, params: PolicyParameters, deterministic: bool = True):
        self.params = params
        self.deterministic = deterministic

    def __call__(self, st: EpisodeState, i: int, world: WorldConfig,
                 rng: np.random.Generator) -> ControlCommand:
        obs = arena.chaser_observation(st, i, world)
        mean, std = policy.forward_policy(self.params, obs)
        bounds = policy.default_bounds(world.v_max_chaser, world.w_max)
        dist = policy.ActionDistribution(mean, std, bounds)
        return policy.sample_action(dist, rng, self.deterministic).command


class ApfRunnerPolicy:
    def __init__(self, cfg: baselines.ApfConfig | None = None):
        self.cfg = cfg or baselines.ApfConfig()

    def __call__(self, st: EpisodeState, world: WorldConfig,
                 rng: np.random.Generator) -> ControlCommand:
        live = [np.array([c.x, c.y, c.z])
                for i, c in enumerate(st.chasers) if st.alive[i]]
        return baselines.apf_navigation(
            np.array([st.runner.x, st.runner.y, st.runner.z]), st.runner.psi,
            st.target, live, self.cfg, world.v_max_runner)


class RandomRunnerPolicy:
    def __call__(self, st, world, rng) -> ControlCommand:
        return baselines.random_policy(rng, world.v_max_runner)


class RandomChaserPolicy:
    def __call__(self, st, i, world, rng) -> ControlCommand:
        return baselines.random_policy(rng, world.v_max_chaser)


class PidChaserPolicy:
    def __init__(self, cfg: baselines.PidConfig | None = None):
        self.cfg = cfg or baselines.PidConfig()

    def __call__(self, st: EpisodeState, i: int, world: WorldConfig,
                 rng: np.random.Generator) -> ControlCommand:
        obs = arena.chaser_observation(st, i, world)
        return baselines.pid_pursuit(obs, self.cfg, world.v_max_chaser)


def _load_policy_params(ref: str) -> PolicyParameters:
    params = policy.load_weights(ref.split(":", 1)[1])
    if not isinstance(params, PolicyParameters):
        raise ConfigurationError(f"{ref!r} is a value head, not a policy")
    return params


def resolve_runner_policy(ref):
    if not isinstance(ref, str):
        return ref
    if ref == "apf":
        return ApfRunnerPolicy()
    if ref == "random":
        return RandomRunnerPolicy()
    if ref.startswith("policy:"):
        return NeuralRunnerPolicy(_load_policy_params(ref))
    raise ConfigurationError(f"unknown runner policy ref {ref!r}")


def resolve_chaser_policy(ref):
    if not isinstance(ref, str):
        return ref
    if ref == "pid":
        return PidChaserPolicy()
    if ref == "random":
        return RandomChaserPolicy()
    if ref.startswith("policy:"):
        return NeuralChaserPolicy(_load_policy_params(ref))
    raise ConfigurationError(f"unknown chaser policy ref {ref!r}")


# --- placements ----------------------------------------------------------------

def _sphere_noise(rng: np.random.Generator, radius: float) -> np.ndarray:
    v = rng.standard_normal(3)
    v /= np.linalg.norm(v) + 1e-12
    return v * radius * float(rng.uniform(0.0, 1.0)) ** (1.0 / 3.0)


def _clamp_inside(p: np.ndarray, half: tuple[float, float, float],
                  cfg: WorldConfig) -> np.ndarray:
    lo = np.array([h + 1e-3 for h in half])
    hi = np.array(cfg.bounds) - lo
    return np.minimum(np.maximum(p, lo), hi)


def _heading(rng: np.random.Generator) -> float:
    return -float(rng.uniform(-math.pi, math.pi))


def spawn_for_placement(spec: MatchSpec, world: WorldConfig,
                        rng: np.random.Generator) -> EpisodeState:
    if spec.placement == "random":
        return arena.spawn_episode(world, rng)
    half_drone = tuple(c / 2.0 for c in world.drone_collider)
    half_target = (world.target_size / 2.0,) * 3
    if spec.placement == "fixed_table3":
        target = _clamp_inside(TABLE3_TARGET + _sphere_noise(rng, PLACEMENT_NOISE_RADIUS),
                               half_target, world)
        runner_p = _clamp_inside(TABLE3_RUNNER + _sphere_noise(rng, PLACEMENT_NOISE_RADIUS),
                                 half_drone, world)
        runner = AgentState(*runner_p, _heading(rng))
        chasers = []
        placed = [target, runner_p]
        margins = tuple(h + world.wall_margin for h in half_drone)
        for _ in range(world.n_chasers):
            p = arena.place_with_clearance(world, rng, margins, placed)
            placed.append(p)
            chasers.append(AgentState(*p, _heading(rng)))
        d0 = math.dist(tuple(target), tuple(runner_p))
        return EpisodeState(runner, chasers, target, 0, d0, [True] * world.n_chasers)
    # geometry: chasers mirrored about the runner-target line
    angle = math.radians(spec.geometry_angle_deg)
    r = spec.geometry_radius
    positions = []
    for sign in (1.0, -1.0):
        positions.append(GEOMETRY_RUNNER + np.array([
            sign * r * math.sin(angle), r * math.cos(angle), 0.0]))
    margins = tuple(h + world.wall_margin for h in half_drone)
    for p in positions:
        lo = np.array(margins)
        hi = np.array(world.bounds) - lo
        if np.any(p < lo) or np.any(p > hi):
            raise ConfigurationError(
                f"geometry cell (angle={spec.geometry_angle_deg}, radius={r}) "
                f"places a chaser outside the arena")
    runner_p = _clamp_inside(GEOMETRY_RUNNER + _sphere_noise(rng, PLACEMENT_NOISE_RADIUS),
                             half_drone, world)
    runner = AgentState(*runner_p, _heading(rng))
    chasers = [AgentState(*p, _heading(rng)) for p in positions]
    d0 = math.dist(tuple(GEOMETRY_TARGET), tuple(runner_p))
    return EpisodeState(runner, chasers, GEOMETRY_TARGET.copy(), 0, d0, [True, True])


# --- match loop ----------------------------------------------------------------

def _play_episode(spec: MatchSpec, world: WorldConfig, runner_policy, chaser_policy,
                  rng: np.random.Generator, trace: list[dict] | None = None
                  ) -> tuple[Outcome, int]:
    st = spawn_for_placement(spec, world, rng)
    t = 0
    while True:
        actions: list[ControlCommand | None] = [runner_policy(st, world, rng)]
        for i in range(len(st.chasers)):
            actions.append(chaser_policy(st, i, world, rng) if st.alive[i] else None)
        res = arena.step_env(st, actions, world, spec.weights, rng)
        st = res.state
        t += 1
        if trace is not None:
            trace.append(arena.trace_record(st, res.rewards, res.outcome, t))
        if res.done:
            return res.outcome, t


def run_match(spec: MatchSpec, trace_path: str | Path | None = None) -> MatchResult:
    """Play `spec.episodes` independent episodes and aggregate the outcomes."""
    spec.validate()
    world = spec.resolved_world()
    if spec.placement == "geometry" and spec.n_chasers != 2:
        raise InvalidInputError("geometry placement is defined for exactly two chasers")
    runner_policy = resolve_runner_policy(spec.runner)
    chaser_policy = resolve_chaser_policy(spec.chaser)
    root = np.random.SeedSequence(spec.seed)
    outcomes: list[Outcome] = []
    steps: list[int] = []
    writer = None
    if trace_path is not None:
        if not (isinstance(spec.runner, str) and isinstance(spec.chaser, str)):
            raise InvalidInputError("traces need named policy refs to be replayable")
        writer = Path(trace_path).open("w")
        header = {
            "kind": "trace_header",
            "format_version": 1,
            "seed": spec.seed,
            "episodes": spec.episodes,
            "placement": spec.placement,
            "geometry_angle_deg": spec.geometry_angle_deg,
            "geometry_radius": spec.geometry_radius,
            "relative_speed": spec.relative_speed,
            "n_chasers": spec.n_chasers,
            "runner": spec.runner,
            "chaser": spec.chaser,
            "world": _world_doc(world),
            "weights": {"c1": spec.weights.c1, "c2": spec.weights.c2,
                        "w1": spec.weights.w1, "d_eps": spec.weights.d_eps},
        }
        writer.write(arena.dump_trace_line(header) + "\n")
    try:
        for ss in root.spawn(spec.episodes):
            rng = np.random.default_rng(ss)
            trace: list[dict] | None = [] if writer is not None else None
            outcome, t = _play_episode(spec, world, runner_policy, chaser_policy, rng, trace)
            outcomes.append(outcome)
            steps.append(t)
            if writer is not None:
                for rec in trace:
                    writer.write(arena.dump_trace_line(rec) + "\n")
    finally:
        if writer is not None:
            writer.close()
    n = len(outcomes)
    sr_r = sum(o is Outcome.REACHED_TARGET for o in outcomes) / n
    sr_c = sum(o in (Outcome.CAPTURED, Outcome.RUNNER_WALL_CRASH) for o in outcomes) / n
    timeout = sum(o is Outcome.TIMEOUT for o in outcomes) / n
    return MatchResult(sr_r, sr_c, timeout, float(np.mean(steps)), outcomes)


def _world_doc(world: WorldConfig) -> dict:
    from dataclasses import asdict

    return asdict(world)


# --- sweeps and heatmap ----------------------------------------------------------

SPEED_SWEEP_GRID = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)


def speed_sweep(runner_ref, chaser_ref, speeds=SPEED_SWEEP_GRID, episodes: int = 200,
                seed: int = 0, n_chasers: int = 2,
                out_csv: str | Path | None = None) -> list[tuple[float, MatchResult]]:
    """Vary the runner/chaser top-speed ratio with the chaser pinned at 1 m/s."""
    rows = []
    for k, s in enumerate(speeds):
        if s <= 0.0:
            raise InvalidInputError("relative speeds must be positive")
        spec = MatchSpec(runner=runner_ref, chaser=chaser_ref, episodes=episodes,
                         relative_speed=float(s), n_chasers=n_chasers,
                         seed=seed + k)
        rows.append((float(s), run_match(spec)))
    if out_csv is not None:
        _write_csv(out_csv, ["relative_speed", "sr_runner", "sr_chaser", "timeout_rate",
                             "mean_steps"],
                   [[s, r.sr_runner, r.sr_chaser, r.timeout_rate, r.mean_steps]
                    for s, r in rows])
    return rows


def chaser_count_sweep(counts, world: WorldConfig, weights: RewardWeights,
                       tcfg, plan, seed: int = 0,
                       out_csv: str | Path | None = None) -> list[dict]:
    """Train (desk scale) and evaluate a full schedule per chaser count.

    Network input widths depend on the team size, so each count gets its own
    training run; the row reports the final head-to-head success rates.
    """
    from . import scheduler  # local import: scheduler already depends on this module's peers

    rows = []
    for k, n in enumerate(counts):
        if n < 1:
            raise InvalidInputError("chaser counts must be >= 1")
        w = replace(world, n_chasers=int(n))
        result = scheduler.run_ams_drl(w, weights, tcfg, plan,
                                       np.random.SeedSequence(seed + k))
        last = result.reports[-1]
        rows.append({"n_chasers": int(n), "sr_runner": last.sr_runner,
                     "sr_chaser": last.sr_chaser, "timeout_rate": last.timeout_rate,
                     "phases": len(result.reports) - 1,
                     "converged_ne": result.converged_ne})
    if out_csv is not None:
        _write_csv(out_csv, ["n_chasers", "sr_runner", "sr_chaser", "timeout_rate",
                             "phases", "converged_ne"],
                   [[r["n_chasers"], r["sr_runner"], r["sr_chaser"], r["timeout_rate"],
                     r["phases"], r["converged_ne"]] for r in rows])
    return rows


def geometry_heatmap(angles_deg, radii, episodes: int, runner_ref, chaser_ref,
                     seed: int = 0, out_csv: str | Path | None = None,
                     out_png: str | Path | None = None) -> dict:
    """Success-rate grid over mirrored chaser placements around the runner.

    Cells whose placement falls outside the arena are skipped and flagged.
    Every cell derives its own seed, so cell order does not matter.
    """
    grid = np.full((len(radii), len(angles_deg)), np.nan)
    skipped: list[tuple[float, float]] = []
    for ai, angle in enumerate(angles_deg):
        if not 0.0 < angle < 180.0:
            raise InvalidInputError("angles must lie strictly between 0 and 180 degrees")
        for ri, radius in enumerate(radii):
            # the seed is a function of the cell identity, not the grid order
            cell_key = [seed, int(round(angle * 1000)), int(round(radius * 1000))]
            cell_seed = int(np.random.SeedSequence(cell_key).generate_state(1)[0])
            spec = MatchSpec(runner=runner_ref, chaser=chaser_ref, episodes=episodes,
                             placement="geometry", geometry_angle_deg=float(angle),
                             geometry_radius=float(radius), seed=cell_seed)
            try:
                grid[ri, ai] = run_match(spec).sr_runner
            except ConfigurationError:
                skipped.append((float(angle), float(radius)))
    result = {"angles_deg": [float(a) for a in angles_deg],
              "radii": [float(r) for r in radii],
              "sr_runner": grid, "skipped": skipped}
    if out_csv is not None:
        rows = []
        for ri, radius in enumerate(radii):
            for ai, angle in enumerate(angles_deg):
                rows.append([angle, radius,
                             "" if math.isnan(grid[ri, ai]) else grid[ri, ai]])
        _write_csv(out_csv, ["angle_deg", "radius_m", "sr_runner"], rows)
    if out_png is not None:
        _render_heatmap(result, out_png)
    return result


def _render_heatmap(result: dict, out_png: str | Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    grid = result["sr_runner"]
    im = ax.imshow(grid, origin="lower", vmin=0.0, vmax=1.0, cmap="RdYlGn",
                   aspect="auto")
    ax.set_xticks(range(len(result["angles_deg"])),
                  [f"{a:g}" for a in result["angles_deg"]])
    ax.set_yticks(range(len(result["radii"])), [f"{r:g}" for r in result["radii"]])
    ax.set_xlabel("chaser angle from runner-target line (deg)")
    ax.set_ylabel("chaser radius from runner (m)")
    ax.set_title("runner success rate")
    for ri in range(grid.shape[0]):
        for ai in range(grid.shape[1]):
            if not math.isnan(grid[ri, ai]):
                ax.text(ai, ri, f"{grid[ri, ai]:.2f}", ha="center", va="center",
                        fontsize=8)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)


def _write_csv(path: str | Path, header: list[str], rows: list[list]) -> None:
    import csv

    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# --- latency benchmark ------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class LatencyStats:
    mean_ms: float
    std_ms: float
    p50_ms: float
    iterations: int


def bench_inference(params_or_ref, iterations: int, seed: int = 0,
                    warmup: int = 50) -> LatencyStats:
    """Wall-clock latency of one observation->action forward pass."""
    if iterations < 1:
        raise InvalidInputError("iterations must be >= 1")
    params = (_load_policy_params(params_or_ref) if isinstance(params_or_ref, str)
              else params_or_ref)
    rng = np.random.default_rng(seed)
    obs = rng.uniform(-2.0, 2.0, size=(warmup + iterations, params.obs_dim))
    for k in range(warmup):
        policy.forward_policy(params, obs[k])
    samples = np.empty(iterations)
    for k in range(iterations):
        t0 = time.perf_counter()
        policy.forward_policy(params, obs[warmup + k])
        samples[k] = time.perf_counter() - t0
    return LatencyStats(float(samples.mean() * 1e3), float(samples.std() * 1e3),
                        float(np.median(samples) * 1e3), iterations)


# --- replay -------------------------------------------------------------------------

def replay(trace_path: str | Path) -> int:
    """Re-simulate a recorded trace and verify it step for step.

    Returns the number of verified step records; raises DivergenceError with
    the first differing step and field otherwise.
    """
    lines = Path(trace_path).read_text().splitlines()
    if not lines:
        raise InvalidInputError("empty trace file")
    header = json.loads(lines[0])
    if header.get("kind") != "trace_header":
        raise InvalidInputError("trace does not start with a header record")
    world = arena.world_from_dict(header["world"])
    weights = RewardWeights(**header["weights"])
    spec = MatchSpec(runner=header["runner"], chaser=header["chaser"],
                     episodes=header["episodes"], placement=header["placement"],
                     geometry_angle_deg=header.get("geometry_angle_deg", 60.0),
                     geometry_radius=header.get("geometry_radius", 1.0),
                     relative_speed=header.get("relative_speed", 1.0),
                     n_chasers=header["n_chasers"], seed=header["seed"],
                     world=world, weights=weights)
    runner_policy = resolve_runner_policy(spec.runner)
    chaser_policy = resolve_chaser_policy(spec.chaser)
    root = np.random.SeedSequence(spec.seed)
    cursor = 1
    for ss in root.spawn(spec.episodes):
        rng = np.random.default_rng(ss)
        fresh: list[dict] = []
        _play_episode(spec, world, runner_policy, chaser_policy, rng, fresh)
        for rec in fresh:
            if cursor >= len(lines):
                raise DivergenceError("trace ends before the replay does", step=cursor)
            recorded = json.loads(lines[cursor])
            for key, value in rec.items():
                if recorded.get(key) != value:
                    raise DivergenceError(
                        f"replay diverged at record {cursor} field {key!r}",
                        step=cursor, field=key)
            cursor += 1
    if cursor != len(lines):
        raise DivergenceError("trace holds more records than the replay produced",
                              step=cursor)
    return cursor - 1
