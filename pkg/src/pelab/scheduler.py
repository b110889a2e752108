"""Multi-stage adversarial training driver.

Stage 0 trains the runner alone (no chasers spawned).  From stage 1 on,
odd phases train the shared chaser policy against the frozen runner and
even phases train the runner against the frozen chasers.  After every
phase both sides are evaluated head to head; training stops when the two
success rates come within ``eta`` of each other (an operational
equilibrium) or after ``k_max`` phases.  The "direct" ablation trains both
sides simultaneously on the same budget.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import arena, policy, ppo
from .arena import Outcome, RewardWeights, WorldConfig
from .errors import InvalidInputError
from .policy import PolicyParameters, ValueParameters

RUNNER, CHASER, BOTH = ppo.RUNNER_SIDE, ppo.CHASER_SIDE, ppo.BOTH_SIDES


@dataclass(frozen=True, slots=True)
class StagePlan:
    """Budgets and stopping thresholds for the stage loop."""

    eta: float = 0.10                    # equilibrium threshold on |sr_r - sr_c|
    k_max: int = 10                      # maximum adversarial phases
    ws: int = 500                        # evaluation episodes per phase
    l_sw: int = 1000                     # convergence window, episodes
    min_episodes: int = 1_000_000        # episodes before the monitor may fire
    stage_episode_cap: int = 6_000_000   # hard per-stage budget
    improvement_eps: float = 120.0       # 1% of the w1 + c1 + c2 reward range
    checkpoints: int = 10
    reset_chaser_each_phase: bool = False
    # cold-start spawn curriculum: hold the runner-target spawn distance at
    # curriculum_start_distance for curriculum_hold_episodes, then anneal the
    # cap up to the arena diagonal until curriculum_episodes; 0 disables it
    # (plain uniform spawning throughout, as the evaluator always uses).
    # The discount rides the same schedule, from curriculum_gamma_low while
    # targets are close to the trainer's gamma once spawning is uniform:
    # a short horizon keeps the wall-crash penalty repulsive while aiming is
    # learned, a long one carries arrival credit across the full arena.
    curriculum_episodes: int = 0
    curriculum_hold_episodes: int = 0
    curriculum_start_distance: float = 0.9
    curriculum_gamma_low: float = 0.95

    def validate(self) -> None:
        # eta = 1.0 is the degenerate always-stop threshold
        if not 0.0 < self.eta <= 1.0:
            raise InvalidInputError("eta must lie in (0, 1]")
        if self.k_max < 1 or self.ws < 1 or self.l_sw < 1:
            raise InvalidInputError("k_max, ws and l_sw must be positive")
        if self.min_episodes < 0 or self.stage_episode_cap < 1:
            raise InvalidInputError("episode budgets must be positive")


def desk_plan(**overrides) -> StagePlan:
    """Shrunk budgets for desk-scale runs; thresholds keep their full-scale values."""
    base = dict(eta=0.10, k_max=10, ws=200, l_sw=1000, min_episodes=10_000,
                stage_episode_cap=200_000, improvement_eps=120.0, checkpoints=10,
                curriculum_episodes=15_000, curriculum_hold_episodes=5_000,
                curriculum_start_distance=0.5)
    base.update(overrides)
    return StagePlan(**base)


def curriculum_fraction(plan: StagePlan, episodes: int) -> float:
    """Progress through the cold-start curriculum: 0 during the hold, 1 when done."""
    if plan.curriculum_episodes <= 0:
        return 1.0
    span = max(1, plan.curriculum_episodes - plan.curriculum_hold_episodes)
    return min(1.0, max(0.0, episodes - plan.curriculum_hold_episodes) / span)


def curriculum_spawn_fn(plan: StagePlan, world: WorldConfig):
    """Spawn schedule for the cold start: begin with the target in arm's reach.

    While the cap is below the arena diagonal, spawning rejects placements
    whose runner-target distance exceeds the cap (drawing with a reduced
    clearance so near placements exist); the cap holds at
    ``curriculum_start_distance`` first, then anneals linearly.  After
    ``curriculum_episodes`` episodes spawning is exactly the uniform rule the
    evaluator uses.
    """
    diag = world.diagonal()
    start = plan.curriculum_start_distance
    near_cfg = replace(world, spawn_clearance=min(world.spawn_clearance, 0.4))

    def spawn(cfg, rng, n_chasers, episode_index):
        frac = curriculum_fraction(plan, episode_index)
        d_cap = start + (diag - start) * frac
        if frac >= 1.0:
            return arena.spawn_episode(cfg, rng, n_chasers)
        st = arena.spawn_episode(near_cfg, rng, n_chasers)
        for _ in range(200):
            if st.initial_runner_target_distance <= d_cap:
                break
            st = arena.spawn_episode(near_cfg, rng, n_chasers)
        return st

    return spawn


@dataclass(slots=True)
class PhaseReport:
    phase: int
    trained_side: str                       # "runner" | "chaser" | "both"
    episodes: int
    converged: bool
    sr_runner: float
    sr_chaser: float
    timeout_rate: float
    snapshots: list[str] = field(default_factory=list)
    mean_reward: float = 0.0
    chaser_wall_rate: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(slots=True)
class TrainResult:
    runner: PolicyParameters
    chaser: PolicyParameters | None
    runner_value: ValueParameters
    chaser_value: ValueParameters | None
    reports: list[PhaseReport]
    converged_ne: bool


def convergence_monitor(history: list[float] | np.ndarray, l_sw: int,
                        min_episodes: int, improvement_eps: float) -> bool:
    """True once the best recent rolling average stops beating the best before it.

    Rolling means use a window of ``l_sw`` episodes.  The best window mean
    over the last ``l_sw`` episodes is compared against the best window mean
    achieved before them; convergence additionally requires ``min_episodes``
    episodes of history.
    """
    history = np.asarray(history, dtype=float)
    n = history.shape[0]
    if n < max(min_episodes, 2 * l_sw):
        return False
    csum = np.concatenate(([0.0], np.cumsum(history)))
    window_means = (csum[l_sw:] - csum[:-l_sw]) / l_sw  # mean ending at episode l_sw..n
    recent_best = float(window_means[-l_sw:].max())
    prior_best = float(window_means[:-l_sw].max())
    return recent_best <= prior_best + improvement_eps


def _deterministic_command(params: PolicyParameters, obs: np.ndarray,
                           v_max: float, w_max: float):
    mean, std = policy.forward_policy(params, obs)
    bounds = policy.default_bounds(v_max, w_max)
    dist = policy.ActionDistribution(mean, std, bounds)
    return policy.sample_action(dist, None, deterministic=True).command


def _as_runner_policy(params_or_policy):
    if params_or_policy is None or callable(params_or_policy):
        return params_or_policy

    def act(st, world, rng):
        return _deterministic_command(params_or_policy,
                                      arena.runner_observation(st, world),
                                      world.v_max_runner, world.w_max)
    return act


def _as_chaser_policy(params_or_policy):
    if params_or_policy is None or callable(params_or_policy):
        return params_or_policy

    def act(st, i, world, rng):
        return _deterministic_command(params_or_policy,
                                      arena.chaser_observation(st, i, world),
                                      world.v_max_chaser, world.w_max)
    return act


def evaluate_success_rates(runner, chaser, ws: int, world: WorldConfig,
                           weights: RewardWeights,
                           rng_seed: int | np.random.SeedSequence,
                           n_chasers: int | None = None) -> tuple[float, float, float]:
    """Deterministic head-to-head evaluation over ``ws`` fresh episodes.

    ``runner``/``chaser`` are PolicyParameters (played with mean actions) or
    policy callables.
    """
    root = (rng_seed if isinstance(rng_seed, np.random.SeedSequence)
            else np.random.SeedSequence(rng_seed))
    n = world.n_chasers if n_chasers is None else n_chasers
    runner_policy = _as_runner_policy(runner)
    chaser_policy = _as_chaser_policy(chaser)
    wins_r = wins_c = timeouts = 0
    for ss in root.spawn(ws):
        rng = np.random.default_rng(ss)
        st = arena.spawn_episode(world, rng, n)
        while True:
            actions = [runner_policy(st, world, rng)]
            for i in range(len(st.chasers)):
                actions.append(chaser_policy(st, i, world, rng)
                               if st.alive[i] else None)
            res = arena.step_env(st, actions, world, weights, rng)
            st = res.state
            if res.done:
                if arena.runner_success(res.outcome):
                    wins_r += 1
                elif arena.chaser_success(res.outcome):
                    wins_c += 1
                else:
                    timeouts += 1
                break
    return wins_r / ws, wins_c / ws, timeouts / ws


class MetricsLogger:
    """JSONL metrics stream, one record per update."""

    def __init__(self, path: Path | None):
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def log(self, record: dict) -> None:
        if self.path is not None:
            with self.path.open("a") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")


def _snapshot(params: PolicyParameters, out_dir: Path | None, stage: int,
              side: str, tag: str, paths: list[str]) -> None:
    if out_dir is None:
        return
    stage_dir = out_dir / f"S{stage}"
    stage_dir.mkdir(parents=True, exist_ok=True)
    path = stage_dir / f"policy_{side}_{tag}.json"
    policy.save_weights(params, path)
    paths.append(str(path))


def _train_stage(stage: int, side: str, runner_params: PolicyParameters,
                 chaser_params: PolicyParameters | None,
                 values: dict[str, ValueParameters], world: WorldConfig,
                 weights: RewardWeights, tcfg: ppo.TrainerConfig, plan: StagePlan,
                 seed: np.random.SeedSequence, out_dir: Path | None,
                 metrics: MetricsLogger, n_chasers: int | None = None,
                 spawn_fn=None, frozen_chaser_fn=None
                 ) -> tuple[dict[str, PolicyParameters], dict[str, ValueParameters],
                            int, bool, list[str], dict]:
    """Train one side (or both) until the monitor fires or the stage cap is hit."""
    pool_seed, update_seed = seed.spawn(2)
    pool = ppo.EnvPool(world, weights, tcfg.num_envs, pool_seed, n_chasers, spawn_fn)
    update_rng = np.random.default_rng(update_seed)
    stage_cfg = replace(tcfg, max_episodes=plan.stage_episode_cap)

    trained = {RUNNER: runner_params, CHASER: chaser_params}
    opts = {s: ppo.OptimizerState.fresh(trained[s], values[s])
            for s in ((RUNNER, CHASER) if side == BOTH else (side,))}

    history: list[float] = []
    outcomes: list[Outcome] = []
    lengths: list[int] = []
    episodes = 0
    wall_crashes = 0
    converged = False
    # never declare convergence before the spawn curriculum has fully opened up
    min_episodes = plan.min_episodes
    if spawn_fn is not None:
        min_episodes = max(min_episodes, plan.curriculum_episodes + plan.l_sw)
    snapshot_paths: list[str] = []
    snapshot_every = max(1, plan.stage_episode_cap // plan.checkpoints)
    next_snapshot = snapshot_every
    best_window = -np.inf
    best_params = {s: trained[s].copy() for s in opts}

    while episodes < plan.stage_episode_cap:
        batches, stats = ppo.collect_rollouts(
            pool, side, trained[RUNNER], trained[CHASER], values, stage_cfg,
            update_rng, frozen_chaser_fn)
        episodes += stats.episodes
        history.extend(stats.episode_returns)
        outcomes.extend(stats.outcomes)
        lengths.extend(stats.episode_lengths)
        wall_crashes += stats.chaser_wall_crashes
        lr = ppo.lr_at(episodes, stage_cfg)
        update_cfg = stage_cfg
        if spawn_fn is not None and plan.curriculum_episodes > 0:
            frac = curriculum_fraction(plan, episodes)
            gamma_now = (plan.curriculum_gamma_low
                         + (stage_cfg.gamma - plan.curriculum_gamma_low) * frac)
            update_cfg = replace(stage_cfg, gamma=gamma_now)
        for s, batch in batches.items():
            new_p, new_v, ustats, opts[s] = ppo.ppo_update(
                trained[s], values[s], batch, update_cfg, lr, update_rng, opts[s])
            trained[s] = new_p
            values[s] = new_v
        recent = history[-plan.l_sw:]
        mean_recent = float(np.mean(recent)) if recent else 0.0
        n_out = max(1, len(stats.outcomes))
        metrics.log({
            "phase": stage, "side": side, "episodes": episodes,
            "global_step": episodes, "mean_reward": mean_recent,
            "episode_len": float(np.mean(stats.episode_lengths)) if stats.episode_lengths else 0.0,
            "policy_loss": ustats.policy_loss, "value_loss": ustats.value_loss,
            "entropy": ustats.entropy, "clip_fraction": ustats.clip_fraction,
            "approx_kl": ustats.approx_kl, "lr": ustats.lr,
            "reach_rate": sum(o is Outcome.REACHED_TARGET for o in stats.outcomes) / n_out,
            "capture_rate": sum(o is Outcome.CAPTURED for o in stats.outcomes) / n_out,
            "wall_rate": sum(o is Outcome.RUNNER_WALL_CRASH for o in stats.outcomes) / n_out,
            "timeout_rate": sum(o is Outcome.TIMEOUT for o in stats.outcomes) / n_out,
        })
        if len(history) >= plan.l_sw and mean_recent > best_window:
            best_window = mean_recent
            best_params = {s: trained[s].copy() for s in opts}
        while episodes >= next_snapshot:
            tag = f"{min(plan.checkpoints, next_snapshot // snapshot_every):02d}"
            for s in opts:
                _snapshot(trained[s], out_dir, stage, s, tag, snapshot_paths)
            next_snapshot += snapshot_every
        if convergence_monitor(history, plan.l_sw, min_episodes, plan.improvement_eps):
            converged = True
            break

    if not converged:
        # return the best snapshot seen rather than a possibly regressed tail
        for s in opts:
            trained[s] = best_params[s]
    for s in opts:
        _snapshot(trained[s], out_dir, stage, s, "final", snapshot_paths)
        if out_dir is not None:
            policy.save_weights(values[s], out_dir / f"S{stage}" / f"value_{s}_final.json")

    n_eps = max(1, len(outcomes))
    diag = {
        "mean_reward": float(np.mean(history[-plan.l_sw:])) if history else 0.0,
        "timeout_rate": sum(o is Outcome.TIMEOUT for o in outcomes) / n_eps,
        "episode_len": float(np.mean(lengths)) if lengths else 0.0,
        "chaser_wall_rate": wall_crashes / n_eps,
    }
    return trained, values, episodes, converged, snapshot_paths, diag


def run_cold_start(world: WorldConfig, weights: RewardWeights, tcfg: ppo.TrainerConfig,
                   plan: StagePlan, seed: int | np.random.SeedSequence,
                   out_dir: str | Path | None = None,
                   metrics: MetricsLogger | None = None
                   ) -> tuple[PolicyParameters, ValueParameters, PhaseReport]:
    """Stage 0: train the runner to navigate with no chasers in the world."""
    plan.validate()
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    init_seed, train_seed, eval_seed = root.spawn(3)
    out = Path(out_dir) if out_dir is not None else None
    metrics = metrics or MetricsLogger(out / "metrics.jsonl" if out else None)

    obs_dim = 3 * (world.n_chasers + 1)
    init_rng = np.random.default_rng(init_seed)
    bounds = policy.default_bounds(world.v_max_runner, world.w_max)
    runner = policy.init_params(obs_dim, 4, init_rng, bounds, tcfg.hidden_sizes)
    values = {RUNNER: policy.init_value_params(obs_dim, init_rng, tcfg.hidden_sizes),
              CHASER: None}

    spawn_fn = curriculum_spawn_fn(plan, world) if plan.curriculum_episodes > 0 else None
    trained, values, episodes, converged, snaps, diag = _train_stage(
        0, RUNNER, runner, None, values, world, weights, tcfg, plan,
        train_seed, out, metrics, n_chasers=0, spawn_fn=spawn_fn)
    sr_r, _, timeout_rate = evaluate_success_rates(
        trained[RUNNER], None, plan.ws, world, weights, eval_seed, n_chasers=0)
    report = PhaseReport(0, RUNNER, episodes, converged, sr_r, 0.0, timeout_rate,
                         snaps, diag["mean_reward"])
    return trained[RUNNER], values[RUNNER], report


def train_runner_versus(world: WorldConfig, weights: RewardWeights,
                        tcfg: ppo.TrainerConfig, plan: StagePlan,
                        seed: int | np.random.SeedSequence, chaser_policy,
                        out_dir: str | Path | None = None,
                        metrics: MetricsLogger | None = None
                        ) -> tuple[PolicyParameters, ValueParameters, PhaseReport]:
    """Single-stage runner training against a scripted pursuit policy.

    This realizes the one-stage learned-navigation baseline: same trainer and
    budgets as a cold start, but with the full chaser team present and driven
    by ``chaser_policy`` throughout.
    """
    plan.validate()
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    init_seed, train_seed, eval_seed = root.spawn(3)
    out = Path(out_dir) if out_dir is not None else None
    metrics = metrics or MetricsLogger(out / "metrics.jsonl" if out else None)

    obs_dim = 3 * (world.n_chasers + 1)
    init_rng = np.random.default_rng(init_seed)
    bounds = policy.default_bounds(world.v_max_runner, world.w_max)
    runner = policy.init_params(obs_dim, 4, init_rng, bounds, tcfg.hidden_sizes)
    values = {RUNNER: policy.init_value_params(obs_dim, init_rng, tcfg.hidden_sizes),
              CHASER: None}

    spawn_fn = curriculum_spawn_fn(plan, world) if plan.curriculum_episodes > 0 else None
    trained, values, episodes, converged, snaps, diag = _train_stage(
        0, RUNNER, runner, None, values, world, weights, tcfg, plan,
        train_seed, out, metrics, spawn_fn=spawn_fn, frozen_chaser_fn=chaser_policy)
    sr_r, sr_c, timeout_rate = evaluate_success_rates(
        trained[RUNNER], chaser_policy, plan.ws, world, weights, eval_seed)
    report = PhaseReport(0, RUNNER, episodes, converged, sr_r, sr_c, timeout_rate,
                         snaps, diag["mean_reward"])
    return trained[RUNNER], values[RUNNER], report


def run_phase(i: int, runner_params: PolicyParameters, chaser_params: PolicyParameters,
              runner_value: ValueParameters, chaser_value: ValueParameters,
              world: WorldConfig, weights: RewardWeights, tcfg: ppo.TrainerConfig,
              plan: StagePlan, seed: int | np.random.SeedSequence,
              out_dir: str | Path | None = None, metrics: MetricsLogger | None = None
              ) -> tuple[PolicyParameters, PolicyParameters, ValueParameters,
                         ValueParameters, PhaseReport]:
    """One adversarial phase: odd trains the chasers, even trains the runner."""
    if i < 1:
        raise InvalidInputError("adversarial phases start at 1")
    side = CHASER if i % 2 == 1 else RUNNER
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    train_seed, eval_seed = root.spawn(2)
    out = Path(out_dir) if out_dir is not None else None
    metrics = metrics or MetricsLogger(out / "metrics.jsonl" if out else None)

    values = {RUNNER: runner_value, CHASER: chaser_value}
    trained, values, episodes, converged, snaps, diag = _train_stage(
        i, side, runner_params, chaser_params, values, world, weights, tcfg,
        plan, train_seed, out, metrics)
    sr_r, sr_c, timeout_rate = evaluate_success_rates(
        trained[RUNNER], trained[CHASER], plan.ws, world, weights, eval_seed)
    report = PhaseReport(i, side, episodes, converged, sr_r, sr_c, timeout_rate,
                         snaps, diag["mean_reward"], diag.get("chaser_wall_rate", 0.0))
    return trained[RUNNER], trained[CHASER], values[RUNNER], values[CHASER], report


def _fresh_chaser(world: WorldConfig, tcfg: ppo.TrainerConfig,
                  rng: np.random.Generator) -> tuple[PolicyParameters, ValueParameters]:
    obs_dim = 3 * world.n_chasers
    bounds = policy.default_bounds(world.v_max_chaser, world.w_max)
    return (policy.init_params(obs_dim, 4, rng, bounds, tcfg.hidden_sizes),
            policy.init_value_params(obs_dim, rng, tcfg.hidden_sizes))


def _load_side(resume: Path, side: str, before_phase: int
               ) -> tuple[PolicyParameters, ValueParameters] | None:
    for stage in range(before_phase - 1, -1, -1):
        p_path = resume / f"S{stage}" / f"policy_{side}_final.json"
        v_path = resume / f"S{stage}" / f"value_{side}_final.json"
        if p_path.exists() and v_path.exists():
            return policy.load_weights(p_path), policy.load_weights(v_path)
    return None


def run_ams_drl(world: WorldConfig, weights: RewardWeights, tcfg: ppo.TrainerConfig,
                plan: StagePlan, seed: int | np.random.SeedSequence,
                out_dir: str | Path | None = None, start_phase: int = 0,
                resume_dir: str | Path | None = None) -> TrainResult:
    """Full schedule: cold start, then alternate phases until the success rates meet.

    Pass ``start_phase`` (the number of already-finished stages, stage 0
    included) plus ``resume_dir`` to continue an interrupted run.
    """
    world.validate()
    weights.validate()
    tcfg.validate()
    plan.validate()
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s0_seed, chaser_seed, *phase_seeds = root.spawn(2 + plan.k_max)
    out = Path(out_dir) if out_dir is not None else None
    metrics = MetricsLogger(out / "metrics.jsonl" if out else None)

    if start_phase == 0:
        runner, runner_value, report0 = run_cold_start(
            world, weights, tcfg, plan, s0_seed, out, metrics)
        reports = [report0]
        chaser, chaser_value = _fresh_chaser(world, tcfg, np.random.default_rng(chaser_seed))
    else:
        if resume_dir is None:
            raise InvalidInputError("resuming needs the previous run directory")
        resume = Path(resume_dir)
        loaded = _load_side(resume, RUNNER, start_phase)
        if loaded is None:
            raise InvalidInputError(f"no runner snapshot below phase {start_phase} in {resume}")
        runner, runner_value = loaded
        loaded_c = _load_side(resume, CHASER, start_phase)
        if loaded_c is not None:
            chaser, chaser_value = loaded_c
        else:
            chaser, chaser_value = _fresh_chaser(world, tcfg,
                                                 np.random.default_rng(chaser_seed))
        reports = []
        report_path = resume / "report.json"
        if report_path.exists():
            doc = json.loads(report_path.read_text())
            reports = [PhaseReport(**d) for d in doc["phases"]]

    converged_ne = False
    for i in range(max(1, start_phase), plan.k_max + 1):
        if plan.reset_chaser_each_phase and i % 2 == 1 and i > 1:
            chaser, chaser_value = _fresh_chaser(
                world, tcfg, np.random.default_rng(phase_seeds[i - 1].spawn(1)[0]))
        runner, chaser, runner_value, chaser_value, report = run_phase(
            i, runner, chaser, runner_value, chaser_value, world, weights,
            tcfg, plan, phase_seeds[i - 1], out, metrics)
        reports.append(report)
        if abs(report.sr_runner - report.sr_chaser) <= plan.eta:
            converged_ne = True
            break

    result = TrainResult(runner, chaser, runner_value, chaser_value, reports, converged_ne)
    if out is not None:
        write_report(result, out)
    return result


def run_direct(world: WorldConfig, weights: RewardWeights, tcfg: ppo.TrainerConfig,
               plan: StagePlan, seed: int | np.random.SeedSequence,
               out_dir: str | Path | None = None) -> TrainResult:
    """Ablation: both sides train simultaneously from scratch on one stage budget."""
    world.validate()
    weights.validate()
    tcfg.validate()
    plan.validate()
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    init_seed, train_seed, eval_seed = root.spawn(3)
    out = Path(out_dir) if out_dir is not None else None
    metrics = MetricsLogger(out / "metrics.jsonl" if out else None)

    init_rng = np.random.default_rng(init_seed)
    obs_dim = 3 * (world.n_chasers + 1)
    runner = policy.init_params(obs_dim, 4, init_rng,
                                policy.default_bounds(world.v_max_runner, world.w_max),
                                tcfg.hidden_sizes)
    runner_value = policy.init_value_params(obs_dim, init_rng, tcfg.hidden_sizes)
    chaser, chaser_value = _fresh_chaser(world, tcfg, init_rng)
    values = {RUNNER: runner_value, CHASER: chaser_value}

    trained, values, episodes, converged, snaps, diag = _train_stage(
        0, BOTH, runner, chaser, values, world, weights, tcfg, plan,
        train_seed, out, metrics)
    sr_r, sr_c, timeout_rate = evaluate_success_rates(
        trained[RUNNER], trained[CHASER], plan.ws, world, weights, eval_seed)
    report = PhaseReport(0, BOTH, episodes, converged, sr_r, sr_c, timeout_rate,
                         snaps, diag["mean_reward"])
    result = TrainResult(trained[RUNNER], trained[CHASER], values[RUNNER],
                         values[CHASER], [report], converged_ne=False)
    if out is not None:
        write_report(result, out)
    return result


def write_report(result: TrainResult, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    doc = {
        "converged_ne": result.converged_ne,
        "phases": [r.to_dict() for r in result.reports],
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
