"""On-policy rollout collection, advantage estimation and the clipped update.

The loss/gradient helpers (`policy_loss`, `policy_loss_grads`, `value_loss`,
`value_loss_grads`) are the single source of truth: `ppo_update` consumes
them minibatch by minibatch and the gradient checks differentiate the very
same scalars by finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import arena, policy
from .arena import EpisodeState, Outcome, RewardWeights, WorldConfig
from .dynamics import ControlCommand
from .errors import InvalidInputError, TrainingError
from .policy import PolicyParameters, ValueParameters

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0


@dataclass(frozen=True, slots=True)
class TrainerConfig:
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    entropy_beta: float = 0.01
    epochs: int = 3
    batch_size: int = 1024
    buffer_size: int = 10240
    initial_lr: float = 3e-4
    lr_schedule: str = "linear"      # "linear" | "constant"
    max_episodes: int = 6_000_000    # lr-decay horizon; the scheduler caps stages below this
    value_loss_coeff: float = 0.5
    reward_scale: float = 1e-3       # rewards are emitted unnormalized; scaling lives here
    grad_clip_norm: float = 0.5
    num_envs: int = 6
    hidden_sizes: tuple[int, ...] = (512, 512)

    def validate(self) -> None:
        if not (0.0 <= self.gamma <= 1.0 and 0.0 <= self.lam <= 1.0):
            raise InvalidInputError("gamma and lam must lie in [0, 1]")
        if self.clip_eps <= 0.0:
            raise InvalidInputError("clip_eps must be positive")
        if self.batch_size > self.buffer_size:
            raise InvalidInputError("batch_size cannot exceed buffer_size")
        if self.lr_schedule not in ("linear", "constant"):
            raise InvalidInputError(f"unknown lr schedule {self.lr_schedule!r}")


@dataclass(slots=True)
class Segment:
    """A contiguous slice of one agent's transitions with its bootstrap value."""

    start: int
    stop: int
    bootstrap: float


@dataclass(slots=True)
class RolloutBatch:
    obs: np.ndarray          # (B, obs_dim)
    actions: np.ndarray      # (B, act_dim) pre-clamp samples
    log_probs: np.ndarray    # (B,)
    rewards: np.ndarray      # (B,) in trainer units (reward_scale applied)
    values: np.ndarray       # (B,)
    dones: np.ndarray        # (B,) bool
    episode_ids: np.ndarray  # (B,)
    segments: list[Segment]


@dataclass(slots=True)
class RolloutStats:
    episodes: int
    episode_returns: list[float]      # raw reward units, one entry per finished episode
    episode_lengths: list[int]
    outcomes: list[Outcome]
    chaser_wall_crashes: int = 0


@dataclass(frozen=True, slots=True)
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float
    approx_kl: float
    lr: float


def lr_at(step: float, cfg: TrainerConfig) -> float:
    """Learning rate after `step` episodes of the configured horizon."""
    if cfg.lr_schedule == "constant":
        return cfg.initial_lr
    frac = min(max(step / cfg.max_episodes, 0.0), 1.0)
    return cfg.initial_lr * (1.0 - frac)


def compute_gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
                bootstrap: float, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Raw exponentially-weighted advantages and value targets for one segment.

    delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t, advantages accumulate
    backwards with factor gamma*lam, and the value past the final entry is
    ``bootstrap`` (zero for a terminal segment).
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    if not (rewards.shape == values.shape == dones.shape):
        raise InvalidInputError("rewards, values and dones must share one length")
    n = rewards.shape[0]
    adv = np.empty(n)
    gae = 0.0
    next_value = bootstrap
    for t in range(n - 1, -1, -1):
        mask = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * next_value * mask - values[t]
        gae = delta + gamma * lam * mask * gae
        adv[t] = gae
        next_value = values[t]
    return adv, adv + values


def batch_advantages(batch: RolloutBatch, cfg: TrainerConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-segment GAE over the whole buffer; advantages are returned raw."""
    adv = np.empty(batch.rewards.shape[0])
    ret = np.empty_like(adv)
    for seg in batch.segments:
        sl = slice(seg.start, seg.stop)
        adv[sl], ret[sl] = compute_gae(batch.rewards[sl], batch.values[sl],
                                       batch.dones[sl], seg.bootstrap,
                                       cfg.gamma, cfg.lam)
    return adv, ret


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def clipped_surrogate_term(adv: float, ratio: float, eps: float) -> float:
    """min(ratio * adv, clip(ratio, 1-eps, 1+eps) * adv) for one sample."""
    return min(ratio * adv, min(max(ratio, 1.0 - eps), 1.0 + eps) * adv)


# --- losses and exact gradients ----------------------------------------------

def policy_loss(p: PolicyParameters, obs: np.ndarray, actions: np.ndarray,
                log_probs_old: np.ndarray, advantages: np.ndarray,
                clip_eps: float, entropy_beta: float) -> float:
    """Negated clipped-surrogate objective including the entropy bonus."""
    mean, std, _ = policy.forward_policy_training(p, obs)
    z = (actions - mean) / std
    logp = np.sum(-0.5 * z * z - p.log_std - 0.5 * policy.LOG_2PI, axis=1)
    ratio = np.exp(logp - log_probs_old)
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps)
    surr = np.minimum(ratio * advantages, clipped * advantages)
    return float(-(surr.mean() + entropy_beta * policy.entropy(p)))


def policy_loss_grads(p: PolicyParameters, obs: np.ndarray, actions: np.ndarray,
                      log_probs_old: np.ndarray, advantages: np.ndarray,
                      clip_eps: float, entropy_beta: float
                      ) -> tuple[float, policy.PolicyGradients, dict]:
    """Loss value, exact parameter gradients and update diagnostics."""
    mean, std, cache = policy.forward_policy_training(p, obs)
    n = obs.shape[0]
    diff = actions - mean
    z = diff / std
    logp = np.sum(-0.5 * z * z - p.log_std - 0.5 * policy.LOG_2PI, axis=1)
    ratio = np.exp(logp - log_probs_old)
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps)
    surr = np.minimum(ratio * advantages, clipped * advantages)
    loss = float(-(surr.mean() + entropy_beta * policy.entropy(p)))

    # the clipped branch is constant in theta; gradient flows where min() keeps
    # the live ratio term
    active = np.where(advantages >= 0.0, ratio <= 1.0 + clip_eps, ratio >= 1.0 - clip_eps)
    d_logp = -(advantages * ratio * active) / n        # d(loss)/d(logp_new)
    d_mean = d_logp[:, None] * diff / (std * std)
    d_log_std = np.sum(d_logp[:, None] * (z * z - 1.0), axis=0) - entropy_beta
    grads = policy.policy_backward(p, cache, d_mean, d_log_std)

    clip_fraction = float(np.mean(np.abs(ratio - 1.0) > clip_eps))
    approx_kl = float(np.mean((ratio - 1.0) - np.log(np.maximum(ratio, 1e-12))))
    diag = {"clip_fraction": clip_fraction, "approx_kl": approx_kl,
            "entropy": policy.entropy(p), "surrogate": float(surr.mean())}
    return loss, grads, diag


def value_loss(v: ValueParameters, obs: np.ndarray, returns: np.ndarray,
               coeff: float) -> float:
    pred, _ = policy.forward_value_training(v, obs)
    return float(coeff * np.mean((pred - returns) ** 2))


def value_loss_grads(v: ValueParameters, obs: np.ndarray, returns: np.ndarray,
                     coeff: float) -> tuple[float, policy.ValueGradients]:
    pred, cache = policy.forward_value_training(v, obs)
    err = pred - returns
    loss = float(coeff * np.mean(err ** 2))
    d_value = coeff * 2.0 * err / err.shape[0]
    return loss, policy.value_backward(v, cache, d_value)


def entropy_loss(p: PolicyParameters, entropy_beta: float) -> float:
    """Standalone entropy bonus (negated), for gradient verification."""
    return float(-entropy_beta * policy.entropy(p))


def entropy_loss_grads(p: PolicyParameters, entropy_beta: float) -> policy.PolicyGradients:
    zero_layers = [policy.DenseLayer(np.zeros_like(l.w), np.zeros_like(l.b))
                   for l in p.layers]
    return policy.PolicyGradients(zero_layers, np.full(p.act_dim, -entropy_beta))


# --- optimizer ----------------------------------------------------------------

@dataclass(slots=True)
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_arrays(cls, arrays: list[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays])


def clip_gradients(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale the gradient list in place to a global norm bound; returns the raw norm."""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if max_norm > 0.0 and total > max_norm:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total


def adam_step(arrays: list[np.ndarray], grads: list[np.ndarray], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    state.t += 1
    b1t = 1.0 - beta1 ** state.t
    b2t = 1.0 - beta2 ** state.t
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        m += (1.0 - beta1) * (g - m)
        v += (1.0 - beta2) * (g * g - v)
        a -= lr * (m / b1t) / (np.sqrt(v / b2t) + eps)


@dataclass(slots=True)
class OptimizerState:
    policy: AdamState
    value: AdamState

    @classmethod
    def fresh(cls, p: PolicyParameters, v: ValueParameters) -> "OptimizerState":
        return cls(AdamState.for_arrays(policy.policy_arrays(p)),
                   AdamState.for_arrays(policy.value_arrays(v)))


def ppo_update(params: PolicyParameters, value_params: ValueParameters,
               batch: RolloutBatch, cfg: TrainerConfig, lr: float | None = None,
               rng: np.random.Generator | None = None,
               opt: OptimizerState | None = None
               ) -> tuple[PolicyParameters, ValueParameters, UpdateStats, OptimizerState]:
    """Run `cfg.epochs` passes of shuffled minibatch gradient steps.

    Inputs are left untouched; the returned parameter sets are updated copies.
    """
    cfg.validate()
    rng = rng if rng is not None else np.random.default_rng(0)
    params = params.copy()
    value_params = value_params.copy()
    if opt is None:
        opt = OptimizerState.fresh(params, value_params)
    if lr is None:
        lr = cfg.initial_lr

    adv_raw, returns = batch_advantages(batch, cfg)
    adv = normalize_advantages(adv_raw)

    n = batch.obs.shape[0]
    p_arrays = policy.policy_arrays(params)
    v_arrays = policy.value_arrays(value_params)
    totals = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0,
              "clip_fraction": 0.0, "approx_kl": 0.0}
    passes = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            p_loss, p_grads, diag = policy_loss_grads(
                params, batch.obs[idx], batch.actions[idx], batch.log_probs[idx],
                adv[idx], cfg.clip_eps, cfg.entropy_beta)
            v_loss, v_grads = value_loss_grads(
                value_params, batch.obs[idx], returns[idx], cfg.value_loss_coeff)
            if not (math.isfinite(p_loss) and math.isfinite(v_loss)):
                raise TrainingError(
                    f"non-finite loss (policy={p_loss}, value={v_loss}) at pass {passes}")
            pg = policy.policy_grad_arrays(p_grads)
            vg = policy.value_grad_arrays(v_grads)
            clip_gradients(pg, cfg.grad_clip_norm)
            clip_gradients(vg, cfg.grad_clip_norm)
            adam_step(p_arrays, pg, opt.policy, lr)
            adam_step(v_arrays, vg, opt.value, lr)
            np.clip(params.log_std, LOG_STD_MIN, LOG_STD_MAX, out=params.log_std)
            totals["policy_loss"] += p_loss
            totals["value_loss"] += v_loss / max(cfg.value_loss_coeff, 1e-12)
            totals["entropy"] += diag["entropy"]
            totals["clip_fraction"] += diag["clip_fraction"]
            totals["approx_kl"] += diag["approx_kl"]
            passes += 1
    stats = UpdateStats(
        policy_loss=totals["policy_loss"] / passes,
        value_loss=totals["value_loss"] / passes,
        entropy=totals["entropy"] / passes,
        clip_fraction=totals["clip_fraction"] / passes,
        approx_kl=totals["approx_kl"] / passes,
        lr=lr,
    )
    return params, value_params, stats, opt


# --- rollout collection --------------------------------------------------------

RUNNER_SIDE = "runner"
CHASER_SIDE = "chaser"
BOTH_SIDES = "both"


class EnvPool:
    """A fixed set of arena instances stepped in lockstep, one rng stream each.

    ``spawn_fn(world, rng, n_chasers, episode_index)`` may override the plain
    uniform spawn, e.g. for a training curriculum.
    """

    def __init__(self, world: WorldConfig, weights: RewardWeights, num_envs: int,
                 seed: int | np.random.SeedSequence, n_chasers: int | None = None,
                 spawn_fn=None):
        self.world = world
        self.weights = weights
        self.n_chasers = world.n_chasers if n_chasers is None else n_chasers
        self.spawn_fn = spawn_fn
        root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        self.rngs = [np.random.default_rng(s) for s in root.spawn(num_envs)]
        self.episode_counter = 0
        self.states = []
        for rng in self.rngs:
            self.states.append(self._spawn(rng))
            self.episode_counter += 1

    def _spawn(self, rng: np.random.Generator) -> EpisodeState:
        if self.spawn_fn is not None:
            return self.spawn_fn(self.world, rng, self.n_chasers, self.episode_counter)
        return arena.spawn_episode(self.world, rng, self.n_chasers)

    def reset_env(self, idx: int) -> EpisodeState:
        self.states[idx] = self._spawn(self.rngs[idx])
        self.episode_counter += 1
        return self.states[idx]


class _Stream:
    """Accumulates one agent's transitions for the current episode."""

    __slots__ = ("obs", "actions", "log_probs", "rewards", "values", "episode_id")

    def __init__(self, episode_id: int):
        self.obs: list[np.ndarray] = []
        self.actions: list[np.ndarray] = []
        self.log_probs: list[float] = []
        self.rewards: list[float] = []
        self.values: list[float] = []
        self.episode_id = episode_id

    def __len__(self) -> int:
        return len(self.rewards)


class _StreamBank:
    """Closed streams for one side plus a running transition count."""

    __slots__ = ("closed", "count")

    def __init__(self):
        self.closed: list[tuple[_Stream, bool, float]] = []
        self.count = 0

    def close(self, stream: _Stream, done: bool, bootstrap: float) -> None:
        if len(stream):
            self.closed.append((stream, done, bootstrap))
            self.count += len(stream)


def _assemble(closed: list[tuple[_Stream, bool, float]], buffer_size: int,
              obs_dim: int, act_dim: int, reward_scale: float) -> RolloutBatch:
    obs = np.empty((buffer_size, obs_dim))
    actions = np.empty((buffer_size, act_dim))
    log_probs = np.empty(buffer_size)
    rewards = np.empty(buffer_size)
    values = np.empty(buffer_size)
    dones = np.zeros(buffer_size, dtype=bool)
    episode_ids = np.empty(buffer_size, dtype=np.int64)
    segments: list[Segment] = []
    at = 0
    for stream, done, bootstrap in closed:
        take = min(len(stream), buffer_size - at)
        if take == 0:
            break
        sl = slice(at, at + take)
        obs[sl] = stream.obs[:take]
        actions[sl] = stream.actions[:take]
        log_probs[sl] = stream.log_probs[:take]
        rewards[sl] = np.asarray(stream.rewards[:take]) * reward_scale
        values[sl] = stream.values[:take]
        episode_ids[sl] = stream.episode_id
        if take < len(stream):
            # truncated by the buffer cut: the next observation's value is the
            # value recorded for the first trimmed transition
            seg_done, seg_boot = False, stream.values[take]
        else:
            seg_done, seg_boot = done, bootstrap
        if seg_done:
            dones[at + take - 1] = True
        segments.append(Segment(at, at + take, 0.0 if seg_done else seg_boot))
        at += take
        if at >= buffer_size:
            break
    if at < buffer_size:
        raise TrainingError(f"collected only {at} of {buffer_size} transitions")
    return RolloutBatch(obs, actions, log_probs, rewards, values, dones,
                        episode_ids, segments)


def collect_rollouts(pool: EnvPool, side: str, runner_params: PolicyParameters,
                     chaser_params: PolicyParameters | None,
                     value_params: dict[str, ValueParameters],
                     cfg: TrainerConfig, rng: np.random.Generator,
                     frozen_chaser_fn=None
                     ) -> tuple[dict[str, RolloutBatch], RolloutStats]:
    """Fill one buffer of transitions for each trained side.

    Both sides act stochastically; only trained sides record transitions.
    A scripted opponent may stand in for the frozen chaser side by passing
    ``frozen_chaser_fn(state, chaser_index, world, rng)``.
    Returns {side: batch} plus episode statistics over the collection window.
    """
    if side not in (RUNNER_SIDE, CHASER_SIDE, BOTH_SIDES):
        raise InvalidInputError(f"unknown side {side!r}")
    train_runner = side in (RUNNER_SIDE, BOTH_SIDES)
    train_chaser = side in (CHASER_SIDE, BOTH_SIDES)
    if train_chaser and chaser_params is None:
        raise InvalidInputError("chaser side requested but no chaser parameters given")
    if (not train_chaser and chaser_params is None and frozen_chaser_fn is None
            and pool.n_chasers > 0):
        raise InvalidInputError("chasers exist but have neither parameters nor a script")

    world, weights = pool.world, pool.weights
    num_envs = len(pool.states)
    bank_r = _StreamBank()
    bank_c = _StreamBank()
    open_r: list[_Stream | None] = [
        _Stream(i) if train_runner else None for i in range(num_envs)]
    open_c: list[list[_Stream | None]] = [
        [_Stream(i) if train_chaser else None for _ in range(pool.n_chasers)]
        for i in range(num_envs)]
    ep_return = [0.0] * num_envs
    # the monitor history tracks the trained side; with both sides trained the
    # runner's per-episode return is used
    per_episode_agents = max(1, pool.n_chasers) if (train_chaser and not train_runner) else 1
    stats = RolloutStats(0, [], [], [])

    def filled() -> bool:
        if train_runner and bank_r.count < cfg.buffer_size:
            return False
        if train_chaser and bank_c.count < cfg.buffer_size:
            return False
        return True

    r_bounds = runner_params.bounds
    c_bounds = chaser_params.bounds if chaser_params is not None else None
    target = cfg.buffer_size
    while not filled():
        # one batched forward per side per vector step; action noise comes from
        # the trainer's stream, env streams keep spawn/process noise
        runner_obs = [arena.runner_observation(st, world) for st in pool.states]
        r_x = np.stack(runner_obs)
        r_mean, r_std, _ = policy.forward_policy_training(runner_params, r_x)
        r_raw = r_mean + r_std * rng.standard_normal(r_mean.shape)
        z = (r_raw - r_mean) / r_std
        r_logp = np.sum(-0.5 * z * z - runner_params.log_std - 0.5 * policy.LOG_2PI, axis=1)
        r_clamped = np.clip(r_raw, -r_bounds, r_bounds)
        if train_runner:
            r_values = policy.forward_value_training(value_params["runner"], r_x)[0]

        scripted_chasers = not train_chaser and chaser_params is None
        chaser_rows: list[tuple[int, int]] = []
        chaser_obs: list[np.ndarray] = []
        if pool.n_chasers and not scripted_chasers:
            for e, st in enumerate(pool.states):
                for i in range(len(st.chasers)):
                    if st.alive[i]:
                        chaser_rows.append((e, i))
                        chaser_obs.append(arena.chaser_observation(st, i, world))
        if chaser_rows:
            c_x = np.stack(chaser_obs)
            c_mean, c_std, _ = policy.forward_policy_training(chaser_params, c_x)
            c_raw = c_mean + c_std * rng.standard_normal(c_mean.shape)
            zc = (c_raw - c_mean) / c_std
            c_logp = np.sum(-0.5 * zc * zc - chaser_params.log_std
                            - 0.5 * policy.LOG_2PI, axis=1)
            c_clamped = np.clip(c_raw, -c_bounds, c_bounds)
            if train_chaser:
                c_values = policy.forward_value_training(value_params["chaser"], c_x)[0]
            by_env: dict[int, dict[int, int]] = {}
            for row, (e, i) in enumerate(chaser_rows):
                by_env.setdefault(e, {})[i] = row

        for e in range(num_envs):
            st = pool.states[e]
            env_rng = pool.rngs[e]
            actions: list[ControlCommand | None] = [
                ControlCommand(r_clamped[e, 0], r_clamped[e, 1], r_clamped[e, 2],
                               r_clamped[e, 3])]
            rows = by_env.get(e, {}) if chaser_rows else {}
            for i in range(len(st.chasers)):
                if not st.alive[i]:
                    actions.append(None)
                    continue
                if scripted_chasers:
                    actions.append(frozen_chaser_fn(st, i, world, env_rng))
                    continue
                row = rows[i]
                actions.append(ControlCommand(c_clamped[row, 0], c_clamped[row, 1],
                                              c_clamped[row, 2], c_clamped[row, 3]))

            res = arena.step_env(st, actions, world, weights, env_rng)
            nxt = res.state
            pool.states[e] = nxt
            stats.chaser_wall_crashes += len(res.events.chaser_wall)

            if train_runner:
                s = open_r[e]
                s.obs.append(runner_obs[e])
                s.actions.append(r_raw[e])
                s.log_probs.append(float(r_logp[e]))
                s.rewards.append(float(res.rewards[0]))
                s.values.append(float(r_values[e]))
                ep_return[e] += float(res.rewards[0])
            if train_chaser:
                for i in range(len(st.chasers)):
                    row = rows.get(i)
                    if row is None:
                        continue
                    s = open_c[e][i]
                    s.obs.append(chaser_obs[row])
                    s.actions.append(c_raw[row])
                    s.log_probs.append(float(c_logp[row]))
                    s.rewards.append(float(res.rewards[i + 1]))
                    s.values.append(float(c_values[row]))
                    if not train_runner:
                        ep_return[e] += float(res.rewards[i + 1])
                    if not res.done and not nxt.alive[i]:
                        # this chaser crashed out: its trajectory ends here
                        bank_c.close(s, True, 0.0)
                        open_c[e][i] = _Stream(s.episode_id)

            if res.done:
                stats.episodes += 1
                stats.episode_returns.append(ep_return[e] / per_episode_agents)
                stats.episode_lengths.append(nxt.step)
                stats.outcomes.append(res.outcome)
                ep_return[e] = 0.0
                pool.reset_env(e)
                new_id = pool.episode_counter
                if train_runner:
                    bank_r.close(open_r[e], True, 0.0)
                    open_r[e] = _Stream(new_id)
                if train_chaser:
                    for i in range(len(st.chasers)):
                        bank_c.close(open_c[e][i], True, 0.0)
                    open_c[e] = [_Stream(new_id) for _ in range(pool.n_chasers)]

    # buffer full: close open streams with bootstrap values from the live states
    for e in range(num_envs):
        st = pool.states[e]
        if train_runner and len(open_r[e]):
            ob = arena.runner_observation(st, world)
            bank_r.close(open_r[e], False,
                         float(policy.forward_value(value_params["runner"], ob)))
            open_r[e] = None
        if train_chaser:
            for i in range(len(st.chasers)):
                s = open_c[e][i]
                if s is not None and len(s) and st.alive[i]:
                    ob = arena.chaser_observation(st, i, world)
                    bank_c.close(s, False,
                                 float(policy.forward_value(value_params["chaser"], ob)))

    batches: dict[str, RolloutBatch] = {}
    if train_runner:
        batches[RUNNER_SIDE] = _assemble(bank_r.closed, target, runner_params.obs_dim,
                                         runner_params.act_dim, cfg.reward_scale)
    if train_chaser:
        batches[CHASER_SIDE] = _assemble(bank_c.closed, target, chaser_params.obs_dim,
                                         chaser_params.act_dim, cfg.reward_scale)
    return batches, stats
