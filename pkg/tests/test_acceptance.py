"""Acceptance gate: every exit criterion at its stated tolerance.

The cheap numeric oracles run in milliseconds; the training-dependent
criteria share one desk-scale training session (module fixtures below), so
the whole file stays within the stated CPU budgets.  Each criterion prints
one PASS/FAIL line in the terminal summary.
"""

import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats as scistats

from pelab import arena, baselines, evaluation, policy, ppo, scheduler
from pelab.arena import Outcome, RewardWeights, WorldConfig
from pelab.dynamics import AgentState, ControlCommand, NoiseSpec, step_kinematic

from conftest import check_criterion, record_criterion
from test_policy import finite_difference, max_relative_error
from test_ppo import gae_oracle

DESK_WORLD = WorldConfig()
WEIGHTS = RewardWeights()
DESK_TRAINER = ppo.TrainerConfig(hidden_sizes=(64, 64), num_envs=8, gamma=0.995)
EVAL_EPISODES = 200
ACCEPT_SEED = 7


# --- fast numeric criteria -----------------------------------------------------

def test_gradient_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(21)
    p = policy.init_params(4, 2, rng, np.array([1.0, 1.0]), hidden=(8, 8))
    v = policy.init_value_params(4, rng, hidden=(8, 8))
    n = 32
    obs = rng.uniform(-2, 2, size=(n, 4))
    mean, std = policy.forward_policy(p, obs)
    actions = mean + std * rng.standard_normal((n, 2))
    z = (actions - mean) / std
    logp = np.sum(-0.5 * z * z - p.log_std - 0.5 * policy.LOG_2PI, axis=1)
    logp_old = logp - rng.uniform(-0.1, 0.1, n)
    adv = rng.uniform(0.1, 2.0, n) * rng.choice([-1.0, 1.0], n)
    returns = rng.uniform(-1, 1, n)

    _, grads, _ = ppo.policy_loss_grads(p, obs, actions, logp_old, adv, 0.2, 0.01)
    fd = finite_difference(
        lambda: ppo.policy_loss(p, obs, actions, logp_old, adv, 0.2, 0.01),
        policy.policy_arrays(p))
    err_pi = max_relative_error(fd, policy.arrays_to_vector(policy.policy_grad_arrays(grads)))

    _, vgrads = ppo.value_loss_grads(v, obs, returns, 0.5)
    fd_v = finite_difference(lambda: ppo.value_loss(v, obs, returns, 0.5),
                             policy.value_arrays(v))
    err_v = max_relative_error(fd_v, policy.arrays_to_vector(policy.value_grad_arrays(vgrads)))

    egrads = ppo.entropy_loss_grads(p, 0.01)
    fd_e = finite_difference(lambda: ppo.entropy_loss(p, 0.01), policy.policy_arrays(p))
    err_e = max_relative_error(fd_e, policy.arrays_to_vector(policy.policy_grad_arrays(egrads)))

    elapsed = time.perf_counter() - t0
    worst = max(err_pi, err_v, err_e)
    check_criterion(
        "gradient correctness (finite differences, 4-8-8-2)",
        worst < 1e-4 and elapsed < 10.0,
        f"max rel err {worst:.2e}, {elapsed:.1f}s")


def test_gae_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(123)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 40))
        r = rng.standard_normal(n) * 3
        v = rng.standard_normal(n) * 2
        dones = rng.random(n) < 0.15
        bootstrap = float(rng.standard_normal()) if not dones[-1] else 0.0
        gamma = float(rng.uniform(0.5, 1.0))
        lam = float(rng.uniform(0.0, 1.0))
        adv, _ = ppo.compute_gae(r, v, dones, bootstrap, gamma, lam)
        worst = max(worst, float(np.max(np.abs(
            adv - gae_oracle(r, v, dones, bootstrap, gamma, lam)))))
    elapsed = time.perf_counter() - t0
    check_criterion("advantage estimator vs k-step oracle (100 instances)",
                    worst < 1e-10 and elapsed < 1.0,
                    f"max |delta| {worst:.2e}, {elapsed:.2f}s")


def test_ppo_clip_arithmetic():
    a = ppo.clipped_surrogate_term(2.0, 1.5, 0.2)
    b = ppo.clipped_surrogate_term(-1.0, 0.5, 0.2)
    check_criterion("clipped-surrogate hand cases", a == 2.4 and b == -0.8,
                    f"got {a} and {b}")


def test_apf_hand_values():
    cfg = baselines.ApfConfig()
    near = baselines.apf_attractive_gradient(np.array([0.1, 0, 0]), np.zeros(3), cfg)
    far = baselines.apf_attractive_gradient(np.array([2.0, 0, 0]), np.zeros(3), cfg)
    rep = baselines.apf_repulsive_gradient(np.zeros(3), [np.array([0.25, 0, 0])], cfg)
    exact = (np.max(np.abs(near - [0.2, 0, 0])) < 1e-12
             and np.max(np.abs(far - [1.0, 0, 0])) < 1e-12
             and np.max(np.abs(rep - [64.0, 0, 0])) < 1e-12)

    rng = np.random.default_rng(4)
    goal = np.array([1.0, 2.0, 1.5])
    chasers = [np.array([0.0, 0.0, 0.0]), np.array([1.0, 1.0, 0.5])]
    worst = 0.0
    checked = 0
    while checked < 100:
        p = rng.uniform(-0.8, 2.8, size=3)
        d_goal = np.linalg.norm(p - goal)
        dists = sorted(np.linalg.norm(p - c) for c in chasers)
        if (abs(d_goal - cfg.d_star_g) < 1e-3 or d_goal < 1e-2
                or abs(dists[0] - cfg.d_star) < 1e-3 or dists[0] < 0.05
                or dists[1] - dists[0] < 1e-3):
            continue

        def fd3(fn):
            g = np.zeros(3)
            for k in range(3):
                dp = np.zeros(3)
                dp[k] = 1e-6
                g[k] = (fn(p + dp) - fn(p - dp)) / 2e-6
            return g

        fd_att = fd3(lambda q: baselines.apf_attractive_potential(q, goal, cfg))
        an_att = baselines.apf_attractive_gradient(p, goal, cfg)
        fd_rep = fd3(lambda q: baselines.apf_repulsive_potential(q, chasers, cfg))
        an_rep = baselines.apf_repulsive_gradient(p, chasers, cfg)
        for fd, an in ((fd_att, an_att), (fd_rep, an_rep)):
            scale = max(np.max(np.abs(fd)), np.max(np.abs(an)), 1e-6)
            worst = max(worst, float(np.max(np.abs(fd - an)) / scale))
        checked += 1
    check_criterion("potential-field hand values and gradient checks",
                    exact and worst < 1e-4,
                    f"hand cases exact: {exact}, fd rel err {worst:.2e}")


def test_reward_arithmetic():
    penalty_ok = WEIGHTS.w1 / DESK_WORLD.t_max == 10.0
    st = arena.EpisodeState(AgentState(2.0, 1.5, 1.0, 0.0), [],
                            np.array([2.0, 2.5, 1.0]), DESK_WORLD.t_max - 1, 4.0, [])
    res = arena.step_env(st, [ControlCommand(0, 0, 0, 0)], DESK_WORLD, WEIGHTS, None)
    timeout_ok = (res.outcome is Outcome.TIMEOUT
                  and res.rewards[0] + 10.0 == 750.0)
    st2 = arena.EpisodeState(AgentState(2, 2, 1, 0.0),
                             [AgentState(2, 2, 1, 0.0), AgentState(3, 1, 1, 0.0)],
                             np.array([4.0, 4.0, 2.5]), 0, 3.0, [True, True])
    res2 = arena.step_env(st2, [ControlCommand(0, 0, 0, 0)] * 3, DESK_WORLD, WEIGHTS, None)
    capture_ok = (res2.outcome is Outcome.CAPTURED
                  and res2.rewards[0] == -1010.0
                  and res2.rewards[1] == 990.0 and res2.rewards[2] == 990.0)
    check_criterion("reward arithmetic (-10/step, 750 timeout, +-1000 capture)",
                    penalty_ok and timeout_ok and capture_ok,
                    f"penalty={WEIGHTS.w1 / DESK_WORLD.t_max}, "
                    f"timeout_task={res.rewards[0] + 10.0}, capture={res2.rewards[:2]}")


def test_pid_capture_property():
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    pid = baselines.PidConfig()
    world = DESK_WORLD
    cfg1 = replace(world, n_chasers=1)
    collider = world.drone_collider
    captures = 0
    trials = 100
    for _ in range(trials):
        runner = AgentState(*rng.uniform(0.5, 4.5, size=2), rng.uniform(0.5, 2.5),
                            rng.uniform(-math.pi, math.pi))
        chaser = AgentState(*rng.uniform(0.5, 4.5, size=2), rng.uniform(0.5, 2.5),
                            rng.uniform(-math.pi, math.pi))
        d0 = math.dist((runner.x, runner.y, runner.z), (chaser.x, chaser.y, chaser.z))
        budget = math.ceil(d0 / (world.v_max_chaser * world.dt)) + 50
        st = arena.EpisodeState(runner, [chaser], np.array([9.0, 9.0, 9.0]), 0, 9.0, [True])
        for _ in range(budget):
            obs = arena.chaser_observation(st, 0, cfg1)
            cmd = baselines.pid_pursuit(obs, pid, world.v_max_chaser)
            st.chasers[0] = step_kinematic(st.chasers[0], cmd, world.dt, NoiseSpec(), None)
            c = st.chasers[0]
            if (abs(c.x - runner.x) < collider[0] and abs(c.y - runner.y) < collider[1]
                    and abs(c.z - runner.z) < collider[2]):
                captures += 1
                break
    elapsed = time.perf_counter() - t0
    check_criterion("proportional pursuit captures a stationary runner",
                    captures == trials and elapsed < 30.0,
                    f"{captures}/{trials} captures, {elapsed:.1f}s")


def test_determinism_and_replay(tmp_path):
    spec = evaluation.MatchSpec(runner="apf", chaser="pid", episodes=20, seed=11)
    a = evaluation.run_match(spec)
    b = evaluation.run_match(spec)
    repro = a.outcomes == b.outcomes and a.mean_steps == b.mean_steps

    trace = tmp_path / "trace.jsonl"
    evaluation.run_match(evaluation.MatchSpec(runner="apf", chaser="pid",
                                              episodes=3, seed=12), trace_path=trace)
    replay_ok = evaluation.replay(trace) > 0

    rng = np.random.default_rng(13)
    params = policy.init_params(9, 4, rng, policy.default_bounds(1.0, 20.0), (16, 16))
    path = tmp_path / "w.json"
    policy.save_weights(params, path)
    loaded = policy.load_weights(path)
    equal_actions = True
    for _ in range(100):
        obs = rng.uniform(-4, 4, 9)
        a1 = policy.sample_action(policy.action_distribution(params, obs), None, True)
        a2 = policy.sample_action(policy.action_distribution(loaded, obs), None, True)
        if not np.array_equal(a1.command.as_array(), a2.command.as_array()):
            equal_actions = False
            break
    check_criterion("determinism, trace replay and weight round-trip",
                    repro and replay_ok and equal_actions,
                    f"repro={repro} replay={replay_ok} weights={equal_actions}")


def test_inference_latency():
    rng = np.random.default_rng(5)
    params = policy.init_params(9, 4, rng, policy.default_bounds(1.0, 20.0))  # 512x512
    stats = evaluation.bench_inference(params, 1000)
    check_criterion("inference latency under 1 ms (512-wide net)",
                    stats.mean_ms < 1.0,
                    f"mean {stats.mean_ms:.3f} ms, p50 {stats.p50_ms:.3f} ms")


# --- statistical protocol criteria ---------------------------------------------

def test_speed_sweep_monotonicity():
    speeds = list(evaluation.SPEED_SWEEP_GRID)
    rows = evaluation.speed_sweep("apf", "pid", speeds=speeds,
                                  episodes=EVAL_EPISODES, seed=31)
    srs = [r.sr_runner for _, r in rows]
    rho, p_two = scistats.spearmanr(speeds, srs)
    p_one = p_two / 2 if rho > 0 else 1.0 - p_two / 2
    check_criterion("speed-sweep monotonicity (Spearman one-sided)",
                    rho > 0 and p_one < 0.05,
                    f"sr={['%.2f' % s for s in srs]}, rho={rho:.3f}, p={p_one:.4f}")


def test_geometry_heatmap_trend(tmp_path):
    # radius 0.75 m keeps the two pursuers from degenerating into a single
    # blob on the line of symmetry, which confounds the small-angle cells
    grid = evaluation.geometry_heatmap([10.0, 30.0, 60.0, 120.0], [0.75],
                                       episodes=EVAL_EPISODES, runner_ref="apf",
                                       chaser_ref="pid", seed=32,
                                       out_csv=tmp_path / "grid.csv",
                                       out_png=tmp_path / "grid.png")
    sr = {a: grid["sr_runner"][0, i] for i, a in enumerate(grid["angles_deg"])}
    ok = (sr[60.0] > sr[30.0] > sr[10.0]) and sr[120.0] >= 0.9
    check_criterion("geometry trend (60 > 30 > 10 degrees; >= 0.9 behind)",
                    ok, f"sr={ {k: round(v, 3) for k, v in sr.items()} }")


def test_ne_termination_behavior(tmp_path):
    # structural check at micro scale: the schedule must halt within k_max and
    # the convergence flag must agree with the final gap
    world = WorldConfig(t_max=60)
    plan = scheduler.StagePlan(eta=0.10, k_max=10, ws=20, l_sw=5, min_episodes=10,
                               stage_episode_cap=40, improvement_eps=1e9)
    tcfg = ppo.TrainerConfig(buffer_size=128, batch_size=64, epochs=1, num_envs=2,
                             hidden_sizes=(8, 8))
    result = scheduler.run_ams_drl(world, WEIGHTS, tcfg, plan, 33, tmp_path)
    phases = len(result.reports) - 1
    last = result.reports[-1]
    gap_ok = (abs(last.sr_runner - last.sr_chaser) <= plan.eta) == result.converged_ne
    halted = 1 <= phases <= plan.k_max
    exhausted_flag_ok = result.converged_ne or phases == plan.k_max
    check_criterion("equilibrium stopping rule halts and flags correctly",
                    halted and gap_ok and exhausted_flag_ok,
                    f"phases={phases} gap={abs(last.sr_runner - last.sr_chaser):.3f} "
                    f"converged={result.converged_ne}")


# --- desk-scale training criteria ------------------------------------------------

@pytest.fixture(scope="module")
def desk_run(tmp_path_factory):
    """One full desk-scale schedule S0..S3 shared by the training criteria."""
    out = tmp_path_factory.mktemp("desk_run")
    plan = scheduler.desk_plan(eta=0.01, k_max=3, min_episodes=16_000,
                               stage_episode_cap=30_000)
    t0 = time.time()
    result = scheduler.run_ams_drl(DESK_WORLD, WEIGHTS, DESK_TRAINER, plan,
                                   np.random.SeedSequence(ACCEPT_SEED), out)
    return {"result": result, "wall_seconds": time.time() - t0, "out_dir": out}


@pytest.fixture(scope="module")
def ppo_baseline_runner(tmp_path_factory):
    """One-stage learned navigation trained against the proportional pursuers."""
    out = tmp_path_factory.mktemp("ppo_baseline")
    plan = scheduler.desk_plan(eta=0.01, k_max=1, stage_episode_cap=30_000)
    params, _, report = scheduler.train_runner_versus(
        DESK_WORLD, WEIGHTS, DESK_TRAINER, plan, ACCEPT_SEED + 1,
        evaluation.PidChaserPolicy(), out)
    return params, report


@pytest.fixture(scope="module")
def direct_runner(tmp_path_factory):
    """Simultaneously trained runner/chaser pair (the no-cold-start ablation)."""
    out = tmp_path_factory.mktemp("direct")
    plan = scheduler.desk_plan(eta=0.01, k_max=1, min_episodes=8_000,
                               stage_episode_cap=12_000)
    result = scheduler.run_direct(DESK_WORLD, WEIGHTS, DESK_TRAINER, plan,
                                  ACCEPT_SEED + 2, out)
    return result


def test_cold_start_learning(desk_run):
    s0 = desk_run["result"].reports[0]
    budget_ok = s0.episodes <= 200_000
    check_criterion("cold-start navigation reaches sr >= 0.8",
                    s0.sr_runner >= 0.8 and budget_ok,
                    f"sr={s0.sr_runner:.3f} after {s0.episodes} episodes")


def test_alternating_ordering(desk_run):
    reports = {r.phase: r for r in desk_run["result"].reports}
    s0, s1, s2 = reports[0], reports[1], reports[2]
    n = EVAL_EPISODES

    def fisher_greater(sr_hi, sr_lo):
        hi = int(round(sr_hi * n))
        lo = int(round(sr_lo * n))
        table = [[hi, n - hi], [lo, n - lo]]
        return scistats.fisher_exact(table, alternative="greater").pvalue

    p_drop = fisher_greater(s0.sr_runner, s1.sr_runner)
    p_rise = fisher_greater(s2.sr_runner, s1.sr_runner)
    ok = (s1.sr_runner < s0.sr_runner and s2.sr_runner > s1.sr_runner
          and p_drop < 0.05 and p_rise < 0.05)
    hours_ok = desk_run["wall_seconds"] <= 2 * 3600
    check_criterion("alternating-phase ordering (sr drop then recovery)",
                    ok and hours_ok,
                    f"sr0={s0.sr_runner:.3f} sr1={s1.sr_runner:.3f} "
                    f"sr2={s2.sr_runner:.3f}, p_drop={p_drop:.2e}, "
                    f"p_rise={p_rise:.2e}, wall={desk_run['wall_seconds']/60:.0f}min")


def test_baseline_ordering(desk_run, ppo_baseline_runner, direct_runner):
    apf_vs_random = evaluation.run_match(evaluation.MatchSpec(
        runner="apf", chaser="random", episodes=EVAL_EPISODES,
        placement="fixed_table3", seed=41))

    direct_vs_pid, _, _ = scheduler.evaluate_success_rates(
        direct_runner.runner, evaluation.PidChaserPolicy(), EVAL_EPISODES,
        DESK_WORLD, WEIGHTS, 42)

    trained = desk_run["result"]
    sr_ams, _, _ = scheduler.evaluate_success_rates(
        trained.runner, trained.chaser, EVAL_EPISODES, DESK_WORLD, WEIGHTS, 43)
    ppo_params, _ = ppo_baseline_runner
    sr_ppo, _, _ = scheduler.evaluate_success_rates(
        ppo_params, trained.chaser, EVAL_EPISODES, DESK_WORLD, WEIGHTS, 43)
    n = EVAL_EPISODES
    table = [[int(round(sr_ams * n)), n - int(round(sr_ams * n))],
             [int(round(sr_ppo * n)), n - int(round(sr_ppo * n))]]
    p = scistats.fisher_exact(table, alternative="greater").pvalue

    ok = (apf_vs_random.sr_runner >= 0.90 and direct_vs_pid <= 0.05
          and sr_ams > sr_ppo and p < 0.05)
    check_criterion("baseline ordering (potential field, direct, staged runner)",
                    ok,
                    f"apf/random={apf_vs_random.sr_runner:.3f}, "
                    f"direct/pid={direct_vs_pid:.3f}, staged={sr_ams:.3f} vs "
                    f"one-stage={sr_ppo:.3f} (p={p:.2e})")
