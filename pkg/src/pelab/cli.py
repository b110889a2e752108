"""Command-line entry point: training runs, evaluation protocols, live server."""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import evaluation, runconfig, scheduler, server
from .errors import ConfigurationError, InvalidInputError, PelabError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pelab",
        description="Train, evaluate and fly pursuit-evasion drone policies.")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run a training schedule")
    train.add_argument("--config", type=str, default=None,
                       help="JSON run config; defaults are used when omitted")
    train.add_argument("--mode", choices=["ams", "direct", "cold-start"], default=None,
                       help="override the config's training mode")
    train.add_argument("--out", type=str, default=None, help="output directory")
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--desk", action="store_true",
                       help="use shrunk desk-scale budgets and 64x64 networks")
    train.add_argument("--resume", type=str, default=None,
                       help="run directory to continue phase numbering from")

    ev = sub.add_parser("eval", help="run an evaluation protocol")
    ev.add_argument("--runner", type=str, required=True,
                    help='"apf" | "random" | "policy:<weights.json>"')
    ev.add_argument("--chaser", type=str, required=True,
                    help='"pid" | "random" | "policy:<weights.json>"')
    ev.add_argument("--protocol", required=True,
                    choices=["table3", "sweep-speed", "sweep-count", "heatmap", "bench"])
    ev.add_argument("--episodes", type=int, default=200)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out", type=str, default=None)
    ev.add_argument("--config", type=str, default=None)

    srv = sub.add_parser("serve", help="host a live match over websockets")
    srv.add_argument("--port", type=int, required=True)
    srv.add_argument("--host", type=str, default="127.0.0.1")
    srv.add_argument("--runner", type=str, default="manual",
                     help='"manual" or a runner policy ref')
    srv.add_argument("--chaser", type=str, default="pid")
    srv.add_argument("--seed", type=int, default=0)
    srv.add_argument("--practice", action="store_true",
                     help="score episodes into the practice ledger")
    srv.add_argument("--tick-hz", type=float, default=None,
                     help="simulation tick rate (default 1/dt so screen time = sim time)")
    srv.add_argument("--static", type=str, default=None,
                     help="directory with the browser client bundle")
    srv.add_argument("--config", type=str, default=None)
    return parser


def _load_run_config(args) -> runconfig.RunConfig:
    if args.config is not None:
        cfg = runconfig.load_config(args.config)
    else:
        cfg = runconfig.default_config()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "mode", None) is not None:
        cfg.mode = args.mode
    if getattr(args, "out", None) is not None:
        cfg.out_dir = args.out
    return cfg


def _run_dir(cfg: runconfig.RunConfig, prefix: str) -> Path:
    if cfg.out_dir:
        return Path(cfg.out_dir)
    stamp = time.strftime("%Y%m%d-%H%M%S")
    return runconfig.runs_root() / f"{prefix}-{stamp}-seed{cfg.seed}"


def cmd_train(args) -> int:
    try:
        cfg = _load_run_config(args)
    except ConfigurationError as e:
        print(f"error: invalid config: {e}", file=sys.stderr)
        return EXIT_ERROR
    if args.desk:
        cfg.plan = scheduler.desk_plan()
        cfg.trainer = replace(cfg.trainer, hidden_sizes=(64, 64))
    out = _run_dir(cfg, cfg.mode)
    out.mkdir(parents=True, exist_ok=True)
    runconfig.write_manifest(cfg, out)
    seed = np.random.SeedSequence(cfg.seed)

    start_phase = 0
    if args.resume:
        report_path = Path(args.resume) / "report.json"
        if not report_path.exists():
            print(f"error: {report_path} not found", file=sys.stderr)
            return EXIT_ERROR
        start_phase = len(json.loads(report_path.read_text())["phases"])
        print(f"resuming after phase {start_phase - 1} from {args.resume}")

    if cfg.mode == "cold-start":
        params, _, report = scheduler.run_cold_start(
            cfg.world, cfg.rewards, cfg.trainer, cfg.plan, seed, out)
        print(f"S0 done: episodes={report.episodes} converged={report.converged} "
              f"sr_runner={report.sr_runner:.3f}")
        print(f"outputs in {out}")
        return EXIT_OK if report.converged else EXIT_NOT_CONVERGED
    if cfg.mode == "direct":
        result = scheduler.run_direct(cfg.world, cfg.rewards, cfg.trainer, cfg.plan,
                                      seed, out)
        r = result.reports[-1]
        print(f"direct done: episodes={r.episodes} sr_runner={r.sr_runner:.3f} "
              f"sr_chaser={r.sr_chaser:.3f}")
        print(f"outputs in {out}")
        return EXIT_OK
    result = scheduler.run_ams_drl(cfg.world, cfg.rewards, cfg.trainer, cfg.plan,
                                   seed, out, start_phase=start_phase,
                                   resume_dir=args.resume)
    for r in result.reports:
        print(f"S{r.phase} [{r.trained_side}] episodes={r.episodes} "
              f"sr_runner={r.sr_runner:.3f} sr_chaser={r.sr_chaser:.3f} "
              f"timeout={r.timeout_rate:.3f}")
    print(f"equilibrium reached: {result.converged_ne}")
    print(f"outputs in {out}")
    return EXIT_OK if result.converged_ne else EXIT_NOT_CONVERGED


def cmd_eval(args) -> int:
    if args.out:
        out = Path(args.out)
    else:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        out = runconfig.runs_root() / f"eval-{stamp}" / "eval"
    out.mkdir(parents=True, exist_ok=True)
    base_cfg = None
    if args.config:
        base_cfg = runconfig.load_config(args.config)
    try:
        if args.protocol == "table3":
            spec = evaluation.MatchSpec(runner=args.runner, chaser=args.chaser,
                                        episodes=args.episodes, placement="fixed_table3",
                                        seed=args.seed,
                                        world=base_cfg.world if base_cfg else None)
            res = evaluation.run_match(spec)
            print(f"sr_runner={res.sr_runner:.3f} sr_chaser={res.sr_chaser:.3f} "
                  f"timeout={res.timeout_rate:.3f} mean_steps={res.mean_steps:.1f}")
        elif args.protocol == "sweep-speed":
            rows = evaluation.speed_sweep(args.runner, args.chaser,
                                          episodes=args.episodes, seed=args.seed,
                                          out_csv=out / "speed_sweep.csv")
            for s, r in rows:
                print(f"v_ratio={s:g} sr_runner={r.sr_runner:.3f}")
            print(f"wrote {out / 'speed_sweep.csv'}")
        elif args.protocol == "sweep-count":
            if base_cfg is None:
                base_cfg = runconfig.default_config()
            rows = evaluation.chaser_count_sweep(
                [1, 2, 3], base_cfg.world, base_cfg.rewards, base_cfg.trainer,
                base_cfg.plan, seed=args.seed, out_csv=out / "chaser_count_sweep.csv")
            for r in rows:
                print(f"n_chasers={r['n_chasers']} sr_runner={r['sr_runner']:.3f}")
            print(f"wrote {out / 'chaser_count_sweep.csv'}")
        elif args.protocol == "heatmap":
            grid = evaluation.geometry_heatmap(
                angles_deg=[10, 15, 22.5, 30, 40, 60, 90, 120],
                radii=[0.5, 1.0, 1.5, 2.0], episodes=args.episodes,
                runner_ref=args.runner, chaser_ref=args.chaser, seed=args.seed,
                out_csv=out / "heatmap.csv", out_png=out / "heatmap.png")
            print(f"wrote {out / 'heatmap.csv'} and {out / 'heatmap.png'}; "
                  f"skipped cells: {grid['skipped']}")
        else:  # bench
            stats = evaluation.bench_inference(args.runner, max(1, args.episodes))
            print(f"forward latency: {stats.mean_ms:.4f} ms +/- {stats.std_ms:.4f} "
                  f"over {stats.iterations} calls")
    except (PelabError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_serve(args) -> int:
    try:
        base_cfg = runconfig.load_config(args.config) if args.config else runconfig.default_config()
        session_cfg = server.SessionConfig(
            runner=args.runner, chaser=args.chaser, seed=args.seed,
            tick_hz=args.tick_hz, practice=args.practice,
            world=base_cfg.world, weights=base_cfg.rewards)
        ledger_path = runconfig.runs_root() / "serve" / "session_ledger.json"
        ledger_path.parent.mkdir(parents=True, exist_ok=True)
        server.serve(session_cfg, args.port, args.host, ledger_path,
                     static_dir=args.static)
    except (PelabError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _make_parser().parse_args(argv)
    if args.command == "train":
        return cmd_train(args)
    if args.command == "eval":
        return cmd_eval(args)
    return cmd_serve(args)


if __name__ == "__main__":
    sys.exit(main())
