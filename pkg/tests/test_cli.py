import json

import pytest

from pelab import cli, runconfig
from pelab.errors import ConfigurationError

MICRO_CONFIG = {
    "version": 1,
    "seed": 3,
    "mode": "ams",
    "world": {"t_max": 50},
    "trainer": {"buffer_size": 128, "batch_size": 64, "epochs": 1, "num_envs": 2,
                "hidden_sizes": [8, 8]},
    "plan": {"eta": 0.5, "k_max": 2, "ws": 4, "l_sw": 5, "min_episodes": 10,
             "stage_episode_cap": 40, "improvement_eps": 1e9, "checkpoints": 2},
}


def write_config(tmp_path, doc=None, **overrides):
    doc = dict(doc or MICRO_CONFIG)
    doc.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


class TestRunConfig:
    def test_defaults_carry_published_parameters(self):
        cfg = runconfig.default_config()
        assert cfg.world.bounds == (5.0, 5.0, 3.0)
        assert cfg.world.n_chasers == 2
        assert cfg.world.drone_collider == (0.30, 0.30, 0.05)
        assert cfg.world.t_max == 1000
        assert cfg.world.v_max_runner == 1.0 and cfg.world.v_max_chaser == 1.0
        assert cfg.world.w_max == 20.0
        assert (cfg.rewards.c1, cfg.rewards.c2) == (1000.0, 1000.0)
        assert cfg.rewards.w1 == 10000.0 and cfg.rewards.d_eps == 0.5
        assert cfg.trainer.buffer_size == 10240 and cfg.trainer.batch_size == 1024
        assert cfg.trainer.initial_lr == 3e-4 and cfg.trainer.entropy_beta == 0.01
        assert cfg.trainer.clip_eps == 0.2 and cfg.trainer.lam == 0.95
        assert cfg.trainer.epochs == 3 and cfg.trainer.lr_schedule == "linear"
        assert cfg.trainer.max_episodes == 6_000_000
        assert cfg.plan.eta == 0.10 and cfg.plan.k_max == 10 and cfg.plan.ws == 500
        assert cfg.plan.l_sw == 1000 and cfg.plan.checkpoints == 10

    def test_unknown_top_level_key_rejected(self, tmp_path):
        path = write_config(tmp_path, banana=1)
        with pytest.raises(ConfigurationError, match="banana"):
            runconfig.load_config(path)

    def test_unknown_section_key_has_field_path(self, tmp_path):
        doc = dict(MICRO_CONFIG)
        doc["world"] = {"t_max": 50, "wobble": True}
        path = write_config(tmp_path, doc)
        with pytest.raises(ConfigurationError, match="world.wobble"):
            runconfig.load_config(path)

    def test_version_mismatch_rejected(self, tmp_path):
        path = write_config(tmp_path, version=9)
        with pytest.raises(ConfigurationError, match="version"):
            runconfig.load_config(path)

    def test_invalid_values_rejected(self, tmp_path):
        doc = dict(MICRO_CONFIG)
        doc["world"] = {"t_max": 0}
        path = write_config(tmp_path, doc)
        with pytest.raises(ConfigurationError):
            runconfig.load_config(path)

    def test_round_trip(self, tmp_path):
        path = write_config(tmp_path)
        cfg = runconfig.load_config(path)
        doc = runconfig.config_to_dict(cfg)
        again = runconfig.config_from_dict(doc)
        assert runconfig.config_to_dict(again) == doc

    def test_manifest_written(self, tmp_path):
        cfg = runconfig.default_config()
        path = runconfig.write_manifest(cfg, tmp_path)
        doc = json.loads(path.read_text())
        assert doc["config"]["world"]["t_max"] == 1000
        assert doc["config"]["trainer"]["buffer_size"] == 10240
        assert "pelab" in doc["versions"]


class TestTrainCommand:
    def test_ams_micro_run(self, tmp_path):
        cfg_path = write_config(tmp_path)
        out = tmp_path / "run"
        code = cli.main(["train", "--config", str(cfg_path), "--out", str(out)])
        assert code in (cli.EXIT_OK, cli.EXIT_NOT_CONVERGED)
        assert (out / "manifest.json").exists()
        report = json.loads((out / "report.json").read_text())
        assert report["phases"][0]["phase"] == 0
        converged = report["converged_ne"]
        assert code == (cli.EXIT_OK if converged else cli.EXIT_NOT_CONVERGED)

    def test_direct_mode_reports_both(self, tmp_path):
        cfg_path = write_config(tmp_path)
        out = tmp_path / "run"
        code = cli.main(["train", "--config", str(cfg_path), "--mode", "direct",
                         "--out", str(out)])
        assert code == cli.EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["phases"][0]["trained_side"] == "both"

    def test_cold_start_mode(self, tmp_path):
        cfg_path = write_config(tmp_path)
        out = tmp_path / "run"
        code = cli.main(["train", "--config", str(cfg_path), "--mode", "cold-start",
                         "--out", str(out)])
        assert code in (cli.EXIT_OK, cli.EXIT_NOT_CONVERGED)
        assert (out / "S0" / "policy_runner_final.json").exists()

    def test_resume_continues(self, tmp_path):
        cfg_path = write_config(tmp_path)
        out = tmp_path / "run"
        cli.main(["train", "--config", str(cfg_path), "--out", str(out)])
        before = len(json.loads((out / "report.json").read_text())["phases"])
        code = cli.main(["train", "--config", str(cfg_path), "--out", str(out),
                         "--resume", str(out)])
        assert code in (cli.EXIT_OK, cli.EXIT_NOT_CONVERGED)
        after = len(json.loads((out / "report.json").read_text())["phases"])
        assert after > before

    def test_invalid_config_exits_one(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"version": 1, "world": {"nope": 1}}')
        assert cli.main(["train", "--config", str(path)]) == cli.EXIT_ERROR


class TestEvalCommand:
    def test_table3_protocol(self, tmp_path, capsys):
        code = cli.main(["eval", "--runner", "apf", "--chaser", "random",
                         "--protocol", "table3", "--episodes", "5",
                         "--seed", "1", "--out", str(tmp_path)])
        assert code == cli.EXIT_OK
        assert "sr_runner=" in capsys.readouterr().out

    def test_bad_ref_exits_one(self, tmp_path):
        code = cli.main(["eval", "--runner", "bogus", "--chaser", "pid",
                         "--protocol", "table3", "--episodes", "1",
                         "--out", str(tmp_path)])
        assert code == cli.EXIT_ERROR

    def test_heatmap_writes_outputs(self, tmp_path):
        code = cli.main(["eval", "--runner", "apf", "--chaser", "pid",
                         "--protocol", "heatmap", "--episodes", "1",
                         "--out", str(tmp_path)])
        assert code == cli.EXIT_OK
        assert (tmp_path / "heatmap.csv").exists()
        assert (tmp_path / "heatmap.png").exists()

    def test_bench_protocol(self, tmp_path, capsys):
        weights = tmp_path / "w.json"
        import numpy as np

        from pelab import policy
        params = policy.init_params(9, 4, np.random.default_rng(0),
                                    policy.default_bounds(1.0, 20.0), hidden=(8, 8))
        policy.save_weights(params, weights)
        code = cli.main(["eval", "--runner", f"policy:{weights}", "--chaser", "pid",
                         "--protocol", "bench", "--episodes", "50",
                         "--out", str(tmp_path)])
        assert code == cli.EXIT_OK
        assert "latency" in capsys.readouterr().out

    def test_runs_dir_env_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PE_RUNS_DIR", str(tmp_path / "custom"))
        code = cli.main(["eval", "--runner", "apf", "--chaser", "random",
                         "--protocol", "table3", "--episodes", "2", "--seed", "2"])
        assert code == cli.EXIT_OK
        assert runconfig.runs_root() == tmp_path / "custom"


class TestServeCommand:
    def test_bad_policy_ref_exits_one(self, tmp_path):
        code = cli.main(["serve", "--port", "59999", "--runner", "bogus",
                         "--chaser", "pid"])
        assert code == cli.EXIT_ERROR
