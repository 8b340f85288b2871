import json

import numpy as np
import pytest

from nfq_steer import harness
from nfq_steer.cli import main
from nfq_steer.config import build_config, load_config
from nfq_steer.env import Action
from nfq_steer.errors import ConfigurationError, InputError, ParseError
from nfq_steer.net import LayerSpec, NetworkParams, save_checkpoint, init_network
from nfq_steer.records import EpisodeMetrics, read_metrics, read_trajectories, read_transition_log, write_metrics

TINY = ["nfq.episodes=4", "nfq.reset_period=2", "nfq.epochs=3", "nfq.max_steps=30",
        "nfq.hint_count=5"]


def cfg(tmp_path, *extra, **kw):
    return build_config(out=str(tmp_path), overrides=list(TINY) + list(extra), **kw)


class TestConfig:
    def test_profiles(self):
        sim = build_config(profile="sim").nfq
        hw = build_config(profile="hardware").nfq
        assert (sim.episodes, sim.reset_period, sim.epochs) == (300, 100, 300)
        assert (hw.episodes, hw.reset_period, hw.epochs) == (150, 50, 100)

    def test_precedence(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"profile": "hardware", "nfq": {"epochs": 7}, "seed": 4}))
        c = load_config(p, overrides=["nfq.epochs=9"], seed=5)
        assert c.nfq.episodes == 150 and c.nfq.epochs == 9 and c.seed == 5

    def test_round_trip(self):
        c = build_config(profile="hardware", overrides=["motor.noise_std=0.001", "regions.v_max=2.0"])
        assert build_config(c.to_dict()) == c
        json.dumps(c.to_dict())

    @pytest.mark.parametrize("item", ["nfq.bogus=1", "weird=3", "motor.torque_gain=-1",
                                      "env=water", "nfq.rprop.eta_plus=0.5", "noequals"])
    def test_rejects(self, item):
        with pytest.raises(ConfigurationError):
            build_config(overrides=[item])

    def test_replay_needs_dataset(self, tmp_path):
        with pytest.raises(ConfigurationError):
            harness.cmd_train(cfg(tmp_path, env="replay"))

    def test_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{\n  'x': 1}")
        with pytest.raises(ParseError):
            load_config(p)


class TestCollect:
    def test_exact_row_count_and_determinism(self, tmp_path):
        c = cfg(tmp_path)
        p1 = harness.cmd_collect(c, 500, tmp_path / "a.csv")
        p2 = harness.cmd_collect(c, 500, tmp_path / "b.csv")
        assert len(read_transition_log(p1)) == 500
        assert p1.read_bytes() == p2.read_bytes()

    def test_zero_steps(self, tmp_path):
        with pytest.raises(InputError):
            harness.cmd_collect(cfg(tmp_path), 0)

    def test_episodes_are_contiguous(self, tmp_path):
        rows = read_transition_log(harness.cmd_collect(cfg(tmp_path), 300))
        for prev, cur in zip(rows, rows[1:]):
            if cur.episode == prev.episode:
                assert cur.t == prev.t + 1
                assert cur.transition.s == prev.transition.s_next
            else:
                assert cur.t == 0 and cur.episode == prev.episode + 1


class TestTrain:
    def test_outputs(self, tmp_path):
        out = harness.cmd_train(cfg(tmp_path))
        rows = read_metrics(out.metrics_path)
        assert rows == out.metrics and len(rows) == 4
        assert [r.episode for r in rows if r.reset] == [3]
        assert [p.name for p in out.checkpoints] == ["pre-reset-ep0002.json", "final-ep0004.json"]
        s = json.loads(out.summary_path.read_text())
        assert s["aborted"] is None and s["resets"] == [3]
        assert s["last_quarter_mean_cost"] == pytest.approx(rows[-1].total_cost)

    def test_replay_env(self, tmp_path):
        log = harness.cmd_collect(cfg(tmp_path), 2000, tmp_path / "log.csv")
        c = cfg(tmp_path / "run", f'replay_dataset="{log}"', env="replay")
        out = harness.cmd_train(c)
        assert len(out.metrics) == 4

    def test_divergence_is_recorded(self, tmp_path, monkeypatch):
        import nfq_steer.nfq as nfq
        real = nfq.train

        def poisoned(net, opt, patterns, epochs):
            net, opt, rep = real(net, opt, patterns, epochs)
            net.flat[0] = np.nan
            return net, opt, rep

        monkeypatch.setattr(nfq, "train", poisoned)
        from nfq_steer.errors import TrainingDivergedError
        with pytest.raises(TrainingDivergedError):
            harness.cmd_train(cfg(tmp_path))
        s = json.loads((tmp_path / "summary.json").read_text())
        assert s["aborted"]["episode"] == 1
        assert len(read_metrics(tmp_path / "metrics.csv")) == 1


class TestEval:
    def test_constant_checkpoint_is_all_left(self, tmp_path):
        ck = save_checkpoint(tmp_path / "zero.json", NetworkParams(LayerSpec(), np.zeros(61)))
        report = harness.cmd_eval(ck, cfg(tmp_path), 5)
        dumps = read_trajectories(tmp_path / "eval_trajectories.csv")
        assert len(dumps) == 5
        assert all(a is Action.LEFT for d in dumps for a in d.actions)
        assert report["episodes"] == 5

    def test_success_rate_matches_dumps(self, tmp_path):
        ck = save_checkpoint(tmp_path / "n.json", init_network(LayerSpec(), 3))
        report = harness.cmd_eval(ck, cfg(tmp_path, "nfq.max_steps=300"), 20)
        dumps = read_trajectories(tmp_path / "eval_trajectories.csv")
        from nfq_steer.nfq import episode_success
        from nfq_steer.env import RegionSpec
        flags = [episode_success(d.transitions(), RegionSpec()) for d in dumps]
        assert report["success_rate"] == sum(flags) / len(flags)
        assert report["mean_cost"] == pytest.approx(np.mean([d.total_cost for d in dumps]), abs=1e-12)

    def test_zero_episodes(self, tmp_path):
        ck = save_checkpoint(tmp_path / "n.json", init_network(LayerSpec(), 3))
        with pytest.raises(InputError):
            harness.cmd_eval(ck, cfg(tmp_path), 0)

    def test_spec_mismatch(self, tmp_path):
        ck = save_checkpoint(tmp_path / "n.json", init_network(LayerSpec((4, 3, 1)), 3))
        with pytest.raises(ConfigurationError):
            harness.cmd_eval(ck, cfg(tmp_path), 2)


class TestCompare:
    def test_paired_dumps(self, tmp_path):
        c = cfg(tmp_path, "nfq.max_steps=100")
        log = harness.cmd_collect(c, 3000, tmp_path / "log.csv")
        rep = harness.cmd_compare(c, 10, dataset=log)
        phys, repl = rep["dumps"]["physics"], rep["dumps"]["replay"]
        assert len(phys) + len(repl) == 20
        assert [d.states[0] for d in phys] == [d.states[0] for d in repl]
        for env in ("physics", "replay"):
            counts = rep[env]
            assert counts["success"] + counts["failure"] + counts["timeout"] == 10
            assert counts["timeout"] >= 0
        assert len(read_trajectories(tmp_path / "compare_replay.csv")) == 10
        assert json.loads((tmp_path / "compare_summary.json").read_text())["policy"] == "random"

    def test_checkpoint_policy(self, tmp_path):
        c = cfg(tmp_path, "nfq.max_steps=50")
        log = harness.cmd_collect(c, 1000, tmp_path / "log.csv")
        ck = save_checkpoint(tmp_path / "n.json", init_network(LayerSpec(), 3))
        rep = harness.cmd_compare(c, 3, checkpoint=ck, dataset=log)
        assert rep["policy"] == "checkpoint"


class TestExportPlots:
    def _metrics(self, tmp_path, costs):
        rows = [EpisodeMetrics(i + 1, 10, c, False, False, False) for i, c in enumerate(costs)]
        return write_metrics(tmp_path / "metrics.csv", rows)

    def test_constant_series(self, tmp_path):
        series, _ = harness.cmd_export_plots(self._metrics(tmp_path, [0.25] * 30))
        avg = [float(l.split(",")[2]) for l in series.read_text().splitlines()[1:]]
        assert avg == pytest.approx([0.25] * 30, abs=1e-15)

    def test_windowed_recomputation(self, tmp_path, rng):
        costs = rng.uniform(0, 1, 300)
        series, table = harness.cmd_export_plots(self._metrics(tmp_path, costs))
        lines = series.read_text().splitlines()[1:]
        assert len(lines) == 300
        avg = np.array([float(l.split(",")[2]) for l in lines])
        ref = np.array([np.mean(costs[max(0, i - 19): i + 1]) for i in range(300)])
        assert np.allclose(avg, ref, rtol=0, atol=1e-12)
        q = table.read_text().splitlines()[1:]
        assert [l.split(",")[1:3] for l in q] == [["1", "75"], ["76", "150"], ["151", "225"], ["226", "300"]]

    def test_malformed(self, tmp_path):
        p = tmp_path / "metrics.csv"
        p.write_text("episode,steps,total_cost,success,terminated,reset\n1,2,3\n")
        with pytest.raises(ParseError):
            harness.cmd_export_plots(p)


class TestCli:
    def test_collect_train_export(self, tmp_path, capsys):
        sets = sum((["--set", s] for s in TINY), [])
        assert main(["collect", "--steps", "200", "--out", str(tmp_path)]) == 0
        assert len(read_transition_log(tmp_path / "transitions.csv")) == 200
        assert main(["train", "--out", str(tmp_path / "t"), "--seed", "1"] + sets) == 0
        assert main(["export-plots", str(tmp_path / "t" / "metrics.csv")]) == 0
        assert (tmp_path / "t" / "cost_series.csv").exists()
        ck = tmp_path / "t" / "checkpoints" / "final-ep0004.json"
        assert main(["eval", "--checkpoint", str(ck), "--episodes", "2", "--out", str(tmp_path / "e")] + sets) == 0
        assert main(["compare", "--episodes", "2", "--dataset", str(tmp_path / "transitions.csv"),
                     "--out", str(tmp_path / "c")] + sets) == 0

    def test_global_flags_before_subcommand(self, tmp_path):
        assert main(["--out", str(tmp_path), "--seed", "3", "collect", "--steps", "5"]) == 0

    def test_error_line(self, tmp_path, capsys):
        assert main(["collect", "--steps", "0", "--out", str(tmp_path)]) == 2
        err = capsys.readouterr().err.strip().splitlines()
        assert len(err) == 1 and err[0].startswith("nfq-steer: error: input:")
        assert main(["train", "--env", "replay", "--out", str(tmp_path)]) == 2
        assert "error: config:" in capsys.readouterr().err
        assert main(["export-plots", str(tmp_path / "missing.csv")]) == 3
        assert "error: io:" in capsys.readouterr().err
