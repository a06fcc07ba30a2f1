import io
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from nsregret.agents import make_agent
from nsregret.banditalg import FixedArm, UniformRandom
from nsregret.cli import main
from nsregret.envmodel import DistributionSequence, compute_params
from nsregret.gdexperts import OptimisticGD
from nsregret.harness.experiments import (
    ExperimentConfig,
    read_traces,
    run_experiment,
    sweep,
    traces_csv,
)
from nsregret.harness.plot import emit_plot
from nsregret.harness.runner import RegretTrace, run_bandit, run_fullinfo

SVG = "{http://www.w3.org/2000/svg}"


class Oracle:
    """Plays the best arm of the true means."""

    feedback = "full"

    def __init__(self, seq):
        self.mu, self.t = seq.means, 0

    def play(self):
        p = np.zeros(self.mu.shape[1])
        p[np.argmin(self.mu[self.t])] = 1.0
        return p

    def update(self, loss):
        self.t += 1


class TestRunners:
    def test_single_arm_is_flat(self, rng):
        seq = DistributionSequence.from_point_means(np.full((20, 1), 0.4))
        assert np.all(run_bandit(FixedArm(1, 0), seq, rng).cum_regret == 0)

    def test_oracle_has_zero_regret(self, rng):
        seq = DistributionSequence.from_point_means(rng.random((50, 3)))
        assert run_fullinfo(Oracle(seq), seq, rng).final == 0.0

    def test_uniform_constant_player(self, rng):
        seq = DistributionSequence.from_point_means(np.tile([0.2, 0.6], (10, 1)))
        tr = run_fullinfo(UniformRandom(2, rng), seq, rng)
        assert np.allclose(np.diff(tr.cum_regret, prepend=0.0), 0.2)

    def test_adaptive_gd_flat_after_first_step(self, rng):
        seq = DistributionSequence.from_point_means(np.tile([0.3, 0.8, 0.5], (40, 1)))
        tr = run_fullinfo(OptimisticGD(3, block_length=40), seq, rng)
        assert np.all(tr.cum_regret[1:] == tr.cum_regret[0])

    def test_bandit_only_reveals_chosen_loss(self, rng):
        seen = []

        class Spy(FixedArm):
            def observe(self, arm, loss):
                seen.append((arm, loss))

        seq = DistributionSequence.from_point_means(np.tile([0.1, 0.9], (5, 1)))
        run_bandit(Spy(2, 1), seq, rng)
        assert seen == [(1, 0.9)] * 5

    def test_horizon_mismatch(self, rng):
        seq = DistributionSequence.from_point_means(np.zeros((10, 2)))
        agent = make_agent("prod", 2, 11, None, rng)
        with pytest.raises(ValueError):
            run_fullinfo(agent, seq, rng)

    def test_trace_must_be_monotone(self):
        with pytest.raises(AssertionError):
            RegretTrace(np.array([0.0, 1.0, 0.5]))


class TestExperiments:
    def cfg(self, **kw):
        base = dict(env={"kind": "switching", "gamma": 3, "gap": 0.4, "sigma2": 0.04},
                    alg={"name": "rerun-ucbv"}, T=200, K=2, replications=3, base_seed=11)
        base.update(kw)
        return ExperimentConfig(**base)

    def test_seeds_and_csv_schema(self):
        traces = run_experiment(self.cfg())
        assert [t.seed for t in traces] == [11, 12, 13]
        lines = traces_csv(traces).splitlines()
        assert lines[0] == "step,cum_regret,alg,env,seed,rep" and len(lines) == 1 + 3 * 200
        assert lines[1].startswith("1,")

    def test_csv_bytes_are_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_experiment(self.cfg(out_csv=str(a)))
        run_experiment(self.cfg(out_csv=str(b)))
        assert a.read_bytes() == b.read_bytes()

    def test_csv_round_trip(self):
        traces = run_experiment(self.cfg(alg={"name": "prod-sleeping"}))
        back = read_traces(io.StringIO(traces_csv(traces)))
        assert len(back) == 3
        for x, y in zip(traces, back):
            assert np.allclose(x.cum_regret, y.cum_regret, rtol=1e-11)

    def test_twelve_significant_digits(self):
        text = traces_csv([RegretTrace(np.array([1 / 3]), "a", "e", 0, 0)])
        assert text.splitlines()[1] == "1,0.333333333333,a,e,0,0"

    def test_overrides_and_validation(self, tmp_path):
        cfg = self.cfg().with_overrides({"T": 50, "env.gamma": 2, "alg.name": "gd-fixed"})
        assert (cfg.T, cfg.env["gamma"], cfg.alg["name"]) == (50, 2, "gd-fixed")
        with pytest.raises(ValueError):
            self.cfg(replications=0)
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert ExperimentConfig.load(path) == cfg

    def test_file_environment(self, tmp_path):
        seq = DistributionSequence.from_point_means(np.tile([0.2, 0.7], (30, 1)))
        seq.save(tmp_path / "s.json")
        cfg = self.cfg(env={"kind": "file", "path": str(tmp_path / "s.json")}, T=30,
                       alg={"name": "fixed-arm", "arm": 0})
        assert all(t.final == 0.0 for t in run_experiment(cfg))


class TestSweep:
    def test_one_cell_equals_single_run(self):
        base = ExperimentConfig(alg={"name": "gd-fixed"}, T=100, replications=2)
        rows = sweep(base, {"T": [100]})
        finals = [t.final for t in run_experiment(base)]
        assert rows[0]["mean_final_regret"] == pytest.approx(np.mean(finals))

    def test_rows_written_and_deterministic(self):
        base = ExperimentConfig(env={"kind": "switching", "gamma": 4, "gap": 0.5, "sigma2": 0.04},
                                alg={"name": "prod-sleeping"}, replications=2)
        outs = []
        for _ in range(2):
            buf = io.StringIO()
            rows = sweep(base, {"T": [100, 200, 400, 800]}, buf)
            outs.append(buf.getvalue())
        assert outs[0] == outs[1] and len(outs[0].splitlines()) == 5
        means = [r["mean_final_regret"] for r in rows]
        assert means == sorted(means)


class TestPlot:
    def parse(self, svg):
        return ET.fromstring(svg)

    def test_empty(self):
        root = self.parse(emit_plot([]))
        assert root.tag == SVG + "svg" and not root.findall(f".//{SVG}polyline")

    def test_flat_trace_is_horizontal_line_at_zero(self):
        root = self.parse(emit_plot([RegretTrace(np.zeros(50), "a", "e")]))
        (line,) = root.findall(f".//{SVG}polyline")
        ys = {p.split(",")[1] for p in line.get("points").split()}
        assert len(ys) == 1

    def test_two_traces_and_legend(self):
        traces = [RegretTrace(np.arange(10.0), "a", "e", 0, r) for r in range(3)]
        traces += [RegretTrace(2 * np.arange(10.0), "b", "e")]
        svg = emit_plot(traces)
        root = self.parse(svg)
        assert len(root.findall(f".//{SVG}polyline")) == 2
        assert root.find(f".//{SVG}g[@class='legend']") is not None
        assert svg == emit_plot(traces)


class TestCli:
    def test_run_plot_and_validate(self, tmp_path, capsys):
        out, svg = tmp_path / "t.csv", tmp_path / "t.svg"
        assert main(["run", "--env", "drifting", "--set", "env.drift=1.5", "--alg", "prod", "--T", "80",
                     "--replications", "2", "--out", str(out)]) == 0
        assert out.read_text().startswith("step,cum_regret")
        assert main(["plot", str(out), "--out", str(svg)]) == 0
        assert "<polyline" in svg.read_text()
        assert main(["validate", "--suite", "lemma1-conditions"]) == 0
        assert "[PASS] lemma1-conditions" in capsys.readouterr().out

    def test_adversary_writes_sequence_and_sidecar(self, tmp_path):
        out = tmp_path / "adv.json"
        assert main(["adversary", "--kind", "switching", "--target-alg", "uniform", "--T", "128",
                     "--mc-runs", "50", "--out", str(out)]) == 0
        seq = DistributionSequence.load(out)
        diag = json.loads((tmp_path / "adv.diagnostics.json").read_text())
        assert seq.horizon == 128 and diag["params"]["variance_budget"] == 0.0
        assert compute_params(seq).gamma <= 2

    def test_sweep_to_table(self, tmp_path):
        table = tmp_path / "s.csv"
        assert main(["sweep", "--alg", "gd-adaptive", "--replications", "1", "--grid", "T=50,100",
                     "--table", str(table)]) == 0
        assert len(table.read_text().splitlines()) == 3

    def test_bad_input_exit_code(self):
        assert main(["run", "--T", "0"]) == 2
