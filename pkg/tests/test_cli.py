import json

import pytest
from click.testing import CliRunner

from mixbayes.cli import main
from mixbayes.core import AtomicMixture, Dataset
from mixbayes.experiments import read_results

SAMPLER = {"iterations": 300, "burn_in": 100, "thin": 10}


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def data_file(runner, tmp_path):
    res = runner.invoke(main, ["gen", "--case", "1", "--n", "300", "--seed", "7", "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    return tmp_path / "case1_n300_seed7.txt"


def test_gen(data_file):
    data = Dataset.load(data_file)
    assert data.observations.size == 300
    assert data.truth == AtomicMixture([-3, -1, 1, 3], [0.25] * 4)


def test_gen_custom(runner, tmp_path):
    truth = tmp_path / "t.json"
    truth.write_text(json.dumps({"atoms": [0.0], "weights": [1.0]}))
    out = tmp_path / "d.txt"
    res = runner.invoke(main, ["gen", "--truth", str(truth), "--n", "5", "--out", str(out)])
    assert res.exit_code == 0 and Dataset.load(out).observations.size == 5


def test_gen_needs_one_source(runner, tmp_path):
    assert runner.invoke(main, ["gen", "--n", "5", "--out", str(tmp_path)]).exit_code == 2
    assert runner.invoke(main, ["gen", "--case", "7", "--n", "5", "--out", str(tmp_path)]).exit_code == 2


@pytest.mark.parametrize("method", ["mfm_vary", "dp_const"])
def test_fit_sampler(runner, data_file, tmp_path, method):
    cfg = tmp_path / "prior.json"
    cfg.write_text(json.dumps({"sampler": SAMPLER}))
    out, est = tmp_path / "trace.csv", tmp_path / "est.json"
    res = runner.invoke(main, ["fit", "--method", method, "--data", str(data_file), "--config", str(cfg),
                               "--out", str(out), "--estimate", str(est), "--seed", "3"])
    assert res.exit_code == 0, res.output
    assert "mode" in res.output
    assert out.read_text().startswith("iter,k_or_T,log_post,atoms_json,weights_json")
    AtomicMixture.from_json(est.read_text())


@pytest.mark.parametrize("method", ["map", "moments"])
def test_fit_point_and_eval(runner, data_file, tmp_path, method):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"k": 4}))
    out = tmp_path / "est.json"
    res = runner.invoke(main, ["fit", "--method", method, "--data", str(data_file), "--config", str(cfg),
                               "--out", str(out)])
    assert res.exit_code == 0, res.output
    sidecar = str(data_file.with_suffix(".json"))
    res = runner.invoke(main, ["eval", "--estimate", str(out), "--truth", sidecar, "--q", "2"])
    assert res.exit_code == 0 and 0 <= float(res.output) < 12


def test_fit_config_errors(runner, data_file, tmp_path):
    out = str(tmp_path / "o.json")
    assert runner.invoke(main, ["fit", "--method", "map", "--data", str(data_file), "--out", out]).exit_code == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    res = runner.invoke(main, ["fit", "--method", "mfm", "--data", str(data_file), "--config", str(bad),
                               "--out", out])
    assert res.exit_code == 2
    bad.write_text(json.dumps({"sampler": {"alpha": 3}}))
    res = runner.invoke(main, ["fit", "--method", "mfm", "--data", str(data_file), "--config", str(bad),
                               "--out", out])
    assert res.exit_code == 2


def test_experiment(runner, tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"case": "case2", "n_grid": [100], "replicates": 2,
                                "methods": ["map_exact", "mfm_const"], "sampler": SAMPLER}))
    out = tmp_path / "r.csv"
    res = runner.invoke(main, ["experiment", "--plan", str(plan), "--out", str(out), "--quiet"])
    assert res.exit_code == 0, res.output
    assert len(read_results(out)) == 4


def test_experiment_bad_plan(runner, tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"n_grid": [500, 100]}))
    res = runner.invoke(main, ["experiment", "--plan", str(plan), "--out", str(tmp_path / "r.csv")])
    assert res.exit_code == 2
    res = runner.invoke(main, ["experiment", "--plan", str(tmp_path / "missing.json"),
                               "--out", str(tmp_path / "r.csv")])
    assert res.exit_code == 2


def test_experiment_partial_failure(runner, tmp_path, monkeypatch):
    import mixbayes.experiments as ex

    def boom(*args, **kwargs):
        raise RuntimeError("boom")

    monkeypatch.setattr(ex, "em_map", boom)
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"n_grid": [50], "replicates": 1, "methods": ["map_exact", "moments"]}))
    res = runner.invoke(main, ["experiment", "--plan", str(plan), "--out", str(tmp_path / "r.csv"), "--quiet"])
    assert res.exit_code == 3
    assert len(read_results(tmp_path / "r.csv")) == 2


def test_kexp(runner, tmp_path, monkeypatch):
    import mixbayes.samplers.trace as tr

    monkeypatch.setattr(tr.SamplerConfig, "desk", classmethod(lambda cls, **kw: cls(**{**SAMPLER, **kw})))
    out = tmp_path / "k.csv"
    res = runner.invoke(main, ["kexp", "--out", str(out), "--n-grid", "40", "--replicates", "1", "--quiet"])
    assert res.exit_code == 0, res.output
    assert len(out.read_text().splitlines()) == 5


def test_rates(runner, tmp_path):
    out = tmp_path / "rates.csv"
    res = runner.invoke(main, ["rates", "--out", str(out), "--n-grid", "1000,1000000"])
    assert res.exit_code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("n,kbar,higher_order,exact_k1") and len(lines) == 3
    assert runner.invoke(main, ["rates", "--out", str(out), "--n-grid", "a,b"]).exit_code == 2


def test_version(runner):
    res = runner.invoke(main, ["--version"])
    assert res.exit_code == 0 and "0.1.0" in res.output
