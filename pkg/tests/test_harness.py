"""Harness tests: config parsing, trial seeding, CSV formats, aggregation."""

import math

import numpy as np
import pytest

import neural_rbmle.harness as harness
from neural_rbmle.bandit import RegretTrace, cumulative_regret
from neural_rbmle.errors import ConfigurationError, NumericError
from neural_rbmle.harness import (
    ExperimentConfig,
    SummaryRow,
    build_config,
    parse_config_file,
    run_experiment,
    run_trial,
    write_summary_csv,
    write_trace_csv,
)


# --------------------------------------------------------- config parsing


def test_parse_config_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(
        "# experiment\n"
        "algo = rbmle-ga\n"
        "T = 50   # rounds\n"
        "lambda = 0.5\n"
        "\n"
        "warm_start = false\n",
        encoding="utf-8")
    parsed = parse_config_file(str(path))
    assert parsed == {"algo": "rbmle-ga", "T": "50", "lam": "0.5",
                      "warm_start": "false"}


def test_parse_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("horizon = 10\n", encoding="utf-8")
    with pytest.raises(ConfigurationError) as err:
        parse_config_file(str(path))
    assert f"{path}:1" in str(err.value)


def test_parse_config_rejects_malformed_lines(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("algo = random\nT\n", encoding="utf-8")
    with pytest.raises(ConfigurationError) as err:
        parse_config_file(str(path))
    assert f"{path}:2" in str(err.value)


def test_build_config_coerces_strings():
    config = build_config({"T": "7", "lambda": "0.5", "warm_start": "off",
                           "nu": "0.01", "algo": "rbmle-ga"})
    assert config.T == 7
    assert config.lam == 0.5
    assert config.warm_start is False
    assert config.nu == 0.01
    with pytest.raises(ConfigurationError):
        build_config({"warm_start": "maybe"})


@pytest.mark.parametrize("kwargs", [
    {"algo": "thompson"},
    {"T": 0},
    {"trials": 0},
    {"seed": -1},
    {"likelihood": "poisson"},
    {"zeta": "linear"},
    {"precision_mode": "banded"},
    {"algo": "rbmle-pc", "likelihood": "bernoulli"},
    {"env": "synthetic:cubic"},
    {"env": "cosine"},
    {"env": "dataset:"},
])
def test_experiment_config_validation(kwargs):
    with pytest.raises(ConfigurationError):
        ExperimentConfig(**kwargs)


def test_env_kind_split():
    assert ExperimentConfig(env="synthetic:linear").env_kind() == ("synthetic", "linear")
    assert ExperimentConfig(env="dataset:/tmp/x.csv").env_kind() == \
        ("dataset", "/tmp/x.csv")


def test_exploration_scale_resolution():
    assert harness._resolve_nu(ExperimentConfig(algo="rbmle-ga")) == 0.1
    assert harness._resolve_nu(ExperimentConfig(algo="rbmle-pc")) == 1e-3
    assert harness._resolve_nu(ExperimentConfig(algo="rbmle-ga", nu=0.7)) == 0.7


def test_precision_mode_resolution():
    auto = ExperimentConfig(precision_mode="auto")
    assert harness._resolve_precision_mode(auto, 8, 4) == "full"
    assert harness._resolve_precision_mode(auto, 8, 9) == "diagonal"
    forced = ExperimentConfig(precision_mode="diagonal")
    assert harness._resolve_precision_mode(forced, 2, 2) == "diagonal"


# ----------------------------------------------------------------- trials


def test_run_trial_is_reproducible():
    config = ExperimentConfig(algo="random", T=50, seed=3)
    a = run_trial(config, 0)
    b = run_trial(config, 0)
    assert a.arms == b.arms
    assert a.rewards == b.rewards
    assert a.cumulative_regrets == b.cumulative_regrets
    c = run_trial(config, 1)
    assert a.arms != c.arms


def test_run_trial_stops_at_dataset_end(tmp_path):
    path = tmp_path / "tiny.csv"
    rows = [f"{i % 2},{0.1 * i},{1.0 - 0.1 * i}" for i in range(5)]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    config = ExperimentConfig(algo="random", env=f"dataset:{path}", T=50)
    assert len(run_trial(config, 0)) == 5
    wrapped = ExperimentConfig(algo="random", env=f"dataset:{path}", T=50,
                               dataset_wrap=True)
    assert len(run_trial(wrapped, 0)) == 50


def test_run_trial_neural_smoke():
    config = ExperimentConfig(algo="rbmle-ga", T=5, m=4, J=5, K=3, d_raw=2)
    trace = run_trial(config, 0)
    assert len(trace) == 5
    assert all(0 <= a < 3 for a in trace.arms)
    assert all(math.isfinite(r) for r in trace.cumulative_regrets)


class _ExplodingAgent:
    def __init__(self, fail_at):
        self.fail_at = fail_at

    def select_arm(self, contexts, t):
        if t >= self.fail_at:
            raise NumericError("boom", step_index=7)
        return 0

    def observe(self, contexts, arm, reward, t):
        pass


def test_run_trial_tags_numeric_failures(monkeypatch):
    monkeypatch.setattr(harness, "_make_agent",
                        lambda config, dim, arms, rng: _ExplodingAgent(3))
    config = ExperimentConfig(algo="rbmle-ga", T=10)
    with pytest.raises(NumericError) as err:
        run_trial(config, 0)
    assert "trial 0, round 3" in str(err.value)
    assert err.value.step_index == 7


# ------------------------------------------------------------ csv formats


def test_trace_csv_golden(tmp_path):
    trace = RegretTrace()
    trace.append(1, 0, 0.5, 1.0, 0.5)
    trace.append(2, 2, 1.0, 1.0, 0.0)
    path = tmp_path / "trace.csv"
    write_trace_csv(trace, path)
    assert path.read_text(encoding="utf-8") == (
        "t,arm,reward,optimal_mean,instant_regret,cumulative_regret\n"
        "1,1,0.5,1,0.5,0.5\n"
        "2,3,1,1,0,0.5\n")


def test_trace_csv_nine_significant_digits(tmp_path):
    trace = RegretTrace()
    trace.append(1, 0, 0.123456789123, 1.0, 0.25)
    path = tmp_path / "trace.csv"
    write_trace_csv(trace, path)
    line = path.read_text(encoding="utf-8").splitlines()[1]
    assert line.split(",")[2] == "0.123456789"


def test_summary_csv_escapes_statuses(tmp_path):
    rows = [
        SummaryRow("random", "synthetic:cosine", "1", 12.25, 1.5),
        SummaryRow("random", "synthetic:cosine", "2", float("nan"), 0.25,
                   "error: a,b\nc"),
    ]
    path = tmp_path / "summary.csv"
    write_summary_csv(rows, path)
    text = path.read_text(encoding="utf-8").splitlines()
    assert text[0] == "algo,env,trial,final_cumulative_regret,wall_time_seconds,status"
    assert text[1] == "random,synthetic:cosine,1,12.25,1.500,ok"
    assert text[2] == "random,synthetic:cosine,2,nan,0.250,error: a;b c"


# -------------------------------------------------------------- experiment


def test_run_experiment_requires_out_dir():
    with pytest.raises(ConfigurationError):
        run_experiment(ExperimentConfig(algo="random", T=5, trials=1))


def test_run_experiment_writes_traces_and_summary(tmp_path):
    out = tmp_path / "exp"
    config = ExperimentConfig(algo="random", T=20, trials=3, seed=5, out=str(out))
    rows = run_experiment(config)
    for i in (1, 2, 3):
        assert (out / f"trace_trial{i:03d}.csv").exists()
    assert (out / "summary.csv").exists()
    assert [r.trial for r in rows] == ["1", "2", "3", "mean", "std"]
    finals = [r.final_cumulative_regret for r in rows[:3]]
    expected = [cumulative_regret(run_trial(config, i)) for i in range(3)]
    np.testing.assert_allclose(finals, expected, rtol=1e-12)
    mean_row, std_row = rows[3], rows[4]
    assert mean_row.final_cumulative_regret == pytest.approx(np.mean(finals))
    assert std_row.final_cumulative_regret == pytest.approx(np.std(finals, ddof=1))


def test_run_experiment_keeps_failed_trials_in_the_summary(tmp_path, monkeypatch):
    monkeypatch.setattr(harness, "_make_agent",
                        lambda config, dim, arms, rng: _ExplodingAgent(2))
    out = tmp_path / "broken"
    config = ExperimentConfig(algo="rbmle-ga", T=5, trials=2, out=str(out))
    rows = run_experiment(config)
    trial_rows = [r for r in rows if r.trial in ("1", "2")]
    assert all(r.status.startswith("error:") for r in trial_rows)
    assert all(math.isnan(r.final_cumulative_regret) for r in trial_rows)
    assert math.isnan(rows[-2].final_cumulative_regret)  # mean over no successes
    assert not list(out.glob("trace_*.csv"))
    assert (out / "summary.csv").exists()


def _masked_summary(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    masked = []
    for line in lines[1:]:
        parts = line.split(",")
        parts[4] = "WALL"
        masked.append(",".join(parts))
    return masked


def test_worker_processes_do_not_change_outputs(tmp_path, monkeypatch):
    serial_out = tmp_path / "serial"
    pooled_out = tmp_path / "pooled"
    base = dict(algo="random", T=30, trials=2, seed=9)
    monkeypatch.delenv("RBMLE_THREADS", raising=False)
    run_experiment(ExperimentConfig(out=str(serial_out), **base))
    monkeypatch.setenv("RBMLE_THREADS", "2")
    run_experiment(ExperimentConfig(out=str(pooled_out), **base))
    for i in (1, 2):
        name = f"trace_trial{i:03d}.csv"
        assert (serial_out / name).read_bytes() == (pooled_out / name).read_bytes()
    assert _masked_summary(serial_out / "summary.csv") == \
        _masked_summary(pooled_out / "summary.csv")


def test_random_regret_slope_on_a_dataset(tmp_path):
    rng = np.random.default_rng(0)
    rows = [f"{i % 10},{rng.normal():.6f},{rng.normal():.6f},{rng.normal():.6f}"
            for i in range(1200)]
    path = tmp_path / "ten_class.csv"
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    out = tmp_path / "rand"
    config = ExperimentConfig(algo="random", env=f"dataset:{path}", T=1000,
                              trials=5, seed=0, out=str(out))
    result = run_experiment(config)
    mean_row = next(r for r in result if r.trial == "mean")
    assert mean_row.final_cumulative_regret == pytest.approx(900.0, abs=45.0)
