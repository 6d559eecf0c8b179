"""Experiment orchestration: configs, seeding, trial loops, CSV emission.

Every trial derives its two random streams (environment, agent) from the
pair (master seed, trial index) through a counter-based generator, so trials
are reproducible in isolation and independent of execution order.  All CSV
output is UTF-8 with LF endings and 9-significant-digit floats; given the
same config and master seed, every emitted regret byte is identical across
runs (wall-clock columns are the one documented exception).
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .bandit import RegretTrace, cumulative_regret
from .baselines import LinRbmle, NeuralUcb, RandomAgent
from .envs import (
    Dataset,
    DatasetEnv,
    SYNTHETIC_KINDS,
    load_dataset,
    make_synthetic_env,
    synthetic_env_step,
)
from .errors import ConfigurationError, NumericError
from .net import NetworkConfig, init_params
from .precision import MODES
from .rbmle_ga import GaConfig, NeuralRbmleGa, ZETA_NAMES
from .rbmle_pc import NeuralRbmlePc, PcConfig
from .surrogate import FAMILY_NAMES, make_family

__all__ = [
    "ALGO_NAMES",
    "ExperimentConfig",
    "SummaryRow",
    "parse_config_file",
    "build_config",
    "run_trial",
    "run_experiment",
    "write_trace_csv",
    "write_summary_csv",
]

ALGO_NAMES = ("rbmle-ga", "rbmle-pc", "neural-ucb", "lin-rbmle", "random")

TRACE_HEADER = "t,arm,reward,optimal_mean,instant_regret,cumulative_regret"
SUMMARY_HEADER = "algo,env,trial,final_cumulative_regret,wall_time_seconds,status"


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: an algorithm, an environment, and every knob.

    Keys match the CLI flags and the flat config-file grammar; ``lam`` is
    spelled ``lambda`` externally.
    """

    algo: str = "random"
    env: str = "synthetic:cosine"
    T: int = 2000
    trials: int = 10
    seed: int = 0
    out: str | None = None
    # network
    m: int = 100
    depth: int = 2
    # neural fitting
    J: int = 100
    eta: float = 1e-3
    lam: float = 1e-3
    # Exploration scale; None resolves per algorithm (0.1, except 1e-3 for
    # rbmle-pc whose closed-form correction needs the smaller grid value).
    nu: float | None = None
    zeta: str = "one_plus_log"
    warm_start: bool = True
    likelihood: str = "gaussian"
    precision_mode: str = "auto"
    gamma: float = 0.1
    # linear baseline
    lin_lambda: float = 1.0
    # synthetic environments
    K: int = 4
    d_raw: int = 4
    noise: float = 0.1
    # dataset environments
    dataset_wrap: bool = False

    def __post_init__(self):
        if self.algo not in ALGO_NAMES:
            raise ConfigurationError(f"algo must be one of {ALGO_NAMES}, got {self.algo!r}")
        if self.T < 1 or self.trials < 1:
            raise ConfigurationError("T and trials must be >= 1")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be >= 0, got {self.seed}")
        if self.likelihood not in FAMILY_NAMES:
            raise ConfigurationError(
                f"likelihood must be one of {FAMILY_NAMES}, got {self.likelihood!r}")
        if self.zeta not in ZETA_NAMES:
            raise ConfigurationError(f"zeta must be one of {ZETA_NAMES}, got {self.zeta!r}")
        if self.precision_mode not in ("auto",) + MODES:
            raise ConfigurationError(
                f"precision_mode must be auto, full, or diagonal, got {self.precision_mode!r}")
        if self.algo == "rbmle-pc" and self.likelihood != "gaussian":
            raise ConfigurationError("rbmle-pc is defined for the gaussian likelihood only")
        self.env_kind()  # validates the env string

    def env_kind(self) -> tuple[str, str]:
        """Split the env string into ('synthetic', kind) or ('dataset', path)."""
        head, sep, tail = self.env.partition(":")
        if head == "synthetic" and sep and tail in SYNTHETIC_KINDS:
            return "synthetic", tail
        if head == "dataset" and sep and tail:
            return "dataset", tail
        raise ConfigurationError(
            f"env must be synthetic:{{{'|'.join(SYNTHETIC_KINDS)}}} or dataset:PATH, "
            f"got {self.env!r}")


@dataclass(frozen=True)
class SummaryRow:
    algo: str
    env: str
    trial: str
    final_cumulative_regret: float
    wall_time_seconds: float
    status: str = "ok"


_BOOL_WORDS = {"true": True, "1": True, "yes": True, "on": True,
               "false": False, "0": False, "no": False, "off": False}

# External spelling -> dataclass field.
_KEY_ALIASES = {"lambda": "lam"}


def _coerce(field_name: str, value):
    if isinstance(value, str):
        type_map = {f.name: f.type for f in fields(ExperimentConfig)}
        ftype = type_map[field_name]
        if ftype == "int":
            return int(value)
        if ftype.startswith("float"):
            return float(value)
        if ftype == "bool":
            word = value.strip().lower()
            if word not in _BOOL_WORDS:
                raise ConfigurationError(f"{field_name}: expected true/false, got {value!r}")
            return _BOOL_WORDS[word]
        return value
    return value


def parse_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines; '#' starts a comment; keys as in the CLI."""
    valid = {f.name for f in fields(ExperimentConfig)} | set(_KEY_ALIASES)
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or not key or not value:
                raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
            if key not in valid:
                raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
            out[_KEY_ALIASES.get(key, key)] = value
    return out


def build_config(overrides: dict) -> ExperimentConfig:
    """Defaults, overridden by the given mapping (string values coerced)."""
    clean = {}
    for key, value in overrides.items():
        key = _KEY_ALIASES.get(key, key)
        clean[key] = _coerce(key, value)
    return replace(ExperimentConfig(), **clean)


def _context_dim(config: ExperimentConfig, dataset: Dataset | None) -> int:
    kind, _ = config.env_kind()
    if kind == "synthetic":
        return 2 * config.d_raw
    assert dataset is not None
    return dataset.context_dim


def _resolve_nu(config: ExperimentConfig) -> float:
    """Exploration scale: explicit value, else the per-algorithm grid pick."""
    if config.nu is not None:
        return config.nu
    return 1e-3 if config.algo == "rbmle-pc" else 0.1


def _resolve_precision_mode(config: ExperimentConfig, context_dim: int, n_arms: int) -> str:
    """'auto' -> exact full precision on small problems, diagonal beyond.

    The cutoff is the per-layer budget context_dim * arms <= 64; larger
    problems pay O(p) per solve instead of O(p^2).
    """
    if config.precision_mode != "auto":
        return config.precision_mode
    return "full" if context_dim * n_arms <= 64 else "diagonal"


def _make_agent(config: ExperimentConfig, context_dim: int, n_arms: int,
                rng: np.random.Generator):
    if config.algo == "random":
        return RandomAgent(rng)
    nu = _resolve_nu(config)
    if config.algo == "lin-rbmle":
        return LinRbmle(context_dim, ridge=config.lin_lambda, alpha_scale=nu)
    net_config = NetworkConfig(context_dim, config.m, config.depth)
    anchor = init_params(net_config, rng)
    if config.algo == "rbmle-ga":
        ga = GaConfig(alpha_scale=nu, steps=config.J, step_size=config.eta,
                      ridge=config.lam, zeta=config.zeta, warm_start=config.warm_start)
        return NeuralRbmleGa(net_config, ga, make_family(config.likelihood), anchor)
    mode = _resolve_precision_mode(config, context_dim, n_arms)
    if config.algo == "rbmle-pc":
        pc = PcConfig(alpha_scale=nu, steps=config.J, step_size=config.eta,
                      ridge=config.lam, precision_mode=mode)
        return NeuralRbmlePc(net_config, pc, anchor)
    if config.algo == "neural-ucb":
        return NeuralUcb(net_config, anchor, gamma=config.gamma, steps=config.J,
                         step_size=config.eta, ridge=config.lam,
                         precision_mode=mode)
    raise ConfigurationError(f"unknown algo {config.algo!r}")


def run_trial(config: ExperimentConfig, trial_index: int,
              dataset: Dataset | None = None) -> RegretTrace:
    """One full interaction loop; raises NumericError tagged with the round."""
    kind, detail = config.env_kind()
    if kind == "dataset" and dataset is None:
        dataset = load_dataset(detail)

    seed_seq = np.random.SeedSequence((config.seed, trial_index))
    env_seq, agent_seq = seed_seq.spawn(2)
    env_rng = np.random.Generator(np.random.Philox(env_seq))
    agent_rng = np.random.Generator(np.random.Philox(agent_seq))

    if kind == "synthetic":
        env = make_synthetic_env(detail, config.d_raw, config.K, config.noise, env_rng)
        next_step = lambda t: synthetic_env_step(env, t, env_rng)  # noqa: E731
    else:
        env = DatasetEnv(dataset, env_rng, wrap=config.dataset_wrap)
        next_step = env.step

    n_arms = config.K if kind == "synthetic" else dataset.n_classes
    agent = _make_agent(config, _context_dim(config, dataset), n_arms, agent_rng)
    trace = RegretTrace()
    for t in range(1, config.T + 1):
        step = next_step(t)
        if step is None:
            break
        try:
            arm = agent.select_arm(step.contexts, t)
            reward = float(step.rewards[arm])
            agent.observe(step.contexts, arm, reward, t)
        except NumericError as exc:
            raise NumericError(f"trial {trial_index}, round {t}: {exc}",
                               step_index=exc.step_index) from exc
        trace.append(t, arm, reward, float(step.optimal_mean),
                     float(step.optimal_mean - step.mean_rewards[arm]))
    return trace


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def write_trace_csv(trace: RegretTrace, path) -> None:
    """One row per step; arm indices are 1-based in files."""
    lines = [TRACE_HEADER]
    for i in range(len(trace)):
        lines.append(",".join([
            str(trace.steps[i]),
            str(trace.arms[i] + 1),
            _fmt(trace.rewards[i]),
            _fmt(trace.optimal_means[i]),
            _fmt(trace.instant_regrets[i]),
            _fmt(trace.cumulative_regrets[i]),
        ]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary_csv(rows: list[SummaryRow], path) -> None:
    lines = [SUMMARY_HEADER]
    for row in rows:
        status = row.status.replace(",", ";").replace("\n", " ")
        lines.append(",".join([
            row.algo, row.env, row.trial,
            _fmt(row.final_cumulative_regret),
            format(row.wall_time_seconds, ".3f"),
            status,
        ]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _trial_task(config: ExperimentConfig, index: int, dataset: Dataset | None):
    start = time.perf_counter()
    try:
        trace = run_trial(config, index, dataset)
        return index, trace, None, time.perf_counter() - start
    except NumericError as exc:
        return index, None, str(exc), time.perf_counter() - start


def run_experiment(config: ExperimentConfig) -> list[SummaryRow]:
    """Run all trials, write one trace CSV per trial plus summary.csv.

    Failed trials (numeric aborts) keep their summary row with an error
    status and a NaN regret; the mean/std rows aggregate successes only.
    RBMLE_THREADS > 1 runs trials in worker processes; outputs are
    independent of that setting.
    """
    if config.out is None:
        raise ConfigurationError("an output directory is required to run an experiment")
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    kind, detail = config.env_kind()
    dataset = load_dataset(detail) if kind == "dataset" else None

    threads = int(os.environ.get("RBMLE_THREADS", "1"))
    results = []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_trial_task, config, i, dataset)
                       for i in range(config.trials)]
            results = [f.result() for f in futures]
        results.sort(key=lambda r: r[0])
    else:
        for i in range(config.trials):
            results.append(_trial_task(config, i, dataset))

    rows: list[SummaryRow] = []
    finals: list[float] = []
    walls: list[float] = []
    for index, trace, error, wall in results:
        if error is None:
            final = cumulative_regret(trace)
            write_trace_csv(trace, out_dir / f"trace_trial{index + 1:03d}.csv")
            rows.append(SummaryRow(config.algo, config.env, str(index + 1), final, wall))
            finals.append(final)
            walls.append(wall)
        else:
            rows.append(SummaryRow(config.algo, config.env, str(index + 1),
                                   float("nan"), wall, f"error: {error}"))

    def _agg(values, fn):
        return float(fn(values)) if values else float("nan")

    rows.append(SummaryRow(config.algo, config.env, "mean",
                           _agg(finals, np.mean), _agg(walls, np.mean)))
    std = float(np.std(finals, ddof=1)) if len(finals) > 1 else (0.0 if finals else float("nan"))
    wstd = float(np.std(walls, ddof=1)) if len(walls) > 1 else (0.0 if walls else float("nan"))
    rows.append(SummaryRow(config.algo, config.env, "std", std, wstd))
    write_summary_csv(rows, out_dir / "summary.csv")
    return rows
