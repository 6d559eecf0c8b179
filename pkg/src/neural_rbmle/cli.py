"""Command-line entry point: run experiments, kernel tool, gradient checks."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .envs import SYNTHETIC_KINDS, preprocess_many
from .errors import ConfigurationError, ContractError, NumericError, ParseError, ShapeError
from .harness import ALGO_NAMES, build_config, parse_config_file, run_experiment
from .net import NetworkConfig, forward, gradient, init_params
from .ntk import effective_dim, ntk_matrix
from .rbmle_ga import ZETA_NAMES
from .surrogate import FAMILY_NAMES

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neural-rbmle",
        description="Reward-biased maximum likelihood estimation for neural bandits.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser(
        "run", help="run a bandit experiment and write trace/summary CSVs")
    run_p.add_argument("--config", help="flat key=value config file; flags override it")
    S = argparse.SUPPRESS
    run_p.add_argument("--algo", choices=ALGO_NAMES, default=S, help="agent to run")
    run_p.add_argument("--env", default=S,
                       help="synthetic:{linear|quadratic|cosine} or dataset:PATH")
    run_p.add_argument("--T", type=int, default=S, help="rounds per trial (default 2000)")
    run_p.add_argument("--trials", type=int, default=S, help="independent trials (default 10)")
    run_p.add_argument("--seed", type=int, default=S, help="master seed (default 0)")
    run_p.add_argument("--out", default=S, help="output directory for CSVs")
    run_p.add_argument("--m", type=int, default=S, help="hidden width (default 100)")
    run_p.add_argument("--depth", type=int, default=S, help="layer count (default 2)")
    run_p.add_argument("--J", type=int, default=S, help="ascent steps per fit (default 100)")
    run_p.add_argument("--eta", type=float, default=S, help="ascent step size (default 1e-3)")
    run_p.add_argument("--lambda", dest="lam", type=float, default=S,
                       help="ridge weight for neural agents (default 1e-3)")
    run_p.add_argument("--nu", type=float, default=S,
                       help="reward-bias scale; bias grows as nu*sqrt(t) "
                            "(default 0.1, except 1e-3 for rbmle-pc)")
    run_p.add_argument("--zeta", choices=ZETA_NAMES, default=S,
                       help="comparison-time bias gain (default one_plus_log)")
    run_p.add_argument("--warm-start", dest="warm_start", default=S,
                       metavar="{true,false}", help="keep per-arm weights across rounds")
    run_p.add_argument("--likelihood", choices=FAMILY_NAMES, default=S,
                       help="surrogate reward family (default gaussian)")
    run_p.add_argument("--precision-mode", dest="precision_mode",
                       choices=("auto", "full", "diagonal"), default=S,
                       help="precision matrix layout (default auto: full on "
                            "small problems, diagonal beyond dim*arms > 64)")
    run_p.add_argument("--gamma", type=float, default=S,
                       help="neural-ucb bonus scale (default 0.1)")
    run_p.add_argument("--lin-lambda", dest="lin_lambda", type=float, default=S,
                       help="ridge for lin-rbmle (default 1.0)")
    run_p.add_argument("--K", type=int, default=S, help="arms for synthetic envs (default 4)")
    run_p.add_argument("--d-raw", dest="d_raw", type=int, default=S,
                       help="raw feature dim for synthetic envs (default 4)")
    run_p.add_argument("--noise", type=float, default=S,
                       help="synthetic reward noise sigma (default 0.1)")
    run_p.add_argument("--dataset-wrap", dest="dataset_wrap", default=S,
                       metavar="{true,false}", help="restart an exhausted dataset")

    ntk_p = sub.add_parser(
        "ntk", help="analytic tangent kernel and effective dimension of a context list")
    ntk_p.add_argument("--contexts", required=True,
                       help="CSV of contexts, one comma-separated row each")
    ntk_p.add_argument("--depth", type=int, default=2, help="layer count (default 2)")
    ntk_p.add_argument("--lambda", dest="lam", type=float, default=1e-3,
                       help="ridge in the effective dimension (default 1e-3)")
    ntk_p.add_argument("--preprocess", action="store_true",
                       help="duplicate-and-normalize the rows first")
    ntk_p.add_argument("--out-h", dest="out_h",
                       help="also write the kernel matrix to this CSV path")

    grad_p = sub.add_parser("gradcheck", help="finite-difference audit of the scorer")
    grad_p.add_argument("--d", type=int, default=8, help="input dim (default 8)")
    grad_p.add_argument("--m", type=int, default=64, help="hidden width (default 64)")
    grad_p.add_argument("--depth", type=int, default=2, help="layer count (default 2)")
    grad_p.add_argument("--checks", type=int, default=20, help="instances (default 20)")
    grad_p.add_argument("--seed", type=int, default=0, help="rng seed (default 0)")
    grad_p.add_argument("--tol", type=float, default=1e-5,
                        help="max relative error allowed (default 1e-5)")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    overrides: dict = {}
    if args.config:
        overrides.update(parse_config_file(args.config))
    for key, value in vars(args).items():
        if key in ("command", "config"):
            continue
        overrides[key] = value
    config = build_config(overrides)
    rows = run_experiment(config)
    ok = [r for r in rows if r.trial not in ("mean", "std") and r.status == "ok"]
    failed = [r for r in rows if r.status != "ok"]
    mean_row = next(r for r in rows if r.trial == "mean")
    print(f"{config.algo} on {config.env}: {len(ok)} trials ok, {len(failed)} failed; "
          f"mean final regret {mean_row.final_cumulative_regret:.6g}")
    print(f"outputs in {config.out}")
    return 0 if not failed else 1


def _cmd_ntk(args: argparse.Namespace) -> int:
    X = np.loadtxt(args.contexts, delimiter=",", ndmin=2, dtype=np.float64)
    if args.preprocess:
        X = preprocess_many(X)
    kernel = ntk_matrix(X, args.depth)
    if args.out_h:
        with open(args.out_h, "w", encoding="utf-8", newline="\n") as fh:
            for row in kernel.matrix:
                fh.write(",".join(format(v, ".9g") for v in row) + "\n")
    dim = effective_dim(kernel, args.lam)
    print(format(dim, ".9g"))
    return 0


def _fd_gradient(params, x, step: float) -> np.ndarray:
    out = np.empty_like(params.flat)
    base = np.array(params.flat)
    from .net import NetworkParams  # local import keeps the public surface tidy

    for i in range(base.shape[0]):
        hi = base.copy()
        hi[i] += step
        lo = base.copy()
        lo[i] -= step
        out[i] = (forward(NetworkParams(params.config, hi), x)
                  - forward(NetworkParams(params.config, lo), x)) / (2 * step)
    return out


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    config = NetworkConfig(args.d, args.m, args.depth)
    rng = np.random.default_rng(args.seed)
    from .net import NetworkParams

    worst = 0.0
    done = 0
    while done < args.checks:
        anchor = init_params(config, rng)
        flat = anchor.flat + 0.5 * rng.normal(size=config.param_count) / np.sqrt(config.param_count)
        params = NetworkParams(config, flat)
        x = rng.normal(size=args.d)
        x /= np.linalg.norm(x)
        # Stay away from activation kinks where the derivative jumps.
        mats = params.matrices()
        h = x
        near_kink = False
        for W in mats[:-1]:
            z = W @ h
            if np.any(np.abs(z) < 1e-3):
                near_kink = True
                break
            h = np.maximum(z, 0.0)
        if near_kink:
            continue
        fd = _fd_gradient(params, x, 1e-4)
        an = gradient(params, x)
        denom = np.maximum(np.maximum(np.abs(fd), np.abs(an)), 1e-12)
        err = float(np.max(np.where(np.maximum(np.abs(fd), np.abs(an)) < 1e-12,
                                    0.0, np.abs(fd - an) / denom)))
        worst = max(worst, err)
        done += 1

    zero_rng = np.random.default_rng(args.seed + 1)
    zero_worst = 0.0
    for _ in range(100):
        anchor = init_params(config, zero_rng)
        half = zero_rng.normal(size=args.d // 2)
        x = np.concatenate([half, half])
        x /= np.linalg.norm(x)
        zero_worst = max(zero_worst, abs(forward(anchor, x)))

    print(f"gradient max relative error over {args.checks} instances: {worst:.3e}")
    print(f"max |score| at start on duplicated-half contexts: {zero_worst:.3e}")
    passed = worst <= args.tol and zero_worst <= 1e-8
    print("PASS" if passed else "FAIL")
    return 0 if passed else 1


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "ntk":
            return _cmd_ntk(args)
        return _cmd_gradcheck(args)
    except (ConfigurationError, ContractError, ShapeError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
