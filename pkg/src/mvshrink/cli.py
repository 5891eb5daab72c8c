"""Command-line interface: ``mvshrink {weights,simulate,verify,backtest}``.

Settings come from an optional JSON file (``--config``) and are overridden by
flags given on the command line. Every run writes a ``metadata.json`` with
the resolved settings next to its outputs. Exit codes: 0 success, 1 failed
verification, 2 invalid input or configuration, 3 numerical or regime error,
4 file error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import tempfile
from pathlib import Path

import numpy as np

from mvshrink import __version__
from mvshrink._types import CalibrationMode
from mvshrink.backtest import (
    STRATEGIES,
    aggregate_measures,
    load_factors_csv,
    load_returns_csv,
    paired_comparison,
    resample_assets,
    rolling_backtest,
    series_measures,
)
from mvshrink.estimator import ShrinkageEUPortfolio
from mvshrink.exceptions import ConfigError, DataFormatError, MvShrinkError
from mvshrink.simulate import DEFAULT_C_GRID, LossExperimentConfig, run_loss_experiment
from mvshrink.simulate import verify_rmt_limits
from mvshrink.validation import check_concentration

EXIT_OK, EXIT_VERIFY_FAILED = 0, 1

WEIGHTS_DEFAULTS = {"returns": None, "factors": None, "target": "equal_weight",
                    "mode": "mean_variance", "gamma": 1.0, "rank_tol": None}
SIMULATE_DEFAULTS = {"c_grid": list(DEFAULT_C_GRID), "p_grid": [100], "condition_index": 1000.0,
                     "modes": ["mean_variance"], "replications": 100, "gamma": 1.0,
                     "rotation": "random_orthogonal", "distribution": "gaussian", "df": 5.0,
                     "mu_range": [-0.3, 0.3]}
VERIFY_DEFAULTS = {"sizes": [[500, 1000], [1000, 500]], "n_seeds": 20, "rel_tol": 0.07,
                   "abs_tol": 0.02, "exact_tol": 1e-8, "tolerance_mode": "calibrated",
                   "se_multiplier": 4.0, "distribution": "gaussian", "df": 5.0}
BACKTEST_DEFAULTS = {"returns": None, "factors": None, "window": None, "c": None,
                     "eval_days": 200, "gamma": 1.0, "mode": "mean_variance",
                     "target": "equal_weight", "trim": 0.10, "strategies": list(STRATEGIES),
                     "draws": None}
COMMON_DEFAULTS = {"seed": 0, "out": None, "threads": 1}


# ---------------------------------------------------------------------------
# helpers


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _clean(obj):
    """Make an object JSON-safe; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _dump(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise DataFormatError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return cfg


def _resolve(args, defaults: dict) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = _load_config(args.config)
    allowed = set(defaults) | set(COMMON_DEFAULTS)
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    out = {**COMMON_DEFAULTS, **defaults, **cfg}
    for key in allowed:
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    if args.config is not None:
        base = Path(args.config).resolve().parent
        for key in ("returns", "factors"):
            if key in cfg and getattr(args, key, None) is None and cfg[key] is not None:
                out[key] = str((base / cfg[key]).resolve()) if not os.path.isabs(cfg[key]) \
                    else cfg[key]
    return out


def _metadata(command: str, settings: dict) -> dict:
    return {
        "tool": "mvshrink",
        "version": __version__,
        "command": command,
        "config": settings,
        "seed": settings.get("seed"),
        "rng": "numpy SeedSequence(seed, spawn_key=...) + PCG64",
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


def _out_dir(settings: dict) -> Path | None:
    return None if settings.get("out") is None else Path(settings["out"])


# ---------------------------------------------------------------------------
# commands


def cmd_weights(settings: dict) -> int:
    if not settings.get("returns"):
        raise ConfigError("weights needs a returns CSV (--returns or config 'returns')")
    panel = load_returns_csv(settings["returns"])
    factors = None
    if settings["target"] == "fama_french":
        if not settings.get("factors"):
            raise ConfigError("the fama_french target needs a factor file (--factors)")
        factors = load_factors_csv(settings["factors"]).window(panel.dates).T
    est = ShrinkageEUPortfolio(gamma=settings["gamma"], calibration=settings["mode"],
                               target=settings["target"], rank_tol=settings["rank_tol"])
    est.fit(panel.returns.T, factors=factors)
    result = {
        "assets": list(panel.assets),
        "c_hat": est.c_hat_,
        "regime": est.regime_,
        "inverse": "inverse" if est.regime_ == "c<1" else "pseudo_inverse",
        "alpha": est.alpha_,
        "beta": est.beta_,
        "frontier": est.frontier_.as_dict(),
        "weights": {
            "traditional": est.traditional_weights_,
            "bona_fide": est.weights_,
            "target": est.target_weights_,
        },
    }
    text = _dump(result)
    out = _out_dir(settings)
    if out is not None:
        _write_atomic(out / "weights.json", text)
        _write_atomic(out / "metadata.json", _dump(_metadata("weights", settings)))
    sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(settings: dict) -> int:
    cfg = LossExperimentConfig(
        c_grid=settings["c_grid"], p_grid=settings["p_grid"],
        condition_index=settings["condition_index"], modes=settings["modes"],
        replications=settings["replications"], seed=settings["seed"], gamma=settings["gamma"],
        rotation=settings["rotation"], distribution=settings["distribution"], df=settings["df"],
        mu_range=tuple(settings["mu_range"]), threads=settings["threads"],
    )
    table = run_loss_experiment(cfg)
    out = _out_dir(settings)
    meta = {**_metadata("simulate", settings), "experiment": cfg.as_dict(),
            "errors": table.metadata["errors"]}
    if out is not None:
        _write_atomic(out / "experiment.csv", table.to_csv())
        _write_atomic(out / "experiment.json", _dump(meta))
        sys.stdout.write(f"wrote {len(table.rows)} rows to {out / 'experiment.csv'}\n")
    else:
        sys.stdout.write(table.to_csv())
    return EXIT_OK


def cmd_verify(settings: dict) -> int:
    mode = settings["tolerance_mode"]
    if mode not in ("fixed", "calibrated"):
        raise ConfigError("tolerance_mode must be 'fixed' or 'calibrated'")
    sizes = settings["sizes"]
    if not isinstance(sizes, list) or not all(
            isinstance(s, (list, tuple)) and len(s) == 2 for s in sizes):
        raise ConfigError("sizes must be a list of [p, n] pairs")
    report = {"tolerance_mode": mode, "results": []}
    all_ok = True
    for p, n in sizes:
        rows = verify_rmt_limits(
            int(p), int(n), seed=settings["seed"], n_seeds=int(settings["n_seeds"]),
            distribution=settings["distribution"], df=settings["df"],
            rel_tol=settings["rel_tol"], abs_tol=settings["abs_tol"],
            exact_tol=settings["exact_tol"],
            se_multiplier=settings["se_multiplier"] if mode == "calibrated" else None,
            threads=settings["threads"],
        )
        ok = all(r.passed for r in rows)
        all_ok &= ok
        report["results"].append({"p": int(p), "n": int(n), "c": int(p) / int(n), "passed": ok,
                                  "rows": [r.as_dict() for r in rows]})
    report["passed"] = all_ok
    text = _dump(report)
    out = _out_dir(settings)
    if out is not None:
        _write_atomic(out / "verify.json", text)
        _write_atomic(out / "metadata.json", _dump(_metadata("verify", settings)))
    for res in report["results"]:
        for r in res["rows"]:
            flag = "PASS" if r["passed"] else "FAIL"
            sys.stdout.write(f"{flag} p={res['p']} n={res['n']} {r['quantity']}: "
                             f"empirical={r['empirical']:.6g} limit={r['limit']:.6g} "
                             f"gap={r['gap']:.3g} tol={r['tolerance']:.3g}\n")
    return EXIT_OK if all_ok else EXIT_VERIFY_FAILED


def run_backtest(settings: dict) -> tuple[dict, str]:
    """Run the configured backtest; returns the JSON report and the daily-returns CSV."""
    if not settings.get("returns"):
        raise ConfigError("backtest needs a returns CSV (--returns or config 'returns')")
    panel = load_returns_csv(settings["returns"])
    factors = None
    if settings["target"] == "fama_french":
        if not settings.get("factors"):
            raise ConfigError("the fama_french target needs a factor file (--factors)")
        factors = load_factors_csv(settings["factors"])
    draws = settings.get("draws")
    p_all = panel.returns.shape[0]
    if draws:
        subsets = resample_assets(p_all, int(draws["subset"]), int(draws["count"]),
                                  int(draws.get("seed", settings["seed"])))
    else:
        subsets = [np.arange(p_all)]
    p = len(subsets[0])
    if settings.get("window") is not None:
        window = int(settings["window"])
    elif settings.get("c") is not None:
        window = int(round(p / check_concentration(float(settings["c"]))))
    else:
        raise ConfigError("backtest needs either 'window' or 'c'")
    strategies = tuple(settings["strategies"])
    mode = CalibrationMode(settings["mode"], float(settings["gamma"]))
    gamma = float(settings["gamma"])

    measures = {s: [] for s in strategies}
    daily = ["draw,date,strategy,return\n"]
    gaps, alphas = [], []
    for k, idx in enumerate(subsets):
        res = rolling_backtest(panel.returns[idx], panel.dates, window=window,
                               eval_days=int(settings["eval_days"]), mode=mode, gamma=gamma,
                               target=settings["target"], factors=factors,
                               strategies=strategies)
        gaps += [{"draw": k, **g} for g in res.gaps]
        alphas.append(res.alphas)
        for s in strategies:
            r = res.returns[s]
            for d, v in zip(res.dates, r):
                daily.append(f"{k},{d},{s},{'' if not math.isfinite(v) else repr(float(v))}\n")
            ok = r[np.isfinite(r)]
            measures[s].append(series_measures(ok, gamma) if ok.size >= 20 else None)

    report = {"c_hat": p / window, "window": window, "p": p, "n_draws": len(subsets),
              "eval_days": int(settings["eval_days"]), "strategies": {}, "paired_tests": {},
              "gaps": {"count": len(gaps), "by_strategy": {}, "days": gaps}}
    for s in strategies:
        valid = [m for m in measures[s] if m is not None]
        report["strategies"][s] = (aggregate_measures(valid, settings["trim"]).as_dict()
                                   if valid else None)
        report["gaps"]["by_strategy"][s] = sum(1 for g in gaps if g["strategy"] == s)
    a = np.concatenate(alphas)
    a = a[np.isfinite(a)]
    if a.size:
        report["alpha"] = {"mean": float(a.mean()), "median": float(np.median(a)),
                           "min": float(a.min()), "max": float(a.max())}
    if "bona_fide" in strategies:
        for other in strategies:
            if other == "bona_fide":
                continue
            pairs = [(m, o) for m, o in zip(measures["bona_fide"], measures[other])
                     if m is not None and o is not None]
            tests = {}
            if len(pairs) >= 10:
                for stat in ("ce", "sr"):
                    t = paired_comparison([getattr(m, stat) for m, _ in pairs],
                                          [getattr(o, stat) for _, o in pairs])
                    tests[stat] = t.__dict__
            report["paired_tests"][f"bona_fide_vs_{other}"] = tests
    return report, "".join(daily)


def cmd_backtest(settings: dict) -> int:
    report, daily = run_backtest(settings)
    text = _dump(report)
    out = _out_dir(settings)
    if out is not None:
        _write_atomic(out / "report.json", text)
        _write_atomic(out / "daily_returns.csv", daily)
        _write_atomic(out / "metadata.json", _dump(_metadata("backtest", settings)))
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _sizes(text: str) -> list[list[int]]:
    try:
        return [[int(a), int(b)] for a, b in (s.split("x") for s in text.split(","))]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected sizes like 500x1000,1000x500, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvshrink", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mvshrink {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON settings file; flags override its values")
    common.add_argument("--seed", type=int, help="master random seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads for independent replications")
    sub = parser.add_subparsers(dest="command", required=True)

    w = sub.add_parser("weights", parents=[common], help="shrunk EU weights from a returns CSV")
    w.add_argument("--returns", help="CSV with columns date,asset1,...,assetP")
    w.add_argument("--factors", help="CSV with columns date,mkt,smb,hml")
    w.add_argument("--target", choices=["equal_weight", "equal_correlation", "fama_french"])
    w.add_argument("--mode", choices=["mean_variance", "min_variance", "sharpe_ratio"])
    w.add_argument("--gamma", type=float)
    w.add_argument("--rank-tol", dest="rank_tol", type=float)

    s = sub.add_parser("simulate", parents=[common], help="relative-loss sweep over c")
    s.add_argument("--c-grid", dest="c_grid", type=_floats)
    s.add_argument("--p", dest="p_grid", type=_ints, help="dimension(s), comma-separated")
    s.add_argument("--condition-index", dest="condition_index", type=float)
    s.add_argument("--modes", type=lambda t: [m for m in t.split(",") if m])
    s.add_argument("--replications", type=int)
    s.add_argument("--gamma", type=float)
    s.add_argument("--rotation", choices=["random_orthogonal", "diagonal"])
    s.add_argument("--distribution", choices=["gaussian", "student_t"])
    s.add_argument("--df", type=float)

    v = sub.add_parser("verify", parents=[common], help="check random-matrix limits")
    v.add_argument("--sizes", type=_sizes, help="e.g. 500x1000,1000x500")
    v.add_argument("--n-seeds", dest="n_seeds", type=int)
    v.add_argument("--rel-tol", dest="rel_tol", type=float)
    v.add_argument("--abs-tol", dest="abs_tol", type=float)
    v.add_argument("--tolerance-mode", dest="tolerance_mode", choices=["fixed", "calibrated"])
    v.add_argument("--distribution", choices=["gaussian", "student_t"])

    b = sub.add_parser("backtest", parents=[common], help="rolling-window backtest")
    b.add_argument("--returns")
    b.add_argument("--factors")
    b.add_argument("--window", type=int)
    b.add_argument("--c", type=float, help="concentration; sets window = round(p / c)")
    b.add_argument("--eval-days", dest="eval_days", type=int)
    b.add_argument("--gamma", type=float)
    b.add_argument("--mode", choices=["mean_variance", "min_variance", "sharpe_ratio"])
    b.add_argument("--target", choices=["equal_weight", "equal_correlation", "fama_french"])
    b.add_argument("--trim", type=float)
    return parser


COMMANDS = {
    "weights": (cmd_weights, WEIGHTS_DEFAULTS),
    "simulate": (cmd_simulate, SIMULATE_DEFAULTS),
    "verify": (cmd_verify, VERIFY_DEFAULTS),
    "backtest": (cmd_backtest, BACKTEST_DEFAULTS),
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    func, defaults = COMMANDS[args.command]
    try:
        settings = _resolve(args, defaults)
        return func(settings)
    except MvShrinkError as exc:
        sys.stderr.write(json.dumps({"error": exc.name, "message": str(exc)}) + "\n")
        return exc.exit_code
    except (KeyError, TypeError, ValueError) as exc:
        # malformed config values that slipped past the typed checks
        sys.stderr.write(json.dumps({"error": "ConfigError", "message": repr(exc)}) + "\n")
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
