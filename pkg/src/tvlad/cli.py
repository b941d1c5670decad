"""Command-line entry point: ``tvlad <command> [options]``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical
failure, 4 internal error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._rng import fresh_seed
from .bootstrap import (MultiplierSpec, bootstrap_covariance, bootstrap_replicates,
                        confidence_region, equivalence_test)
from .diagnostics import hill_curve
from .estimator import ESTIMATOR_MENU, EstimationConfig, LocalDesign
from .experiments import StudyConfig, run_coverage_study, run_mae_study, run_size_power_study
from .innovations import InnovationSpec
from .process import PRESETS, TvModel, series_to_csv, simulate_tvar
from .weights import WeightSpec

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_INTERNAL = 0, 1, 2, 3, 4
COMMANDS = ("simulate", "estimate", "bootstrap", "test", "hill", "study")


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


# ingestion -------------------------------------------------------------------


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def ingest_csv(path, column: str | int | None = None, transform: str | None = None) -> np.ndarray:
    """Read one numeric column; ``transform='log_return'`` maps prices s to log(s[t+1]/s[t]).

    Lines starting with '#' are skipped. A first row whose selected cell is
    not numeric is taken as the header. ``column`` is a header name or a
    0-based index and defaults to the last column.
    """
    if transform not in (None, "none", "log_return"):
        raise ConfigError(f"unknown transform {transform!r}")
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        rows = [(n, r) for n, r in enumerate(csv.reader(fh), start=1)
                if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise DataError(f"{path}: no data rows")
    header = None
    first = rows[0][1]
    if isinstance(column, str) and not column.lstrip("-").isdigit():
        header = first
        if column not in header:
            raise DataError(f"{path}: column {column!r} not found in header {header}")
        idx = header.index(column)
        rows = rows[1:]
    else:
        idx = -1 if column is None else int(column)
        if not (-len(first) <= idx < len(first)):
            raise DataError(f"{path}: column index {idx} out of range")
        if not _is_number(first[idx]):
            header, rows = first, rows[1:]
    values = []
    for line, row in rows:
        try:
            cell = row[idx]
        except IndexError:
            raise DataError(f"{path}: line {line} has no column {idx}") from None
        try:
            v = float(cell)
        except ValueError:
            raise DataError(f"{path}: non-numeric value {cell!r} at line {line}") from None
        if not math.isfinite(v):
            raise DataError(f"{path}: non-finite value at line {line}")
        values.append((line, v))
    if not values:
        raise DataError(f"{path}: selected column is empty")
    if transform == "log_return":
        for line, v in values:
            if v <= 0:
                raise DataError(f"{path}: nonpositive price {v} at line {line}")
        s = np.array([v for _, v in values])
        if len(s) < 2:
            raise DataError(f"{path}: log returns need at least two prices")
        return np.log(s[1:] / s[:-1])
    return np.array([v for _, v in values])


# configuration ---------------------------------------------------------------


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if self.seed is not None and (not isinstance(self.seed, int) or self.seed < 0):
            raise ConfigError("seed must be a nonnegative integer")

    @classmethod
    def from_json(cls, path) -> RunConfig:
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load run config {path}: {exc}") from None
        return cls(d.get("command", ""), d.get("params", {}), d.get("seed"))

    def resolved(self) -> dict:
        """Command, parameters with defaults filled in, and seed."""
        return {"command": self.command, "params": {**DEFAULTS[self.command], **self.params},
                "seed": self.seed}


OUTPUT_KEYS = ("out", "replicates_out", "summary_out")

_ESTIMATION_DEFAULTS = {"weight": "smooth_indicator", "p": 1}
DEFAULTS = {
    "simulate": {"model": "example1", "T": 1000, "burn_in": 500},
    "estimate": {**_ESTIMATION_DEFAULTS, "grid": "0.2:0.8:0.1", "method": "lad"},
    "bootstrap": {**_ESTIMATION_DEFAULTS, "u0": 0.5, "M": 1000, "delta": 0.05,
                  "multiplier": "exponential"},
    "test": {**_ESTIMATION_DEFAULTS, "u1": 0.2, "u2": 0.8, "M": 1000, "level": 0.05,
             "multiplier": "exponential"},
    "hill": {"side": "right", "k_min": 1, "step": 1},
    "study": {"kind": "mae", "T_list": [1000], "replications": 200, "M": 500,
              "multiplier": "exponential"},
}


def config_hash(resolved: dict) -> str:
    """Short digest of the resolved config; output destinations do not enter it."""
    params = {k: v for k, v in resolved.get("params", {}).items() if k not in OUTPUT_KEYS}
    blob = json.dumps({**resolved, "params": params}, sort_keys=True, separators=(",", ":"),
                      default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def load_model(spec: str, innovation: str | None = None) -> TvModel:
    """A preset name or a path to a model JSON file, optionally with a different innovation law."""
    try:
        if spec in PRESETS:
            model = PRESETS[spec]()
        else:
            d = json.loads(Path(spec).read_text(encoding="utf-8"))
            model = TvModel.from_dict(d)
    except OSError as exc:
        raise ConfigError(f"cannot read model file {spec}: {exc.strerror}") from None
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model {spec}: {exc}") from None
    if innovation:
        model = model.with_innovation(parse_innovation(innovation))
    return model


def parse_innovation(text: str) -> InnovationSpec:
    """'gaussian', 'cauchy' or 't<nu>' such as 't2'."""
    text = text.lower()
    if text in ("gaussian", "normal"):
        return InnovationSpec.gaussian()
    if text == "cauchy":
        return InnovationSpec.cauchy()
    if text.startswith("t") and _is_number(text[1:]):
        return InnovationSpec.student_t(float(text[1:]))
    raise ConfigError(f"unknown innovation {text!r}")


def parse_grid(text: str) -> list[float]:
    """'a:b:step' inclusive of b, or a comma list."""
    try:
        if ":" in text:
            a, b, s = (float(x) for x in text.split(":"))
            if s <= 0 or b < a:
                raise ValueError
            n = int(math.floor((b - a) / s + 1e-9)) + 1
            return [round(a + i * s, 12) for i in range(n)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}") from None


def weight_from_params(params: dict) -> WeightSpec:
    variant = params.get("weight", "smooth_indicator")
    if variant in ESTIMATOR_MENU:
        return ESTIMATOR_MENU[variant][1]
    if variant == "ling":
        return WeightSpec.ling(params.get("c") if params.get("c") is not None else 0.1)
    if variant == "smooth_indicator":
        c, q = params.get("c"), params.get("q")
        return WeightSpec.smooth_indicator(c=c, q=q if c is not None or q is not None else 0.9)
    if variant == "pan":
        return WeightSpec.pan()
    if variant == "unit":
        return WeightSpec.unit()
    raise ConfigError(f"unknown weight {variant!r}")


def estimation_config(params: dict) -> EstimationConfig:
    try:
        return EstimationConfig(weight=weight_from_params(params), p=int(params.get("p", 1)),
                                bandwidth=params.get("bandwidth"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# output ----------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _emit(payload: dict, out) -> None:
    text = json.dumps(_clean(payload), sort_keys=True, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


def _artifact(config: RunConfig, results) -> dict:
    resolved = config.resolved()
    return {"config": resolved, "config_hash": config_hash(resolved), "seed": config.seed,
            "results": results}


def _load_series(params: dict) -> np.ndarray:
    if not params.get("input"):
        raise ConfigError("an input file is required (--in)")
    return ingest_csv(params["input"], params.get("column"),
                      "log_return" if params.get("log_returns") else None)


def _check_points(points, design: LocalDesign) -> None:
    lo, hi = design.config.admissible_range(design.T)
    bad = [u for u in points if not (lo - 1e-12 <= u <= hi + 1e-12)]
    if bad:
        raise ConfigError(f"points {bad} outside the admissible range [{lo:.4f}, {hi:.4f}] "
                          f"for T={design.T}")


def _design(params: dict, y: np.ndarray) -> LocalDesign:
    cfg = estimation_config(params)
    try:
        return LocalDesign(y, cfg)
    except ValueError as exc:
        raise DataError(str(exc)) from None


# commands --------------------------------------------------------------------


def _cmd_simulate(config: RunConfig) -> None:
    prm = config.params
    if not prm.get("out"):
        raise ConfigError("simulate needs --out")
    model = load_model(prm.get("model", "example1"), prm.get("innovation"))
    T, burn_in = int(prm.get("T", 1000)), int(prm.get("burn_in", 500))
    if T <= model.p or burn_in < 0:
        raise ConfigError("need T > p and burn_in >= 0")
    series = simulate_tvar(model, T, burn_in, config.seed)
    resolved = config.resolved()
    series_to_csv(series, prm["out"], {"config_hash": config_hash(resolved), "command": "simulate"})


def _cmd_estimate(config: RunConfig) -> None:
    prm = config.params
    y = _load_series(prm)
    design = _design(prm, y)
    grid = parse_grid(prm.get("grid", "0.2:0.8:0.1"))
    _check_points(grid, design)
    method = prm.get("method", "lad")
    if method not in ("lad", "l2"):
        raise ConfigError("method must be 'lad' or 'l2'")
    fits = [design.fit(u, method=method) for u in grid]
    _emit(_artifact(config, [f.to_dict() for f in fits]), prm.get("out"))


def _multiplier(prm: dict) -> MultiplierSpec:
    try:
        return MultiplierSpec(prm.get("multiplier", "exponential"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _cmd_bootstrap(config: RunConfig) -> None:
    prm = config.params
    y = _load_series(prm)
    design = _design(prm, y)
    u0 = float(prm.get("u0", 0.5))
    _check_points([u0], design)
    delta = float(prm.get("delta", 0.05))
    ens = bootstrap_replicates(y, u0, design.config, int(prm.get("M", 1000)), _multiplier(prm),
                               config.seed, design)
    cov = bootstrap_covariance(ens)
    region = confidence_region(ens.base_fits[0], cov, delta)
    if prm.get("replicates_out"):
        ens.to_csv(prm["replicates_out"])
    results = {"fit": ens.base_fits[0].to_dict(), "covariance": cov,
               "standard_errors": np.sqrt(np.diag(cov)), "replicates_used": len(ens.replicates),
               "failed_replicates": ens.failed, "clamped_replicates": ens.clamped,
               "region": {"center": region.center, "shape": region.shape,
                          "radius2": region.radius2, "delta": delta}}
    _emit(_artifact(config, results), prm.get("out"))


def _cmd_test(config: RunConfig) -> None:
    prm = config.params
    y = _load_series(prm)
    design = _design(prm, y)
    u1, u2 = float(prm.get("u1", 0.2)), float(prm.get("u2", 0.8))
    if u1 == u2:
        raise ConfigError("u1 and u2 must differ")
    _check_points([u1, u2], design)
    report = equivalence_test(y, u1, u2, design.config, int(prm.get("M", 1000)), _multiplier(prm),
                              config.seed, float(prm.get("level", 0.05)), design)
    res = report.to_dict()
    res["reject_at"] = {f"{k:g}": v for k, v in report.reject_at.items()}
    res.update(u1=u1, u2=u2)
    _emit(_artifact(config, res), prm.get("out"))


def _cmd_hill(config: RunConfig) -> None:
    prm = config.params
    y = _load_series(prm)
    try:
        curve = hill_curve(y, int(prm.get("k_min", 1)), prm.get("k_max"), int(prm.get("step", 1)),
                           prm.get("side", "right"))
    except ValueError as exc:
        raise DataError(str(exc)) from None
    if prm.get("out"):
        curve.to_csv(prm["out"])
    summary = {"side": curve.side, "n_used": curve.n_used, "points": len(curve.k_values)}
    try:
        summary["plateau"] = curve.plateau()
    except ValueError:
        summary["plateau"] = None
    _emit(_artifact(config, summary), prm.get("summary_out"))


def _cmd_study(config: RunConfig) -> None:
    prm = config.params
    kind = prm.get("kind", "mae")
    model = load_model(prm.get("model", {"mae": "example1", "power": "equivalence",
                                         "coverage": "ar2"}.get(kind, "example1")),
                       prm.get("innovation"))
    try:
        sc = StudyConfig(model, tuple(prm.get("estimators") or ESTIMATOR_MENU),
                         tuple(int(t) for t in prm.get("T_list", [1000])),
                         int(prm.get("replications", 200)), M=int(prm.get("M", 500)),
                         seed=config.seed, weight=prm.get("study_weight"),
                         multiplier=_multiplier(prm), workers=prm.get("workers"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if kind in ("mae", "mse"):
        table = run_mae_study(sc, kind.upper())
    elif kind == "power":
        table = run_size_power_study(sc, float(prm.get("u1", 0.2)), prm.get("u2_list", [0.7, 0.75, 0.8]),
                                     prm.get("levels", [0.10, 0.05]))
    elif kind == "coverage":
        table = run_coverage_study(sc, float(prm.get("u0", 0.5)), prm.get("levels", [0.90, 0.95]))
    else:
        raise ConfigError(f"unknown study kind {kind!r}")
    table.metadata.update(seed=config.seed, config_hash=config_hash(config.resolved()))
    if prm.get("out"):
        table.write(prm["out"])
    print(table.to_text())


_DISPATCH = {"simulate": _cmd_simulate, "estimate": _cmd_estimate, "bootstrap": _cmd_bootstrap,
             "test": _cmd_test, "hill": _cmd_hill, "study": _cmd_study}


def run_command(config: RunConfig) -> int:
    """Run one command and return its exit status; errors are reported on stderr."""
    if config.seed is None:
        config.seed = fresh_seed()
    config.params = config.resolved()["params"]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            _DISPATCH[config.command](config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "configuration error", exc)
    except DataError as exc:
        return _fail(EXIT_DATA, "data error", exc)
    except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERIC, "numerical failure", exc)
    except OSError as exc:
        return _fail(EXIT_DATA, "I/O error", exc)
    except Exception as exc:  # noqa: BLE001
        return _fail(EXIT_INTERNAL, "internal error", exc)
    return EXIT_OK


def _fail(code: int, kind: str, exc: Exception) -> int:
    print(f"tvlad: {kind}: {exc}", file=sys.stderr)
    return code


# argument parsing ------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"tvlad: configuration error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--in", dest="input", required=True, help="CSV file")
    p.add_argument("--column", help="column name or 0-based index (default: last)")
    p.add_argument("--log-returns", action="store_true", help="treat the column as prices")


def _add_estimation_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--weight", default="smooth_indicator",
                   help="ling | smooth_indicator | pan | unit, or an estimator label like LSW2q2")
    p.add_argument("--c", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--bandwidth", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tvlad", description="Local self-weighted LAD inference for tvAR models")
    parser.add_argument("--config", help="run a JSON RunConfig instead of a subcommand")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a tvAR path to CSV")
    p.add_argument("--model", default="example1", help=f"preset {sorted(PRESETS)} or JSON file")
    p.add_argument("--innovation", help="gaussian | cauchy | t<nu>")
    p.add_argument("--T", type=int, default=1000)
    p.add_argument("--burn-in", type=int, default=500)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("estimate", help="local fits over a grid of u")
    _add_data_args(p)
    _add_estimation_args(p)
    p.add_argument("--grid", default="0.2:0.8:0.1", help="a:b:step or comma list")
    p.add_argument("--method", default="lad", choices=["lad", "l2"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("bootstrap", help="bootstrap covariance and confidence region at u0")
    _add_data_args(p)
    _add_estimation_args(p)
    p.add_argument("--u0", type=float, default=0.5)
    p.add_argument("--M", type=int, default=1000)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--multiplier", default="exponential")
    p.add_argument("--seed", type=int)
    p.add_argument("--replicates-out")
    p.add_argument("--out")

    p = sub.add_parser("test", help="bootstrap test of beta(u1) = beta(u2)")
    _add_data_args(p)
    _add_estimation_args(p)
    p.add_argument("--u1", type=float, default=0.2)
    p.add_argument("--u2", type=float, default=0.8)
    p.add_argument("--M", type=int, default=1000)
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--multiplier", default="exponential")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("hill", help="Hill curve of one tail")
    _add_data_args(p)
    p.add_argument("--side", default="right", choices=["left", "right"])
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="curve CSV")
    p.add_argument("--summary-out", help="JSON summary (default: stdout)")

    p = sub.add_parser("study", help="Monte Carlo study tables")
    p.add_argument("--kind", default="mae", choices=["mae", "mse", "power", "coverage"])
    p.add_argument("--model")
    p.add_argument("--innovation")
    p.add_argument("--T", dest="T_list", default="1000", help="comma list of sample sizes")
    p.add_argument("--replications", type=int, default=200)
    p.add_argument("--M", type=int, default=500)
    p.add_argument("--estimators", help="comma list of estimator labels")
    p.add_argument("--study-weight", help="estimator label for bootstrap studies")
    p.add_argument("--u1", type=float, default=0.2)
    p.add_argument("--u2", dest="u2_list", default="0.7,0.75,0.8")
    p.add_argument("--u0", type=float, default=0.5)
    p.add_argument("--workers", type=int)
    p.add_argument("--multiplier", default="exponential")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output stem for .csv/.txt/.json")
    return parser


def _params_from_args(ns: argparse.Namespace) -> dict:
    d = {k: v for k, v in vars(ns).items() if k not in ("command", "seed", "config") and v is not None}
    if ns.command == "study":
        d["T_list"] = [int(t) for t in str(d["T_list"]).split(",")]
        d["u2_list"] = [float(u) for u in str(d["u2_list"]).split(",")]
        if "estimators" in d:
            d["estimators"] = d["estimators"].split(",")
        if "model" not in d:
            d.pop("model", None)
    return d


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        if ns.config:
            config = RunConfig.from_json(ns.config)
        elif ns.command:
            config = RunConfig(ns.command, _params_from_args(ns), ns.seed)
        else:
            parser.print_help(sys.stderr)
            return EXIT_CONFIG
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "configuration error", exc)
    return run_command(config)


if __name__ == "__main__":
    sys.exit(main())
