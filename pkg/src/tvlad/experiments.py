"""Monte Carlo studies: MAE/MSE tables, equivalence-test size and power, region coverage."""
from __future__ import annotations

import csv
import json
import math
import time
import warnings
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from ._rng import make_rng, parallel_map
from .bootstrap import (MultiplierSpec, bootstrap_covariance, bootstrap_replicates,
                        confidence_region, equivalence_test)
from .estimator import ESTIMATOR_MENU, EstimationConfig, LocalDesign, default_bandwidth
from .process import TvModel, simulate_tvar

DEFAULT_GRID = tuple(round(0.1 + 0.05 * i, 2) for i in range(17))
INCOMPLETE_RATE = 0.10


@dataclass(frozen=True)
class StudyConfig:
    model: TvModel
    estimators: tuple = tuple(ESTIMATOR_MENU)
    T_list: tuple = (1000,)
    replications: int = 200
    grid: tuple = DEFAULT_GRID
    M: int = 500
    seed: int = 0
    weight: str | None = None  # estimator label for bootstrap studies; None picks the study default
    multiplier: MultiplierSpec = field(default_factory=MultiplierSpec)
    workers: int | None = None

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if len(set(self.estimators)) != len(self.estimators):
            raise ValueError("estimator labels must be unique")
        unknown = [e for e in self.estimators if e not in ESTIMATOR_MENU]
        if unknown:
            raise ValueError(f"unknown estimator labels {unknown}; choose from {list(ESTIMATOR_MENU)}")
        if self.weight is not None and self.weight not in ESTIMATOR_MENU:
            raise ValueError(f"unknown weight label {self.weight!r}")
        if not self.T_list:
            raise ValueError("T_list is empty")

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "estimators": list(self.estimators),
                "T_list": list(self.T_list), "replications": self.replications,
                "grid": list(self.grid), "M": self.M, "seed": self.seed, "weight": self.weight,
                "multiplier": self.multiplier.to_dict()}


@dataclass
class StudyTable:
    rows: list
    columns: list
    values: np.ndarray
    se: np.ndarray | None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.rows), len(self.columns)):
            raise ValueError("table values do not match its labels")
        if self.se is not None:
            self.se = np.asarray(self.se, dtype=float)
            if self.se.shape != self.values.shape or np.any(self.se < 0):
                raise ValueError("standard errors must match the values and be nonnegative")

    def cell(self, row, column) -> float:
        return float(self.values[self.rows.index(row), self.columns.index(column)])

    def cell_se(self, row, column) -> float:
        if self.se is None:
            return math.nan
        return float(self.se[self.rows.index(row), self.columns.index(column)])

    def to_text(self, digits: int = 4) -> str:
        title = self.metadata.get("title", "")
        head = [self.metadata.get("row_label", "")] + [str(c) for c in self.columns]
        body = [[str(r)] + [f"{v:.{digits}f}" for v in vals] for r, vals in zip(self.rows, self.values)]
        widths = [max(len(line[i]) for line in [head] + body) for i in range(len(head))]
        fmt = lambda line: "  ".join(s.rjust(w) for s, w in zip(line, widths))
        lines = ([title] if title else []) + [fmt(head), "-" * len(fmt(head))] + [fmt(b) for b in body]
        return "\n".join(lines)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "column", "value", "se"])
            for i, r in enumerate(self.rows):
                for j, c in enumerate(self.columns):
                    se = "" if self.se is None else repr(float(self.se[i, j]))
                    w.writerow([r, c, repr(float(self.values[i, j])), se])

    def write(self, stem) -> None:
        """Write ``stem``.csv, ``stem``.txt and the ``stem``.json metadata sidecar."""
        stem = str(stem)
        self.to_csv(stem + ".csv")
        with open(stem + ".txt", "w", encoding="utf-8") as fh:
            fh.write(self.to_text() + "\n")
        with open(stem + ".json", "w", encoding="utf-8") as fh:
            json.dump(self.metadata, fh, sort_keys=True, indent=2, default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def replication_seed(seed: int, t_index: int, rep: int) -> int:
    """Path seed of one replication; depends only on its coordinates."""
    return int(make_rng(seed, t_index, rep).integers(2**63))


def study_grid(grid, T: int) -> np.ndarray:
    """Grid points moved into the kernel-admissible range [h, 1 - h]."""
    h = default_bandwidth(T)
    return np.clip(np.asarray(grid, dtype=float), h, 1.0 - h)


def _mc_se(x: np.ndarray) -> float:
    x = x[np.isfinite(x)]
    return float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.nan


def _binomial_se(rate: float, n: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / n) if n > 1 else math.nan


def _metadata(config: StudyConfig, title: str, started: float, **extra) -> dict:
    meta = {"title": title, "row_label": "T", "config": config.to_dict(),
            "innovation": config.model.innovation.label,
            "replication_seeds": "make_rng(seed, T index, replication).integers(2**63)",
            "runtime_seconds": round(time.perf_counter() - started, 3)}
    meta.update(extra)
    return meta


# MAE / MSE ------------------------------------------------------------------


def _mae_replication(config: StudyConfig, T: int, t_index: int, rep: int) -> np.ndarray:
    """Per-estimator (MAE, MSE) on one fresh path, shape (n_estimators, 2); NaN on failure."""
    series = simulate_tvar(config.model, T, seed=replication_seed(config.seed, t_index, rep))
    grid = study_grid(config.grid, T)
    truth = config.model.coefficients(grid)
    out = np.full((len(config.estimators), 2), np.nan)
    designs: dict = {}
    for e, label in enumerate(config.estimators):
        method, weight = ESTIMATOR_MENU[label]
        key = weight
        try:
            if key not in designs:
                designs[key] = LocalDesign(series, EstimationConfig(weight=weight, p=config.model.p))
            design = designs[key]
            self_weighted = weight.variant != "unit"
            err = np.array([design.fit(u, method=method, self_weighted=self_weighted).beta_hat
                            for u in grid]) - truth
        except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError):
            continue
        if np.all(np.isfinite(err)):
            out[e] = [np.abs(err).sum(axis=1).mean(), np.sqrt((err**2).sum(axis=1)).mean()]
    return out


def run_mae_study(config: StudyConfig, metric: str = "MAE") -> StudyTable:
    """Mean over replications of the grid-averaged l1 (MAE) or l2 (MSE) error norm."""
    metric = metric.upper()
    if metric not in ("MAE", "MSE"):
        raise ValueError("metric must be 'MAE' or 'MSE'")
    col = 0 if metric == "MAE" else 1
    started = time.perf_counter()
    n_rep, n_est = config.replications, len(config.estimators)
    values = np.empty((len(config.T_list), n_est))
    se = np.empty_like(values)
    incomplete: dict = {}
    grids = {}
    for i, T in enumerate(config.T_list):
        grids[T] = study_grid(config.grid, T).tolist()
        res = np.array(parallel_map(partial(_mae_replication, config, T, i), range(n_rep),
                                    config.workers))[:, :, col]
        for e, label in enumerate(config.estimators):
            x = res[:, e]
            fail = np.mean(~np.isfinite(x))
            if fail > INCOMPLETE_RATE:
                incomplete.setdefault(label, {})[T] = float(fail)
            values[i, e] = np.nanmean(x) if np.isfinite(x).any() else np.nan
            se[i, e] = _mc_se(x) if n_rep > 1 else 0.0
    meta = _metadata(config, f"{metric}, {config.model.innovation.label}", started,
                     metric=metric, grids=grids, incomplete=incomplete,
                     standard_errors=n_rep > 1)
    return StudyTable(list(config.T_list), list(config.estimators), values,
                      se if n_rep > 1 else None, meta)


# size and power ----------------------------------------------------------------


def _estimation_config(config: StudyConfig, default_label: str) -> EstimationConfig:
    label = config.weight or default_label
    method, weight = ESTIMATOR_MENU[label]
    if method != "lad":
        raise ValueError(f"bootstrap studies need a LAD-type estimator, not {label}")
    return EstimationConfig(weight=weight, p=config.model.p)


def _power_replication(config: StudyConfig, est: EstimationConfig, T: int, t_index: int,
                       u1: float, u2_list: tuple, levels: tuple, rep: int) -> np.ndarray:
    """Rejections, shape (len(levels), len(u2_list)); NaN where the test could not run."""
    path_seed = replication_seed(config.seed, t_index, rep)
    series = simulate_tvar(config.model, T, seed=path_seed)
    design = LocalDesign(series, est)
    out = np.full((len(levels), len(u2_list)), np.nan)
    for j, u2 in enumerate(u2_list):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rep_ = equivalence_test(series, u1, u2, est, config.M, config.multiplier,
                                        seed=int(make_rng(path_seed, j).integers(2**63)),
                                        design=design)
        except (ValueError, RuntimeError, np.linalg.LinAlgError):
            continue
        for i, lv in enumerate(levels):
            out[i, j] = float(rep_.p_value < lv)
    return out


def run_size_power_study(config: StudyConfig, u1: float, u2_list, levels=(0.10, 0.05)) -> StudyTable:
    """Rejection frequencies of the equivalence test; columns are (level, u2) pairs."""
    started = time.perf_counter()
    u2_list, levels = tuple(float(u) for u in u2_list), tuple(float(lv) for lv in levels)
    est = _estimation_config(config, "LSW2q2")
    cols = [f"d={lv:g},u2={u2:g}" for lv in levels for u2 in u2_list]
    values = np.empty((len(config.T_list), len(cols)))
    se = np.empty_like(values)
    failures = {}
    for i, T in enumerate(config.T_list):
        fn = partial(_power_replication, config, est, T, i, float(u1), u2_list, levels)
        res = np.array(parallel_map(fn, range(config.replications), config.workers))
        res = res.reshape(len(res), -1)
        n_ok = np.isfinite(res).sum(axis=0)
        rate = np.nansum(res, axis=0) / np.maximum(n_ok, 1)
        values[i] = rate
        se[i] = [_binomial_se(r, n) for r, n in zip(rate, n_ok)]
        failures[T] = (config.replications - n_ok).tolist()
    meta = _metadata(config, f"equivalence test rejection rate, {config.model.innovation.label}",
                     started, u1=u1, u2_list=list(u2_list), levels=list(levels),
                     estimator=config.weight or "LSW2q2", failures=failures)
    return StudyTable(list(config.T_list), cols, values, se, meta)


# coverage ----------------------------------------------------------------------


def _coverage_replication(config: StudyConfig, est: EstimationConfig, T: int, t_index: int,
                          u0: float, levels: tuple, rep: int) -> np.ndarray:
    """Coverage indicators per level plus a trailing nesting-violation flag."""
    path_seed = replication_seed(config.seed, t_index, rep)
    series = simulate_tvar(config.model, T, seed=path_seed)
    truth = config.model.coefficients([u0])[0]
    out = np.full(len(levels) + 1, np.nan)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ens = bootstrap_replicates(series, u0, est, config.M, config.multiplier,
                                       seed=int(make_rng(path_seed, 0).integers(2**63)))
            cov = bootstrap_covariance(ens)
        regions = [confidence_region(ens.base_fits[0], cov, 1.0 - lv) for lv in levels]
    except (ValueError, RuntimeError, np.linalg.LinAlgError):
        return out
    inside = [r.contains(truth) for r in regions]
    out[:-1] = inside
    # a point inside a lower-level region must be inside every higher-level one
    order = np.argsort(levels)
    ordered = [inside[k] for k in order]
    out[-1] = float(any(a and not b for a, b in zip(ordered, ordered[1:])))
    return out


def run_coverage_study(config: StudyConfig, u0: float = 0.5, levels=(0.90, 0.95)) -> StudyTable:
    """Empirical coverage of bootstrap confidence regions for beta(u0)."""
    if config.model.p < 2:
        raise ValueError("coverage study expects a p >= 2 model")
    started = time.perf_counter()
    levels = tuple(float(lv) for lv in levels)
    est = _estimation_config(config, "LSW1c2")
    values = np.empty((len(config.T_list), len(levels)))
    se = np.empty_like(values)
    violations, failures = {}, {}
    for i, T in enumerate(config.T_list):
        fn = partial(_coverage_replication, config, est, T, i, float(u0), levels)
        res = np.array(parallel_map(fn, range(config.replications), config.workers))
        ok = np.isfinite(res[:, 0])
        rate = res[ok, :-1].mean(axis=0) if ok.any() else np.full(len(levels), np.nan)
        values[i] = rate
        se[i] = [_binomial_se(r, int(ok.sum())) for r in rate]
        violations[T] = int(np.nansum(res[:, -1]))
        failures[T] = int((~ok).sum())
    meta = _metadata(config, f"coverage of beta({u0:g}), {config.model.innovation.label}", started,
                     u0=u0, levels=list(levels), estimator=config.weight or "LSW1c2",
                     nesting_violations=violations, failures=failures)
    return StudyTable(list(config.T_list), [f"{lv:.0%}" for lv in levels], values, se, meta)
