"""Multiplier bootstrap for local LAD fits, and the tests built on it."""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ._rng import make_rng
from .estimator import EstimationConfig, LocalDesign, LocalFitResult
from .innovations import tail_quantile_a
from .process import TvSeries
from .solver import solve_wlad_many

VARIANCE_FLOOR = 1e-12
MAX_FAILURE_RATE = 0.05


class BandwidthWarning(UserWarning):
    """h * a_{floor(Th)} is large for the innovation law at hand."""


@dataclass(frozen=True)
class MultiplierSpec:
    """Law of the multipliers z_t.

    exponential: Exp(1). gaussian: N(1, 1), negative draws are clamped to 0 and
    counted. two_point: ``low`` or ``high`` with probability 1/2 each; the
    default {0, 2} has unit mean and variance.
    """

    distribution: str = "exponential"
    low: float = 0.0
    high: float = 2.0

    def __post_init__(self):
        if self.distribution not in ("exponential", "gaussian", "two_point"):
            raise ValueError(f"unknown multiplier distribution {self.distribution!r}")
        if self.distribution == "two_point" and min(self.low, self.high) < 0:
            raise ValueError("two-point multipliers must be nonnegative")

    @classmethod
    def degenerate(cls) -> MultiplierSpec:
        """z == 1; every replicate reproduces the base fit."""
        return cls("two_point", 1.0, 1.0)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.distribution == "exponential":
            return rng.standard_exponential(n)
        if self.distribution == "gaussian":
            return 1.0 + rng.standard_normal(n)
        return np.where(rng.random(n) < 0.5, self.low, self.high)

    def to_dict(self) -> dict:
        d = {"distribution": self.distribution}
        if self.distribution == "two_point":
            d.update(low=self.low, high=self.high)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> MultiplierSpec:
        return cls(d.get("distribution", "exponential"), d.get("low", 0.0), d.get("high", 2.0))


@dataclass
class BootstrapEnsemble:
    points: tuple
    replicates: np.ndarray  # (M_used, len(points) * p), fits stacked point by point
    base_fits: list
    multiplier: MultiplierSpec
    M: int
    seed: int
    p: int
    failed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    clamped: int = 0

    def at(self, i: int) -> np.ndarray:
        """Replicates of the i-th point, shape (M_used, p)."""
        return self.replicates[:, i * self.p:(i + 1) * self.p]

    @property
    def Th(self) -> float:
        f = self.base_fits[0]
        return f.T * f.h

    def to_csv(self, path) -> None:
        header = [f"u{i}_beta{j + 1}" for i in range(len(self.points)) for j in range(self.p)]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["replicate", *header])
            for k, row in enumerate(self.replicates):
                w.writerow([k, *(repr(float(v)) for v in row)])


def _check_bandwidth_rate(series, design: LocalDesign) -> None:
    if not isinstance(series, TvSeries):
        return
    n = math.floor(design.T * design.h)
    if n >= 2:
        a = tail_quantile_a(series.model.innovation, n)
        if design.h * a > 1.0:
            warnings.warn(f"h * a_[Th] = {design.h * a:.2f} > 1: bootstrap variance may be unreliable",
                          BandwidthWarning, stacklevel=3)


def bootstrap_replicates(series, points, config: EstimationConfig, M: int = 1000,
                         multiplier: MultiplierSpec | None = None, seed: int = 0,
                         design: LocalDesign | None = None) -> BootstrapEnsemble:
    """Multiplier-bootstrap replicates of the local fit at one or two points.

    Replicate k draws z_{p+1..T} from a stream keyed by (seed, k) and refits
    every point with weights z_t K(.) w_{t-1}; with two points the same z
    vector is shared so the cross-covariance is retained.
    """
    if M < 2:
        raise ValueError("M must be at least 2")
    multiplier = multiplier or MultiplierSpec()
    points = (float(points),) if np.isscalar(points) else tuple(float(u) for u in points)
    if not 1 <= len(points) <= 2:
        raise ValueError("bootstrap ensembles cover one or two points")
    design = design or LocalDesign(series, config)
    _check_bandwidth_rate(series, design)
    base = [design.fit(u) for u in points]
    n = len(design.response)
    Z = np.empty((M, n))
    for k in range(M):
        Z[k] = multiplier.draw(make_rng(seed, k), n)
    clamped = 0
    if multiplier.distribution == "gaussian":
        neg = Z < 0
        clamped = int(np.count_nonzero(neg.any(axis=1)))
        Z[neg] = 0.0
    p = design.config.p
    out = np.empty((M, len(points) * p))
    bad = np.zeros(M, dtype=bool)
    for i, (u, fit) in enumerate(zip(points, base)):
        kw = design.kernel_weights(u) * design.w
        window = kw > 0
        C = Z[:, window] * kw[window]
        basis = None
        if fit.basis is not None:
            basis = np.searchsorted(np.flatnonzero(window), fit.basis)
        empty = np.count_nonzero(C > 0, axis=1) < p
        bad |= empty
        good = ~empty
        if good.any():
            betas, status = solve_wlad_many(design.X[window], design.response[window], C[good], basis)
            out[good, i * p:(i + 1) * p] = betas
        out[empty, i * p:(i + 1) * p] = np.nan
    bad |= ~np.all(np.isfinite(out), axis=1)
    if bad.mean() > MAX_FAILURE_RATE:
        raise RuntimeError(f"{bad.sum()} of {M} bootstrap replicates failed (> 5%)")
    return BootstrapEnsemble(points, out[~bad], base, multiplier, M, seed, p,
                             np.flatnonzero(bad), clamped)


def bootstrap_covariance(ensemble: BootstrapEnsemble | np.ndarray, point: int | None = 0
                         ) -> np.ndarray:
    """Sample covariance (denominator M-1) of the replicate vectors.

    ``point`` selects one point of a paired ensemble; ``None`` uses all columns.
    """
    if isinstance(ensemble, BootstrapEnsemble):
        R = ensemble.replicates if point is None else ensemble.at(point)
    else:
        R = np.asarray(ensemble, dtype=float)
        R = R[:, None] if R.ndim == 1 else R
    if len(R) < 2:
        raise ValueError("covariance needs at least two usable replicates")
    V = np.atleast_2d(np.cov(R, rowvar=False, ddof=1))
    if np.linalg.matrix_rank(V, tol=VARIANCE_FLOOR) < V.shape[0]:
        warnings.warn("bootstrap covariance is rank deficient; pseudo-inverse will be used",
                      stacklevel=2)
    return V


@dataclass
class ChiSquareReport:
    statistic: float
    df: int
    p_value: float
    level: float = 0.05
    critical_value: float = field(init=False)
    reject: bool = field(init=False)
    reject_at: dict = field(default_factory=dict)

    def __post_init__(self):
        self.critical_value = float(stats.chi2.isf(self.level, self.df))
        self.reject = bool(self.statistic > self.critical_value)
        if not self.reject_at:
            self.reject_at = {lv: bool(self.statistic > stats.chi2.isf(lv, self.df))
                              for lv in (0.10, 0.05, 0.01)}

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "df": self.df, "p_value": self.p_value,
                "critical_value": self.critical_value, "level": self.level, "reject": self.reject}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _quadratic_form(d: np.ndarray, S: np.ndarray) -> float:
    try:
        if np.linalg.cond(S) > 1.0 / VARIANCE_FLOOR:
            raise np.linalg.LinAlgError
        return float(d @ np.linalg.solve(S, d))
    except np.linalg.LinAlgError:
        warnings.warn("singular covariance in quadratic form; using pseudo-inverse", stacklevel=3)
        return float(d @ np.linalg.pinv(S) @ d)


def wald_test(fit: LocalFitResult | np.ndarray, cov, R=None, c=None, level: float = 0.05
              ) -> ChiSquareReport:
    """W = (R b - c)' (R V R')^-1 (R b - c), referred to chi^2_q."""
    beta = fit.beta_hat if isinstance(fit, LocalFitResult) else np.atleast_1d(np.asarray(fit, float))
    p = len(beta)
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    R = np.eye(p) if R is None else np.atleast_2d(np.asarray(R, dtype=float))
    c = np.zeros(len(R)) if c is None else np.atleast_1d(np.asarray(c, dtype=float))
    if R.shape[1] != p or len(c) != len(R):
        raise ValueError("R must be q x p and c a q-vector")
    if np.linalg.matrix_rank(R) < len(R):
        raise ValueError("R must have full row rank")
    d = R @ beta - c
    W = _quadratic_form(d, R @ cov @ R.T)
    q = len(R)
    return ChiSquareReport(W, q, float(stats.chi2.sf(W, q)), level)


def difference_covariance(ensemble: BootstrapEnsemble) -> np.ndarray:
    """Th/M sum_k (D*_k - D)(D*_k - D)' with D = beta(u1) - beta(u2), centred at the estimate."""
    if len(ensemble.points) != 2:
        raise ValueError("equivalence test needs a paired (two-point) ensemble")
    d_hat = ensemble.base_fits[0].beta_hat - ensemble.base_fits[1].beta_hat
    D = ensemble.at(0) - ensemble.at(1) - d_hat
    return ensemble.Th * (D.T @ D) / len(D)


def equivalence_from_ensemble(ensemble: BootstrapEnsemble, level: float = 0.05) -> ChiSquareReport:
    if len(ensemble.points) != 2:
        raise ValueError("equivalence test needs a paired (two-point) ensemble")
    d_hat = ensemble.base_fits[0].beta_hat - ensemble.base_fits[1].beta_hat
    Xi = difference_covariance(ensemble)
    if np.min(np.linalg.eigvalsh(Xi)) <= VARIANCE_FLOOR:
        raise ValueError("bootstrap variance of the difference is below the 1e-12 floor "
                         "(degenerate multipliers?)")
    stat = ensemble.Th * _quadratic_form(d_hat, Xi)
    p = len(d_hat)
    return ChiSquareReport(stat, p, float(stats.chi2.sf(stat, p)), level)


def equivalence_test(series, u1: float, u2: float, config: EstimationConfig, M: int = 1000,
                     multiplier: MultiplierSpec | None = None, seed: int = 0, level: float = 0.05,
                     design: LocalDesign | None = None) -> ChiSquareReport:
    """Test beta(u1) = beta(u2) with the paired multiplier bootstrap."""
    if u1 == u2:
        raise ValueError("u1 and u2 must differ")
    ens = bootstrap_replicates(series, (u1, u2), config, M, multiplier, seed, design)
    return equivalence_from_ensemble(ens, level)


@dataclass
class ConfidenceRegion:
    center: np.ndarray
    shape: np.ndarray
    radius2: float
    delta: float

    def criterion(self, b) -> float:
        d = np.atleast_1d(np.asarray(b, dtype=float)) - self.center
        return _quadratic_form(d, self.shape)

    def contains(self, b) -> bool:
        return self.criterion(b) <= self.radius2


def confidence_region(fit: LocalFitResult | np.ndarray, cov, delta: float) -> ConfidenceRegion:
    """{b : (b - beta_hat)' V^-1 (b - beta_hat) <= upper-delta chi^2_p quantile}."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    beta = fit.beta_hat if isinstance(fit, LocalFitResult) else np.atleast_1d(np.asarray(fit, float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if np.min(np.linalg.eigvalsh(cov)) <= 0:
        raise ValueError("confidence region needs a positive definite covariance")
    return ConfidenceRegion(beta.copy(), cov, float(stats.chi2.isf(delta, len(beta))), delta)


def bonferroni_schedule(delta: float, k: int, df: int) -> float:
    """Critical value of each of k tests at family level delta: upper delta/k chi^2_df quantile."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return float(stats.chi2.isf(delta / k, df))
