"""Local self-weighted LAD estimation of tvAR(p) coefficients."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .innovations import InnovationSpec
from .process import TvModel, TvSeries, draw_innovations, stationary_with_derivatives, DEFAULT_BURN_IN
from .solver import Status, solve_wlad, solve_wls
from .weights import EPANECHNIKOV, KernelSpec, WeightSpec, kernel_moment, lag_matrix, self_weights
from ._rng import make_rng


def default_bandwidth(T: int) -> float:
    """h = log(T) / T^(3/5), natural log."""
    if T < 20:
        raise ValueError(f"bandwidth rule needs T >= 20, got {T}")
    h = math.log(T) / T**0.6
    if h >= 0.5:
        raise ValueError(f"bandwidth {h:.4f} >= 0.5: sample too small")
    return h


@dataclass(frozen=True)
class EstimationConfig:
    weight: WeightSpec = field(default_factory=lambda: WeightSpec.smooth_indicator(q=0.9))
    p: int = 1
    bandwidth: float | None = None  # None selects the log(T)/T^(3/5) rule
    kernel: KernelSpec = EPANECHNIKOV
    boundary: str = "error"  # or "truncate"

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("order p must be at least 1")
        if self.bandwidth is not None and not 0 < self.bandwidth < 0.5:
            raise ValueError("bandwidth must lie in (0, 0.5)")
        if self.boundary not in ("error", "truncate"):
            raise ValueError("boundary must be 'error' or 'truncate'")

    def h(self, T: int) -> float:
        h = default_bandwidth(T) if self.bandwidth is None else self.bandwidth
        if T * h < 4 * self.p:
            raise ValueError(f"T*h = {T * h:.2f} leaves too few effective observations for p={self.p}")
        return h

    def admissible_range(self, T: int) -> tuple[float, float]:
        h = self.h(T)
        return self.kernel.support * h, 1.0 - self.kernel.support * h

    def to_dict(self) -> dict:
        return {"weight": self.weight.to_dict(), "p": self.p, "bandwidth": self.bandwidth,
                "kernel": self.kernel.kind, "boundary": self.boundary}

    @classmethod
    def from_dict(cls, d: dict) -> EstimationConfig:
        return cls(WeightSpec.from_dict(d.get("weight", {"variant": "smooth_indicator", "q": 0.9})),
                   int(d.get("p", 1)), d.get("bandwidth"), EPANECHNIKOV, d.get("boundary", "error"))


@dataclass
class LocalFitResult:
    u0: float
    beta_hat: np.ndarray
    effective_n: int
    V1: np.ndarray
    V2: np.ndarray
    objective: float
    solver_status: str
    h: float
    T: int
    estimator: str = "LSWLADE"
    basis: tuple | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        return {"u0": self.u0, "beta_hat": self.beta_hat.tolist(), "effective_n": self.effective_n,
                "V1": self.V1.tolist(), "V2": self.V2.tolist(), "objective": self.objective,
                "solver_status": self.solver_status, "h": self.h, "T": self.T,
                "estimator": self.estimator, "error": self.error}


class LocalDesign:
    """Regression rows of one series, shared by every local fit on it.

    Row i corresponds to time t = p + 1 + i with response Y_t, lag vector
    X_{t-1} and self-weight w_{t-1,T}. Quantile cutoffs are resolved once
    against the whole series.
    """

    def __init__(self, series, config: EstimationConfig):
        y = np.asarray(series.values if isinstance(series, TvSeries) else series, dtype=float)
        if y.ndim != 1:
            raise ValueError("series must be one-dimensional")
        p = config.p
        if len(y) <= p:
            raise ValueError(f"series of length {len(y)} too short for p={p}")
        self.config = config
        self.y = y
        self.T = len(y)
        self.h = config.h(self.T)
        self.weight = config.weight.resolve(y)
        self.X = lag_matrix(y, p)
        self.response = y[p:]
        self.t = np.arange(p + 1, self.T + 1)
        self.w = self_weights(y, self.weight, p)

    def kernel_weights(self, u0: float) -> np.ndarray:
        lo, hi = self.config.admissible_range(self.T)
        if not 0.0 < u0 < 1.0:
            raise ValueError(f"u0={u0} must lie in (0, 1)")
        if self.config.boundary == "error" and not (lo - 1e-12 <= u0 <= hi + 1e-12):
            raise ValueError(
                f"u0={u0} is outside the kernel-admissible range [{lo:.4f}, {hi:.4f}]; "
                "restrict u0 to [C_K h, 1 - C_K h] or use boundary='truncate'")
        # guard floor() against u0*T landing a hair below an integer
        centre = math.floor(u0 * self.T + 1e-9)
        return self.config.kernel((self.t - centre) / (self.T * self.h))

    def fit(self, u0: float, method: str = "lad", self_weighted: bool = True,
            label: str = "LSWLADE") -> LocalFitResult:
        k = self.kernel_weights(u0)
        window = k > 0
        p = self.config.p
        if np.count_nonzero(window) < p:
            raise ValueError(f"kernel window at u0={u0} holds fewer than p={p} rows")
        w = self.w if self_weighted else np.ones_like(self.w)
        c = k * w
        Xw, yw, cw = self.X[window], self.response[window], c[window]
        if method == "l2":
            beta = solve_wls(Xw, yw, cw)
            objective = float(np.dot(cw, (yw - Xw @ beta) ** 2))
            status, basis = Status.OPTIMAL.value, None
        else:
            res = solve_wlad(Xw, yw, cw)
            beta, objective, status = res.beta, res.objective, res.status.value
            basis = None if res.basis is None else tuple(int(i) for i in np.flatnonzero(window)[list(res.basis)])
        V1, V2 = self.sample_matrices(k, w)
        return LocalFitResult(float(u0), np.asarray(beta, dtype=float), int(np.count_nonzero(window)),
                              V1, V2, objective, status, self.h, self.T, label, basis)

    def sample_matrices(self, k: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """V^(j) = (Th)^-1 sum_t K(.) w^j X X', j = 1, 2."""
        norm = self.T * self.h
        Xk = self.X * k[:, None]
        V1 = (Xk * w[:, None]).T @ self.X / norm
        V2 = (Xk * (w * w)[:, None]).T @ self.X / norm
        return 0.5 * (V1 + V1.T), 0.5 * (V2 + V2.T)


def lswlade_at(series, u0: float, config: EstimationConfig) -> LocalFitResult:
    return LocalDesign(series, config).fit(u0)


def lswlade_grid(series, grid, config: EstimationConfig, design: LocalDesign | None = None
                 ) -> list[LocalFitResult]:
    """Independent local fits over ``grid``; a failing point yields a result with ``error`` set."""
    design = design or LocalDesign(series, config)
    out = []
    for u0 in grid:
        try:
            out.append(design.fit(float(u0)))
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            p = config.p
            nan = np.full((p, p), np.nan)
            out.append(LocalFitResult(float(u0), np.full(p, np.nan), 0, nan, nan.copy(), np.nan,
                                      "error", design.h, design.T, error=str(exc)))
    return out


def baseline_estimators(series, u0: float, config: EstimationConfig, which: str) -> LocalFitResult:
    """Unweighted local L2 or LAD fit at u0 (the self-weight is set to 1)."""
    which = which.upper()
    if which not in ("L2", "LAD"):
        raise ValueError("which must be 'L2' or 'LAD'")
    design = LocalDesign(series, config)
    return design.fit(u0, method="l2" if which == "L2" else "lad", self_weighted=False, label=which)


# named estimators compared in the MAE study
ESTIMATOR_MENU = {
    "L2": ("l2", WeightSpec.unit()),
    "LAD": ("lad", WeightSpec.unit()),
    "LSW1c1": ("lad", WeightSpec.ling(0.5)),
    "LSW1c2": ("lad", WeightSpec.ling(0.1)),
    "LSW2q1": ("lad", WeightSpec.smooth_indicator(q=0.95)),
    "LSW2q2": ("lad", WeightSpec.smooth_indicator(q=0.90)),
    "LSW3": ("lad", WeightSpec.pan()),
}


def asymptotic_covariance(fit: LocalFitResult, f0: float, kernel: KernelSpec = EPANECHNIKOV
                          ) -> np.ndarray:
    """Plug-in covariance of beta_hat: kappa_2/(4 f0^2) V1^-1 V2 V1^-1 / (Th)."""
    kappa2 = kernel_moment(kernel, 2, 0)
    V1inv = np.linalg.inv(fit.V1)
    return kappa2 / (4.0 * f0**2) * V1inv @ fit.V2 @ V1inv / (fit.T * fit.h)


# bias -----------------------------------------------------------------------


@dataclass
class BiasEstimate:
    mean: np.ndarray
    se: np.ndarray
    n_draws: int
    weight: WeightSpec


def bias_term_draws(model: TvModel, u0: float, weight: WeightSpec, horizon: int, seed: int,
                    burn_in: int = DEFAULT_BURN_IN) -> np.ndarray:
    """b_t(u0) for t = 1..horizon on one stationary path, shape (horizon, p)."""
    p = model.p
    Y, D1, _ = stationary_with_derivatives(model, u0, horizon + p, seed, burn_in)
    X = lag_matrix(Y, p)  # X_{t-1}(u0)
    dX = lag_matrix(D1, p)
    f0 = model.innovation.f0()
    b1 = model.derivatives([u0], 1)[0]
    b2 = model.derivatives([u0], 2)[0]
    w = weight.g(X)
    gp = weight.grad(X)
    term = (-w * (X @ b2)
            + 2.0 * np.einsum("ij,ij->i", gp, dX) * (X @ b1)
            + 4.0 * w * (dX @ b1))
    return f0 * term[:, None] * X


def bias_term_montecarlo(model: TvModel, u0: float, config: EstimationConfig | WeightSpec,
                         reps: int, horizon: int, seed: int) -> BiasEstimate:
    """Monte Carlo estimate of E[b_t(u0)] from ``reps`` independent stationary paths.

    The standard error treats per-path means as i.i.d. A quantile cutoff is
    resolved against the first path.
    """
    if model.beta_d1 is None or model.beta_d2 is None:
        raise ValueError("bias term needs first and second coefficient derivatives")
    weight = config.weight if isinstance(config, EstimationConfig) else config
    if not weight.differentiable:
        raise ValueError(f"bias term needs a differentiable weight, not {weight.variant}")
    if reps < 1 or horizon < 1:
        raise ValueError("reps and horizon must be positive")
    if weight.variant == "smooth_indicator" and weight.c is None:
        Y0, _, _ = stationary_with_derivatives(model, u0, horizon, _path_seed(seed, 0))
        weight = weight.resolve(Y0)
    means = np.array([bias_term_draws(model, u0, weight, horizon, _path_seed(seed, r)).mean(axis=0)
                      for r in range(reps)])
    mean = means.mean(axis=0)
    se = means.std(axis=0, ddof=1) / math.sqrt(reps) if reps > 1 else np.full(model.p, np.nan)
    return BiasEstimate(mean, se, reps * horizon, weight)


def _path_seed(seed: int, r: int) -> int:
    return int(make_rng(seed, r).integers(2**63))


def bias_corrected_estimate(fit: LocalFitResult, bias_vec, f0: float, h: float | None = None,
                            kernel: KernelSpec = EPANECHNIKOV) -> np.ndarray:
    """Remove the quasi-estimator bias -h^2 V1^-1 E[b_t] int(K x^2) / (2 f0)."""
    if not f0 > 0:
        raise ValueError("f0 must be positive")
    h = fit.h if h is None else h
    bias_vec = np.asarray(bias_vec, dtype=float)
    try:
        if np.linalg.cond(fit.V1) > 1e12:
            raise np.linalg.LinAlgError
        shift = np.linalg.solve(fit.V1, bias_vec)
    except np.linalg.LinAlgError:
        warnings.warn("singular V1: returning the uncorrected estimate", stacklevel=2)
        return fit.beta_hat.copy()
    return fit.beta_hat + h * h * shift * kernel_moment(kernel, 1, 2) / (2.0 * f0)


def residual_density_at_zero(residuals) -> float:
    """Experimental plug-in f(0): Gaussian KDE at bandwidth 1.06 * MAD * n^(-1/5)."""
    r = np.asarray(residuals, dtype=float)
    n = len(r)
    mad = 1.4826 * np.median(np.abs(r - np.median(r)))
    bw = 1.06 * mad * n ** -0.2
    if not bw > 0:
        raise ValueError("residuals have zero spread")
    return float(np.mean(np.exp(-0.5 * (r / bw) ** 2)) / (bw * math.sqrt(2 * math.pi)))
