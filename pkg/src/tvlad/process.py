"""Time-varying AR(p) models: simulation, stationary approximations,
derivative processes and the tvAR(1) moving-average coefficients."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._rng import make_rng
from .innovations import InnovationSpec

DEFAULT_BURN_IN = 500
STABILITY_MARGIN = 1e-6


# coefficient families with analytic derivatives -----------------------------


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.value)

    def d1(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))

    def d2(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))

    def to_dict(self):
        return {"type": "constant", "value": self.value}


@dataclass(frozen=True)
class Linear:
    slope: float
    intercept: float

    def __call__(self, u):
        return self.slope * np.asarray(u, dtype=float) + self.intercept

    def d1(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.slope)

    def d2(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))

    def to_dict(self):
        return {"type": "linear", "slope": self.slope, "intercept": self.intercept}


@dataclass(frozen=True)
class Sine:
    """amplitude * sin(2*pi*frequency*(u + phase))"""

    amplitude: float
    frequency: float = 1.0
    phase: float = 0.0

    def _arg(self, u):
        return 2.0 * np.pi * self.frequency * (np.asarray(u, dtype=float) + self.phase)

    def __call__(self, u):
        return self.amplitude * np.sin(self._arg(u))

    def d1(self, u):
        w = 2.0 * np.pi * self.frequency
        return self.amplitude * w * np.cos(self._arg(u))

    def d2(self, u):
        w = 2.0 * np.pi * self.frequency
        return -self.amplitude * w * w * np.sin(self._arg(u))

    def to_dict(self):
        return {"type": "sine", "amplitude": self.amplitude, "frequency": self.frequency,
                "phase": self.phase}


_COEF_TYPES = {"constant": Constant, "linear": Linear, "sine": Sine}


def coefficient_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("type")
    try:
        return _COEF_TYPES[kind](**d)
    except KeyError:
        raise ValueError(f"unknown coefficient type {kind!r}") from None


def _eval(fn: Callable, u: np.ndarray) -> np.ndarray:
    out = np.asarray(fn(u), dtype=float)
    if out.shape != u.shape:
        out = np.array([float(fn(x)) for x in u])
    return out


@dataclass(frozen=True)
class TvModel:
    """Y_{t,T} = sum_j beta_j(t/T) Y_{t-j,T} + eps_t."""

    beta: tuple
    innovation: InnovationSpec = field(default_factory=InnovationSpec)
    beta_d1: tuple | None = None
    beta_d2: tuple | None = None
    check_stability: bool = True

    def __post_init__(self):
        beta = tuple(self.beta)
        object.__setattr__(self, "beta", beta)
        if not beta:
            raise ValueError("a tvAR model needs at least one coefficient function")
        for name, attr in (("beta_d1", "d1"), ("beta_d2", "d2")):
            given = getattr(self, name)
            if given is None and all(hasattr(b, attr) for b in beta):
                given = tuple(getattr(b, attr) for b in beta)
            elif given is not None:
                given = tuple(given)
                if len(given) != len(beta):
                    raise ValueError(f"{name} must have one function per coefficient")
            object.__setattr__(self, name, given)
        if self.check_stability:
            self._check_stability()
            self._check_derivatives()

    @property
    def p(self) -> int:
        return len(self.beta)

    def coefficients(self, u) -> np.ndarray:
        """beta(u) as an array of shape (len(u), p)."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return np.column_stack([_eval(b, u) for b in self.beta])

    def derivatives(self, u, order: int) -> np.ndarray:
        fns = self.beta_d1 if order == 1 else self.beta_d2
        if fns is None:
            raise ValueError(f"model has no order-{order} coefficient derivatives")
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return np.column_stack([_eval(b, u) for b in fns])

    def _check_stability(self, n: int = 1001):
        grid = np.linspace(0.0, 1.0, n)
        B = self.coefficients(grid)
        if self.p == 1:
            bad = np.abs(B[:, 0]) * (1.0 + STABILITY_MARGIN) >= 1.0
            if bad.any():
                raise ValueError(f"unstable model: |beta_1(u)| >= 1 at u={grid[bad][0]:.4f}")
            return
        for u, b in zip(grid, B):
            # roots of 1 - sum_j b_j z^j
            roots = np.roots(np.concatenate([-b[::-1], [1.0]]))
            if roots.size and np.min(np.abs(roots)) <= 1.0 + STABILITY_MARGIN:
                raise ValueError(f"unstable model: characteristic root inside unit circle at u={u:.4f}")

    def _check_derivatives(self, n: int = 1001, step: float = 1e-5, tol: float = 1e-4):
        grid = np.linspace(step, 1.0 - step, n)
        if self.beta_d1 is not None:
            fd = (self.coefficients(grid + step) - self.coefficients(grid - step)) / (2 * step)
            if np.max(np.abs(fd - self.derivatives(grid, 1))) > tol * max(1.0, np.max(np.abs(fd))):
                raise ValueError("beta_d1 does not match finite differences of beta")
        if self.beta_d2 is not None and self.beta_d1 is not None:
            fd = (self.derivatives(grid + step, 1) - self.derivatives(grid - step, 1)) / (2 * step)
            if np.max(np.abs(fd - self.derivatives(grid, 2))) > tol * max(1.0, np.max(np.abs(fd))):
                raise ValueError("beta_d2 does not match finite differences of beta_d1")

    def sup_abs_beta1(self, n: int = 10_001) -> float:
        return float(np.max(np.abs(self.coefficients(np.linspace(0, 1, n))[:, 0])))

    def to_dict(self) -> dict:
        if not all(hasattr(b, "to_dict") for b in self.beta):
            raise TypeError("only parametric coefficient functions can be serialized")
        return {"p": self.p, "coefficients": [b.to_dict() for b in self.beta],
                "innovation": self.innovation.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> TvModel:
        innovation = InnovationSpec.from_dict(d.get("innovation", {"kind": "gaussian"}))
        if "preset" in d:
            return PRESETS[d["preset"]](innovation)
        coefs = tuple(coefficient_from_dict(c) for c in d["coefficients"])
        if "p" in d and d["p"] != len(coefs):
            raise ValueError("'p' disagrees with the number of coefficients")
        return cls(coefs, innovation)

    def with_innovation(self, innovation: InnovationSpec) -> TvModel:
        return TvModel(self.beta, innovation, self.beta_d1, self.beta_d2, self.check_stability)


def example1_model(innovation: InnovationSpec | None = None) -> TvModel:
    """tvAR(1) with beta_1(u) = 0.8 sin(2 pi u)."""
    return TvModel((Sine(0.8, 1.0),), innovation or InnovationSpec())


def equivalence_model(innovation: InnovationSpec | None = None) -> TvModel:
    """tvAR(1) with beta_1(u) = 0.8 sin(4 pi u), used for the two-point test."""
    return TvModel((Sine(0.8, 2.0),), innovation or InnovationSpec())


def ar2_model(innovation: InnovationSpec | None = None) -> TvModel:
    """tvAR(2) with 0.8 sin(2 pi u) and 0.2 sin(2 pi (u + 0.1))."""
    return TvModel((Sine(0.8, 1.0), Sine(0.2, 1.0, 0.1)), innovation or InnovationSpec())


PRESETS = {"example1": example1_model, "equivalence": equivalence_model, "ar2": ar2_model}


# simulation ----------------------------------------------------------------


@dataclass(frozen=True)
class TvSeries:
    values: np.ndarray
    model: TvModel
    seed: int
    innovations: np.ndarray
    burn_in: int = DEFAULT_BURN_IN

    @property
    def T(self) -> int:
        return len(self.values)


def draw_innovations(model: TvModel, T: int, burn_in: int, seed: int) -> np.ndarray:
    """The shared stream eps_{1-burn_in}, ..., eps_T (length burn_in + T)."""
    return model.innovation.sample(burn_in + T, make_rng(seed))


def _recurse(coefs: np.ndarray, eps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Run y_i = sum_j coefs[i, j] y_{i-1-j} + eps_i from zero initial values.

    Returns the path and the realised residuals y_i - sum_j coefs[i, j] y_{i-1-j}.
    """
    n, p = coefs.shape
    y = [0.0] * (n + p)
    resid = [0.0] * n
    B = coefs.tolist()
    e = eps.tolist()
    if p == 1:
        prev = 0.0
        for i in range(n):
            s = B[i][0] * prev
            cur = s + e[i]
            resid[i] = cur - s
            y[i + 1] = cur
            prev = cur
    else:
        for i in range(n):
            b = B[i]
            s = 0.0
            for j in range(p):
                s += b[j] * y[i + p - 1 - j]
            cur = s + e[i]
            resid[i] = cur - s
            y[i + p] = cur
    return np.asarray(y[p:]), np.asarray(resid)


def _tv_coefficients(model: TvModel, T: int, burn_in: int) -> np.ndarray:
    u = np.arange(1, T + 1) / T
    B = model.coefficients(u)
    if burn_in:
        B = np.vstack([np.repeat(model.coefficients([0.0]), burn_in, axis=0), B])
    return B


def simulate_tvar(model: TvModel, T: int, burn_in: int = DEFAULT_BURN_IN, seed: int = 0) -> TvSeries:
    if T <= model.p:
        raise ValueError(f"T={T} must exceed the model order p={model.p}")
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    eps = draw_innovations(model, T, burn_in, seed)
    y, resid = _recurse(_tv_coefficients(model, T, burn_in), eps)
    return TvSeries(y[burn_in:], model, seed, resid[burn_in:], burn_in)


def simulate_stationary(model: TvModel, u0: float, T: int, burn_in: int = DEFAULT_BURN_IN,
                        seed: int = 0) -> np.ndarray:
    """Y_t(u0): the AR(p) recursion with coefficients frozen at beta(u0)."""
    if T <= model.p:
        raise ValueError(f"T={T} must exceed the model order p={model.p}")
    eps = draw_innovations(model, T, burn_in, seed)
    B = np.repeat(model.coefficients([u0]), burn_in + T, axis=0)
    y, _ = _recurse(B, eps)
    return y[burn_in:]


def stationary_with_derivatives(model: TvModel, u0: float, T: int, seed: int,
                                burn_in: int = DEFAULT_BURN_IN, eps: np.ndarray | None = None):
    """Jointly simulate Y_t(u0) and its first two u-derivative processes.

    Returns arrays (Y, dY, d2Y) of length T sharing one innovation stream. Second
    derivatives are zero-filled when the model carries no beta_d2.
    """
    if model.beta_d1 is None:
        raise ValueError("derivative processes need beta_d1 on the model")
    p = model.p
    b = model.coefficients([u0])[0].tolist()
    b1 = model.derivatives([u0], 1)[0].tolist()
    b2 = model.derivatives([u0], 2)[0].tolist() if model.beta_d2 is not None else [0.0] * p
    if eps is None:
        eps = draw_innovations(model, T, burn_in, seed)
    e = eps.tolist()
    n = len(e)
    y = [0.0] * (n + p)
    d1 = [0.0] * (n + p)
    d2 = [0.0] * (n + p)
    for i in range(n):
        k = i + p
        sy = 0.0
        s1a = 0.0
        s1b = 0.0
        s2a = 0.0
        s2b = 0.0
        s2c = 0.0
        for j in range(p):
            ylag, d1lag, d2lag = y[k - 1 - j], d1[k - 1 - j], d2[k - 1 - j]
            sy += b[j] * ylag
            s1a += b1[j] * ylag
            s1b += b[j] * d1lag
            s2a += b2[j] * ylag
            s2b += b1[j] * d1lag
            s2c += b[j] * d2lag
        y[k] = sy + e[i]
        d1[k] = s1a + s1b
        d2[k] = s2a + 2.0 * s2b + s2c
    start = p + n - T
    return np.asarray(y[start:]), np.asarray(d1[start:]), np.asarray(d2[start:])


def derivative_process(model: TvModel, u0: float, order: int, T: int, seed: int,
                       burn_in: int = DEFAULT_BURN_IN) -> np.ndarray:
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if order == 2 and model.beta_d2 is None:
        raise ValueError("second derivative process needs beta_d2 on the model")
    _, d1, d2 = stationary_with_derivatives(model, u0, T, seed, burn_in)
    return d1 if order == 1 else d2


# tvAR(1) moving-average form -------------------------------------------------


def tvma_coefficients(model: TvModel, t: int, T: int, L: int) -> np.ndarray:
    """psi_{l,t,T} = prod_{k<l} beta_1((t-k)/T), l = 0..L, with beta(u) = beta(0) for u < 0."""
    if model.p != 1:
        raise ValueError("MA(inf) coefficients are only available for p = 1")
    if L < 0:
        raise ValueError("L must be nonnegative")
    u = np.maximum((t - np.arange(L)) / T, 0.0)
    psi = np.ones(L + 1)
    psi[1:] = np.cumprod(model.coefficients(u)[:, 0])
    return psi


def default_truncation(rho: float, tol: float = 1e-12) -> int:
    """Smallest L with rho^L < tol."""
    if rho <= 0:
        return 1
    L = max(1, math.ceil(math.log(tol) / math.log(rho)))
    while rho**L >= tol:
        L += 1
    while L > 1 and rho ** (L - 1) < tol:
        L -= 1
    return L


@dataclass
class GapReport:
    t: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    C0: float
    rho: float
    L: int

    @property
    def holds(self) -> np.ndarray:
        return self.lhs <= self.rhs

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.rhs > 0, self.lhs / self.rhs, 0.0)


def lipschitz_constant(fn: Callable, n: int = 10_001) -> float:
    u = np.linspace(0.0, 1.0, n)
    v = _eval(fn, u)
    return float(np.max(np.abs(np.diff(v))) / (u[1] - u[0]))


def approximation_gap_check(model: TvModel, u0: float, T: int, L: int | None = None,
                            seed: int = 0) -> GapReport:
    """Compare |Y_{t,T} - Y_t(u0)| with the envelope C0 (|t/T-u0| + 1/T) sum_j l_j^{-1} |eps_{t-j}|.

    Both processes are expanded in their truncated MA(inf) forms on one
    innovation stream. The envelope uses l_j^{-1} = (1+j)^2 rho^j with
    rho = sup|beta_1| and C0 = Lip(beta_1) * max((1-rho)^{-2}, 1/rho), which
    dominates |psi_{l,t,T} - beta_1(u0)^l| <= Lip rho^{l-1} (l|t/T-u0| + l^2/T).
    """
    if model.p != 1:
        raise ValueError("approximation gap check needs p = 1")
    rho = model.sup_abs_beta1()
    if L is None:
        L = default_truncation(rho)
    lip = lipschitz_constant(model.beta[0])
    C0 = lip * max((1.0 - rho) ** -2, 1.0 / rho if rho > 0 else 0.0)
    eps = draw_innovations(model, T, L, seed)
    ts = np.array([t for t in range(max(1, math.floor(u0 * T) - 1), min(T, math.ceil(u0 * T) + 1) + 1)
                   if abs(t / T - u0) < 1.0 / T])
    j = np.arange(L + 1)
    beta0 = float(model.coefficients([u0])[0, 0])
    frozen = np.ones(L + 1)
    frozen[1:] = np.cumprod(np.full(L, beta0))  # same arithmetic as psi, so constant models give 0
    envelope = (1.0 + j) ** 2 * rho ** j
    lhs, rhs = [], []
    for t in ts:
        window = eps[L + t - 1 - j]  # eps_{t-j}
        psi = tvma_coefficients(model, int(t), T, L)
        lhs.append(abs(np.dot(psi - frozen, window)))
        rhs.append(C0 * (abs(t / T - u0) + 1.0 / T) * np.dot(envelope, np.abs(window)))
    return GapReport(ts, np.asarray(lhs), np.asarray(rhs), C0, rho, L)


def series_to_csv(series: TvSeries, path, extra: dict | None = None) -> None:
    """Write ``t,value`` rows after a ``# {json}`` line describing the simulation."""
    import json

    meta = {"model": series.model.to_dict(), "seed": series.seed, "burn_in": series.burn_in}
    meta.update(extra or {})
    header = json.dumps(meta, sort_keys=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {header}\n")
        fh.write("t,value\n")
        for t, v in enumerate(series.values, start=1):
            fh.write(f"{t},{float(v)!r}\n")
