"""Self-weight functions g(.) and the Epanechnikov kernel."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

VARIANTS = ("ling", "smooth_indicator", "pan", "unit")


def smooth_step(u):
    """The C^1 cubic ramp J: 0 below -1, 1 above 1, -u^3/4 + 3u/4 + 1/2 between."""
    u = np.asarray(u, dtype=float)
    return np.where(u <= -1.0, 0.0, np.where(u > 1.0, 1.0, -0.25 * u**3 + 0.75 * u + 0.5))


def smooth_step_deriv(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u**2), 0.0)


@dataclass(frozen=True)
class WeightSpec:
    """One self-weight family.

    ``ling``: (1 + c|x|^2)^(-3/2). ``smooth_indicator``: J(c - |x|) where c is
    given directly or as the q-quantile of |Y|; a resolved spec keeps both.
    ``pan``: (1 + sum_k k^-3 |Y_{t-k}|)^-2 over the whole past. ``unit``: 1.
    """

    variant: str = "unit"
    c: float | None = None
    q: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown weight variant {self.variant!r}; expected one of {VARIANTS}")
        if self.variant == "ling" and not (self.c is not None and self.c > 0):
            raise ValueError("ling weights need a positive c")
        if self.variant == "smooth_indicator":
            if self.c is None and self.q is None:
                raise ValueError("smooth_indicator needs a cutoff c or a quantile level q")
            if self.q is not None and not 0 < self.q < 1:
                raise ValueError("quantile level q must lie in (0, 1)")

    @classmethod
    def ling(cls, c: float) -> WeightSpec:
        return cls("ling", c=float(c))

    @classmethod
    def smooth_indicator(cls, c: float | None = None, q: float | None = None) -> WeightSpec:
        return cls("smooth_indicator", c=None if c is None else float(c),
                   q=None if q is None else float(q))

    @classmethod
    def pan(cls) -> WeightSpec:
        return cls("pan")

    @classmethod
    def unit(cls) -> WeightSpec:
        return cls("unit")

    @classmethod
    def from_dict(cls, d: dict) -> WeightSpec:
        return cls(d["variant"], d.get("c"), d.get("q"))

    def to_dict(self) -> dict:
        d = {"variant": self.variant}
        if self.c is not None:
            d["c"] = self.c
        if self.q is not None:
            d["q"] = self.q
        return d

    @property
    def needs_past(self) -> bool:
        return self.variant == "pan"

    @property
    def differentiable(self) -> bool:
        return self.variant in ("ling", "smooth_indicator", "unit")

    def resolve(self, series) -> WeightSpec:
        """Fix a quantile cutoff against the observed series; other specs pass through."""
        if self.variant == "smooth_indicator" and self.c is None:
            return replace(self, c=resolve_quantile_cutoff(series, self.q))
        return self

    # evaluation on lag vectors (rows of X)
    def g(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.variant == "unit":
            return np.ones(len(X))
        if self.variant == "pan":
            raise ValueError("pan weights depend on the full past, not a lag vector")
        r2 = np.einsum("ij,ij->i", X, X)
        if self.variant == "ling":
            return (1.0 + self.c * r2) ** -1.5
        self._require_cutoff()
        return smooth_step(self.c - np.sqrt(r2))

    def grad(self, X) -> np.ndarray:
        """Gradient of g at each row of X, shape (n, p)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.variant == "unit":
            return np.zeros_like(X)
        if self.variant == "pan":
            raise ValueError("pan weights have no lag-vector gradient")
        r2 = np.einsum("ij,ij->i", X, X)
        if self.variant == "ling":
            return (-3.0 * self.c * (1.0 + self.c * r2) ** -2.5)[:, None] * X
        self._require_cutoff()
        r = np.sqrt(r2)
        scale = np.divide(-smooth_step_deriv(self.c - r), r, out=np.zeros_like(r), where=r > 0)
        return scale[:, None] * X

    def _require_cutoff(self):
        if self.c is None:
            raise ValueError("quantile cutoff unresolved; call resolve(series) first")


def resolve_quantile_cutoff(series, q: float) -> float:
    """Type-7 empirical q-quantile of |Y_1|, ..., |Y_T|."""
    a = np.abs(np.asarray(series, dtype=float))
    if a.size == 0:
        raise ValueError("cannot take a quantile of an empty series")
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    if not a.any():
        warnings.warn("all-zero series: quantile cutoff is 0 (degenerate weights)", stacklevel=2)
        return 0.0
    return float(np.quantile(a, q))


def lag_matrix(y, p: int) -> np.ndarray:
    """Rows X_{t-1} = (Y_{t-1}, ..., Y_{t-p}) for t = p+1..T."""
    y = np.asarray(y, dtype=float)
    T = len(y)
    return np.column_stack([y[p - 1 - j:T - 1 - j] for j in range(p)])


def pan_weights(y, p: int) -> np.ndarray:
    """(1 + sum_{k=1}^{t-1} k^-3 |Y_{t-k}|)^-2 for t = p+1..T, using the available past only."""
    a = np.abs(np.asarray(y, dtype=float))
    T = len(a)
    kern = np.arange(1, T, dtype=float) ** -3.0
    # s[t-1] = sum_{k=1}^{t-1} k^-3 a[t-1-k]
    s = np.concatenate([[0.0], np.convolve(a, kern)[: T - 1]])
    return (1.0 + s[p:]) ** -2.0


def self_weights(y, spec: WeightSpec, p: int) -> np.ndarray:
    """w_{t-1,T} for t = p+1..T; ``spec`` must already be resolved."""
    if spec.variant == "pan":
        return pan_weights(y, p)
    return spec.g(lag_matrix(y, p))


def weight_value(spec: WeightSpec, lag_vector, full_past=None) -> float:
    """Weight for a single time point.

    ``full_past`` holds (Y_1, ..., Y_{t-1}) in time order and is required for
    the pan variant only.
    """
    x = np.asarray(lag_vector, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("lag vector must be finite")
    if spec.variant == "pan":
        if full_past is None:
            raise ValueError("pan weights need the full past")
        past = np.abs(np.asarray(full_past, dtype=float))[::-1]
        k = np.arange(1, len(past) + 1, dtype=float)
        return float((1.0 + np.sum(past / k**3)) ** -2.0)
    return float(spec.g(x.reshape(1, -1))[0])


def assumption3_supremum(spec: WeightSpec, p: int, radius: float, grid_points: int = 2000,
                         seed: int = 0) -> dict:
    """Probe sup_x g(x)(1+|x|^3) + |g'(x)|(|x|+|x|^2) numerically.

    Evaluated along random directions on a radius grid that is dense near the
    origin and log-spaced outwards; g' by central differences with step 1e-6.
    ``finite`` is False when the outer shell (radius/2, radius] exceeds the
    previous shell by more than 1%.
    """
    if spec.variant == "pan":
        raise ValueError("assumption check needs a lag-vector weight, not pan")
    if radius <= 0:
        raise ValueError("radius must be positive")
    rng = np.random.default_rng(seed)
    n_dir = max(4, grid_points // 200)
    dirs = rng.standard_normal((n_dir, p))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    if p >= 1:
        dirs = np.vstack([np.eye(p), dirs])
    radii = np.unique(np.concatenate([
        np.linspace(0.0, min(radius, 10.0), grid_points // 2),
        np.geomspace(min(radius, 10.0) / 10 or 1e-3, radius, grid_points // 2),
    ]))
    pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, p)
    r = np.linalg.norm(pts, axis=1)
    step = 1e-6
    grad = np.empty_like(pts)
    for j in range(p):
        e = np.zeros(p)
        e[j] = step
        grad[:, j] = (spec.g(pts + e) - spec.g(pts - e)) / (2 * step)
    F = spec.g(pts) * (1.0 + r**3) + np.linalg.norm(grad, axis=1) * (r + r**2)
    outer = F[(r > radius / 2) & (r <= radius)]
    inner = F[(r > radius / 4) & (r <= radius / 2)]
    finite = bool(outer.max() <= 1.01 * max(inner.max(), 1e-300))
    i = int(np.argmax(F))
    return {"sup_estimate": float(F[i]), "argmax_norm": float(r[i]), "finite": finite,
            "radii": radii, "shell_max": F.reshape(len(radii), -1).max(axis=1)}


# kernel ------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "epanechnikov"
    support: float = 1.0

    def __post_init__(self):
        if self.kind != "epanechnikov":
            raise ValueError("only the Epanechnikov kernel is available")

    def __call__(self, x):
        return kernel_value(self, x)


EPANECHNIKOV = KernelSpec()


def kernel_value(kernel: KernelSpec, x):
    x = np.asarray(x, dtype=float)
    out = np.where(np.abs(x) <= kernel.support, 0.75 * (1.0 - x * x), 0.0)
    return out if out.ndim else float(out)


def kernel_moment(kernel: KernelSpec, m: int, j: int) -> float:
    """int K(v)^m v^j dv over the support."""
    if m not in (1, 2) or j not in (0, 1, 2):
        raise ValueError("kernel moments are provided for m in {1,2}, j in {0,1,2}")
    C = kernel.support
    val, _ = integrate.quad(lambda v: kernel_value(kernel, v) ** m * v**j, -C, C,
                            epsabs=1e-13, epsrel=1e-13)
    return val
