"""Innovation distributions and the tail quantities a_n, b_n.

The menu is fixed to Gaussian, Student-t and Cauchy. All three are symmetric
with median zero and a strictly decreasing survival function of ``|eps|``, so
``a_n`` is the unique root of ``P(|eps| > x) = 1/n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special, stats

from ._rng import make_rng

KINDS = ("gaussian", "student_t", "cauchy")


@dataclass(frozen=True)
class InnovationSpec:
    kind: str = "gaussian"
    nu: float | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown innovation kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "student_t" and (self.nu is None or self.nu <= 0):
            raise ValueError("student_t innovations need a positive 'nu'")
        if self.kind != "student_t" and self.nu is not None:
            raise ValueError(f"'nu' only applies to student_t, not {self.kind}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @classmethod
    def gaussian(cls, scale: float = 1.0) -> InnovationSpec:
        return cls("gaussian", scale=scale)

    @classmethod
    def cauchy(cls, scale: float = 1.0) -> InnovationSpec:
        return cls("cauchy", scale=scale)

    @classmethod
    def student_t(cls, nu: float, scale: float = 1.0) -> InnovationSpec:
        return cls("student_t", nu=float(nu), scale=scale)

    @classmethod
    def from_dict(cls, d: dict) -> InnovationSpec:
        nu = d.get("nu")
        return cls(d["kind"], None if nu is None else float(nu), float(d.get("scale", 1.0)))

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "scale": self.scale}
        if self.nu is not None:
            d["nu"] = self.nu
        return d

    @property
    def tail_index(self) -> float:
        """Pareto exponent of |eps|; 2 by convention for the Gaussian."""
        return {"gaussian": 2.0, "cauchy": 1.0}.get(self.kind, self.nu)

    @property
    def label(self) -> str:
        if self.kind == "student_t":
            nu = self.nu
            return f"t{int(nu)}" if float(nu).is_integer() else f"t{nu:g}"
        return {"gaussian": "N(0,1)", "cauchy": "Cauchy"}[self.kind]

    def _dist(self):
        if self.kind == "gaussian":
            return stats.norm(scale=self.scale)
        if self.kind == "cauchy":
            return stats.cauchy(scale=self.scale)
        return stats.t(self.nu, scale=self.scale)

    def pdf(self, x):
        return self._dist().pdf(x)

    def f0(self) -> float:
        """Density at zero, in closed form."""
        s = self.scale
        if self.kind == "gaussian":
            return 1.0 / (math.sqrt(2.0 * math.pi) * s)
        if self.kind == "cauchy":
            return 1.0 / (math.pi * s)
        nu = self.nu
        return math.exp(special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)) / (
            math.sqrt(nu * math.pi) * s
        )

    def abs_survival(self, x):
        """P(|eps| > x) for x >= 0."""
        x = np.asarray(x, dtype=float) / self.scale
        if self.kind == "cauchy":
            # arctan(1/x) keeps relative precision far in the tail
            with np.errstate(divide="ignore"):
                out = np.where(x > 0, (2.0 / np.pi) * np.arctan(1.0 / np.where(x > 0, x, 1.0)), 1.0)
            return out if out.ndim else float(out)
        if self.kind == "gaussian":
            return 2.0 * stats.norm.sf(x)
        return 2.0 * stats.t.sf(x, self.nu)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian":
            draws = rng.standard_normal(n)
        elif self.kind == "cauchy":
            draws = rng.standard_cauchy(n)
        else:
            draws = rng.standard_t(self.nu, n)
        return self.scale * draws


def sample_innovations(spec: InnovationSpec, n: int, seed: int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be at least 1")
    return spec.sample(n, make_rng(seed))


def tail_quantile_a(spec: InnovationSpec, n: int) -> float:
    """a_n = inf{x : P(|eps| > x) <= 1/n}, solved as the root of the survival equation."""
    if n < 2:
        raise ValueError(f"a_n is defined here for n >= 2, got {n}")
    target = 1.0 / n
    hi = spec.scale
    while spec.abs_survival(hi) > target:
        hi *= 2.0
    return optimize.brentq(
        lambda x: spec.abs_survival(x) - target, 0.0, hi, xtol=1e-300, rtol=1e-12, maxiter=500
    )


def truncated_mean_b(spec: InnovationSpec, n: int) -> float:
    """b_n = E[|eps| 1(|eps| <= a_n)] by adaptive quadrature."""
    a = tail_quantile_a(spec, n)
    val, _ = integrate.quad(
        lambda x: 2.0 * x * spec.pdf(x), 0.0, a, epsabs=1e-12, epsrel=1e-12, limit=500
    )
    return val
