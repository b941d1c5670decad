"""Hill estimators of the left and right tail index."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

SIDES = ("left", "right")
PLATEAU_SLOPE = 0.08


class InsufficientExceedances(ValueError):
    pass


def _side_values(series, side: str) -> np.ndarray:
    """Positive exceedances for one tail, sorted in descending order.

    The right tail keeps y > 0; the left tail keeps -y for y < 0. Zeros are
    dropped on both sides.
    """
    side = side.lower()
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}, got {side!r}")
    y = np.asarray(series, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("series must be finite")
    x = y[y > 0] if side == "right" else -y[y < 0]
    return np.sort(x, kind="stable")[::-1]


def _hill_from_sorted(x_desc: np.ndarray, ks: np.ndarray) -> np.ndarray:
    # logs of ratios to the maximum: rescaling by a power of two leaves every
    # term, and so the estimate, bitwise unchanged
    r = np.log(x_desc / x_desc[0])
    csum = np.concatenate(([0.0], np.cumsum(r)))
    mean_log = (csum[ks] - ks * r[ks]) / ks
    with np.errstate(divide="ignore"):
        return np.where(mean_log > 0, 1.0 / mean_log, np.inf)


def hill_estimate(series, k: int, side: str = "right") -> float:
    """Hill estimate from the k largest exceedances relative to the (k+1)-th."""
    x = _side_values(series, side)
    if k < 1:
        raise ValueError("k must be at least 1")
    if k + 1 > len(x):
        raise InsufficientExceedances(f"k={k} needs {k + 1} exceedances, only {len(x)} available")
    est = float(_hill_from_sorted(x, np.array([k]))[0])
    if not np.isfinite(est):
        raise ValueError(f"the {k + 1} largest exceedances are tied; Hill estimate undefined")
    return est


@dataclass(frozen=True)
class HillCurve:
    k_values: np.ndarray
    estimates: np.ndarray
    side: str
    n_used: int

    def plateau(self, lo: float = 0.01, hi: float = 0.1) -> dict:
        """Summary over k in [lo*m, hi*m].

        A curve counts as a heavy-tail plateau when log(estimate) against
        log(k) has slope below ``PLATEAU_SLOPE`` in absolute value; light
        tails show a steady drift instead.
        """
        sel = (self.k_values >= lo * self.n_used) & (self.k_values <= hi * self.n_used)
        k, est = self.k_values[sel], self.estimates[sel]
        if len(k) < 3:
            raise ValueError("fewer than three curve points inside the plateau window")
        slope = float(np.polyfit(np.log(k), np.log(est), 1)[0])
        q25, med, q75 = np.percentile(est, [25, 50, 75])
        return {"median": float(med), "iqr": (float(q25), float(q75)), "slope": slope,
                "heavy_tail_plateau": abs(slope) < PLATEAU_SLOPE,
                "flag": None if abs(slope) < PLATEAU_SLOPE else "no heavy-tail plateau"}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "estimate"])
            for k, e in zip(self.k_values, self.estimates):
                w.writerow([int(k), repr(float(e))])


def hill_curve(series, k_min: int = 1, k_max: int | None = None, step: int = 1,
               side: str = "right") -> HillCurve:
    x = _side_values(series, side)
    m = len(x)
    if step < 1:
        raise ValueError("step must be positive")
    hi = m - 1 if k_max is None else min(k_max, m - 1)
    ks = np.arange(max(k_min, 1), hi + 1, step)
    if ks.size == 0:
        raise InsufficientExceedances(f"empty k range after clipping to {m - 1} (m={m} exceedances)")
    est = _hill_from_sorted(x, ks)
    ok = np.isfinite(est)  # k values whose top k+1 exceedances tie are dropped
    if not ok.any():
        raise InsufficientExceedances("every k in range hits tied exceedances")
    return HillCurve(ks[ok], est[ok], side.lower(), m)
