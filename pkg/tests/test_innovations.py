import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, optimize, special, stats

from tvlad.innovations import (InnovationSpec, sample_innovations, tail_quantile_a,
                               truncated_mean_b)

SPECS = [InnovationSpec.gaussian(), InnovationSpec.cauchy(), InnovationSpec.student_t(2),
         InnovationSpec.student_t(5.5)]


def test_gaussian_median_near_zero():
    x = sample_innovations(InnovationSpec.gaussian(), 100_000, 7)
    assert abs(np.median(x)) < 0.02


def test_cauchy_tail_frequency_matches_exact_survival():
    x = sample_innovations(InnovationSpec.cauchy(), 100_000, 7)
    exact = 1.0 - 2.0 / math.pi * math.atan(100.0)
    assert abs(exact - 2 / (math.pi * 100)) < 1e-5
    assert abs(np.mean(np.abs(x) > 100) - exact) < 3e-3


def test_sampling_is_deterministic():
    a = sample_innovations(InnovationSpec.student_t(2), 4, 3)
    b = sample_innovations(InnovationSpec.student_t(2), 4, 3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_innovations(InnovationSpec.student_t(2), 4, 4))


def test_cauchy_quantile_is_cotangent():
    # bisection oracle on 1 - (2/pi) arctan(x) = 1/n
    n = 1000
    root = optimize.bisect(lambda x: 1 - 2 / math.pi * math.atan(x) - 1 / n, 1.0, 1e6,
                           xtol=1e-13, rtol=1e-15, maxiter=500)
    a = tail_quantile_a(InnovationSpec.cauchy(), n)
    assert a == pytest.approx(root, rel=1e-10)
    assert a == pytest.approx(1 / math.tan(math.pi / 2000), rel=1e-10)
    assert a == pytest.approx(636.6195, abs=5e-4)


@pytest.mark.parametrize("n", [10**4, 10**6, 10**8])
def test_cauchy_quantile_asymptotics(n):
    ratio = tail_quantile_a(InnovationSpec.cauchy(), n) / (2 * n / math.pi)
    assert abs(ratio - 1) < 1e-3


def test_gaussian_quantile_at_two():
    assert tail_quantile_a(InnovationSpec.gaussian(), 2) == pytest.approx(stats.norm.ppf(0.75), rel=1e-10)
    assert tail_quantile_a(InnovationSpec.gaussian(), 2) == pytest.approx(0.67449, abs=1e-5)


def test_quantile_rejects_small_n():
    with pytest.raises(ValueError):
        tail_quantile_a(InnovationSpec.cauchy(), 1)
    with pytest.raises(ValueError):
        truncated_mean_b(InnovationSpec.cauchy(), 1)


def test_cauchy_truncated_mean_closed_form():
    a = 1 / math.tan(math.pi / 2000)
    assert truncated_mean_b(InnovationSpec.cauchy(), 1000) == pytest.approx(
        math.log(1 + a * a) / math.pi, abs=1e-8)


def test_gaussian_truncated_mean_limit():
    assert truncated_mean_b(InnovationSpec.gaussian(), 10**12) == pytest.approx(math.sqrt(2 / math.pi),
                                                                                 abs=1e-8)


def test_cauchy_truncated_mean_monte_carlo():
    spec = InnovationSpec.cauchy()
    a = tail_quantile_a(spec, 2)
    x = np.abs(sample_innovations(spec, 10**6, 11))
    y = x * (x <= a)
    se = y.std(ddof=1) / math.sqrt(len(y))
    assert abs(y.mean() - truncated_mean_b(spec, 2)) < 3 * se


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label)
def test_density_integrates_to_one(spec):
    val, _ = integrate.quad(spec.pdf, -np.inf, np.inf, epsabs=1e-11, epsrel=1e-11, limit=200)
    assert val == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label)
def test_f0_matches_closed_forms(spec):
    if spec.kind == "gaussian":
        expected = 1 / math.sqrt(2 * math.pi)
    elif spec.kind == "cauchy":
        expected = 1 / math.pi
    else:
        nu = spec.nu
        expected = math.exp(special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)) / math.sqrt(nu * math.pi)
    assert spec.f0() == pytest.approx(expected, rel=1e-12)
    assert spec.f0() == pytest.approx(float(spec.pdf(0.0)), rel=1e-12)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label)
def test_survival_at_quantile(spec):
    for n in (2, 17, 1000, 10**6):
        assert abs(spec.abs_survival(tail_quantile_a(spec, n)) - 1 / n) < 1e-10


@given(st.sampled_from(SPECS), st.integers(2, 10**6), st.integers(2, 10**6))
def test_quantile_and_truncated_mean_monotone(spec, n1, n2):
    n1, n2 = sorted((n1, n2))
    assert tail_quantile_a(spec, n2) >= tail_quantile_a(spec, n1)
    assert truncated_mean_b(spec, n2) >= truncated_mean_b(spec, n1) - 1e-10


@given(st.sampled_from(SPECS), st.floats(0.01, 50), st.floats(0.01, 50))
def test_survival_strictly_decreasing(spec, x1, x2):
    if x1 == x2:
        return
    lo, hi = sorted((x1, x2))
    s_lo, s_hi = spec.abs_survival(lo), spec.abs_survival(hi)
    # Gaussian tails underflow to 0.0 beyond x ~ 38
    assert s_lo > s_hi if s_lo > 0 else s_hi == 0


def test_tail_index_convention():
    assert InnovationSpec.gaussian().tail_index == 2
    assert InnovationSpec.cauchy().tail_index == 1
    assert InnovationSpec.student_t(3).tail_index == 3


@pytest.mark.parametrize("bad", [dict(kind="levy"), dict(kind="student_t"), dict(kind="cauchy", nu=2.0),
                                 dict(kind="gaussian", scale=0.0)])
def test_invalid_specs_rejected(bad):
    with pytest.raises(ValueError):
        InnovationSpec(**bad)


def test_dict_roundtrip():
    for spec in SPECS:
        assert InnovationSpec.from_dict(spec.to_dict()) == spec


def test_scale_multiplies_draws():
    a = sample_innovations(InnovationSpec.cauchy(), 50, 5)
    b = sample_innovations(InnovationSpec.cauchy(scale=2.0), 50, 5)
    np.testing.assert_allclose(b, 2 * a, rtol=1e-15)
