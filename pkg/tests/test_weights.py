import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate

from tvlad.weights import (EPANECHNIKOV, KernelSpec, WeightSpec, assumption3_supremum, kernel_moment,
                           kernel_value, lag_matrix, pan_weights, resolve_quantile_cutoff, self_weights,
                           smooth_step, smooth_step_deriv, weight_value)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_closed_form_values():
    assert weight_value(WeightSpec.ling(0.5), [0.0]) == 1.0
    assert weight_value(WeightSpec.smooth_indicator(c=3), [3.0]) == 0.5
    assert weight_value(WeightSpec.smooth_indicator(c=3), [1.8, 2.4]) == pytest.approx(0.5, abs=1e-15)
    assert weight_value(WeightSpec.pan(), [0.0], full_past=[0.0, 0.0, 0.0]) == 1.0
    assert weight_value(WeightSpec.ling(0.5), [1.0, 1.0]) == pytest.approx(2**-1.5, rel=1e-15)
    assert weight_value(WeightSpec.unit(), [123.0]) == 1.0


def test_pan_needs_past():
    with pytest.raises(ValueError):
        weight_value(WeightSpec.pan(), [1.0])


def test_pan_weight_direct_sum():
    past = [2.0, -1.0, 0.5]  # Y_1, Y_2, Y_3; weight for t = 4
    s = abs(0.5) / 1 + abs(-1.0) / 8 + abs(2.0) / 27
    assert weight_value(WeightSpec.pan(), [0.5], full_past=past) == pytest.approx((1 + s) ** -2, rel=1e-14)


def test_pan_vector_matches_pointwise():
    y = np.random.default_rng(1).standard_cauchy(60)
    w = pan_weights(y, 2)
    for i, t in enumerate(range(3, 61)):
        assert w[i] == pytest.approx(weight_value(WeightSpec.pan(), [y[t - 2]], full_past=y[:t - 1]),
                                     rel=1e-12)


@given(arrays(float, st.integers(1, 3), elements=finite),
       st.sampled_from([WeightSpec.ling(0.5), WeightSpec.ling(0.1), WeightSpec.smooth_indicator(c=2.0),
                        WeightSpec.unit()]))
def test_weight_range(x, spec):
    w = weight_value(spec, x)
    assert 0 <= w <= 1
    if spec.variant != "smooth_indicator":
        assert w > 0


@given(arrays(float, 2, elements=finite), st.floats(1.0, 10.0),
       st.sampled_from([WeightSpec.ling(0.5), WeightSpec.smooth_indicator(c=2.0)]))
def test_scale_monotone(x, lam, spec):
    assert weight_value(spec, lam * x) <= weight_value(spec, x) + 1e-15


@given(arrays(float, st.integers(2, 20), elements=st.floats(0, 100)), st.integers(0, 19),
       st.floats(0.1, 50))
def test_pan_nonincreasing_in_past(past, k, bump):
    k = k % len(past)
    bigger = past.copy()
    bigger[k] += bump
    assert weight_value(WeightSpec.pan(), [0.0], bigger) <= weight_value(WeightSpec.pan(), [0.0], past)


@pytest.mark.parametrize("knot", [-1.0, 1.0])
def test_smooth_step_c1_at_knots(knot):
    d = 1e-7
    left = (smooth_step(knot) - smooth_step(knot - d)) / d
    right = (smooth_step(knot + d) - smooth_step(knot)) / d
    assert abs(left - right) < 1e-6
    assert float(smooth_step_deriv(knot)) == 0.0


def test_gradients_match_finite_differences(rng):
    for spec in (WeightSpec.ling(0.5), WeightSpec.smooth_indicator(c=2.0)):
        X = rng.standard_normal((40, 2)) * 2
        G = spec.grad(X)
        for j in range(2):
            e = np.zeros(2)
            e[j] = 1e-6
            fd = (spec.g(X + e) - spec.g(X - e)) / 2e-6
            np.testing.assert_allclose(G[:, j], fd, atol=1e-6)


def test_quantile_cutoff_examples():
    assert resolve_quantile_cutoff(np.arange(1, 101), 0.90) == pytest.approx(90.1, abs=1e-12)
    assert resolve_quantile_cutoff([-3, -1, 1, 3], 0.5) == 2.0
    assert resolve_quantile_cutoff([5, -5, 5], 0.3) == 5.0


def test_quantile_cutoff_degenerate():
    with pytest.warns(UserWarning):
        assert resolve_quantile_cutoff(np.zeros(10), 0.9) == 0.0
    with pytest.raises(ValueError):
        resolve_quantile_cutoff([], 0.9)


def test_resolve_fixes_cutoff_once():
    y = np.random.default_rng(3).standard_cauchy(500)
    spec = WeightSpec.smooth_indicator(q=0.9).resolve(y)
    assert spec.c == pytest.approx(np.quantile(np.abs(y), 0.9)) and spec.q == 0.9
    with pytest.raises(ValueError):
        WeightSpec.smooth_indicator(q=0.9).g(np.ones((1, 1)))


def test_lag_matrix_layout():
    X = lag_matrix(np.arange(1.0, 7.0), 2)
    np.testing.assert_array_equal(X, [[2, 1], [3, 2], [4, 3], [5, 4]])


def test_self_weights_rows():
    y = np.random.default_rng(0).standard_normal(30)
    w = self_weights(y, WeightSpec.ling(0.5), 2)
    assert len(w) == 28
    assert w[0] == pytest.approx((1 + 0.5 * (y[1] ** 2 + y[0] ** 2)) ** -1.5)


def test_assumption3_ling_finite():
    rep = assumption3_supremum(WeightSpec.ling(0.5), 1, 1000.0)
    assert rep["finite"]
    radii, shells = rep["radii"], rep["shell_max"]
    tail = shells[radii > 3.5]
    assert np.all(np.diff(tail) <= 1e-9 * tail[:-1])
    assert rep["sup_estimate"] < 10


def test_assumption3_smooth_indicator_compact():
    rep = assumption3_supremum(WeightSpec.smooth_indicator(c=3.0), 2, 50.0)
    assert rep["finite"] and rep["argmax_norm"] <= 4.0
    assert np.all(rep["shell_max"][rep["radii"] > 4.0 + 1e-6] == 0)


def test_assumption3_unit_unbounded():
    assert not assumption3_supremum(WeightSpec.unit(), 1, 1000.0)["finite"]


def test_assumption3_rejects_pan():
    with pytest.raises(ValueError):
        assumption3_supremum(WeightSpec.pan(), 1, 10.0)


@pytest.mark.parametrize("m,j,expected", [(1, 0, 1.0), (2, 0, 0.6), (1, 2, 0.2), (1, 1, 0.0), (2, 2, 3 / 35)])
def test_kernel_moments(m, j, expected):
    oracle, _ = integrate.quad(lambda v: (0.75 * (1 - v * v)) ** m * v**j, -1, 1, epsabs=1e-14)
    assert kernel_moment(EPANECHNIKOV, m, j) == pytest.approx(oracle, abs=1e-12)
    assert kernel_moment(EPANECHNIKOV, m, j) == pytest.approx(expected, abs=1e-12)


def test_kernel_moment_domain():
    with pytest.raises(ValueError):
        kernel_moment(EPANECHNIKOV, 3, 0)


@given(st.floats(-5, 5))
def test_kernel_symmetric_nonnegative(x):
    assert kernel_value(EPANECHNIKOV, x) == kernel_value(EPANECHNIKOV, -x)
    assert kernel_value(EPANECHNIKOV, x) >= 0
    if abs(x) > 1:
        assert kernel_value(EPANECHNIKOV, x) == 0


def test_only_epanechnikov():
    with pytest.raises(ValueError):
        KernelSpec("gaussian")


@pytest.mark.parametrize("bad", [dict(variant="ling"), dict(variant="ling", c=-1.0),
                                 dict(variant="smooth_indicator"), dict(variant="smooth_indicator", q=1.5),
                                 dict(variant="huber")])
def test_invalid_weight_specs(bad):
    with pytest.raises(ValueError):
        WeightSpec(**bad)


def test_weight_dict_roundtrip():
    for spec in (WeightSpec.ling(0.1), WeightSpec.smooth_indicator(q=0.95), WeightSpec.pan(), WeightSpec.unit()):
        assert WeightSpec.from_dict(spec.to_dict()) == spec
