import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special, stats

from hypmnnr.errors import InvalidArgumentError, UnsupportedOperationError
from hypmnnr.marks import (BetaMarks, CustomControl, DegenerateMarks, EmptyControl, FullControl, MaxRatio,
                           MinProduct, UniformMarks, beta_from_mean_var, control_contains, density,
                           parse_control_set, parse_mark_model, sample_marks)


def test_model_validation():
    with pytest.raises(InvalidArgumentError):
        DegenerateMarks(0.0)
    with pytest.raises(InvalidArgumentError):
        UniformMarks(0.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        UniformMarks(2.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        BetaMarks(-1.0, 2.0)


def test_density_examples():
    assert density(UniformMarks(1, 3), 2.0) == 0.5
    m = beta_from_mean_var(0.5, 0.05)
    assert density(m, 0.5) == pytest.approx(1.5, rel=1e-12)
    for model in (UniformMarks(1, 3), m):
        assert density(model, -1.0) == 0.0
    with pytest.raises(UnsupportedOperationError):
        density(DegenerateMarks(0.5), 0.5)


def test_beta_moment_inversion():
    m = beta_from_mean_var(0.5, 0.05)
    assert (m.alpha, m.beta) == pytest.approx((2.0, 2.0))
    m = beta_from_mean_var(0.5, 1 / 12)
    assert (m.alpha, m.beta) == pytest.approx((1.0, 1.0))
    with pytest.raises(InvalidArgumentError):
        beta_from_mean_var(0.5, 0.3)
    with pytest.raises(InvalidArgumentError):
        beta_from_mean_var(1.2, 0.01)


@pytest.mark.parametrize("var", [1e-4, 0.01, 0.05, 0.1, 0.2])
def test_beta_round_trips_moments(var):
    m = beta_from_mean_var(0.5, var)
    assert m.mean == pytest.approx(0.5) and m.variance == pytest.approx(var, rel=1e-12)
    assert parse_mark_model(m.spec) == m


def test_sampling_examples():
    rng = np.random.default_rng(0)
    assert list(sample_marks(DegenerateMarks(0.5), 3, rng)) == [0.5, 0.5, 0.5]
    assert sample_marks(UniformMarks(1, 2), 0, rng).size == 0
    x = sample_marks(beta_from_mean_var(0.5, 0.05), 100_000, rng)
    assert abs(x.mean() - 0.5) <= 3 * math.sqrt(0.05 / 1e5)


@pytest.mark.parametrize("model", [beta_from_mean_var(0.5, 0.05), beta_from_mean_var(0.3, 0.15),
                                   UniformMarks(1, 3)])
def test_ks_against_cdf(model):
    x = sample_marks(model, 100_000, np.random.default_rng(5))
    assert stats.kstest(x, model.cdf).statistic < 0.01


def test_tiny_shape_draws_stay_positive():
    m = beta_from_mean_var(0.5, 0.24)  # shapes ~0.02
    x = sample_marks(m, 20_000, np.random.default_rng(1))
    assert np.all(x > 0) and np.all(x <= 1)


@pytest.mark.parametrize("model", [beta_from_mean_var(0.5, 1e-4), beta_from_mean_var(0.5, 0.2),
                                   beta_from_mean_var(0.2, 0.05)])
def test_quantile_inverts_cdf(model):
    u = np.linspace(0.001, 0.999, 101)
    q = model.ppf(u)
    # for U-shaped laws the top quantiles are within 1e-16 of 1 and round to it
    inner = q < 1.0
    assert np.allclose(model.cdf(q[inner]), u[inner], atol=1e-12)
    gap = special.betaincinv(model.beta, model.alpha, 1.0 - u[~inner])
    assert np.all(gap < 1.2e-16)


def test_control_examples():
    assert control_contains(FullControl(), 0.1, 0.9)
    assert not control_contains(MinProduct(0.25), 0.4, 0.5)
    assert control_contains(MaxRatio(2), 0.3, 0.5)
    assert not control_contains(EmptyControl(), 0.3, 0.3)
    with pytest.raises(InvalidArgumentError):
        MaxRatio(0.5)


def test_custom_control_symmetry_enforced():
    ok = CustomControl(lambda z, zt: z + zt > 1.0, "sum")
    assert control_contains(ok, 0.6, 0.6)
    with pytest.raises(InvalidArgumentError):
        CustomControl(lambda z, zt: z > zt, "ordered")


def test_custom_control_scalar_predicate():
    D = CustomControl(lambda z, zt: max(z, zt) < 2 * min(z, zt), "scalar")
    assert list(D.contains(np.array([1.0, 1.0]), np.array([1.5, 3.0]))) == [True, False]


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1e-3, 10), st.floats(1, 10))
def test_controls_symmetric(z, zt, tau, rho):
    for D in (FullControl(), EmptyControl(), MinProduct(tau), MaxRatio(rho)):
        assert control_contains(D, z, zt) == control_contains(D, zt, z)


def test_controls_symmetric_bulk():
    rng = np.random.default_rng(2)
    z, zt = rng.uniform(0, 2, 10_000), rng.uniform(0, 2, 10_000)
    for D in (MinProduct(0.5), MaxRatio(1.5)):
        assert np.array_equal(D.contains(z, zt), D.contains(zt, z))


def test_density_nonnegative_and_zero_outside():
    z = np.linspace(-1, 4, 1001)
    for m in (UniformMarks(1, 3), beta_from_mean_var(0.5, 0.2)):
        f = m.density(z)
        lo, hi = m.support
        assert np.all(f >= 0) and np.all(f[(z < lo) | (z > hi)] == 0)


def test_parsers():
    assert parse_mark_model("degenerate:mu=0.5") == DegenerateMarks(0.5)
    assert parse_mark_model("uniform:lo=1,hi=3") == UniformMarks(1, 3)
    assert parse_control_set("minproduct:tau=0.25") == MinProduct(0.25)
    assert parse_control_set(" Full ") == FullControl()
    for bad in ("beta:mean=0.5", "gamma:k=1", "degenerate:mu=x", "uniform:lo"):
        with pytest.raises(InvalidArgumentError):
            parse_mark_model(bad)
    with pytest.raises(InvalidArgumentError):
        parse_control_set("full:x=1")
