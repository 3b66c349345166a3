import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import optimize, stats

from snldp.density import make_gaussian
from snldp.selfnorm import (
    DegenerateSampleError,
    joint_density_mc,
    log_sphere_area,
    min_dispersion,
    sample_sphere,
    shao_event,
    shao_event_batch,
    t_statistic,
)


def test_t_statistic_matches_scipy():
    rng = np.random.default_rng(3)
    for n in (2, 5, 30):
        x = rng.normal(0.3, 1.0, size=n)
        ref = stats.ttest_1samp(x, 0.0).statistic
        assert t_statistic(x, unbiased=True) == pytest.approx(ref, rel=1e-12)
        assert t_statistic(x) == pytest.approx(ref * math.sqrt(n / (n - 1)), rel=1e-12)


def test_t_statistic_batch_and_errors():
    x = np.array([[1.0, 2.0, 3.0], [0.0, -1.0, 4.0]])
    out = t_statistic(x)
    assert out.shape == (2,)
    with pytest.raises(DegenerateSampleError):
        t_statistic([2.0, 2.0])
    with pytest.raises(ValueError):
        t_statistic([1.0])
    with pytest.raises(ValueError):
        t_statistic([1.0, math.nan])


@pytest.mark.parametrize("seed", range(6))
def test_min_dispersion_against_numeric_minimizer(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(1.0, 0.8, size=12)
    d = min_dispersion(x)
    # Minimize over w = 1/z > 0, where the objective is quadratic.
    obj = lambda w: float(np.mean((x * w - 1.0) ** 2))  # noqa: E731
    res = optimize.minimize_scalar(obj, bounds=(1e-9, 50.0), method="bounded", options={"xatol": 1e-12})
    assert d.inf_value == pytest.approx(res.fun, abs=1e-9)
    assert d.argmin_z == pytest.approx(1.0 / res.x, rel=1e-5)


def test_min_dispersion_nonpositive_mean():
    d = min_dispersion([-1.0, 0.5, -2.0])
    assert d.inf_value == 1.0 and d.argmin_z is None


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@settings(max_examples=400, deadline=None)
@given(x=arrays(np.float64, st.integers(2, 40), elements=finite), a=st.floats(0.05, 20))
def test_event_identity(x, a):
    ev = shao_event(x, a)
    assert ev.via_t == ev.via_dispersion


def test_event_identity_on_random_batches():
    rng = np.random.default_rng(1)
    for n in (2, 3, 10, 50):
        x = rng.standard_cauchy((20000, n)) + 0.8
        a = rng.uniform(0.5, 5, size=20000)
        via_t, via_d = shao_event_batch(x, a)
        assert np.array_equal(via_t, via_d)
        assert via_t.any() and not via_t.all()


def test_event_zero_spread_convention():
    assert shao_event([1.0, 1.0, 1.0], 3.0).via_t
    assert not shao_event([-1.0, -1.0], 3.0).via_dispersion


def test_event_rejects_bad_cutoff():
    with pytest.raises(ValueError):
        shao_event([1.0, 2.0], 0.0)


@pytest.mark.parametrize("n,area", [(3, 2 * math.pi), (4, 4 * math.pi), (5, 2 * math.pi**2)])
def test_sphere_area(n, area):
    assert math.exp(log_sphere_area(n)) == pytest.approx(area, rel=1e-12)


def test_sphere_draws_lie_on_sphere_and_are_isotropic():
    w = sample_sphere(6, np.random.default_rng(0), 40000)
    np.testing.assert_allclose(w.sum(axis=1), 0, atol=1e-12)
    np.testing.assert_allclose((w * w).sum(axis=1), 1, atol=1e-12)
    # Uniform on the unit sphere of a 5-dim subspace: E w_i^2 = (1 - 1/6) / 5.
    np.testing.assert_allclose((w * w).mean(axis=0), 1 / 6, atol=3e-3)
    assert sample_sphere(3, np.random.default_rng(0)).shape == (3,)
    with pytest.raises(ValueError):
        sample_sphere(2, np.random.default_rng(0))


def exact_gaussian_joint(n, t, s):
    # mean ~ N(0, 1/n) independent of n V^2 ~ chi2(n - 1).
    return stats.norm.pdf(t, 0, 1 / math.sqrt(n)) * stats.chi2.pdf(n * s * s, n - 1) * 2 * n * s


@pytest.mark.parametrize("n", [3, 5, 8])
@pytest.mark.parametrize("t,s", [(0.0, 0.8), (0.3, 0.6), (-0.2, 1.2)])
def test_joint_density_matches_exact_gaussian(n, t, s):
    est, se = joint_density_mc(make_gaussian(), n, t, s, 200_000, rng=np.random.default_rng(7))
    exact = exact_gaussian_joint(n, t, s)
    assert abs(est - exact) <= 4 * se + 1e-12


def test_joint_density_errors():
    g = make_gaussian()
    with pytest.raises(ValueError):
        joint_density_mc(g, 2, 0.0, 1.0, 10, rng=np.random.default_rng(0))
    with pytest.raises(ValueError):
        joint_density_mc(g, 4, 0.0, 0.0, 10, rng=np.random.default_rng(0))
    with pytest.raises(ValueError):
        joint_density_mc(g, 4, 0.0, 1.0, 10)
