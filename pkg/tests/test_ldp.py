import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate
from scipy import stats

from oracles import CLOSED_FORM_GRID, gauss_h, gauss_h1, gauss_h2, gauss_log_tail, gauss_tn
from snldp.density import from_log_pdf, make_cauchy, make_gaussian
from snldp.ldp import (
    AmbiguousMaximumError,
    CutoffRule,
    NoInteriorMaximumError,
    SaddlepointAtZeroError,
    cutoff_r,
    exact_tail_asymptotic,
    find_z0,
    moment_asymptotic_check,
    ratio_limit,
    regime_score,
    sigma_from_cutoff,
    solve_tn,
    stationarity_residual,
    tilt_derivatives,
    tilt_logmgf,
    tilt_moments,
)


def test_closed_form_grid_is_large_enough():
    assert len(CLOSED_FORM_GRID) >= 20


@pytest.mark.parametrize("z,sigma2", CLOSED_FORM_GRID)
def test_gaussian_chain_matches_closed_form(z, sigma2):
    g = make_gaussian()
    t = gauss_tn(z, sigma2)
    assert tilt_logmgf(g, z, t) == pytest.approx(gauss_h(z, t), rel=1e-6)
    h1, h2 = tilt_derivatives(g, z, t)
    assert h1 == pytest.approx(gauss_h1(z, t), rel=1e-6)
    assert h2 == pytest.approx(gauss_h2(z, t), rel=1e-6)
    sol = solve_tn(g, z, sigma2, n=200)
    assert sol.t_n == pytest.approx(t, rel=1e-6)
    assert sol.h_val == pytest.approx(gauss_h(z, t), rel=1e-6)
    assert exact_tail_asymptotic(sol).log_prob == pytest.approx(gauss_log_tail(z, sigma2, 200), rel=1e-6)


def test_second_derivative_at_origin_is_six():
    h1, h2 = tilt_derivatives(make_gaussian(), 1.0, 0.0)
    assert h1 == pytest.approx(-2.0, rel=1e-10)
    assert h2 == pytest.approx(6.0, rel=1e-10)


@pytest.mark.parametrize("mu", [-1.0, 0.0, 0.5, 2.0])
def test_z0_gaussian_location_family(mu):
    z0 = find_z0(make_gaussian(mu, 1.0))
    assert z0 == pytest.approx((mu + math.sqrt(mu * mu + 4)) / 2, abs=1e-10)


@pytest.mark.parametrize("mu,sigma", [(0.0, 1.0), (0.0, 2.5), (1.0, 1.0), (-0.5, 0.3)])
def test_z0_cauchy(mu, sigma):
    # Stationarity of z f(z) gives z^2 = sigma^2 + mu^2.
    assert find_z0(make_cauchy(mu, sigma)) == pytest.approx(math.hypot(mu, sigma), abs=1e-9)


@pytest.mark.parametrize("builder", [make_gaussian, make_cauchy])
def test_z0_standard_and_residual(builder):
    m = builder()
    z0 = find_z0(m)
    assert abs(z0 - 1.0) < 1e-8
    assert stationarity_residual(m, z0) < 1e-6


def test_z0_errors():
    with pytest.raises(NoInteriorMaximumError):
        find_z0(make_gaussian(5000.0, 1.0))
    mix = lambda x: np.log(0.5 * stats.norm.pdf(x, 1, 0.1) + 0.5 * stats.norm.pdf(x, 4, 0.1))  # noqa: E731
    with pytest.raises(AmbiguousMaximumError) as info:
        find_z0(from_log_pdf(mix, 1.0))
    assert len(info.value.candidates) == 2


@pytest.mark.parametrize("builder", [make_gaussian, make_cauchy])
@pytest.mark.parametrize("z", [0.5, 1.0, 2.0])
def test_tilt_normalized_at_zero(builder, z):
    assert abs(tilt_logmgf(builder(), z, 0.0)) <= 1e-9


@pytest.mark.parametrize("z,t", [(1.0, 0.5), (0.7, 3.0), (2.0, 40.0)])
def test_cauchy_moments_against_scipy(z, t):
    f = make_cauchy()
    ours = tilt_moments(f, z, t)
    for p, val in zip((0, 2, 4), ours):
        ref = sp_integrate.quad(
            lambda u: u**p * math.exp(-t * u * u) / (math.pi * (1 + (z + u * z) ** 2)),
            -np.inf, np.inf, epsabs=0, epsrel=1e-12, limit=400,
        )[0]
        assert val == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("builder", [make_gaussian, make_cauchy])
@pytest.mark.parametrize("p", [0, 2, 4])
def test_moment_asymptotic_at_large_t(builder, p):
    numeric, asym = moment_asymptotic_check(builder(), 1.0, p, 1e4)
    assert abs(numeric / asym - 1) <= 0.02


def test_moment_asymptotic_improves_with_t():
    f = make_cauchy()
    gaps = [abs(np.divide(*moment_asymptotic_check(f, 1.0, 2, t)) - 1) for t in (1e1, 1e2, 1e3, 1e4)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


@pytest.mark.parametrize("builder", [make_gaussian, make_cauchy])
def test_derivative_signs_and_monotone(builder):
    ts = np.geomspace(1e-2, 1e3, 12)
    d = [tilt_derivatives(builder(), 1.0, t) for t in ts]
    h1 = np.array([x.h1 for x in d])
    assert np.all(h1 < 0) and np.all(np.diff(h1) > 0)
    assert all(x.h2 > 0 for x in d)


@pytest.mark.parametrize("builder", [make_gaussian, make_cauchy])
def test_h_prime_matches_difference_of_h(builder):
    m = builder()
    for t in (0.2, 2.0, 50.0):
        step = 1e-4 * t
        fd = (tilt_logmgf(m, 1.0, t + step) - tilt_logmgf(m, 1.0, t - step)) / (2 * step)
        assert tilt_derivatives(m, 1.0, t).h1 == pytest.approx(fd, rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(sigma2=st.floats(1e-4, 0.5))
def test_saddlepoint_solves_equation(sigma2):
    for m in (make_gaussian(), make_cauchy()):
        sol = solve_tn(m, 1.0, sigma2)
        assert sol.t_n > 0
        assert sol.h1 == pytest.approx(-sigma2, rel=1e-9)


def test_saddlepoint_not_rare():
    # |h'(0)| = 2 for the standard Gaussian at z = 1.
    with pytest.raises(SaddlepointAtZeroError):
        solve_tn(make_gaussian(), 1.0, 2.5)


@pytest.mark.parametrize("builder", [make_gaussian, make_cauchy])
def test_saddlepoint_leading_order(builder):
    m = builder()
    lead = math.log(math.sqrt(2 * math.pi) * float(m.pdf(1.0)))
    prev_t = prev_h = math.inf
    for s2 in (1e-2, 1e-3, 1e-4):
        sol = solve_tn(m, 1.0, s2)
        gap_t = abs(2 * s2 * sol.t_n - 1)
        gap_h = abs(sol.h_val - 0.5 * math.log(s2) - lead)
        assert gap_t < prev_t and gap_h < prev_h
        prev_t, prev_h = gap_t, gap_h
    assert prev_t < 0.05 and prev_h < 0.05


@settings(max_examples=100)
@given(a=st.floats(1e-3, 1e3))
def test_cutoff_identity(a):
    r = cutoff_r(a)
    assert 0 < r < 1
    assert r * (2 - r) == pytest.approx(sigma_from_cutoff(a), rel=1e-12)


def test_cutoff_validation():
    for fn in (cutoff_r, sigma_from_cutoff):
        with pytest.raises(ValueError):
            fn(0.0)


def test_regime_score():
    assert regime_score(100, 0.5) == pytest.approx(100 * 0.25 / math.log(100))
    assert regime_score(1, 0.5) == math.inf


@pytest.mark.parametrize(
    "rule",
    [CutoffRule(), CutoffRule("power", 0.2), CutoffRule("explicit", table={10: 1.0, 20: 1.25})],
)
def test_cutoff_rule_round_trip(rule):
    assert CutoffRule.parse(rule.spec()) == rule


def test_cutoff_rule_values_and_errors():
    assert CutoffRule().a(256) == pytest.approx(2.0)
    assert CutoffRule.parse("explicit:5=0.7").a(5) == 0.7
    with pytest.raises(KeyError):
        CutoffRule.parse("explicit:5=0.7").a(6)
    for bad in ("power:0.3", "power:0", "power:x", "explicit:", "explicit:5", "linear:1"):
        with pytest.raises(ValueError):
            CutoffRule.parse(bad)


def test_ratio_limit():
    assert ratio_limit(make_gaussian(), 1.0) == pytest.approx(math.e, rel=1e-9)
    assert ratio_limit(make_cauchy(0, 2), 1.0) == pytest.approx(math.exp(0.5), rel=1e-9)
    with pytest.raises(ValueError):
        ratio_limit(make_gaussian(), 0.0)
