import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ditgate.scattering import (CavityParams, DitCoefficients, WorkingPoint, balanced_purcell,
                                bare_amplitudes, coefficients_at, dip_full_width,
                                ideal_coefficients, min_photon_interval, purcell_factor,
                                resonant_coefficients, scattering_amplitudes, spectrum_sweep,
                                transmission_minima, weak_dip_halfwidth)

TWO_PI = 2 * math.pi
FIG2A = CavityParams(g=0.0, gamma=TWO_PI * 80e6, eta=TWO_PI * 0.05e12, kappa=TWO_PI * 0.001e12)
FIG2B = CavityParams(g=TWO_PI * 0.06e12, gamma=TWO_PI * 80e6, eta=TWO_PI * 0.05e12,
                     kappa=TWO_PI * 0.001e12)
FIG2C = CavityParams(g=TWO_PI * 0.035e12, gamma=TWO_PI * 80e6, eta=TWO_PI * 0.5e12,
                     kappa=TWO_PI * 0.01e12)

rates = st.floats(0, 10, allow_nan=False)


def test_bare_lossless_cavity_transmits():
    t, r = scattering_amplitudes(CavityParams(g=0, gamma=1, eta=1), 0.0)
    assert t == -1 and r == 0


@settings(max_examples=200, deadline=None)
@given(g=rates, gamma=rates, eta=st.floats(0.01, 10), kappa=rates,
       wc=st.floats(-5, 5), wk=st.floats(-5, 5), w=st.floats(-20, 20))
def test_reflection_is_one_plus_transmission_and_passive(g, gamma, eta, kappa, wc, wk, w):
    p = CavityParams(g, gamma, eta, kappa, wc, wk)
    c = coefficients_at(p, w)
    assert abs(c.r - (1 + c.t)) < 1e-12
    assert abs(c.r0 - (1 + c.t0)) < 1e-12
    assert c.is_passive(1e-12)


def test_bare_amplitudes_force_zero_coupling(rng):
    for _ in range(50):
        g, gamma, kappa, w = rng.uniform(0, 3, 4)
        p = CavityParams(g=g, gamma=gamma, eta=1.0, kappa=kappa)
        assert bare_amplitudes(p, w) == scattering_amplitudes(
            CavityParams(0.0, gamma, 1.0, kappa), w)


@pytest.mark.parametrize("lam, t0, r0", [(0.1, -0.952381, 0.047619), (0.0, -1.0, 0.0),
                                         (0.02, -0.990099, 0.009901)])
def test_bare_resonant_values(lam, t0, r0):
    t, r = bare_amplitudes(CavityParams(g=0.3, gamma=1e-3, eta=1, kappa=lam), 0.0)
    assert t.real == pytest.approx(t0, abs=1e-6)
    assert r.real == pytest.approx(r0, abs=1e-6)


def test_resonant_closed_form_at_quoted_working_point():
    c = resonant_coefficients(WorkingPoint(9.875, 0.1))
    assert c.t.real == pytest.approx(-0.048077, abs=1e-6)
    assert c.r.real == pytest.approx(0.951923, abs=1e-6)
    assert c.t0.real == pytest.approx(-0.952381, abs=1e-6)
    assert c.r0.real == pytest.approx(0.047619, abs=1e-6)


@pytest.mark.parametrize("lam", [0.0, 0.1, 1.3])
def test_zero_purcell_reduces_to_bare(lam):
    c = resonant_coefficients(WorkingPoint(0.0, lam))
    assert (c.r, c.t) == pytest.approx((c.r0, c.t0))


def test_resonant_matches_general_formula(rng):
    for _ in range(200):
        fp, lam, gamma = rng.uniform(0, 50), rng.uniform(0, 2), 10 ** rng.uniform(-4, 0)
        wp = WorkingPoint(fp, lam)
        general = coefficients_at(wp.cavity_params(gamma), 0.0)
        closed = resonant_coefficients(wp)
        assert np.allclose(general.as_tuple(), closed.as_tuple(), atol=1e-12, rtol=0)


def test_lossless_resonance_identities():
    for fp in (0.5, 3.0, 40.0):
        c = resonant_coefficients(WorkingPoint(fp, 0.0))
        assert c.r - c.t == pytest.approx(1, abs=1e-15)
        assert c.r == pytest.approx(2 * fp / (2 * fp + 1), abs=1e-15)


def test_ideal_limit():
    assert ideal_coefficients().as_tuple() == (1, 0, 0, -1)
    near = resonant_coefficients(WorkingPoint(1e6, 1e-6))
    assert all(abs(a - b) < 1e-5 for a, b in zip(near.as_tuple(), ideal_coefficients().as_tuple()))


@pytest.mark.parametrize("g, eta, gamma, expected", [
    (0.0, 1.0, 1.0, 0.0),
    (0.06, 0.05, 8e-5, 900.0),
    (0.035, 0.5, 8e-5, 30.625),
])
def test_purcell_factor(g, eta, gamma, expected):
    assert purcell_factor(g, eta, gamma) == pytest.approx(expected, rel=1e-12)


def test_purcell_factor_rejects_zero_rates():
    with pytest.raises(ValueError):
        purcell_factor(1.0, 0.0, 1.0)


def test_dip_halfwidth_and_photon_interval():
    assert weak_dip_halfwidth(WorkingPoint(0, 0.3), 1.0) == 0
    assert weak_dip_halfwidth(WorkingPoint(30.625, 0.02), 1.0) == pytest.approx(30.3218, abs=1e-4)
    assert min_photon_interval(WorkingPoint(9.875, 0.1), 1.0) == pytest.approx(18.8095, abs=1e-4)
    assert min_photon_interval(WorkingPoint(0, 0.1), 1.0) == 0
    one = min_photon_interval(WorkingPoint(4, 0.3), 2.0)
    assert min_photon_interval(WorkingPoint(8, 0.3), 2.0) == pytest.approx(2 * one)


def test_balanced_purcell():
    assert balanced_purcell(0.1) == pytest.approx(9.975)
    assert balanced_purcell(2.0) == 0
    with pytest.raises(ValueError):
        balanced_purcell(0.0)
    for lam in np.linspace(0.01, 1.99, 40):
        c = resonant_coefficients(WorkingPoint(balanced_purcell(lam), lam))
        assert abs(abs(c.r) - abs(c.t0)) < 1e-12


def test_balanced_purcell_is_the_unique_root():
    lam = 0.3
    f = lambda fp: abs(resonant_coefficients(WorkingPoint(fp, lam)).r) - abs(
        resonant_coefficients(WorkingPoint(fp, lam)).t0)
    grid = np.linspace(0, 50, 2001)
    values = np.array([f(x) for x in grid])
    crossings = np.flatnonzero(np.sign(values[:-1]) != np.sign(values[1:]))
    assert len(crossings) == 1
    assert grid[crossings[0]] <= balanced_purcell(lam) <= grid[crossings[0] + 1]


@pytest.mark.parametrize("bad", [dict(g=-1), dict(gamma=-1), dict(eta=0), dict(kappa=float("nan"))])
def test_cavity_params_validation(bad):
    kw = dict(g=1.0, gamma=1.0, eta=1.0, kappa=0.0)
    kw.update(bad)
    with pytest.raises(ValueError):
        CavityParams(**kw)


def test_non_finite_frequency_rejected():
    with pytest.raises(ValueError):
        scattering_amplitudes(FIG2B, float("inf"))


def test_coefficients_reject_non_finite():
    with pytest.raises(ValueError):
        DitCoefficients(r=float("nan"), t=0, r0=0, t0=-1)


def test_spectrum_sweep_basic():
    p = FIG2A.normalized()
    s = spectrum_sweep(p, -3, 3, 2)
    assert len(list(s.rows())) == 2
    s = spectrum_sweep(p, -3, 3, 601)
    assert np.array_equal(s.abs_r, s.abs_r0)
    assert s.abs_t0[300] == pytest.approx(0.990099, abs=1e-6)
    with pytest.raises(ValueError):
        spectrum_sweep(p, 1, -1, 10)
    with pytest.raises(ValueError):
        spectrum_sweep(p, -1, 1, 1)


def test_spectrum_rows_match_pointwise_amplitudes():
    p = FIG2C.normalized()
    s = spectrum_sweep(p, -1, 1, 11)
    for x, ar, at, ar0, at0 in s.rows():
        c = coefficients_at(p, x)
        assert np.allclose([ar, at, ar0, at0], [abs(c.r), abs(c.t), abs(c.r0), abs(c.t0)],
                           atol=1e-13)


def test_strong_coupling_splits_reflection_into_two_dips():
    # the physics behind the split spectrum: |r| dips and |t| peaks at the
    # dressed-state detunings +-g/eta
    p = FIG2B.normalized()
    s = spectrum_sweep(p, -2, 2, 4001)
    step = 4 / 4000
    r = s.abs_r
    dips = s.detuning[np.where((r[1:-1] < r[:-2]) & (r[1:-1] <= r[2:]))[0] + 1]
    assert len(dips) == 2
    assert dips == pytest.approx([-1.2, 1.2], abs=step)
    t = s.abs_t
    peaks = s.detuning[np.where((t[1:-1] > t[:-2]) & (t[1:-1] >= t[2:]))[0] + 1]
    assert peaks == pytest.approx([-1.2, 1.2], abs=step)


def test_weak_coupling_single_dip_depth_and_width():
    p = FIG2C.normalized()
    wp = p.working_point()
    s = spectrum_sweep(p, -0.05, 0.05, 20001)
    c = resonant_coefficients(wp)
    assert transmission_minima(s) == pytest.approx([0.0], abs=1e-5)
    assert s.abs_t.min() == pytest.approx(abs(c.t), rel=1e-9)
    width = dip_full_width(s, "half-depth")
    assert width == pytest.approx(2 * weak_dip_halfwidth(wp, p.gamma), rel=0.10)


def test_dip_width_conventions():
    s = spectrum_sweep(FIG2C.normalized(), -0.05, 0.05, 2001)
    assert dip_full_width(s, "crossover") > 0
    with pytest.raises(ValueError):
        dip_full_width(s, "fwhm-ish")
