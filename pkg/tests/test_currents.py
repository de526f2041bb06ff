from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from topophase import clifford, currents
from topophase.fieldcfg import FieldConfig

vec = arrays(np.float64, 3, elements=st.floats(-5, 5, allow_nan=False))


def cplx(a, b):
    return a + 1j * b


@given(vec, vec, vec, vec)
def test_dual_current_identity(a, b, c, d):
    pp, pm = cplx(a, b), cplx(c, d)
    scale = max(1.0, np.abs(pp).max() ** 2, np.abs(pm).max() ** 2)
    assert currents.dual_current_identity(pp, pm) < 1e-12 * scale


@given(vec, vec, vec, vec, st.floats(0.1, 10))
def test_proca_roundtrip(a, b, c, d, m):
    pp, pm = cplx(a, b), cplx(c, d)
    back = currents.proca_decompose(currents.proca_compose(pp, pm, m))
    tol = 1e-12 * max(1.0, np.abs(pp).max(), np.abs(pm).max())
    assert np.abs(back[0] - pp).max() < tol
    assert np.abs(back[1] - pm).max() < tol


@given(vec, vec, vec, vec)
def test_current_is_real_and_antisymmetric_under_swap(a, b, c, d):
    pp, pm = cplx(a, b), cplx(c, d)
    bil = currents.current_bilinear(pp, pm)
    assert np.abs(bil.real).max() < 1e-12 * max(1.0, np.abs(bil).max())
    assert np.allclose(currents.current_spin1(pm, pp), -currents.current_spin1(pp, pm))


@given(vec, vec, vec, vec, st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_dipole_dual_form(a, b, c, d, e1, e2, b3):
    pp, pm = cplx(a, b), cplx(c, d)
    scale = max(1.0, np.abs(pp).max() ** 2 + np.abs(pm).max() ** 2) * max(1.0, abs(e1) + abs(e2) + abs(b3))
    F = clifford.field_tensor(e1, e2, b3)
    assert currents.dipole_dual_residual(pp, pm, F, 0.8, 1.3, "AC") < 1e-11 * scale
    Fd = clifford.dual_field_tensor(e1, e2, b3)
    assert currents.dipole_dual_residual(pp, pm, Fd, 0.8, 1.3, "HMW") < 1e-11 * scale


def test_proca_rejects_bad_tensor():
    with pytest.raises(ValueError):
        currents.proca_decompose(currents.ProcaSample(np.zeros(3), np.eye(3), 1.0))
    with pytest.raises(ValueError):
        currents.proca_compose(np.zeros(3), np.zeros(3), 0.0)


@given(st.integers(-6, 6), st.integers(-6, 6), st.integers(1, 5), st.integers(1, 4))
def test_quadrupole_free_iff_equal(k, t, e, m):
    mom = currents.moments_spin1(Fraction(k, 2), Fraction(t, 2), e, m)
    assert (mom.Q_e == 0) == (k == t) == mom.quadrupole_free
    assert mom.mu_m == Fraction(e) * Fraction(k + t, 4)


def test_spin1_phase():
    assert currents.spin1_phase(1, Fraction(1, 2), 2, 3) == Fraction(3, 4)
    assert currents.spin1_phase(-1, Fraction(1, 2), 2, 3) == Fraction(-3, 4)
    assert currents.spin1_phase(1, Fraction(1, 2), 2, 3, kind="HMW") == Fraction(-3, 4)
    with pytest.raises(ValueError):
        currents.spin1_phase(1, 1, 1, 1, tau=2)
    with pytest.raises(ValueError):
        currents.spin1_phase(0, 1, 1, 1)


def test_scalar_current_plane_wave():
    w = currents.PlaneWave(k=(0.7, -0.4), m=1.2, amplitude=0.5)
    h = 0.01
    t, x, y = np.meshgrid(np.arange(5) * h, np.arange(6) * h, np.arange(7) * h, indexing="ij")
    j = currents.scalar_current(w(t, x, y), h)
    amp2 = 0.25
    assert np.allclose(j[0], 2 * w.omega * amp2, rtol=1e-4)
    assert np.allclose(j[1], -2 * 0.7 * amp2, rtol=1e-4)
    assert np.allclose(j[2], 2 * 0.4 * amp2, rtol=1e-4)


def test_scalar_current_rejects_tiny_grid():
    with pytest.raises(ValueError):
        currents.scalar_current(np.ones((2, 5)), 0.1)


CFG = FieldConfig([((0.0, 0.0), 1.0)])
REGION = (1.0, 3.0, -1.0, 1.0)


def test_seagull_discrimination():
    wave = currents.PlaneWave()
    hs = [0.04, 0.02, 0.01, 0.005]
    with_s = [currents.scalar_gauge_residual(CFG, 0.5, True, wave, REGION, h) for h in hs]
    without = [currents.scalar_gauge_residual(CFG, 0.5, False, wave, REGION, h) for h in hs]
    ratios = [a / b for a, b in zip(with_s, with_s[1:])]
    assert all(3.5 <= r <= 4.5 for r in ratios)
    assert without[-1] > 10 * with_s[-1]


def test_zero_coupling_reduces_to_free_equation():
    wave = currents.PlaneWave()
    a = currents.scalar_gauge_residual(CFG, 0.0, True, wave, REGION, 0.01)
    b = currents.scalar_gauge_residual(CFG, 0.0, False, wave, REGION, 0.01)
    assert a == b
    assert a < 1e-4


def test_scalar_region_must_exclude_sources():
    with pytest.raises(ValueError):
        currents.scalar_gauge_residual(CFG, 0.5, True, currents.PlaneWave(), (-1, 1, -1, 1), 0.01)
