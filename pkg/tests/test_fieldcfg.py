from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.integrate import quad

from topophase import fieldcfg
from topophase.fieldcfg import AC, HMW, ELECTRIC, MAGNETIC, FieldConfig

coord = st.floats(-3, 3, allow_nan=False)
strength = st.floats(-3, 3, allow_nan=False)


def circle_flux(config, species, center, radius):
    """Outward flux of the in-plane field through a circle, by scipy quad."""
    def integrand(phi):
        p = np.array([[center[0] + radius * np.cos(phi), center[1] + radius * np.sin(phi)]])
        f = fieldcfg.in_plane_field(config, species, p)[0]
        return radius * (f[0] * np.cos(phi) + f[1] * np.sin(phi))
    return quad(integrand, 0, 2 * np.pi, limit=400, epsabs=1e-12)[0]


def test_single_charge_field_value():
    cfg = FieldConfig([((0.0, 0.0), 2.0)])
    s = fieldcfg.field_at(cfg, (1.0, 0.0))
    assert s.E == pytest.approx((2.0 / (2 * np.pi), 0.0, 0.0))
    assert s.B == (0.0, 0.0, 0.0)


@given(st.lists(st.tuples(coord, coord, strength), min_size=1, max_size=4))
def test_gauss_flux_matches_enclosed_strength(items):
    pos = [(x, y) for x, y, _ in items]
    assume(len(set(pos)) == len(pos))
    radius = 2.0
    d = [np.hypot(x, y) for x, y in pos]
    assume(all(abs(r - radius) > 0.2 for r in d))
    cfg = FieldConfig([((x, y), q) for x, y, q in items])
    enclosed = sum(q for (x, y, q), r in zip(items, d) if r < radius)
    assert circle_flux(cfg, ELECTRIC, (0, 0), radius) == pytest.approx(enclosed, abs=1e-7)


@given(st.lists(st.tuples(coord, coord, strength), min_size=1, max_size=4),
       st.tuples(coord, coord))
def test_superposition(items, probe):
    pos = [(x, y) for x, y, _ in items]
    assume(len(set(pos)) == len(pos))
    assume(min(np.hypot(probe[0] - x, probe[1] - y) for x, y in pos) > 1e-3)
    cfg = FieldConfig([((x, y), q) for x, y, q in items])
    total = fieldcfg.in_plane_field(cfg, ELECTRIC, np.array([probe]))[0]
    parts = sum(fieldcfg.in_plane_field(FieldConfig([((x, y), q)]), ELECTRIC, np.array([probe]))[0]
                for x, y, q in items)
    assert np.allclose(total, parts, rtol=1e-12, atol=1e-12)


def test_effective_potential_components():
    cfg = FieldConfig([((0.0, 0.0), 1.0)], [((5.0, 5.0), -2.0)])
    p = (0.7, -1.2)
    s = fieldcfg.field_at(cfg, p)
    assert np.allclose(fieldcfg.effective_potential(cfg, AC, p), [0.0, s.E[1], -s.E[0]])
    assert np.allclose(fieldcfg.effective_potential(cfg, HMW, p), [0.0, s.B[1], -s.B[0]])


def test_dual_swaps_species():
    cfg = FieldConfig([((0.0, 0.0), 1.0)], [((1.0, 2.0), Fraction(1, 3))])
    d = cfg.dual()
    assert d.electric_charges == cfg.magnetic_monopoles
    assert d.magnetic_monopoles == cfg.electric_charges
    assert d.dual() == cfg


def test_check_gauss_off_source():
    cfg = FieldConfig([((0.0, 0.0), 1.5), ((2.0, 1.0), -0.5)])
    r = fieldcfg.check_gauss(cfg, (1.0, -1.0))
    assert r["residual"] < 1e-6
    assert r["agreement"] < 1e-6


def test_singularity_rejected():
    cfg = FieldConfig([((0.0, 0.0), 1.0)])
    with pytest.raises(fieldcfg.SingularityError):
        fieldcfg.field_at(cfg, (0.0, 0.0))


def test_duplicate_and_bad_sources_rejected():
    with pytest.raises(ValueError):
        FieldConfig([((0.0, 0.0), 1.0), ((0.0, 0.0), 2.0)])
    with pytest.raises(ValueError):
        FieldConfig([((0.0, np.nan), 1.0)])
    with pytest.raises(ValueError):
        FieldConfig([((0.0, 0.0), np.inf)])


def test_enclosed_charge_exact():
    from topophase.holonomy import PlanarPath
    cfg = FieldConfig([((0.0, 0.0), Fraction(1, 3)), ((5.0, 0.0), 2)])
    path = PlanarPath.circle(radius=1.0, turns=2)
    assert fieldcfg.enclosed_charge(cfg, path, ELECTRIC, exact=True) == Fraction(2, 3)
    assert fieldcfg.enclosed_charge(cfg, path, MAGNETIC, exact=True) == 0


def test_species_for_rejects_unknown():
    with pytest.raises(ValueError):
        fieldcfg.species_for("XY")
