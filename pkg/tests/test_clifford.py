import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from topophase import clifford
from topophase.clifford import ID4, build_representation

REP = build_representation()
floats = st.floats(-10, 10, allow_nan=False)


def test_anticommutators():
    assert clifford.anticommutator_residuals(REP).max() == 0.0


def test_product_identity_is_exact():
    assert np.all(clifford.verify_product_identity(REP) == 0.0)


def test_s_operator_properties():
    s = REP.s_op
    assert np.array_equal(s, np.diag([1, 1, -1, -1]).astype(complex))
    assert np.array_equal(s @ s, ID4)
    for g in REP.gammas:
        assert np.array_equal(s @ g, g @ s)
    assert np.array_equal(-REP.gamma0 @ clifford.sigma(REP, 1, 2), s)


def test_projectors():
    for sh in (1, -1):
        P = REP.s_projector(sh)
        assert np.allclose(P @ P, P)
        assert np.trace(P).real == pytest.approx(2.0)


def test_levi_civita_conventions():
    assert clifford.EPS_UPPER[0, 1, 2] == 1.0
    assert clifford.EPS_LOWER[0, 1, 2] == 1.0   # det g = +1
    assert clifford.DUAL_SQUARE_SIGN == 1.0


def test_sigma_index_range():
    with pytest.raises(IndexError):
        clifford.sigma(REP, 0, 3)


@given(floats, floats, floats)
def test_sigma_contraction(e1, e2, b3):
    F = clifford.field_tensor(e1, e2, b3)
    assert clifford.sigma_contraction_residual(REP, F) < 1e-12 * max(1.0, abs(e1) + abs(e2) + abs(b3))


@given(floats, floats, floats)
def test_dual_roundtrip(a, b, c):
    F = clifford.field_tensor(a, b, c)
    assert np.allclose(clifford.undualize(clifford.dualize(F)), F, atol=1e-12)


def test_dual_of_field_tensor_is_effective_potential():
    # (-B3, E2, -E1): static in-plane E gives S_mu = (0, E2, -E1)
    assert np.allclose(clifford.dualize(clifford.field_tensor(0.3, -0.7, 0.0)), [0.0, -0.7, -0.3])
    assert np.allclose(clifford.dualize(clifford.field_tensor(0.0, 0.0, 2.0)), [-2.0, 0.0, 0.0])


def test_dualize_rejects_symmetric_input():
    with pytest.raises(ValueError):
        clifford.dualize(np.eye(3))


def test_identity_report_keys():
    rep = clifford.identity_report()
    assert len(rep["product_identity"]) == 9
    assert all(v == 0.0 for v in rep["product_identity"].values())
    assert rep["s_from_sigma12"] == 0.0
