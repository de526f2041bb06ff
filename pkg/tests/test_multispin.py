from fractions import Fraction
from math import comb

import numpy as np
import pytest

from topophase import multispin
from topophase.fieldcfg import FieldConfig
from topophase.holonomy import PlanarPath, ac_phase

SPINS = [Fraction(1, 2), 1, Fraction(3, 2), 2]


@pytest.mark.parametrize("S", SPINS)
def test_dimension_and_projector(S):
    B, rep = multispin.build_symmetric_basis(S)
    n = int(2 * S)
    assert rep["dimension"] == comb(n + 3, 3) == rep["expected_dimension"] == rep["rank"]
    assert rep["idempotency"] < 1e-12
    assert rep["hermiticity"] < 1e-12
    assert rep["basis_vs_symmetrizer"] < 1e-12
    assert rep["orthonormality"] < 1e-12


@pytest.mark.parametrize("S", SPINS)
def test_sigma_spectrum(S):
    sp = multispin.total_s_operator(S)
    assert sp.distinct() == list(range(-int(2 * S), int(2 * S) + 1, 2))
    assert sp.rounding_residual < 1e-10
    assert sp.preservation_residual < 1e-12


def test_sigma_multiplicities_spin1():
    # two Dirac indices, each block 2-dimensional: eigenvalue +2 has dim 3, 0 has 4, -2 has 3
    sp = multispin.total_s_operator(1)
    vals, counts = np.unique(sp.integer_eigenvalues, return_counts=True)
    assert dict(zip(vals.tolist(), counts.tolist())) == {-2: 3, 0: 4, 2: 3}


@pytest.mark.parametrize("S", SPINS)
def test_commutation_and_leakage(S):
    rng = np.random.default_rng(7)
    for _ in range(3):
        r = multispin.verify_bw_commutation(S, rng.normal(size=3), [0, *rng.normal(size=2)],
                                            rng.uniform(-2, 2), rng.uniform(0.1, 2))
        assert r["commutator"] < 1e-12
    n = int(2 * S)
    leak = r["leakage"]
    assert leak[n] < 1e-12 and leak[-n] < 1e-12
    if n > 1:
        assert all(leak[v] > 1e-3 for v in leak if abs(v) != n)


@pytest.mark.parametrize("S,Sm", [(Fraction(3, 2), Fraction(1, 2)), (2, -1), (1, 0)])
def test_sigma_eigenstate(S, Sm):
    t = multispin.sigma_eigenstate(S, Sm)
    assert t.exchange_residual() == 0.0
    assert t.norm() == pytest.approx(1.0)
    sigma = multispin.sum_over_slots(multispin._rep().s_op, int(2 * S))
    v = t.vector()
    assert np.allclose(sigma @ v, 2 * float(Sm) * v)


def test_bw_phase_spin_half_matches_dirac_phase():
    cfg = FieldConfig([((0.0, 0.0), Fraction(3, 2))])
    path = PlanarPath.square(side=2.0)
    mu = Fraction(2, 5)
    for s_hat, Sm in ((1, Fraction(1, 2)), (-1, Fraction(-1, 2))):
        assert multispin.bw_phase(Fraction(1, 2), Sm, mu, Fraction(3, 2)) == ac_phase(cfg, mu, s_hat, path).analytic_exact


def test_bw_phase_values():
    assert multispin.bw_phase(2, 1, Fraction(1, 3), 6) == Fraction(-1, 1)
    assert multispin.bw_phase(2, 1, Fraction(1, 3), 6, kind="HMW") == Fraction(1, 1)
    assert multispin.bw_phase(1, 0, 1, 5) == 0


def test_transport_factor_phase_on_eigenstate():
    S, Sm, mu, Lam = Fraction(3, 2), Fraction(-1, 2), 0.7, 2.0
    U, sp = multispin.transport_factor(S, mu, -Lam)
    vecs = sp.eigenvectors[:, sp.integer_eigenvalues == int(2 * Sm)]
    theta = float(multispin.bw_phase(S, Sm, mu, Lam))
    assert np.allclose(U @ vecs, np.exp(1j * theta) * vecs)


def test_invalid_spin_and_projection():
    for bad in (0, -1, Fraction(1, 3), 0.3, "1/4"):
        with pytest.raises(ValueError):
            multispin.as_spin(bad)
    with pytest.raises(ValueError):
        multispin.bw_phase(1, Fraction(1, 2), 1, 1)
    with pytest.raises(ValueError):
        multispin.bw_phase(1, 2, 1, 1)


def test_memory_budget():
    with pytest.raises(multispin.MemoryBudgetError) as err:
        multispin.symmetric_basis(3)
    assert err.value.required == 4 ** 6
