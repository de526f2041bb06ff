"""Totally symmetric multi-Dirac-index states for spin S and the total s operator.

A spin-S field carries 2S Dirac indices; its states live in the symmetric
part of the 2S-fold tensor power of the 4-dimensional Dirac space.  The
operator ``Sigma = sum_n s^(n)`` is diagonal in the chosen gamma representation
and its eigenvalue on a symmetric state equals twice the spin projection.
"""
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache, reduce
from itertools import combinations_with_replacement, permutations
from math import comb, factorial

import numpy as np
import scipy.linalg

from .clifford import ID4, build_representation
from .fieldcfg import AC, HMW

DIRAC_DIM = 4
DEFAULT_MAX_DIM = 1024
EIGEN_ROUND_TOL = 1e-10


class MemoryBudgetError(MemoryError):
    def __init__(self, required, budget):
        super().__init__(f"tensor space dimension {required} exceeds budget {budget}")
        self.required = required
        self.budget = budget


def as_spin(S):
    """Validate a spin value (int, float, Fraction or 'p/q' string) and return a Fraction."""
    s = Fraction(S) if not isinstance(S, float) else Fraction(S).limit_denominator(2)
    if s <= 0 or (2 * s).denominator != 1 or (isinstance(S, float) and float(s) != S):
        raise ValueError(f"spin must be a positive half-integer, got {S!r}")
    return s


def n_indices(S):
    return int(2 * as_spin(S))


def symmetric_dimension(S):
    """C(2S + 3, 3), the stars-and-bars count of symmetric index multisets."""
    return comb(n_indices(S) + DIRAC_DIM - 1, DIRAC_DIM - 1)


def _check_budget(n, max_dim):
    full = DIRAC_DIM ** n
    if full > max_dim:
        raise MemoryBudgetError(full, max_dim)
    return full


def _flat_index(idx):
    out = 0
    for i in idx:
        out = out * DIRAC_DIM + i
    return out


@dataclass(frozen=True)
class SymmetricSpinTensor:
    spin_S: Fraction
    coeffs: np.ndarray  # shape (4,) * 2S

    @property
    def n_indices(self):
        return int(2 * self.spin_S)

    def exchange_residual(self):
        """Max deviation under every transposition of two indices."""
        n = self.n_indices
        worst = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                axes = list(range(n))
                axes[i], axes[j] = axes[j], axes[i]
                worst = max(worst, float(np.abs(self.coeffs - self.coeffs.transpose(axes)).max()))
        return worst

    def norm(self):
        return float(np.linalg.norm(self.coeffs))

    def vector(self):
        return self.coeffs.reshape(-1)


def symmetric_basis(S, max_dim=DEFAULT_MAX_DIM):
    """Orthonormal basis of the symmetric subspace as columns of a (4^n, d) matrix.

    One basis vector per multiset of Dirac indices: the normalised sum over
    its distinct orderings.  Also returns the multisets.
    """
    n = n_indices(S)
    full = _check_budget(n, max_dim)
    multisets = list(combinations_with_replacement(range(DIRAC_DIM), n))
    basis = np.zeros((full, len(multisets)), dtype=complex)
    for col, ms in enumerate(multisets):
        orderings = set(permutations(ms))
        for o in orderings:
            basis[_flat_index(o), col] = 1.0
        basis[:, col] /= np.sqrt(len(orderings))
    return basis, multisets


def symmetrizer(S, max_dim=DEFAULT_MAX_DIM):
    """Dense projector (1/n!) sum over index permutations, built independently of the basis."""
    n = n_indices(S)
    full = _check_budget(n, max_dim)
    P = np.zeros((full, full))
    idx = np.indices((DIRAC_DIM,) * n).reshape(n, -1).T
    flat = np.array([_flat_index(i) for i in idx])
    for perm in permutations(range(n)):
        P[flat, np.array([_flat_index(i[list(perm)]) for i in idx])] += 1.0
    return P / factorial(n)


def build_symmetric_basis(S, max_dim=DEFAULT_MAX_DIM):
    """Basis plus a projector self-check.

    Returns ``(basis, report)`` where report holds the dimension, the
    idempotency / hermiticity residuals of the permutation symmetrizer and
    the distance between ``basis basis^dag`` and that symmetrizer.
    """
    B, _ = symmetric_basis(S, max_dim)
    P = symmetrizer(S, max_dim)
    report = {
        "dimension": B.shape[1],
        "expected_dimension": symmetric_dimension(S),
        "rank": int(np.linalg.matrix_rank(P)),
        "idempotency": float(np.abs(P @ P - P).max()),
        "hermiticity": float(np.abs(P - P.conj().T).max()),
        "basis_vs_symmetrizer": float(np.abs(B @ B.conj().T - P).max()),
        "orthonormality": float(np.abs(B.conj().T @ B - np.eye(B.shape[1])).max()),
    }
    return B, report


def slot_operator(op, slot, n):
    """Embed a 4x4 operator acting on Dirac index ``slot`` into the n-fold product."""
    mats = [ID4] * n
    mats[slot] = op
    return reduce(np.kron, mats)


def sum_over_slots(op, n):
    return sum(slot_operator(op, k, n) for k in range(n))


@lru_cache(maxsize=None)
def _rep():
    return build_representation()


@dataclass
class SigmaSpectrum:
    spin_S: Fraction
    matrix: np.ndarray          # Sigma restricted to the symmetric subspace
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray    # columns, in symmetric-basis coordinates
    basis: np.ndarray
    integer_eigenvalues: np.ndarray
    rounding_residual: float
    preservation_residual: float

    def distinct(self):
        return sorted(set(int(v) for v in self.integer_eigenvalues))

    def eigenspace(self, value):
        """Full-space vectors (columns) spanning the Sigma eigenspace of ``value``."""
        cols = self.eigenvectors[:, self.integer_eigenvalues == value]
        return self.basis @ cols


def total_s_operator(S, max_dim=DEFAULT_MAX_DIM):
    """Sigma on the symmetric subspace and its eigendecomposition."""
    n = n_indices(S)
    B, _ = symmetric_basis(S, max_dim)
    sigma_full = sum_over_slots(_rep().s_op, n)
    # Sigma must map the symmetric subspace into itself
    leak = sigma_full @ B - B @ (B.conj().T @ sigma_full @ B)
    M = B.conj().T @ sigma_full @ B
    w, v = np.linalg.eigh(M)
    wi = np.rint(w)
    resid = float(np.abs(w - wi).max())
    if resid > EIGEN_ROUND_TOL:
        raise ArithmeticError(f"Sigma eigenvalues not integral: residual {resid:.3e}")
    return SigmaSpectrum(as_spin(S), M, w, v, B, wi.astype(int), resid, float(np.abs(leak).max()))


def expected_spectrum(S):
    n = n_indices(S)
    return list(range(-n, n + 1, 2))


def dirac_operator(S, k, S_pot, mu_m, m):
    """``D = sum_n [gamma_mu k^mu - m + mu_m S^mu s gamma_mu]`` on the full 4^{2S} space.

    ``k`` and ``S_pot`` are contravariant 3-vectors.
    """
    rep = _rep()
    gl = rep.gammas_lower
    one = np.einsum("m,mij->ij", np.asarray(k, dtype=complex), gl) - m * ID4 \
        + mu_m * rep.s_op @ np.einsum("m,mij->ij", np.asarray(S_pot, dtype=complex), gl)
    return sum_over_slots(one, n_indices(S))


def verify_bw_commutation(S, k, S_pot, mu_m, m, max_dim=DEFAULT_MAX_DIM):
    """Commutator of Sigma with D, and how far single-slot s^(1) leaks out of the symmetric subspace.

    ``leakage`` maps each Sigma eigenvalue to the smallest norm of
    ``(1 - P) s^(1) psi`` over unit psi in that eigenspace; it vanishes
    only for the maximal projections.
    """
    n = n_indices(S)
    _check_budget(n, max_dim)
    rep = _rep()
    sigma_full = sum_over_slots(rep.s_op, n)
    D = dirac_operator(S, k, S_pot, mu_m, m)
    comm = float(np.abs(sigma_full @ D - D @ sigma_full).max())
    spec = total_s_operator(S, max_dim)
    B = spec.basis
    s1 = slot_operator(rep.s_op, 0, n)
    leakage = {}
    for val in spec.distinct():
        V = spec.eigenspace(val)
        out = s1 @ V
        out -= B @ (B.conj().T @ out)
        leakage[val] = float(np.linalg.svd(out, compute_uv=False).min())
    return {"commutator": comm, "leakage": leakage}


def maximal_state(S, sign=+1):
    """Symmetric all-plus (or all-minus) product state built from Dirac component 0 (or 2)."""
    n = n_indices(S)
    e = np.zeros(DIRAC_DIM, dtype=complex)
    e[0 if sign > 0 else 2] = 1.0
    return SymmetricSpinTensor(as_spin(S), reduce(np.multiply.outer, [e] * n))


def sigma_eigenstate(S, S_m, max_dim=DEFAULT_MAX_DIM):
    """A unit symmetric tensor with Sigma eigenvalue 2 S_m (plus signs on the first slots)."""
    s = as_spin(S)
    sm = _check_projection(s, S_m)
    n = int(2 * s)
    n_plus = int(s + sm)
    ms = (0,) * n_plus + (2,) * (n - n_plus)
    _check_budget(n, max_dim)
    coeffs = np.zeros((DIRAC_DIM,) * n, dtype=complex)
    orderings = set(permutations(ms))
    for o in orderings:
        coeffs[o] = 1.0
    coeffs /= np.sqrt(len(orderings))
    return SymmetricSpinTensor(s, coeffs)


def _check_projection(s, S_m):
    sm = Fraction(S_m) if not isinstance(S_m, float) else Fraction(S_m).limit_denominator(2)
    if isinstance(S_m, float) and float(sm) != S_m:
        raise ValueError(f"S_m must be a half-integer, got {S_m!r}")
    if abs(sm) > s or (s - sm).denominator != 1:
        raise ValueError(f"S_m={S_m} not in {{-S, -S+1, ..., S}} for S={s}")
    return sm


def bw_phase(S, S_m, mu, Lambda, kind=AC):
    """Arbitrary-spin phase: AC -> -mu (S_m/S) Lambda, HMW -> +mu (S_m/S) Lambda.

    Exact (Fraction) when ``mu`` and ``Lambda`` are exact.
    """
    s = as_spin(S)
    sm = _check_projection(s, S_m)
    if kind == AC:
        sign = -1
    elif kind == HMW:
        sign = 1
    else:
        raise ValueError(f"kind must be 'AC' or 'HMW', got {kind!r}")
    ratio = sm / s
    if all(isinstance(x, (int, Fraction)) for x in (mu, Lambda)):
        return sign * Fraction(mu) * ratio * Fraction(Lambda)
    return sign * float(mu) * float(ratio) * float(Lambda)


def transport_factor(S, mu_m, loop_integral, max_dim=DEFAULT_MAX_DIM):
    """``exp(+i (mu_m / 2S) Sigma * loop_integral)`` on the symmetric subspace (dense expm).

    On a Sigma eigenstate with eigenvalue 2 S_m the phase is
    ``mu_m (S_m / S) loop_integral``, i.e. :func:`bw_phase` with
    ``Lambda = -loop_integral``.
    """
    spec = total_s_operator(S, max_dim)
    s = float(as_spin(S))
    return scipy.linalg.expm(1j * (mu_m / (2 * s)) * loop_integral * spec.matrix), spec
