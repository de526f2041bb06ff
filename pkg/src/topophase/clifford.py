"""The 2+1 dimensional Dirac algebra in a fixed 4-component representation.

Conventions: metric ``diag(1, -1, -1)``; Levi-Civita symbol stored with
upper indices, ``eps^{012} = +1``, and lowered numerically with the metric.
Matrices are built from Pauli blocks so every entry is 0, +-1 or +-i.
"""
from dataclasses import dataclass
from itertools import permutations

import numpy as np

PAULI_1 = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_3 = np.array([[1, 0], [0, -1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)
ID4 = np.eye(4, dtype=complex)

METRIC = np.diag([1.0, -1.0, -1.0])


def _levi_civita_upper():
    eps = np.zeros((3, 3, 3))
    for perm in permutations(range(3)):
        eps[perm] = np.linalg.det(np.eye(3)[list(perm)])
    return np.rint(eps)


EPS_UPPER = _levi_civita_upper()
EPS_LOWER = np.einsum("ai,bj,ck,ijk->abc", METRIC, METRIC, METRIC, EPS_UPPER)
# eps^{mu nu rho} eps_{rho alpha beta} = C (d^mu_alpha d^nu_beta - d^mu_beta d^nu_alpha);
# C is fixed by brute-force contraction, not by hand.
_contr = np.einsum("mnr,rab->mnab", EPS_UPPER, EPS_LOWER)
DUAL_SQUARE_SIGN = float(np.rint(_contr[1, 2, 1, 2]))
del _contr


def _block(a, b):
    z = np.zeros((2, 2), dtype=complex)
    return np.block([[a, z], [z, b]])


@dataclass(frozen=True)
class CliffordRep:
    gamma0: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    s_op: np.ndarray
    metric: np.ndarray = METRIC
    eps3: np.ndarray = EPS_UPPER

    @property
    def gammas(self):
        """Contravariant ``gamma^mu`` as a (3, 4, 4) array."""
        return np.stack([self.gamma0, self.gamma1, self.gamma2])

    @property
    def gammas_lower(self):
        return np.einsum("mn,nij->mij", self.metric, self.gammas)

    @property
    def alphas(self):
        """``alpha^j = gamma^0 gamma^j`` for j = 1, 2 (Hamiltonian form)."""
        return np.stack([self.gamma0 @ self.gamma1, self.gamma0 @ self.gamma2])

    def s_projector(self, s_hat):
        """Projector onto the ``s = s_hat`` block."""
        return 0.5 * (ID4 + s_hat * self.s_op)


def build_representation():
    """Gamma matrices ``diag(s3, s3)``, ``diag(i s2, -i s2)``, ``diag(i s1, i s1)``."""
    g0 = _block(PAULI_3, PAULI_3)
    g1 = _block(1j * PAULI_2, -1j * PAULI_2)
    g2 = _block(1j * PAULI_1, 1j * PAULI_1)
    s = -1j * g0 @ g1 @ g2
    for m in (g0, g1, g2, s):
        m.setflags(write=False)
    return CliffordRep(g0, g1, g2, s)


def anticommutator_residuals(rep):
    """max |{g^mu, g^nu} - 2 g^{mu nu}| for every index pair, shape (3, 3)."""
    g = rep.gammas
    out = np.zeros((3, 3))
    for mu in range(3):
        for nu in range(3):
            d = g[mu] @ g[nu] + g[nu] @ g[mu] - 2.0 * rep.metric[mu, nu] * ID4
            out[mu, nu] = np.abs(d).max()
    return out


def verify_product_identity(rep):
    """Residuals of ``g^mu g^nu = g^{mu nu} + i s eps^{mu nu lam} g_lam``.

    Returns a (3, 3) array of max-entry deviations, one per (mu, nu).
    """
    g = rep.gammas
    gl = rep.gammas_lower
    out = np.zeros((3, 3))
    for mu in range(3):
        for nu in range(3):
            rhs = rep.metric[mu, nu] * ID4 + 1j * rep.s_op @ np.einsum("l,lij->ij", rep.eps3[mu, nu], gl)
            out[mu, nu] = np.abs(g[mu] @ g[nu] - rhs).max()
    return out


def sigma(rep, mu, nu):
    """``sigma^{mu nu} = (i/2) [gamma^mu, gamma^nu]``."""
    if not (0 <= mu <= 2 and 0 <= nu <= 2):
        raise IndexError(f"indices must lie in 0..2, got ({mu}, {nu})")
    g = rep.gammas
    return 0.5j * (g[mu] @ g[nu] - g[nu] @ g[mu])


def sigma_contraction_residual(rep, F_upper):
    """Check ``sigma^{mu nu} F_{mu nu} = -F^{mu nu} s eps_{mu nu lam} gamma^lam``.

    ``F_upper`` is a contravariant antisymmetric 3x3 tensor.
    """
    F_upper = _check_antisymmetric(F_upper)
    F_lower = rep.metric @ F_upper @ rep.metric
    lhs = sum(sigma(rep, m, n) * F_lower[m, n] for m in range(3) for n in range(3))
    rhs = -rep.s_op @ np.einsum("mn,mnl,lij->ij", F_upper, EPS_LOWER, rep.gammas)
    return float(np.abs(lhs - rhs).max())


def dualize(F_upper):
    """Covector ``V_mu = (1/2) eps_{mu a b} F^{a b}`` of an antisymmetric tensor."""
    F_upper = _check_antisymmetric(F_upper)
    return 0.5 * np.einsum("mab,ab->m", EPS_LOWER, F_upper)


def undualize(V_lower):
    """Inverse of :func:`dualize`: ``F^{a b} = C eps^{a b m} V_m``."""
    return DUAL_SQUARE_SIGN * np.einsum("abm,m->ab", EPS_UPPER, np.asarray(V_lower, dtype=float))


def field_tensor(E1=0.0, E2=0.0, B3=0.0):
    """Contravariant ``F^{mu nu}`` for in-plane E and normal B."""
    return np.array([
        [0.0, -E1, -E2],
        [E1, 0.0, -B3],
        [E2, B3, 0.0],
    ])


def dual_field_tensor(B1=0.0, B2=0.0, E3=0.0):
    """Contravariant dual tensor for in-plane B and normal E."""
    return np.array([
        [0.0, -B1, -B2],
        [B1, 0.0, E3],
        [B2, -E3, 0.0],
    ])


def _check_antisymmetric(F, atol=1e-12):
    F = np.asarray(F, dtype=float)
    if F.shape != (3, 3):
        raise ValueError(f"expected a 3x3 tensor, got shape {F.shape}")
    if np.abs(F + F.T).max() > atol:
        raise ValueError("tensor is not antisymmetric")
    return F


def identity_report(rep=None):
    """All algebra residuals as a flat dict (used by ``topophase`` identities mode)."""
    rep = rep or build_representation()
    prod = verify_product_identity(rep)
    report = {
        "product_identity": {f"{m}{n}": float(prod[m, n]) for m in range(3) for n in range(3)},
        "anticommutator_max": float(anticommutator_residuals(rep).max()),
        "s_squared": float(np.abs(rep.s_op @ rep.s_op - ID4).max()),
        "s_commutes_max": float(max(np.abs(rep.s_op @ g - g @ rep.s_op).max() for g in rep.gammas)),
        "s_from_sigma12": float(np.abs(-rep.gamma0 @ sigma(rep, 1, 2) - rep.s_op).max()),
        "s_diagonal": [float(v) for v in np.diag(rep.s_op).real],
        "dual_square_sign": DUAL_SQUARE_SIGN,
    }
    return report
