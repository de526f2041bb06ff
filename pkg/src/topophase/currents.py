"""Spin-1 (Proca, phi+/- form) and spin-0 currents, dual currents and couplings.

Index placement: vectors are stored covariant (lower index); ``METRIC``
raises.  The spin-1 bilinear ``(s'/2) eps (phi*^a phi^n - phi^a phi*^n)``
is purely imaginary; :func:`current_spin1` returns the real current ``j``
with ``bilinear = i j``.
"""
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .clifford import EPS_LOWER, EPS_UPPER, METRIC
from .fieldcfg import AC, HMW, potential_components, species_for
from .holonomy import straight_line_integral

S_PRIMES = (+1, -1)


@dataclass(frozen=True)
class ProcaSample:
    B: np.ndarray   # B_mu
    G: np.ndarray   # G_{mu nu}, antisymmetric
    m: float


def _raise(v):
    return METRIC @ np.asarray(v)


def proca_compose(phi_plus, phi_minus, m):
    """(phi_+, phi_-) -> ProcaSample via B = (phi+ + phi-)/sqrt(2m), G = sqrt(m/2) eps (phi+ - phi-)."""
    if m <= 0:
        raise ValueError("mass must be positive")
    phi_plus = np.asarray(phi_plus, dtype=complex)
    phi_minus = np.asarray(phi_minus, dtype=complex)
    B = (phi_plus + phi_minus) / np.sqrt(2 * m)
    G = np.sqrt(m / 2) * np.einsum("mna,a->mn", EPS_LOWER, _raise(phi_plus - phi_minus))
    return ProcaSample(B, G, m)


def _find_inversion_sign():
    # choose the eps-contraction sign for which decompose inverts compose
    rng = np.random.default_rng(12345)
    pp = rng.normal(size=3) + 1j * rng.normal(size=3)
    pm = rng.normal(size=3) + 1j * rng.normal(size=3)
    sample = proca_compose(pp, pm, 1.0)
    good = []
    for sign in (+1.0, -1.0):
        diff_up = sign * 0.5 * np.einsum("mnb,mn->b", EPS_UPPER, sample.G) / np.sqrt(0.5)
        diff = METRIC @ diff_up
        if np.allclose(diff, pp - pm, atol=1e-12):
            good.append(sign)
    if len(good) != 1:
        raise RuntimeError("could not fix the Proca inversion sign")
    return good[0]


INVERSION_SIGN = _find_inversion_sign()


def proca_decompose(sample):
    """Invert :func:`proca_compose`; returns (phi_plus, phi_minus)."""
    m = sample.m
    if m <= 0:
        raise ValueError("mass must be positive")
    G = np.asarray(sample.G, dtype=complex)
    if G.shape != (3, 3) or np.abs(G + G.T).max() > 1e-12 * max(1.0, np.abs(G).max()):
        raise ValueError("G must be an antisymmetric 3x3 tensor")
    total = np.sqrt(2 * m) * np.asarray(sample.B, dtype=complex)
    diff = METRIC @ (INVERSION_SIGN * 0.5 * np.einsum("mnb,mn->b", EPS_UPPER, G) / np.sqrt(m / 2))
    return 0.5 * (total + diff), 0.5 * (total - diff)


def current_bilinear(phi_plus, phi_minus):
    """The literal (complex, purely imaginary) sum over s' of (s'/2) eps_{mna}(phi*^a phi^n - phi^a phi*^n)."""
    out = np.zeros(3, dtype=complex)
    for sp, phi in zip(S_PRIMES, (phi_plus, phi_minus)):
        up = _raise(np.asarray(phi, dtype=complex))
        out += 0.5 * sp * (np.einsum("mna,a,n->m", EPS_LOWER, up.conj(), up)
                           - np.einsum("mna,a,n->m", EPS_LOWER, up, up.conj()))
    return out


def current_spin1(phi_plus, phi_minus):
    """Real covariant current j_mu, defined by bilinear = i j."""
    return (-1j * current_bilinear(phi_plus, phi_minus)).real


def dual_current_identity(phi_plus, phi_minus):
    """max |eps_{mna} (i j)^a + sum_s' s' (phi*_m phi_n - phi*_n phi_m)|."""
    jb_up = _raise(1j * current_spin1(phi_plus, phi_minus))
    lhs = np.einsum("mna,a->mn", EPS_LOWER, jb_up)
    rhs = np.zeros((3, 3), dtype=complex)
    for sp, phi in zip(S_PRIMES, (phi_plus, phi_minus)):
        phi = np.asarray(phi, dtype=complex)
        outer = np.outer(phi.conj(), phi)
        rhs -= sp * (outer - outer.T)
    return float(np.abs(lhs - rhs).max())


def dipole_dual_residual(phi_plus, phi_minus, F_upper, kappa, m, kind=AC):
    """Compare i(k/m) F_{mn} phi*^m phi^n (summed over s') with i g' F^{mn} eps_{mna} j^a.

    ``g' = -s' kappa / 2m`` for AC and ``+s' kappa / 2m`` for HMW (pass
    the dual tensor as ``F_upper`` there); the bilinear current enters per
    s' sector.
    """
    F_upper = np.asarray(F_upper, dtype=float)
    F_lower = METRIC @ F_upper @ METRIC
    sign = -1.0 if kind == AC else 1.0
    direct = 0.0j
    dual = 0.0j
    for sp, phi in zip(S_PRIMES, (phi_plus, phi_minus)):
        phi = np.asarray(phi, dtype=complex)
        up = _raise(phi)
        direct += 1j * (kappa / m) * np.einsum("mn,m,n->", F_lower, up.conj(), up)
        jb = current_bilinear(phi, np.zeros(3)) if sp > 0 else current_bilinear(np.zeros(3), phi)
        g_prime = sign * sp * kappa / (2 * m)
        dual += 1j * g_prime * np.einsum("mn,mna,a->", F_upper, EPS_LOWER, _raise(jb))
    if kind == HMW:
        direct = -direct
    return float(abs(direct - dual))


@dataclass(frozen=True)
class Spin1Moments:
    kappa_m: object
    tau_m: object
    e: object
    m: object
    mu_m: object
    Q_e: object
    quadrupole_free: bool

    def to_dict(self):
        conv = lambda x: float(x) if isinstance(x, Fraction) else x  # noqa: E731
        return {k: conv(getattr(self, k)) for k in
                ("kappa_m", "tau_m", "e", "m", "mu_m", "Q_e", "quadrupole_free")}


def moments_spin1(kappa_m, tau_m, e, m):
    """mu_m = e (kappa + tau)/2 and Q_e = -e (kappa - tau)/m^2.

    ``quadrupole_free`` is the exact test ``kappa_m == tau_m``; only then
    can the dipole coupling be removed by a phase transformation.
    """
    if m <= 0:
        raise ValueError("mass must be positive")
    exact = all(isinstance(x, (int, Fraction)) for x in (kappa_m, tau_m, e, m))
    if exact:
        k, t, ee, mm = (Fraction(x) for x in (kappa_m, tau_m, e, m))
    else:
        k, t, ee, mm = (float(x) for x in (kappa_m, tau_m, e, m))
    mu = ee * (k + t) / 2
    q = -ee * (k - t) / mm ** 2
    return Spin1Moments(kappa_m, tau_m, e, m, mu, q, kappa_m == tau_m)


def spin1_phase(s_prime, kappa, m, Lambda, kind=AC, tau=None):
    """AC: s' (kappa/m) Lambda.  HMW: -s' (kappa/m) Lambda.

    If ``tau`` is given it must equal ``kappa``; otherwise the quadrupole
    coupling survives and no topological phase exists.
    """
    if s_prime not in S_PRIMES:
        raise ValueError("s_prime must be +1 or -1")
    if m <= 0:
        raise ValueError("mass must be positive")
    if tau is not None and tau != kappa:
        raise ValueError("kappa != tau: quadrupole coupling present, no AC/HMW transformation exists")
    sign = {AC: 1, HMW: -1}[kind]
    if all(isinstance(x, (int, Fraction)) for x in (kappa, m, Lambda)):
        return sign * s_prime * Fraction(kappa) / Fraction(m) * Fraction(Lambda)
    return sign * s_prime * float(kappa) / float(m) * float(Lambda)


# ---------------------------------------------------------------- spin 0

@dataclass(frozen=True)
class ScalarSample:
    phi: complex
    grad_phi: np.ndarray   # covariant gradient d_mu phi
    g_AC: float = 0.0
    g_HMW: float = 0.0

    def current(self):
        return (1j * (np.conj(self.phi) * self.grad_phi - self.phi * np.conj(self.grad_phi))).real


def scalar_current(phi, spacing):
    """j_mu = i (phi* d_mu phi - phi d_mu phi*) by second-order finite differences.

    ``phi`` is sampled on a regular grid whose axes are (t, x, y) or a
    leading subset of them; ``spacing`` is a scalar or one value per axis.
    Returns an array with one leading entry per axis.
    """
    phi = np.asarray(phi, dtype=complex)
    if phi.ndim == 0 or min(phi.shape) < 3:
        raise ValueError("need at least 3 samples along every axis")
    spacing = np.broadcast_to(np.asarray(spacing, dtype=float), (phi.ndim,))
    if (spacing <= 0).any():
        raise ValueError("spacing must be positive")
    grads = np.gradient(phi, *spacing, edge_order=2)
    if phi.ndim == 1:
        grads = [grads]
    return np.stack([-2.0 * (np.conj(phi) * d).imag for d in grads])


@dataclass(frozen=True)
class PlaneWave:
    """Free scalar solution A exp(-i(w t - k.x)), w^2 = |k|^2 + m^2."""

    k: tuple = (0.7, 0.3)
    m: float = 1.0
    amplitude: complex = 1.0

    @property
    def omega(self):
        return float(np.sqrt(self.k[0] ** 2 + self.k[1] ** 2 + self.m ** 2))

    def __call__(self, t, x, y):
        return self.amplitude * np.exp(-1j * (self.omega * t - self.k[0] * x - self.k[1] * y))


def _region_probes(region, n=9):
    x0, x1, y0, y1 = region
    fx = np.linspace(x0, x1, n + 2)[1:-1]
    fy = np.linspace(y0, y1, n + 2)[1:-1]
    X, Y = np.meshgrid(fx, fy, indexing="xy")
    return np.column_stack([X.ravel(), Y.ravel()])


def _check_region(config, kind, region):
    x0, x1, y0, y1 = region
    if not (x0 < x1 and y0 < y1):
        raise ValueError("region must be (xmin, xmax, ymin, ymax) with positive extent")
    pos, _ = config.arrays(species_for(kind))
    for px, py in pos:
        if x0 <= px <= x1 and y0 <= py <= y1:
            raise ValueError(f"source at ({px}, {py}) touches the probe region")


def scalar_gauge_residual(config, g, with_seagull, test_field, region, spacing,
                          kind=AC, base=None, probes=None):
    """Equation-of-motion residual of a gauge-dressed free scalar.

    Builds ``phi = exp(+i g X(r)) phi_free`` with ``X`` the straight-line
    integral of the effective potential from ``base`` (default: region
    centre), then applies ``(D^mu D_mu + m^2 [+ g^2 V^mu V_mu]) phi`` with
    ``D = d - i g V`` using central differences of step ``spacing`` in t, x
    and y.  The bracketed term is present when the seagull term is *absent*
    from the Lagrangian.  Returns the max residual over the probe points.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    _check_region(config, kind, region)
    x0, x1, y0, y1 = region
    if base is None:
        base = (0.5 * (x0 + x1), 0.5 * (y0 + y1))
    P = _region_probes(region) if probes is None else np.asarray(probes, dtype=float).reshape(-1, 2)
    h = float(spacing)
    if (P[:, 0] - h < x0).any() or (P[:, 0] + h > x1).any() or (P[:, 1] - h < y0).any() or (P[:, 1] + h > y1).any():
        raise ValueError("finite-difference stencil leaves the region")

    offsets = np.array([[0, 0], [h, 0], [-h, 0], [0, h], [0, -h]])
    pts = P[:, None, :] + offsets[None, :, :]
    chi = straight_line_integral(config, kind, base, pts)
    V = potential_components(config, kind, pts.reshape(-1, 2)).reshape(pts.shape)
    dressed = np.exp(1j * g * chi)

    def field(t):
        return dressed * test_field(t, pts[..., 0], pts[..., 1])

    f0 = field(0.0)
    c = f0[:, 0]
    dtt = (field(h)[:, 0] - 2 * c + field(-h)[:, 0]) / h ** 2
    lap_term = np.zeros_like(c)
    for axis, (ip, im) in enumerate(((1, 2), (3, 4))):
        d1 = (f0[:, ip] - f0[:, im]) / (2 * h)
        d2 = (f0[:, ip] - 2 * c + f0[:, im]) / h ** 2
        dV = (V[:, ip, axis] - V[:, im, axis]) / (2 * h)
        Vi = V[:, 0, axis]
        # D_i D_i phi = d_i^2 phi - i g (d_i V_i) phi - 2 i g V_i d_i phi - g^2 V_i^2 phi
        lap_term += d2 - 1j * g * dV * c - 2j * g * Vi * d1 - g ** 2 * Vi ** 2 * c
    R = dtt - lap_term + test_field.m ** 2 * c
    if not with_seagull:
        VV = -(V[:, 0, 0] ** 2 + V[:, 0, 1] ** 2)   # V^mu V_mu, static V_0 = 0
        R = R + g ** 2 * VV * c
    return float(np.abs(R).max())
