"""Split-operator evolution of 4-component 2+1D Dirac spinors with the dipole coupling.

Hamiltonian (alpha^j = gamma^0 gamma^j, beta = gamma^0):

    h = alpha^j (p_j - c s V_j) + beta m,    c = +mu_m (AC, V = S), -mu_e (HMW, V = T)

The kinetic exponential is applied exactly per Fourier mode and the
coupling exponential exactly per grid point, so every step is unitary.
Both factors commute with the s operator; a spinor block that starts empty
stays exactly empty and is skipped.
"""
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft

from . import kernels
from ._accel import get_threads
from .clifford import ID4, build_representation
from .fieldcfg import AC, HMW, potential_components, species_for
from .holonomy import PlanarPath, ac_phase, hmw_phase, straight_line_integral

PERIODIC = "periodic"
ABSORBING = "absorbing"

_REP = build_representation()
ALPHA = _REP.alphas
BETA = _REP.gamma0
S_OP = _REP.s_op
BLOCKS = {+1: (0, 1), -1: (2, 3)}

_KIN_TERMS = kernels.sparse_terms(np.stack([ID4, ALPHA[0], ALPHA[1], BETA]))
_POT_TERMS = kernels.sparse_terms(np.stack([ID4, S_OP @ ALPHA[0], S_OP @ ALPHA[1]]))


class LeakageError(RuntimeError):
    def __init__(self, message, leaked):
        super().__init__(message)
        self.leaked = leaked


@dataclass(frozen=True)
class Grid:
    """Cell-centred square-cell grid, ``psi[..., iy, ix]`` layout."""

    nx: int
    ny: int
    h: float
    center: tuple = (0.0, 0.0)

    @property
    def x(self):
        return self.center[0] + (np.arange(self.nx) - self.nx / 2) * self.h

    @property
    def y(self):
        return self.center[1] + (np.arange(self.ny) - self.ny / 2) * self.h

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="xy")

    def wavenumbers(self):
        kx = 2 * np.pi * scipy.fft.fftfreq(self.nx, d=self.h)
        ky = 2 * np.pi * scipy.fft.fftfreq(self.ny, d=self.h)
        return np.meshgrid(kx, ky, indexing="xy")

    @property
    def bounds(self):
        x, y = self.x, self.y
        return x[0], x[-1], y[0], y[-1]

    def contains(self, p, margin=0.0):
        x0, x1, y0, y1 = self.bounds
        return x0 + margin <= p[0] <= x1 - margin and y0 + margin <= p[1] <= y1 - margin


@dataclass
class SpinorState:
    grid: Grid
    psi: np.ndarray          # (4, ny, nx) complex
    t: float = 0.0
    boundary: str = PERIODIC
    absorbed: float = 0.0

    def norm(self):
        return float(np.sum(np.abs(self.psi) ** 2) * self.grid.h ** 2)

    def block_population(self, s_hat):
        return float(np.sum(np.abs(self.psi[list(BLOCKS[s_hat])]) ** 2) * self.grid.h ** 2)

    def center_of_mass(self):
        return center_of_mass(self.grid, self.psi)

    def copy(self):
        return replace(self, psi=self.psi.copy())


@dataclass(frozen=True)
class SimParams:
    m: float = 1.0
    mu_m: float = 0.0
    s_hat: int = 1
    dt: float = 0.05
    steps: int = 0
    boundary: str = PERIODIC
    guard_radius: float = 1.0
    kind: str = AC
    absorb_width: float = 0.0

    @property
    def coupling(self):
        """Signed coefficient c of ``-c s (V . alpha)`` in the Hamiltonian."""
        return self.mu_m if self.kind == AC else -self.mu_m


def center_of_mass(grid, psi):
    rho = np.sum(np.abs(psi) ** 2, axis=-3)
    X, Y = grid.mesh()
    w = rho.sum(axis=(-2, -1))
    return np.stack([(rho * X).sum(axis=(-2, -1)) / w, (rho * Y).sum(axis=(-2, -1)) / w], axis=-1)


def positive_energy_spinors(kx, ky, m, s_hat):
    """Unit positive-energy eigenvectors of alpha.k + beta m in the s = s_hat block, (4, ...)."""
    E = np.sqrt(kx ** 2 + ky ** 2 + m ** 2)
    ref = np.zeros(4, dtype=complex)
    ref[BLOCKS[s_hat][0]] = 1.0
    h0 = (ALPHA[0][..., None, None] * kx + ALPHA[1][..., None, None] * ky
          + BETA[..., None, None] * m)
    safe_E = np.where(E > 0, E, 1.0)
    u = 0.5 * (ref[:, None, None] + np.einsum("ij...,j->i...", h0, ref) / safe_E)
    u = np.where(E > 0, u, ref[:, None, None])
    return u / np.sqrt(np.sum(np.abs(u) ** 2, axis=0))


def init_wavepacket(grid, center, momentum, width, s_hat, m=1.0):
    """Gaussian positive-energy packet in one s-block, unit norm.

    ``width`` is the standard deviation of the density; the carrier phase
    is referenced to ``center``.
    """
    if s_hat not in BLOCKS:
        raise ValueError("s_hat must be +1 or -1")
    if width < 3 * grid.h:
        raise ValueError(f"width {width} unresolved on spacing {grid.h} (need >= 3h)")
    if not grid.contains(center, margin=4 * width):
        raise ValueError("packet support (4 widths) leaves the grid")
    X, Y = grid.mesh()
    dx, dy = X - center[0], Y - center[1]
    env = np.exp(-(dx ** 2 + dy ** 2) / (4 * width ** 2) + 1j * (momentum[0] * dx + momentum[1] * dy))
    KX, KY = grid.wavenumbers()
    u = positive_energy_spinors(KX, KY, m, s_hat)
    psi = scipy.fft.ifft2(u * scipy.fft.fft2(env))
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * grid.h ** 2)
    return SpinorState(grid, psi)


def mean_group_velocity(state, m):
    """<k/E> over the momentum distribution (positive-energy packets)."""
    KX, KY = state.grid.wavenumbers()
    E = np.sqrt(KX ** 2 + KY ** 2 + m ** 2)
    w = np.sum(np.abs(scipy.fft.fft2(state.psi)) ** 2, axis=0)
    return np.array([(w * KX / E).sum(), (w * KY / E).sum()]) / w.sum()


class DiracPropagator:
    """Precomputed kinetic and coupling factors for one (grid, params, config)."""

    def __init__(self, grid, params, config, workers=None):
        self.grid = grid
        self.params = params
        self.config = config
        self.workers = workers if workers is not None else get_threads()
        KX, KY = grid.wavenumbers()
        self._kx, self._ky = KX, KY
        self.E = np.sqrt(KX ** 2 + KY ** 2 + params.m ** 2)
        e_max = float(self.E.max())
        if abs(params.dt) * e_max > np.pi:
            raise ValueError(f"dt={params.dt} exceeds the temporal Nyquist bound pi/E_max={np.pi / e_max:.4g}")
        self._kin_cache = {}
        self._pot_cache = {}
        self.V = self._coupling_field()
        self.mask = self._absorber() if params.boundary == ABSORBING else None
        if params.boundary not in (PERIODIC, ABSORBING):
            raise ValueError(f"unknown boundary mode {params.boundary!r}")

    # -- setup
    def _coupling_field(self):
        p = self.params
        pos, _ = self.config.arrays(species_for(p.kind))
        X, Y = self.grid.mesh()
        inside = [s for s in pos if self.grid.contains(s)]
        if inside and p.guard_radius <= 0:
            raise ValueError("source inside the grid needs a positive guard_radius exclusion mask")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        excluded = np.zeros(pts.shape[0], dtype=bool)
        for s in pos:
            excluded |= np.hypot(pts[:, 0] - s[0], pts[:, 1] - s[1]) < max(p.guard_radius, 1e-12)
        V = np.zeros_like(pts)
        if (~excluded).any():
            V[~excluded] = potential_components(self.config, p.kind, pts[~excluded])
        self.excluded = excluded.reshape(X.shape)
        return V[:, 0].reshape(X.shape), V[:, 1].reshape(X.shape)

    def _absorber(self):
        w = self.params.absorb_width
        if w <= 0:
            raise ValueError("absorbing boundary needs absorb_width > 0")
        X, Y = self.grid.mesh()
        x0, x1, y0, y1 = self.grid.bounds
        d = np.minimum.reduce([X - x0, x1 - X, Y - y0, y1 - Y])
        ramp = np.clip(d / w, 0.0, 1.0)
        return np.sin(0.5 * np.pi * ramp) ** (1 / 8)

    def kinetic_coefs(self, dt):
        if dt not in self._kin_cache:
            E = self.E
            c = np.cos(E * dt)
            sinc = np.where(E > 0, np.sin(E * dt) / np.where(E > 0, E, 1.0), dt)
            coefs = np.stack([c + 0j, -1j * sinc * self._kx, -1j * sinc * self._ky,
                              -1j * sinc * self.params.m])
            self._kin_cache[dt] = np.ascontiguousarray(coefs)
        return self._kin_cache[dt]

    def potential_coefs(self, dt):
        if dt not in self._pot_cache:
            vx, vy = self.V
            mag = np.hypot(vx, vy)
            phase = self.params.coupling * mag * dt
            safe = np.where(mag > 0, mag, 1.0)
            s = np.sin(phase)
            coefs = np.stack([np.cos(phase) + 0j, 1j * s * vx / safe, 1j * s * vy / safe])
            self._pot_cache[dt] = np.ascontiguousarray(coefs)
        return self._pot_cache[dt]

    # -- primitive operations on batched arrays (B, 4, ny, nx)
    def _fft(self, a):
        return scipy.fft.fft2(a, axes=(-2, -1), workers=self.workers)

    def _ifft(self, a):
        return scipy.fft.ifft2(a, axes=(-2, -1), workers=self.workers)

    def _potential(self, psi, dt, coupled, terms):
        if self.params.coupling == 0 or not coupled.any():
            return psi
        if coupled.all():
            return kernels.spinor_mix(psi, self.potential_coefs(dt), *terms)
        out = psi.copy()
        out[coupled] = kernels.spinor_mix(np.ascontiguousarray(psi[coupled]), self.potential_coefs(dt), *terms)
        return out

    def evolve_array(self, psi, nsteps, dt, coupled=None):
        """Advance a batch by ``nsteps`` Strang steps, merging adjacent kinetic half-steps.

        ``psi`` is (4, ny, nx) or (B, 4, ny, nx); ``coupled`` selects which
        copies feel the coupling (default all).  Only the populated s-blocks
        are propagated.
        """
        psi = np.asarray(psi, dtype=complex)
        squeeze = psi.ndim == 3
        if squeeze:
            psi = psi[None]
        if coupled is None:
            coupled = np.ones(psi.shape[0], dtype=bool)
        coupled = np.asarray(coupled, dtype=bool)
        if nsteps <= 0:
            return psi[0].copy() if squeeze else psi.copy()
        comps = self._active_components(psi)
        kin = _restrict(_KIN_TERMS, comps)
        pot = _restrict(_POT_TERMS, comps)
        sub = np.ascontiguousarray(psi[:, comps])
        kin_half = self.kinetic_coefs(0.5 * dt)
        kin_full = self.kinetic_coefs(dt)
        if self.mask is not None:
            # absorption acts in real space every step, so no half-step merging
            for _ in range(nsteps):
                sub = self._ifft(kernels.spinor_mix(self._fft(sub), kin_half, *kin))
                sub = self._potential(sub, dt, coupled, pot)
                sub = self._ifft(kernels.spinor_mix(self._fft(sub), kin_half, *kin))
                sub *= self.mask
        else:
            pk = kernels.spinor_mix(self._fft(sub), kin_half, *kin)
            for i in range(nsteps):
                sub = self._potential(self._ifft(pk), dt, coupled, pot)
                pk = kernels.spinor_mix(self._fft(sub), kin_full if i < nsteps - 1 else kin_half, *kin)
            sub = self._ifft(pk)
        out = np.zeros_like(psi)
        out[:, comps] = sub
        return out[0] if squeeze else out

    @staticmethod
    def _active_components(psi):
        comps = []
        for blk in BLOCKS.values():
            if np.any(psi[:, list(blk)] != 0):
                comps.extend(blk)
        return sorted(comps)

    def step(self, state, dt=None):
        """One Strang step of a :class:`SpinorState` (``dt`` may be negative)."""
        dt = self.params.dt if dt is None else dt
        before = state.norm()
        psi = self.evolve_array(state.psi, 1, dt)
        out = SpinorState(state.grid, psi, state.t + dt, state.boundary, state.absorbed)
        if self.mask is not None:
            out.absorbed += before - out.norm()
        return out


def _restrict(terms, comps):
    """Keep terms acting inside ``comps`` and renumber components to the slice."""
    k, i, j, v = terms
    where = {c: n for n, c in enumerate(comps)}
    keep = np.array([a in where and b in where for a, b in zip(i, j)], dtype=bool)
    remap = np.vectorize(where.get, otypes=[np.int64])
    if not keep.any():
        return k[:0], i[:0], j[:0], v[:0]
    return k[keep], remap(i[keep]), remap(j[keep]), v[keep]


_PROPAGATORS = {}


def step(state, params, config, dt=None):
    """Single Strang step; propagators are cached per (grid, params, config)."""
    key = (state.grid, params, id(config))
    prop = _PROPAGATORS.get(key)
    if prop is None or prop.config is not config:
        prop = _PROPAGATORS[key] = DiracPropagator(state.grid, params, config)
    return prop.step(state, dt)


def dressing_phase(config, params, grid, base):
    """Gauge factor exp(i c s_hat X(r)), X the straight-line potential integral from ``base``."""
    X, Y = grid.mesh()
    chi = straight_line_integral(config, params.kind, base, np.stack([X, Y], axis=-1))
    return np.exp(1j * params.coupling * params.s_hat * chi)


def _overlap(a, b, h):
    return complex(np.sum(np.conj(a) * b) * h ** 2)


# ------------------------------------------------------------------ two-arm interferometry

@dataclass(frozen=True)
class TwoArmGeometry:
    """Two open polylines with common start and end points and equal length.

    The closed loop used for the analytic reference runs along ``lower``
    and back along ``upper``.
    """

    upper: tuple
    lower: tuple
    momentum: float = 6.0
    width: float = 2.0
    n: int = 256
    h: float = 0.3
    clearance: float = None

    @classmethod
    def symmetric(cls, start, end, offset, **kw):
        start, end = np.asarray(start, float), np.asarray(end, float)
        mid = 0.5 * (start + end)
        d = end - start
        nrm = np.array([-d[1], d[0]]) / np.hypot(*d)
        up = (tuple(start), tuple(mid + offset * nrm), tuple(end))
        lo = (tuple(start), tuple(mid - offset * nrm), tuple(end))
        return cls(up, lo, **kw)

    def arms(self):
        return [np.asarray(self.upper, float), np.asarray(self.lower, float)]

    def loop(self):
        up, lo = self.arms()
        return PlanarPath(np.vstack([lo[:-1], up[::-1][:-1]]))


@dataclass
class InterferenceResult:
    extracted: float
    analytic: object          # PhaseResult
    abs_error: float
    rel_error: float
    visibility: float
    norm_drift: float
    opposite_block: float
    steps: int
    dt: float
    series: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "extracted_phase": self.extracted,
            "analytic": self.analytic.to_dict(),
            "abs_error": self.abs_error,
            "rel_error": self.rel_error,
            "visibility": self.visibility,
            "norm_drift": self.norm_drift,
            "opposite_block_population": self.opposite_block,
            "steps": self.steps,
            "dt": self.dt,
            **self.metadata,
        }


SERIES_COLUMNS = ("t", "norm_upper", "norm_lower", "x_upper", "y_upper", "x_lower", "y_lower",
                  "relative_phase")


def _wrap(a):
    return float((a + np.pi) % (2 * np.pi) - np.pi)


def interfere(config, params, geometry, snapshot_every=0, workers=None):
    """Transport interferometry around the sources.

    Each arm carries a packet from the common start to the common end;
    direction changes at waypoints are momentum kicks referenced to the
    waypoint.  Field copies start gauge-dressed from the start point and
    evolve with the coupling; reference copies evolve without it.  The
    extracted phase is ``arg <upper|lower>_field - arg <upper|lower>_ref``.
    """
    grid = Grid(geometry.n, geometry.n, geometry.h)
    arms = geometry.arms()
    if not (np.allclose(arms[0][0], arms[1][0]) and np.allclose(arms[0][-1], arms[1][-1])):
        raise ValueError("arms must share start and end points")
    lengths = [PlanarPath(a, closed=False).length() for a in arms]
    if abs(lengths[0] - lengths[1]) > 1e-6 * max(lengths):
        raise ValueError(f"arm lengths differ: {lengths}")
    clearance = geometry.clearance
    if clearance is None:
        clearance = params.guard_radius + 3 * geometry.width
    pos, _ = config.arrays(species_for(params.kind))
    for a in arms:
        path = PlanarPath(a, closed=False)
        for s in pos:
            if path.distance_to(s) < clearance:
                raise ValueError(f"arm passes within {clearance} of the source at {tuple(s)}")

    k, m = geometry.momentum, params.m
    v = k / np.sqrt(k ** 2 + m ** 2)
    total_t = lengths[0] / v
    nsteps = int(np.ceil(total_t / params.dt))
    dt = total_t / nsteps

    # per-arm leg directions and kick schedule
    kicks = {}
    first_k = []
    for ia, a in enumerate(arms):
        seg = np.diff(a, axis=0)
        dirs = seg / np.hypot(seg[:, 0], seg[:, 1])[:, None]
        first_k.append(k * dirs[0])
        cum = np.cumsum(np.hypot(seg[:, 0], seg[:, 1]))[:-1]
        for j, s_len in enumerate(cum):
            n_at = int(round(s_len / v / dt))
            kicks.setdefault(n_at, []).append((ia, a[j + 1], k * (dirs[j + 1] - dirs[j])))
    final_k = [k * (np.diff(a, axis=0)[-1] / np.hypot(*np.diff(a, axis=0)[-1])) for a in arms]

    start = arms[0][0]
    dress = dressing_phase(config, params, grid, start)
    copies = []
    for ia in range(2):
        copies.append(init_wavepacket(grid, start, first_k[ia], geometry.width, params.s_hat, m).psi)
    # batch layout: [upper field, lower field, upper ref, lower ref]
    psi = np.stack([dress * copies[0], dress * copies[1], copies[0], copies[1]])
    coupled = np.array([True, True, False, False])
    prop = DiracPropagator(grid, replace(params, dt=dt), config, workers=workers)
    X, Y = grid.mesh()
    h = grid.h
    end = arms[0][-1]
    demod = np.exp(-1j * ((final_k[1][0] - final_k[0][0]) * (X - end[0])
                          + (final_k[1][1] - final_k[0][1]) * (Y - end[1])))
    n0 = np.sum(np.abs(psi) ** 2, axis=(1, 2, 3)) * h ** 2

    def relative_phase(p):
        of = _overlap(p[0], demod * p[1], h)
        orf = _overlap(p[2], demod * p[3], h)
        return _wrap(np.angle(of) - np.angle(orf)), of, orf

    series = []

    def snapshot(p, n):
        norms = np.sum(np.abs(p) ** 2, axis=(1, 2, 3)) * h ** 2
        com = center_of_mass(grid, p)
        series.append((n * dt, norms[0], norms[1], com[0, 0], com[0, 1], com[1, 0], com[1, 1],
                       relative_phase(p)[0]))

    events = sorted(set(kicks) | {nsteps}
                    | (set(range(0, nsteps, snapshot_every)) if snapshot_every else set()))
    done = 0
    for ev in events:
        psi = prop.evolve_array(psi, ev - done, dt, coupled)
        done = ev
        for ia, w, dk in kicks.get(ev, []):
            kick = np.exp(1j * (dk[0] * (X - w[0]) + dk[1] * (Y - w[1])))
            psi[ia] *= kick
            psi[ia + 2] *= kick
        if snapshot_every and (ev % snapshot_every == 0 or ev == nsteps):
            snapshot(psi, ev)

    extracted, of, orf = relative_phase(psi)
    n1 = np.sum(np.abs(psi) ** 2, axis=(1, 2, 3)) * h ** 2
    loop = geometry.loop()
    if params.kind == AC:
        ref = ac_phase(config, params.mu_m, params.s_hat, loop)
    else:
        ref = hmw_phase(config, params.mu_m, params.s_hat, loop)
    opp = list(BLOCKS[-params.s_hat])
    abs_err = abs(_wrap(extracted - ref.analytic_theta))
    return InterferenceResult(
        extracted=extracted,
        analytic=ref,
        abs_error=abs_err,
        rel_error=abs_err / abs(ref.analytic_theta) if ref.analytic_theta else float("nan"),
        visibility=float(abs(of) / np.sqrt(n1[0] * n1[1])),
        norm_drift=float(np.abs(n1 - n0).max()),
        opposite_block=float(np.sum(np.abs(psi[:, opp]) ** 2) * h ** 2),
        steps=nsteps,
        dt=dt,
        series=series,
        metadata={"protocol": "transport interferometry", "arm_length": lengths[0],
                  "group_velocity": v, "reference_overlap": abs(orf)},
    )


# ------------------------------------------------------------------ AC transformation check

@dataclass
class GaugeResult:
    fidelity: float
    state_error: float
    leaked_norm: float
    contained: bool
    norm_drift: float
    steps: int
    dt: float

    def to_dict(self):
        return dict(self.__dict__)


def gauge_equivalence(config, params, region, duration, grid, packet, base=None,
                      leak_tol=1e-6, workers=None):
    """Compare interacting evolution with dressed free evolution.

    ``packet`` is (center, momentum, width).  The free copy starts as
    ``exp(-i c s_hat X) psi0`` and is re-dressed at the end; returns the
    overlap modulus, the phase-optimal state error ``sqrt(2 - 2F)`` and
    the interacting norm found outside ``region``.
    """
    x0, x1, y0, y1 = region
    pos, _ = config.arrays(species_for(params.kind))
    for s in pos:
        if x0 <= s[0] <= x1 and y0 <= s[1] <= y1:
            raise ValueError("region must be free of sources")
    if base is None:
        base = (0.5 * (x0 + x1), 0.5 * (y0 + y1))
    center, momentum, width = packet
    psi0 = init_wavepacket(grid, center, momentum, width, params.s_hat, params.m).psi
    dress = dressing_phase(config, params, grid, base)
    nsteps = max(1, int(np.ceil(duration / params.dt)))
    dt = duration / nsteps
    prop = DiracPropagator(grid, replace(params, dt=dt), config, workers=workers)
    psi = np.stack([psi0, np.conj(dress) * psi0])
    out = prop.evolve_array(psi, nsteps, dt, coupled=np.array([True, False]))
    h = grid.h
    dressed = dress * out[1]
    n_int = np.sum(np.abs(out[0]) ** 2) * h ** 2
    n_drs = np.sum(np.abs(dressed) ** 2) * h ** 2
    fid = abs(_overlap(out[0], dressed, h)) / np.sqrt(n_int * n_drs)
    X, Y = grid.mesh()
    outside = ~((X >= x0) & (X <= x1) & (Y >= y0) & (Y <= y1))
    leaked = float(np.sum(np.abs(out[0][:, outside]) ** 2) * h ** 2)
    return GaugeResult(
        fidelity=float(fid),
        state_error=float(np.sqrt(max(0.0, 2 - 2 * fid))),
        leaked_norm=leaked,
        contained=leaked <= leak_tol,
        norm_drift=float(abs(n_int - 1.0)),
        steps=nsteps,
        dt=dt,
    )
