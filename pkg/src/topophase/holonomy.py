"""Closed-path line integrals of the effective potentials and the resulting phases.

The quadrature route (adaptive Gauss-Kronrod per polyline segment) and the
topological route (winding numbers times exact source strengths) are kept
independent so each can check the other.
"""
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from .fieldcfg import AC, HMW, SINGULARITY_RADIUS, GeometryError, species_for

DEFAULT_TOL = 1e-9
MAX_INTERVALS = 2_000_000
WINDING_GUARD = 1e-6


class QuadratureError(RuntimeError):
    """Adaptive quadrature hit its subdivision budget."""

    def __init__(self, message, error_bound):
        super().__init__(message)
        self.error_bound = error_bound


class NonHomotopicError(ValueError):
    """Two paths have different winding vectors around the sources."""


@dataclass(frozen=True)
class PlanarPath:
    """Polyline; a closed path has an implicit segment from the last vertex back to the first."""

    vertices: np.ndarray
    closed: bool = True

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 2)
        if self.closed and len(v) > 1 and np.array_equal(v[0], v[-1]):
            v = v[:-1]
        if not np.isfinite(v).all():
            raise GeometryError("path vertices must be finite")
        if self.closed and len(v) < 3:
            raise GeometryError("closed path needs at least 3 distinct vertices")
        if not self.closed and len(v) < 2:
            raise GeometryError("open path needs at least 2 vertices")
        nxt = np.roll(v, -1, axis=0) if self.closed else v[1:]
        cur = v if self.closed else v[:-1]
        if (np.hypot(*(nxt - cur).T) == 0).any():
            raise GeometryError("consecutive vertices must be distinct")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def segments(self):
        """Segment start and end points, each (n_seg, 2)."""
        v = self.vertices
        if self.closed:
            return v, np.roll(v, -1, axis=0)
        return v[:-1], v[1:]

    def length(self):
        a, b = self.segments()
        return float(np.hypot(*(b - a).T).sum())

    def reversed(self):
        return PlanarPath(self.vertices[::-1].copy(), self.closed)

    def translated(self, offset):
        return PlanarPath(self.vertices + np.asarray(offset, dtype=float), self.closed)

    def distance_to(self, p):
        """Shortest distance from a point to the polyline."""
        a, b = self.segments()
        p = np.asarray(p, dtype=float)
        d = b - a
        t = np.clip(np.einsum("ij,ij->i", p - a, d) / np.einsum("ij,ij->i", d, d), 0.0, 1.0)
        return float(np.hypot(*(a + t[:, None] * d - p).T).min())

    @classmethod
    def circle(cls, center=(0.0, 0.0), radius=1.0, n=64, turns=1, ccw=True):
        """Regular n-gon inscribed in a circle, traversed ``turns`` times."""
        if turns < 1:
            raise GeometryError("turns must be >= 1")
        ang = 2 * np.pi * np.arange(n * turns) / n
        if not ccw:
            ang = -ang
        c = np.asarray(center, dtype=float)
        return cls(c + radius * np.column_stack([np.cos(ang), np.sin(ang)]))

    @classmethod
    def square(cls, center=(0.0, 0.0), side=2.0, ccw=True):
        h = side / 2
        v = np.array([[-h, -h], [h, -h], [h, h], [-h, h]])
        if not ccw:
            v = v[::-1]
        return cls(v + np.asarray(center, dtype=float))


@dataclass
class PhaseResult:
    theta: float
    line_integral: float
    enclosed: Fraction
    windings: list
    analytic_theta: float
    analytic_exact: Fraction
    discrepancy: float
    error_bound: float
    kind: str = AC
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "kind": self.kind,
            "theta": self.theta,
            "line_integral": self.line_integral,
            "enclosed": float(self.enclosed),
            "enclosed_exact": str(self.enclosed),
            "windings": [list(w) for w in self.windings],
            "analytic_theta": self.analytic_theta,
            "analytic_exact": str(self.analytic_exact),
            "discrepancy": self.discrepancy,
            "quadrature_error_bound": self.error_bound,
            **self.extra,
        }


def _angle_sum(path, p):
    a, b = path.segments()
    p = np.asarray(p, dtype=float)
    if path.distance_to(p) < SINGULARITY_RADIUS:
        raise GeometryError(f"point {tuple(p)} lies on the path")
    u = a - p
    w = b - p
    cross = u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0]
    dot = np.einsum("ij,ij->i", u, w)
    return float(np.arctan2(cross, dot).sum())


def winding_number(path, p):
    """Integer winding number of a closed path about a point (angle summation)."""
    if not path.closed:
        raise GeometryError("winding number needs a closed path")
    turns = _angle_sum(path, p) / (2 * np.pi)
    n = round(turns)
    if abs(turns - n) > WINDING_GUARD:
        raise GeometryError(f"ill-conditioned winding: angle sum / 2pi = {turns!r}")
    return int(n)


def winding_vector(path, config, species):
    return [winding_number(path, s.position) for s in config.sources(species)]


def _check_clearance(path, config, species):
    for src in config.sources(species):
        if path.distance_to(src.position) < SINGULARITY_RADIUS:
            raise GeometryError(f"source at {src.position} lies on the path")


def line_integral(config, kind, path, tol=DEFAULT_TOL, return_error=False, max_intervals=MAX_INTERVALS):
    """Adaptive quadrature of the effective potential along a polyline.

    ``kind`` selects S (``"AC"``, electric sources) or T (``"HMW"``,
    monopoles).  The error budget ``tol`` is shared among segments in
    proportion to their length.  Raises :class:`QuadratureError` when the
    subdivision budget is exhausted.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    species = species_for(kind)
    _check_clearance(path, config, species)
    pos, q = config.arrays(species)
    a, b = path.segments()
    if pos.shape[0] == 0:
        return (0.0, 0.0) if return_error else 0.0
    vals, errs, ok = kernels.segment_integrals(
        np.ascontiguousarray(a), np.ascontiguousarray(b), pos, q,
        tol / path.length(), max_intervals)
    # fixed-order reduction keeps results independent of evaluation order
    total = float(np.sum(vals))
    err = float(np.sum(errs))
    if not ok:
        raise QuadratureError(f"quadrature did not converge; achieved error bound {err:.3e}", err)
    return (total, err) if return_error else total


def _phase(config, kind, moment, s_hat, path, tol, sign):
    if s_hat not in (1, -1):
        raise ValueError("s_hat must be +1 or -1")
    if not path.closed:
        raise GeometryError("phases are defined for closed paths")
    species = species_for(kind)
    li, err = line_integral(config, kind, path, tol, return_error=True)
    windings = [(i, w) for i, w in enumerate(winding_vector(path, config, species))]
    enclosed = sum((Fraction(s.strength) * w for s, (_, w) in zip(config.sources(species), windings)),
                   Fraction(0))
    # line integral equals minus the enclosed strength
    exact = Fraction(sign) * s_hat * Fraction(moment) * (-enclosed)
    theta = sign * s_hat * float(moment) * li
    analytic = float(exact)
    return PhaseResult(
        theta=theta,
        line_integral=li,
        enclosed=enclosed,
        windings=windings,
        analytic_theta=analytic,
        analytic_exact=exact,
        discrepancy=abs(theta - analytic),
        error_bound=abs(float(moment)) * err,
        kind=kind,
    )


def ac_phase(config, mu_m, s_hat, path, tol=DEFAULT_TOL):
    """theta = s_hat mu_m (closed integral of S.dr); analytic value -s_hat mu_m Lambda_e."""
    return _phase(config, AC, mu_m, s_hat, path, tol, +1)


def hmw_phase(config, mu_e, s_hat, path, tol=DEFAULT_TOL):
    """theta = -s_hat mu_e (closed integral of T.dr); analytic value +s_hat mu_e Lambda_m."""
    return _phase(config, HMW, mu_e, s_hat, path, tol, -1)


def path_independence(config, kind, path_a, path_b, tol=DEFAULT_TOL):
    """|I(path_a) - I(path_b)| for two paths with identical winding vectors."""
    species = species_for(kind)
    wa = winding_vector(path_a, config, species)
    wb = winding_vector(path_b, config, species)
    if wa != wb:
        raise NonHomotopicError(f"winding vectors differ: {wa} vs {wb}")
    ia = line_integral(config, kind, path_a, tol)
    ib = line_integral(config, kind, path_b, tol)
    return abs(ia - ib)


def straight_line_integral(config, kind, start, points):
    """Exact integral of the potential along straight segments start -> each point.

    For a point source the integrand is ``-q dphi / 2pi`` with ``phi`` the
    polar angle about the source, so each segment contributes ``-q`` times
    the subtended signed angle over ``2 pi``.  ``points`` may have any
    leading shape ending in 2.
    """
    pos, q = config.arrays(species_for(kind))
    pts = np.asarray(points, dtype=float)
    shape = pts.shape[:-1]
    pts = pts.reshape(-1, 2)
    start = np.asarray(start, dtype=float)
    out = np.zeros(pts.shape[0])
    for (sx, sy), qk in zip(pos, q):
        ux, uy = start[0] - sx, start[1] - sy
        wx, wy = pts[:, 0] - sx, pts[:, 1] - sy
        ang = np.arctan2(ux * wy - uy * wx, ux * wx + uy * wy)
        out -= qk * ang / (2 * np.pi)
    return out.reshape(shape)
