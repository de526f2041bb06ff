"""Planar line charges and monopole lines, their fields and effective potentials.

Unit convention: a source of strength ``q`` at ``r0`` produces

    E(p) = q (p - r0) / (2 pi |p - r0|^2),

so the outward flux through any loop around it equals ``q`` (flux-form
Gauss law).  Monopole lines give ``B`` with the same kernel.
"""
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels

#: evaluations closer than this to a source are rejected
SINGULARITY_RADIUS = 1e-12

AC = "AC"
HMW = "HMW"
ELECTRIC = "electric"
MAGNETIC = "magnetic"


class SingularityError(ValueError):
    """Field requested at (or numerically on top of) a source."""


class GeometryError(ValueError):
    """Ill-posed geometry: a source on a path, a degenerate path, ..."""


@dataclass(frozen=True)
class Source:
    position: tuple
    strength: float


def _as_sources(items):
    out = []
    for item in items or ():
        if isinstance(item, Source):
            src = item
        elif isinstance(item, dict):
            src = Source(tuple(item["position"]), item["strength"])
        else:
            pos, q = item
            src = Source(tuple(pos), q)
        pos = tuple(float(c) for c in src.position)
        if len(pos) != 2 or not all(np.isfinite(pos)):
            raise ValueError(f"source position must be a finite 2D point, got {src.position!r}")
        if not np.isfinite(float(src.strength)):
            raise ValueError(f"source strength must be finite, got {src.strength!r}")
        out.append(Source(pos, src.strength))
    positions = [s.position for s in out]
    if len(set(positions)) != len(positions):
        raise ValueError("two sources of the same species share a position")
    return tuple(out)


@dataclass(frozen=True)
class FieldConfig:
    """Static sources piercing the plane.

    ``electric_charges`` and ``magnetic_monopoles`` are tuples of
    :class:`Source`; strengths may be ints, floats or Fractions (exact
    values are kept for the analytic phase bookkeeping).
    """

    electric_charges: tuple = ()
    magnetic_monopoles: tuple = ()
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "electric_charges", _as_sources(self.electric_charges))
        object.__setattr__(self, "magnetic_monopoles", _as_sources(self.magnetic_monopoles))

    @classmethod
    def from_sources(cls, electric=(), magnetic=()):
        return cls(electric, magnetic)

    def sources(self, species):
        if species == ELECTRIC:
            return self.electric_charges
        if species == MAGNETIC:
            return self.magnetic_monopoles
        raise ValueError(f"unknown species {species!r}")

    def arrays(self, species):
        """(positions (n, 2), strengths (n,)) as float arrays."""
        key = ("arrays", species)
        if key not in self._cache:
            srcs = self.sources(species)
            pos = np.array([s.position for s in srcs], dtype=float).reshape(-1, 2)
            q = np.array([float(s.strength) for s in srcs], dtype=float)
            self._cache[key] = (pos, q)
        return self._cache[key]

    def dual(self):
        """Swap the roles of charges and monopoles (AC <-> HMW relabelling)."""
        return FieldConfig(self.magnetic_monopoles, self.electric_charges)

    def all_positions(self):
        pe, _ = self.arrays(ELECTRIC)
        pm, _ = self.arrays(MAGNETIC)
        return np.vstack([pe, pm])

    def to_dict(self):
        def enc(srcs):
            return [{"position": list(s.position), "strength": _num(s.strength)} for s in srcs]
        return {"electric": enc(self.electric_charges), "magnetic": enc(self.magnetic_monopoles)}


def _num(x):
    return float(x) if isinstance(x, Fraction) else x


@dataclass(frozen=True)
class FieldSample:
    E: tuple
    B: tuple


def species_for(kind):
    if kind == AC:
        return ELECTRIC
    if kind == HMW:
        return MAGNETIC
    raise ValueError(f"kind must be 'AC' or 'HMW', got {kind!r}")


def _check_clear(config, points, radius=SINGULARITY_RADIUS):
    pos = config.all_positions()
    if pos.size == 0:
        return
    d = np.hypot(points[:, None, 0] - pos[None, :, 0], points[:, None, 1] - pos[None, :, 1])
    if (d < radius).any():
        raise SingularityError("field evaluated at a source position")


def in_plane_field(config, species, points, check=True):
    """Vectorised in-plane field of one species at points (n, 2) -> (n, 2)."""
    points = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 2))
    if check:
        _check_clear(config, points)
    pos, q = config.arrays(species)
    return kernels.coulomb_field(points, pos, q)


def field_at(config, p):
    """E and B at one point.  Normal components (E3, B3) vanish for line sources."""
    p = np.asarray(p, dtype=float).reshape(1, 2)
    e = in_plane_field(config, ELECTRIC, p)[0]
    b = in_plane_field(config, MAGNETIC, p)[0]
    return FieldSample((float(e[0]), float(e[1]), 0.0), (float(b[0]), float(b[1]), 0.0))


def potential_components(config, kind, points, check=True):
    """Spatial components (V_1, V_2) of S (AC) or T (HMW) at points (n, 2)."""
    f = in_plane_field(config, species_for(kind), points, check=check)
    return np.column_stack([f[:, 1], -f[:, 0]])


def effective_potential(config, kind, p):
    """Covariant 3-vector ``(0, F2, -F1)`` with F = E (AC) or B (HMW)."""
    v = potential_components(config, kind, np.asarray(p, dtype=float).reshape(1, 2))[0]
    return np.array([0.0, v[0], v[1]])


def enclosed_charge(config, path, species, exact=False):
    """Winding-weighted strength enclosed by a closed path.

    With ``exact=True`` the result is a Fraction built from the exact
    strengths and integer winding numbers.
    """
    from .holonomy import winding_number

    total = Fraction(0) if exact else 0.0
    for src in config.sources(species):
        w = winding_number(path, src.position)
        if exact:
            total += Fraction(src.strength) * w
        else:
            total += float(src.strength) * w
    return total


def check_gauss(config, probe, h=1e-4, species=ELECTRIC):
    """Central-difference divergence and curl of the potential at a probe.

    Returns a dict with ``divergence`` (should vanish off-source),
    ``curl_form`` (``d_1 V_2 - d_2 V_1``, equal to minus the divergence),
    ``residual = |divergence|`` and ``agreement = |curl_form + divergence|``.
    """
    x, y = np.asarray(probe, dtype=float)
    pts = np.array([[x + h, y], [x - h, y], [x, y + h], [x, y - h]])
    _check_clear(config, pts, radius=max(SINGULARITY_RADIUS, 2 * h))
    f = in_plane_field(config, species, pts)
    div = (f[0, 0] - f[1, 0]) / (2 * h) + (f[2, 1] - f[3, 1]) / (2 * h)
    kind = AC if species == ELECTRIC else HMW
    v = potential_components(config, kind, pts)
    curl = (v[0, 1] - v[1, 1]) / (2 * h) - (v[2, 0] - v[3, 0]) / (2 * h)
    return {
        "divergence": float(div),
        "curl_form": float(curl),
        "residual": float(abs(div)),
        "agreement": float(abs(curl + div)),
    }
