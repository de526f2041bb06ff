"""Topological AC (magnetic dipole around line charge) and HMW (electric dipole around monopole line) phases in 2+1 dimensions.

Modules
-------
clifford   gamma matrices, the s operator, dualisation of field tensors
fieldcfg   line charges / monopole lines, fields and effective potentials
holonomy   closed-path integrals, winding numbers, AC and HMW phases
multispin  symmetric multi-Dirac-index states for arbitrary spin
currents   spin-1 and spin-0 currents, dual currents and couplings
diracsim   split-operator Dirac wavepacket evolution and interferometry
cli        experiment files -> JSON/CSV results
"""
__version__ = "0.1.0"

from .fieldcfg import AC, HMW, FieldConfig, Source  # noqa: E402
from .holonomy import PlanarPath, ac_phase, hmw_phase, line_integral  # noqa: E402

__all__ = ["AC", "HMW", "FieldConfig", "Source", "PlanarPath", "ac_phase", "hmw_phase",
           "line_integral", "__version__"]
