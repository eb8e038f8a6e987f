"""Discrete orthogonal polynomials on the regular infinite lattice.

Exact recurrence data by lattice orthogonalization, the constrained
equilibrium measure behind the large-N behavior, the associated
g-function / Riemann-surface / theta layer, Airy-type edge formulas,
and a harness that validates every asymptotic formula against the
exact engine with fitted convergence rates.
"""

from .potentials import Potential, PRESETS
from .lattice import LatticeSpec, build_lattice
from .orthopoly import (
    RecurrenceTable,
    stieltjes_orthogonalize,
    eval_poly,
    eval_poly_log,
    count_zeros,
    locate_zeros,
)

__all__ = [
    "Potential", "PRESETS",
    "LatticeSpec", "build_lattice",
    "RecurrenceTable", "stieltjes_orthogonalize",
    "eval_poly", "eval_poly_log", "count_zeros", "locate_zeros",
]

__version__ = "0.1.0"
