"""Truncation of the infinite lattice {k/N} to a finite node set.

The truncation radius X is the smallest value on a configured grid such
that every excluded node satisfies

    exp(-N*V(x)) * (1 + |x|)^(2*n_max) < guard,

so dropping the tail changes no inner product of polynomials up to
degree n_max at working precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TruncationError
from .potentials import Potential

DEFAULT_GUARD = 1e-300
DEFAULT_RADIUS_STEP = 0.25


@dataclass(frozen=True)
class LatticeSpec:
    """Finite symmetric section {k/N : |k/N| <= X} of the mesh-1/N lattice."""

    potential: Potential
    N: int
    n_max: int
    radius: float
    guard: float

    @property
    def nodes(self) -> np.ndarray:
        kmax = int(np.floor(self.radius * self.N + 1e-9))
        return np.arange(-kmax, kmax + 1, dtype=float) / self.N

    def tail_bound(self, x) -> np.ndarray:
        """Guard quantity exp(-N V) (1+|x|)^(2 n_max), in log-safe form."""
        x = np.asarray(x, dtype=float)
        logval = -self.N * self.potential.value(x) \
            + 2.0 * self.n_max * np.log1p(np.abs(x))
        return np.exp(np.minimum(logval, 700.0))


def build_lattice(potential: Potential, N: int, n_max: int,
                  guard: float = DEFAULT_GUARD,
                  radius_step: float = DEFAULT_RADIUS_STEP,
                  max_radius: float = 512.0) -> LatticeSpec:
    """Smallest truncation radius on the config grid meeting the guard.

    Parameters
    ----------
    potential : Potential
        Confining potential (already growth-checked at construction).
    N : int
        Lattice parameter; mesh is 1/N.
    n_max : int
        Largest polynomial degree whose inner products must be preserved.
    guard : float
        Absolute tail bound; the first excluded node's weighted growth
        factor must fall below it.

    Raises
    ------
    TruncationError
        If no radius up to ``max_radius`` meets the guard.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    radii = np.arange(radius_step, max_radius + radius_step, radius_step)
    for X in radii:
        spec = LatticeSpec(potential, N, n_max, float(X), guard)
        if _tail_ok(spec):
            return spec
    raise TruncationError(
        f"no truncation radius <= {max_radius} meets guard {guard:g} "
        f"for N={N}, n_max={n_max}"
    )


def _tail_ok(spec: LatticeSpec) -> bool:
    # Check the first excluded node on each side plus a short outward probe;
    # the guard quantity must be below threshold and non-increasing outward.
    kmax = int(np.floor(spec.radius * spec.N + 1e-9))
    probe_k = np.arange(kmax + 1, kmax + 9)
    x = probe_k / spec.N
    vals = spec.tail_bound(x)
    return bool(vals[0] < spec.guard and np.all(np.diff(vals) <= 0.0))
