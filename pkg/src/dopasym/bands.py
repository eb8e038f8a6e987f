"""Semi-analytic representation of the solved density.

The grid density is only first-order accurate pointwise and knows
nothing about the square-root edge behavior, so every downstream
integral (masses, phases, log potentials, g-function) goes through this
model instead: on each band half the analytic square of the density
(or of 1-rho at saturated edges) is divided by its vanishing linear
edge factor and the smooth remainder is fit by a Chebyshev series.
Saturated gaps are rho = 1 exactly and are always integrated in closed
form, never by quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equilibrium import SolvedEquilibrium
from .errors import DomainError, UnresolvedStructureError
from .quadrature import quad_gl, quad_sqrt_weight

_EDGE_MATCH = 1e-11


@dataclass(frozen=True, eq=False)
class BandPiece:
    """Half of a band, carrying the one band edge inside it.

    On the piece, sqrt(|x - e| * S(x))/pi equals rho (void-type edge)
    or 1 - rho (saturated-type edge), with S smooth and positive.
    """

    x0: float
    x1: float
    edge: float              # the band edge contained in this piece
    edge_type: str           # 'void' | 'saturated'
    smooth: np.polynomial.Polynomial

    def sqrt_part(self, x):
        s = np.clip(self.smooth(x), 0.0, None)
        return np.sqrt(np.abs(x - self.edge) * s) / np.pi

    def rho(self, x):
        base = self.sqrt_part(x)
        return base if self.edge_type == "void" else 1.0 - base

    def integrate_sqrt_part(self, f, a, b, n=160):
        """Integral of f * sqrt_part over [a, b] inside the piece.

        The sqrt(|x-e|) factor is absorbed by a Jacobi weight when a
        segment endpoint coincides with the edge; interior segments are
        analytic and use plain Gauss-Legendre.
        """
        wa = 0.5 if abs(a - self.edge) < _EDGE_MATCH else 0.0
        wb = 0.5 if abs(b - self.edge) < _EDGE_MATCH else 0.0
        if wa == 0.0 and wb == 0.0:
            return quad_gl(lambda x: f(x) * self.sqrt_part(x), a, b, n)

        def smooth_f(x):
            return f(x) * np.sqrt(np.clip(self.smooth(x), 0.0, None)) / np.pi

        return quad_sqrt_weight(smooth_f, a, b, wa, wb, n)

    def integrate_rho(self, f, a, b, n=160):
        part = self.integrate_sqrt_part(f, a, b, n)
        if self.edge_type == "void":
            return part
        return quad_gl(f, a, b, n) - part

    def integrate_one_minus_rho(self, f, a, b, n=160):
        part = self.integrate_sqrt_part(f, a, b, n)
        if self.edge_type == "void":
            return quad_gl(f, a, b, n) - part
        return part


@dataclass(frozen=True, eq=False)
class BandModel:
    """One band with its two half-piece fits."""

    alpha: float
    beta: float
    left_type: str
    right_type: str
    left: BandPiece
    right: BandPiece
    fit_deviation: float     # max |model - grid density| over fit cells

    @property
    def mid(self) -> float:
        return self.left.x1

    def rho(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x < self.mid, self.left.rho(x), self.right.rho(x))
        return np.clip(out, 0.0, 1.0)

    def _segments(self, a, b):
        if not (self.alpha - 1e-9 <= a <= b <= self.beta + 1e-9):
            raise DomainError(f"[{a}, {b}] not inside band [{self.alpha}, {self.beta}]")
        a = min(max(a, self.alpha), self.beta)
        b = min(max(b, self.alpha), self.beta)
        segs = []
        if a < self.mid and b > self.mid:
            segs.append((self.left, a, self.mid))
            segs.append((self.right, self.mid, b))
        elif b <= self.mid:
            segs.append((self.left, a, b))
        else:
            segs.append((self.right, a, b))
        return [(p, u, v) for (p, u, v) in segs if v - u > 0.0]

    def integrate_rho(self, f, a=None, b=None, n=160):
        a = self.alpha if a is None else a
        b = self.beta if b is None else b
        return sum(p.integrate_rho(f, u, v, n) for p, u, v in self._segments(a, b))

    def integrate_one_minus_rho(self, f, a=None, b=None, n=160):
        a = self.alpha if a is None else a
        b = self.beta if b is None else b
        return sum(p.integrate_one_minus_rho(f, u, v, n)
                   for p, u, v in self._segments(a, b))

    def mass(self, a=None, b=None, n=160):
        return self.integrate_rho(lambda x: np.ones_like(x), a, b, n)


def _fit_cheb_knee(xs, ys, domain, max_degree):
    """Chebyshev LSQ with the degree chosen at the residual knee.

    Raising the degree past the grid-noise floor puts noise into the
    high coefficients, which ruins any off-interval evaluation; stop
    once the rms residual no longer improves materially.
    """
    best = None
    best_rms = np.inf
    for deg in range(4, max_degree + 1, 2):
        if deg > len(xs) - 2:
            break
        cheb = np.polynomial.Chebyshev.fit(xs, ys, deg, domain=domain)
        rms = float(np.sqrt(np.mean((cheb(xs) - ys) ** 2)))
        if rms > 0.7 * best_rms:
            break
        best, best_rms = cheb, rms
    return best


def _fit_band(measure, alpha, beta, left_type, right_type,
              skip_width, max_degree=30) -> BandModel:
    grid, rho = measure.grid, measure.rho
    mid = 0.5 * (alpha + beta)
    model_pieces = []
    for (x0, x1, e, etype) in ((alpha, mid, alpha, left_type),
                               (mid, beta, beta, right_type)):
        inside = (grid > alpha + skip_width) & (grid < beta - skip_width) \
            & (grid >= x0 - 2 * skip_width) & (grid <= x1 + 2 * skip_width)
        xs = grid[inside]
        if len(xs) < 6:
            raise UnresolvedStructureError(
                f"band [{alpha:.4f}, {beta:.4f}] has too few cells to model")
        ys = rho[inside] if etype == "void" else 1.0 - rho[inside]
        s = (np.pi * ys) ** 2 / np.abs(xs - e)
        cheb = _fit_cheb_knee(xs, s, [x0, x1], int(min(max_degree, max(4, len(xs) // 5))))
        model_pieces.append(BandPiece(x0, x1, e, etype, cheb))
    left, right = model_pieces
    band = BandModel(alpha, beta, left_type, right_type, left, right, 0.0)
    check = (grid > alpha + skip_width) & (grid < beta - skip_width)
    dev = float(np.max(np.abs(band.rho(grid[check]) - rho[check]))) if np.any(check) else 0.0
    return BandModel(alpha, beta, left_type, right_type, left, right, dev)


@dataclass(frozen=True, eq=False)
class DensityModel:
    """Whole-line density: band models, exact saturated gaps, voids."""

    bands: tuple[BandModel, ...]
    gap_types: tuple[str, ...]
    alpha: np.ndarray
    beta: np.ndarray

    @classmethod
    def from_solution(cls, solution: SolvedEquilibrium, skip_cells: int = 3):
        edges = solution.edges
        meas = solution.measure
        skip_width = skip_cells * meas.delta
        bands = []
        for j in range(edges.q):
            bands.append(_fit_band(
                meas, float(edges.alpha[j]), float(edges.beta[j]),
                edges.edge_type(j, "left"), edges.edge_type(j, "right"),
                skip_width))
        return cls(tuple(bands), edges.gap_types, edges.alpha.copy(), edges.beta.copy())

    @property
    def q(self) -> int:
        return len(self.bands)

    @property
    def genus(self) -> int:
        return self.q - 1

    @property
    def support(self) -> tuple[float, float]:
        return float(self.alpha[0]), float(self.beta[-1])

    def saturated_gaps(self):
        return [(float(self.beta[j]), float(self.alpha[j + 1]), j + 1)
                for j in range(self.q - 1) if self.gap_types[j] == "saturated"]

    def locate(self, x: float):
        """('band'|'void'|'saturated', index); voids are indexed by gap j=0..q."""
        for j in range(self.q):
            if self.alpha[j] <= x <= self.beta[j]:
                return ("band", j)
        if x < self.alpha[0]:
            return ("void", 0)
        if x > self.beta[-1]:
            return ("void", self.q)
        for j in range(self.q - 1):
            if self.beta[j] < x < self.alpha[j + 1]:
                return (self.gap_types[j] if self.gap_types[j] == "saturated"
                        else "void", j + 1)
        raise DomainError(f"{x} is at a band edge")

    def rho(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for j, b in enumerate(self.bands):
            m = (x >= self.alpha[j]) & (x <= self.beta[j])
            if np.any(m):
                out[m] = b.rho(x[m])
        for (a, bb, _) in self.saturated_gaps():
            out[(x > a) & (x < bb)] = 1.0
        return out

    def total_mass(self, n=200) -> float:
        total = sum(b.mass(n=n) for b in self.bands)
        total += sum(bb - a for a, bb, _ in self.saturated_gaps())
        return float(total)

    def mass_right(self, x: float, n=160) -> float:
        """Integral of rho over (x, beta_q)."""
        if x >= self.beta[-1]:
            return 0.0
        total = 0.0
        for j, b in enumerate(self.bands):
            if x <= self.alpha[j]:
                total += b.mass(n=n)
            elif x < self.beta[j]:
                total += b.mass(x, self.beta[j], n=n)
        for (a, bb, _) in self.saturated_gaps():
            if x <= a:
                total += bb - a
            elif x < bb:
                total += bb - x
        return float(total)
