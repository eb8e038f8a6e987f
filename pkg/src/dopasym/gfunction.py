"""The g-function and the scalar integrals built on the density model.

Complex log potential g(z) off the cut, one-sided boundary values,
gap constants Omega_j, the phase and log-potential integrals, and the
conformal edge maps psi used by the Airy-type formulas.

psi is evaluated through the global identity expressing
(2/3) psi^(3/2) in terms of g, V, l and the adjacent gap constant
(a path-quadrature of the density in disguise: g itself is assembled
from band quadratures), with a fitted Taylor polynomial taking over in
a small disk around the edge where the identity would cancel
catastrophically.  Continuity at the seam is checked at build time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate

from .bands import DensityModel
from .equilibrium import SolvedEquilibrium
from .errors import DomainError, RegularityError

TWO_PI = 2.0 * np.pi


def _closed_log(z, a, b):
    """Integral over [a, b] of log(z - t) dt, principal branch (z off [a,b])."""
    return (z - a) * np.log(z - a) - (z - b) * np.log(z - b) - (b - a)


def _closed_log_abs(x, a, b):
    """Integral over [a, b] of log|x - t| dt; exact for any real x."""
    def term(u):
        return u * np.log(np.abs(u)) if u != 0.0 else 0.0
    return term(b - x) - term(a - x) - (b - a)


@dataclass(frozen=True, eq=False)
class EdgeMap:
    """Conformal coordinate at one band edge.

    ``orientation`` is +1 at right (beta) edges where psi'(edge) > 0 and
    -1 at left (alpha) edges; ``variant`` is the type of the adjacent
    gap and selects the density ('void') or 1-density ('saturated')
    integral in the map.

    Inside ``inner_radius`` psi comes from the local factorization
    psi(z) = -(3 pi J(z)/2)^(2/3) (e - z) (right edges; mirrored on the
    left), where J is the analytic square-root-free remainder of the
    edge integral of the band piece model; it vanishes at the edge
    exactly and needs no branch bookkeeping.  Outside, psi comes from
    the global g-function identity for (2/3) psi^(3/2).
    """

    edge: float
    kind: str                 # 'alpha' | 'beta'
    band_index: int           # 0-based band
    gap_index: int            # adjacent gap, 0..q
    variant: str              # 'void' | 'saturated'
    orientation: int
    omega_adj: float
    eps: float                # evaluation disk radius
    inner_radius: float       # J-route disk, seam to the global route
    s_local: np.polynomial.Polynomial   # low-degree local fit of the S factor
    taylor: np.ndarray        # a1..a4 of the 4-term Taylor fit (diagnostic)
    taylor_residual: float
    seam_mismatch: float

    @property
    def psi_prime(self) -> float:
        return float(self.taylor[0].real)

    def _j_factor(self, z: complex, n: int = 48) -> complex:
        """Analytic remainder J with edge_integral(z) = (dist)^(3/2) J(z)."""
        from .quadrature import quad_sqrt_weight

        e = self.edge

        def smooth(u):
            t = z + (e - z) * u if self.kind == "beta" else e + (z - e) * u
            s = self.s_local(t)
            return np.sqrt(s + 0j) / np.pi

        if self.kind == "beta":
            return quad_sqrt_weight(smooth, 0.0, 1.0, 0.0, 0.5, n)
        return quad_sqrt_weight(smooth, 0.0, 1.0, 0.5, 0.0, n)

    def local_psi(self, z) -> complex:
        """psi from the band-piece factorization; valid in the inner disk.

        psi(z) = orientation * (3 pi J(z) / 2)^(2/3) * (z - edge) with the
        principal 2/3 power of J (J stays near its positive edge value),
        so psi(edge) = 0 exactly and no branch tracking is needed.
        """
        z = complex(z)
        c = (1.5 * np.pi * self._j_factor(z)) ** (2.0 / 3.0)
        return self.orientation * c * (z - self.edge)


class GFunctionData:
    """All scalar functions of the equilibrium measure used by the theorems.

    Pure evaluation over immutable data; safe for concurrent point
    batches.  Refuses measures without a valid regularity certificate.
    """

    def __init__(self, solution: SolvedEquilibrium,
                 model: DensityModel | None = None,
                 band_nodes: int = 160):
        if not solution.certificate.valid:
            raise RegularityError(
                "equilibrium measure is not regular: "
                + "; ".join(solution.certificate.reasons))
        self.solution = solution
        self.potential = solution.measure.potential
        self.l = float(solution.measure.lagrange_l)
        self.model = model if model is not None else DensityModel.from_solution(solution)
        self.alpha = self.model.alpha
        self.beta = self.model.beta
        self.q = self.model.q
        self._n = band_nodes
        self._band_masses = np.array([b.mass(n=band_nodes) for b in self.model.bands])
        self.total_mass = float(np.sum(self._band_masses)
                                + sum(b - a for a, b, _ in self.model.saturated_gaps()))
        self.omega = self._build_omegas()
        self.voids = tuple(j for j in range(1, self.q)
                           if self.model.gap_types[j - 1] == "void")
        self.saturated = tuple(j for j in range(1, self.q)
                               if self.model.gap_types[j - 1] == "saturated")
        self.edge_maps = {}
        for jb in range(self.q):
            for kind in ("alpha", "beta"):
                self.edge_maps[(kind, jb)] = self._build_edge_map(kind, jb)

    # -- gap bookkeeping ----------------------------------------------------

    def gap_type(self, g: int) -> str:
        if g == 0 or g == self.q:
            return "void"
        return self.model.gap_types[g - 1]

    def _build_omegas(self) -> np.ndarray:
        om = np.zeros(self.q + 1)
        om[0] = TWO_PI * self.mass_right(float(self.alpha[0]))
        for g in range(1, self.q):
            om[g] = TWO_PI * self.mass_right(float(self.alpha[g]))
            if self.model.gap_types[g - 1] == "saturated":
                om[g] += TWO_PI * float(self.alpha[g])
        om[self.q] = 0.0
        return om

    def omega_jN(self, g: int, N: int) -> float:
        """Omega_{j,N}: N Omega_j on voids, pi + N Omega_j on saturated gaps."""
        if g == 0:
            return N * self.omega[0]
        if g == self.q:
            return 0.0
        if self.gap_type(g) == "saturated":
            return np.pi + N * self.omega[g]
        return N * self.omega[g]

    def omega_N_vector(self, N: int) -> np.ndarray:
        """(Omega_{1,N}, ..., Omega_{q-1,N})."""
        return np.array([self.omega_jN(g, N) for g in range(1, self.q)])

    # -- scalar integrals ---------------------------------------------------

    def mass_right(self, x: float) -> float:
        """Integral of the density over (x, beta_q)."""
        if x >= self.beta[-1]:
            return 0.0
        total = 0.0
        for j, band in enumerate(self.model.bands):
            if x <= self.alpha[j]:
                total += self._band_masses[j]
            elif x < self.beta[j]:
                total += band.mass(x, self.beta[j], n=self._n)
        for (a, b, _) in self.model.saturated_gaps():
            if x <= a:
                total += b - a
            elif x < b:
                total += b - x
        return float(total)

    def phase_phi(self, x: float) -> float:
        """phi(x) = integral of the density from x to beta_q."""
        return self.mass_right(x)

    def g_eval(self, z) -> complex:
        """g(z) = Int log(z - t) rho(t) dt on the principal branch.

        Defined off the cut (-infinity, beta_q]; saturated gaps are
        integrated in closed form.
        """
        z = complex(z)
        if z.imag == 0.0 and z.real <= self.beta[-1]:
            raise DomainError(f"g({z}) is on the cut; use g_boundary")
        total = 0.0 + 0.0j
        for band in self.model.bands:
            total += band.integrate_rho(lambda t: np.log(z - t), n=self._n)
        for (a, b, _) in self.model.saturated_gaps():
            total += _closed_log(z, a, b)
        return total

    def log_potential_L(self, x: float) -> float:
        """L(x) = Int log|x - t| rho(t) dt for real x.

        The cell containing x inside a saturated region is integrated in
        closed form; inside a band the log singularity is handled by
        adaptive quadrature split at x.
        """
        x = float(x)
        total = 0.0
        for band in self.model.bands:
            if band.alpha <= x <= band.beta:
                def f(t):
                    d = abs(x - t)
                    return float(band.rho(np.asarray(t))) * np.log(d) if d > 0 else 0.0
                for (u, v) in ((band.alpha, x), (x, band.beta)):
                    if v - u > 1e-14:
                        val, _err = scipy.integrate.quad(
                            f, u, v, limit=200, epsabs=1e-11, epsrel=1e-11)
                        total += val
            else:
                total += band.integrate_rho(
                    lambda t: np.log(np.abs(x - t)), n=self._n).real
        for (a, b, _) in self.model.saturated_gaps():
            total += _closed_log_abs(x, a, b)
        return total

    def g_boundary(self, x: float, side) -> complex:
        """One-sided limit g_+ (side='above'/+1) or g_- (side='below'/-1)."""
        s = _side_value(side)
        return self.log_potential_L(x) + 1j * s * np.pi * self.mass_right(x)

    def big_g(self, x: float) -> complex:
        """G(x) = g_+ - g_- = 2 pi i * (mass right of x)."""
        return 2j * np.pi * self.mass_right(x)

    def resolvent(self, z) -> complex:
        """Int rho(t)/(z - t) dt for z off the support."""
        z = complex(z)
        total = 0.0 + 0.0j
        for band in self.model.bands:
            total += band.integrate_rho(lambda t: 1.0 / (z - t), n=self._n)
        for (a, b, _) in self.model.saturated_gaps():
            total += np.log(z - a) - np.log(z - b)
        return total

    def effective_potential(self, x: float) -> float:
        """2 L(x) - V(x); equals l on bands, < l on voids, > l on saturated."""
        return 2.0 * self.log_potential_L(x) - float(self.potential.value(x))

    # -- psi edge maps -------------------------------------------------------

    def edge_map(self, edge: float, variant: str | None = None) -> EdgeMap:
        """Edge map by abscissa (nearest refined edge within tolerance)."""
        for (kind, jb), em in self.edge_maps.items():
            if abs(em.edge - edge) < 1e-9 * max(1.0, abs(em.edge)):
                if variant is not None and em.variant != variant:
                    raise DomainError(
                        f"edge {edge} is band-{em.variant}, not band-{variant}")
                return em
        raise DomainError(f"{edge} is not a band edge of this measure")

    def zeta(self, em: EdgeMap, z, side=None) -> complex:
        """(2/3) psi^(3/2) from the g-function identity; branch-free scalar."""
        z = complex(z)
        if z.imag != 0.0:
            s = 1.0 if z.imag > 0 else -1.0
            g = self.g_eval(z)
            half_vl = 0.5 * (self.potential.value(z) + self.l)
            if em.variant == "void":
                return -g + half_vl + 0.5j * s * em.omega_adj
            return g - half_vl + 1j * s * (np.pi * z - 0.5 * em.omega_adj)
        # real axis: assemble from masses / log potentials (no cancellation)
        x = z.real
        s = _side_value(side if side is not None else 1)
        band = self.model.bands[em.band_index]
        on_band_side = (x <= em.edge) if em.kind == "beta" else (x >= em.edge)
        if on_band_side:
            if em.kind == "beta":
                m = band.mass(x, em.edge, n=self._n)
                gap_len = em.edge - x
                sgn = -s
            else:
                m = band.mass(em.edge, x, n=self._n)
                gap_len = x - em.edge
                sgn = s
            if em.variant == "void":
                return 1j * sgn * np.pi * m
            return 1j * sgn * np.pi * (gap_len - m)
        val = 0.5 * (float(self.potential.value(x)) + self.l) - self.log_potential_L(x)
        return complex(val if em.variant == "void" else -val)

    def _psi_from_zeta(self, zeta: complex, so: int) -> complex:
        zt = 1.5 * zeta
        theta = np.angle(zt)
        if so > 0 and theta < -1e-12:
            theta += TWO_PI
        elif so < 0 and theta > 1e-12:
            theta -= TWO_PI
        return abs(zt) ** (2.0 / 3.0) * np.exp(2j * theta / 3.0)

    def psi_edge(self, edge: float, variant: str, z, side=None) -> complex:
        """Conformal map value psi at z near the edge.

        Real on the real axis near the edge, psi(edge) = 0, with
        psi' > 0 at right edges and psi' < 0 at left edges.  Rejects z
        outside the local disk.
        """
        em = self.edge_map(edge, variant)
        return self.psi_em(em, z, side)

    def psi_em(self, em: EdgeMap, z, side=None) -> complex:
        z = complex(z)
        w = z - em.edge
        if abs(w) > em.eps:
            raise DomainError(
                f"|z - edge| = {abs(w):.4f} outside the local disk eps={em.eps:.4f}")
        if abs(w) <= em.inner_radius:
            val = em.local_psi(z)
        else:
            s = side
            if s is None:
                s = 1 if z.imag >= 0 else -1
            val = self._psi_from_zeta(self.zeta(em, z, s), _side_value(s) * em.orientation)
        if z.imag == 0.0:
            return complex(val.real, 0.0)
        return complex(val)

    def _build_edge_map(self, kind: str, jb: int) -> EdgeMap:
        e = float(self.alpha[jb] if kind == "alpha" else self.beta[jb])
        gap = jb if kind == "alpha" else jb + 1
        variant = self.gap_type(gap)
        orientation = 1 if kind == "beta" else -1
        band = self.model.bands[jb]
        others = [v for v in np.concatenate((self.alpha, self.beta)) if abs(v - e) > 1e-12]
        eps = 0.9 * min(abs(v - e) for v in others)

        # low-degree local fit of S = (pi rho)^2/(x-e) (or the 1-rho variant)
        # from band-side grid cells: a cubic extrapolates stably, unlike the
        # noise-carrying high-degree piece fit
        meas = self.solution.measure
        delta = meas.delta
        width = band.beta - band.alpha
        w_loc = min(max(18.0 * delta, 0.10 * width), 0.45 * width)
        if kind == "beta":
            sel = (meas.grid >= e - w_loc) & (meas.grid <= e - 3.0 * delta)
        else:
            sel = (meas.grid >= e + 3.0 * delta) & (meas.grid <= e + w_loc)
        xs = meas.grid[sel]
        ys = meas.rho[sel] if variant == "void" else 1.0 - meas.rho[sel]
        svals = (np.pi * ys) ** 2 / np.abs(xs - e)
        deg = 3 if len(xs) >= 8 else 2
        s_local = np.polynomial.Polynomial.fit(xs, svals, deg, domain=[e - w_loc, e + w_loc])
        r_inner = min(0.6 * w_loc + 0.0 * width, 0.8 * eps)
        em = EdgeMap(e, kind, jb, gap, variant, orientation,
                     float(self.omega[gap]), eps, r_inner, s_local,
                     np.zeros(4, dtype=complex), np.inf, np.inf)

        # 4-term Taylor fit of the local route (analyticity diagnostic)
        angles = (np.arange(24) + 0.5) * (TWO_PI / 24.0)
        r_fit = 0.5 * r_inner
        resid = np.inf
        coef = np.zeros(4, dtype=complex)
        for _ in range(6):
            pts = e + r_fit * np.exp(1j * angles)
            vals = np.array([em.local_psi(p) for p in pts])
            w = pts - e
            vand = np.column_stack([w, w ** 2, w ** 3, w ** 4])
            coef, *_ = np.linalg.lstsq(vand, vals, rcond=None)
            resid = float(np.max(np.abs(vand @ coef - vals)) / np.max(np.abs(vals)))
            if resid <= 1e-6:
                break
            r_fit *= 0.6

        # seam: local factorization vs g-function identity on the inner circle
        seam_pts = e + r_inner * np.exp(1j * (angles[::6] + 0.03))
        local_vals = np.array([em.local_psi(p) for p in seam_pts])
        global_vals = np.array([self._psi_from_zeta(
            self.zeta(em, p), (1 if p.imag > 0 else -1) * orientation)
            for p in seam_pts])
        seam = float(np.max(np.abs(local_vals - global_vals))
                     / np.max(np.abs(global_vals)))
        return EdgeMap(e, kind, jb, gap, variant, orientation,
                       float(self.omega[gap]), eps, r_inner, s_local,
                       coef, resid, seam)


def _side_value(side) -> int:
    if side in (1, +1, "above", "+", "plus"):
        return 1
    if side in (-1, "below", "-", "minus"):
        return -1
    raise ValueError(f"side must be 'above'/'below' or +1/-1, got {side!r}")
