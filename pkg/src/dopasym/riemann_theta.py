"""Hyperelliptic surface data, Riemann theta functions, and model factors.

Everything the multi-band asymptotic formulas need from the two-sheeted
surface of sqrt(R), R = prod (z - alpha_j)(z - beta_j): normalized
holomorphic differentials, the period matrix, the Abel map, the gap
zeros x_j with the vectors K and d, the quarter-power ratio gamma, and
the two scalar model functions combining gamma with four theta ratios.

Sheet fixing: sqrt(R) > 0 on (beta_q, infinity).  The product of
factor-wise principal square roots realizes exactly this branch with
cuts on the bands only, and likewise factor-wise principal quarter
powers realize gamma -> 1 at infinity.  The homology orientation is
pinned a posteriori by positive definiteness of -i tau; the flip, when
applied, is recorded on the surface.
"""

from __future__ import annotations

import numpy as np

from .errors import (DegenerateSurfaceError, DomainError,
                     NumericalDegeneracyError, ThetaTruncationError)
from .quadrature import quad_sqrt_weight

TWO_PI = 2.0 * np.pi


def sqrt_R_complex(edges: np.ndarray, z):
    """Sheet-1 sqrt(R) off the band cuts: product of principal roots."""
    z = np.asarray(z, dtype=complex)
    out = np.ones_like(z)
    for e in edges:
        out = out * np.sqrt(z - e)
    return out


class ThetaEvaluator:
    """Truncated Riemann theta sum with a certified Gaussian tail.

    The per-coordinate truncation radius is chosen from the smallest
    eigenvalue of -i tau so the omitted tail is below ``eps_tail`` for
    arguments with imaginary parts inside the configured box; the box
    grows on demand.
    """

    def __init__(self, tau: np.ndarray, eps_tail: float = 1e-12,
                 im_box: float = 1.0):
        self.tau = np.asarray(tau, dtype=complex)
        self.g = self.tau.shape[0] if self.tau.ndim == 2 else 0
        self.eps_tail = eps_tail
        self.im_box = im_box
        self._build(im_box)

    def _build(self, im_box):
        self.im_box = im_box
        if self.g == 0:
            self.points = np.zeros((1, 0))
            self.qexp = np.ones(1)
            self.radius = 0
            return
        Y = np.real(-1j * self.tau)
        lam_min = float(np.min(np.linalg.eigvalsh(Y)))
        if lam_min <= 0.0:
            raise DegenerateSurfaceError("-i tau is not positive definite")
        M = 1
        while True:
            bound = (np.log(2.0 * M + 3.0) * self.g
                     - np.pi * lam_min * M * M
                     + TWO_PI * self.g * im_box * M)
            if bound < np.log(self.eps_tail):
                break
            M += 1
            if M > 120:
                raise ThetaTruncationError(
                    f"tail {self.eps_tail:g} unreachable within radius 120 "
                    f"(lambda_min={lam_min:.3e}, box={im_box})")
        self.radius = M
        rng = np.arange(-M, M + 1)
        grids = np.meshgrid(*([rng] * self.g), indexing="ij")
        pts = np.stack([gr.ravel() for gr in grids], axis=-1).astype(float)
        quad = np.einsum("ij,jk,ik->i", pts, self.tau, pts)
        qexp = np.exp(1j * np.pi * quad)
        keep = np.abs(qexp) > self.eps_tail * 1e-4
        # keep at least the origin
        keep[np.all(pts == 0.0, axis=1)] = True
        self.points = pts[keep]
        self.qexp = qexp[keep]

    def _ensure_box(self, s: np.ndarray):
        if self.g and s.size:
            need = float(np.max(np.abs(s.imag)))
            if need > self.im_box:
                self._build(1.5 * need)

    def theta(self, s) -> complex | np.ndarray:
        """theta(s) for s of shape (g,) or (..., g)."""
        s = np.asarray(s, dtype=complex)
        single = s.ndim <= 1
        s2 = s.reshape(-1, self.g)
        self._ensure_box(s2)
        phase = np.exp(2j * np.pi * (s2 @ self.points.T))
        vals = phase @ self.qexp
        return complex(vals[0]) if single else vals.reshape(s.shape[:-1])

    def theta_grad(self, s) -> np.ndarray:
        """Gradient of theta at s, shape (..., g)."""
        s = np.asarray(s, dtype=complex)
        single = s.ndim <= 1
        s2 = s.reshape(-1, self.g)
        self._ensure_box(s2)
        phase = np.exp(2j * np.pi * (s2 @ self.points.T))
        grad = 2j * np.pi * (phase * self.qexp) @ self.points
        return grad[0] if single else grad.reshape(s.shape)


class SurfaceData:
    """Genus q-1 data of the surface; immutable after construction."""

    def __init__(self, alpha, beta, n_nodes: int = 256, eps_tail: float = 1e-12):
        self.alpha = np.asarray(alpha, dtype=float)
        self.beta = np.asarray(beta, dtype=float)
        if len(self.alpha) != len(self.beta):
            raise ValueError("alpha and beta lists must have equal length")
        self.q = len(self.alpha)
        self.g = self.q - 1
        order = np.argsort(self.alpha)
        self.alpha = self.alpha[order]
        self.beta = self.beta[order]
        edges = np.empty(2 * self.q)
        edges[0::2] = self.alpha
        edges[1::2] = self.beta
        if not np.all(np.diff(edges) > 0.0):
            raise DegenerateSurfaceError(f"edges not strictly ordered: {edges}")
        self.edges = edges
        self._n = n_nodes
        self.orientation_flip = False

        q, g = self.q, self.g
        if g == 0:
            self.c = np.zeros((0, 0))
            self.tau = np.zeros((0, 0), dtype=complex)
            self.a_residual = 0.0
            self.x_gap = np.array([])
            self.riemann_k = np.zeros(0, dtype=complex)
            self.d = np.zeros(0, dtype=complex)
            self.u_inf = np.zeros(0, dtype=complex)
            self.u_inf_prime = np.zeros(0)
            self.theta = ThetaEvaluator(self.tau, eps_tail)
            return

        # full segment integrals of x^(m-1)/sqrt(R), sheet-1 upper side
        self._gap_full = np.array([[self._segment_integral("gap", j, m)
                                    for m in range(1, g + 1)]
                                   for j in range(1, q)])
        self._band_full = np.array([[self._segment_integral("band", i, m)
                                     for m in range(1, g + 1)]
                                    for i in range(1, q + 1)])

        A = 2.0 * np.real(self._gap_full)                 # (g, g)
        try:
            self.c = np.linalg.inv(A).T                   # c[k-1, m-1]
        except np.linalg.LinAlgError as exc:
            raise DegenerateSurfaceError(f"A-cycle system singular: {exc}") from exc
        B = 2.0 * np.cumsum(self._band_full, axis=0)[:g]  # (g, g), bands 1..j
        tau = B @ np.linalg.inv(A)
        tau = 0.5 * (tau + tau.T)
        if float(np.max(np.abs(np.real(tau)))) > 1e-8:
            raise DegenerateSurfaceError(
                f"tau has a real part {np.max(np.abs(np.real(tau))):.2e}")
        Y = np.real(-1j * tau)
        if np.min(np.linalg.eigvalsh(Y)) < 0.0:
            tau = -tau
            self.orientation_flip = True
        self.tau = tau
        self.a_residual = float(np.max(np.abs(
            A @ self.c.T - np.eye(g))))

        self.theta = ThetaEvaluator(self.tau, eps_tail)
        self.x_gap = np.array([self._gap_zero(j) for j in range(1, q)])
        u_beta = np.array([self.abel_map(self.beta[j - 1], side=1)
                           for j in range(1, q)])
        u_x = np.array([self.abel_map(self.x_gap[j - 1], side=1)
                        for j in range(1, q)])
        self.riemann_k = -np.sum(u_beta, axis=0)
        self.d = -self.riemann_k + np.sum(u_x, axis=0)
        self.u_inf = self._u_infinity()
        self.u_inf_prime = self.c[:, g - 1].copy()

    # -- low-level segment machinery -----------------------------------------

    def _band_interval(self, i):
        return float(self.alpha[i - 1]), float(self.beta[i - 1])

    def _gap_interval(self, j):
        return float(self.beta[j - 1]), float(self.alpha[j])

    def _abs_sqrt_R(self, x):
        prod = np.ones_like(np.asarray(x, dtype=float))
        for e in self.edges:
            prod = prod * np.abs(x - e)
        return np.sqrt(prod)

    def _sheet1_gap_sign(self, j):
        return (-1.0) ** (self.q - j)

    def _band_upper_value(self, i, x):
        """sqrt(R) just above band i: i * (-1)^(q-i) * |sqrt R|."""
        return 1j * ((-1.0) ** (self.q - i)) * self._abs_sqrt_R(x)

    def _segment_integral(self, kind, idx, m, x_from=None):
        """Integral of x^(m-1)/sqrt(R) over a (partial) segment, upper side.

        ``x_from`` replaces the segment's left endpoint for partial
        integrals; the square-root vanishing of sqrt(R) at whichever
        endpoints are branch points is absorbed by the Jacobi weight.
        """
        if kind == "gap":
            a, b = self._gap_interval(idx)
            sgn = self._sheet1_gap_sign(idx)

            def inv_sqrt(x):
                return 1.0 / (sgn * self._abs_sqrt_R(x))
        else:
            a, b = self._band_interval(idx)

            def inv_sqrt(x):
                return 1.0 / self._band_upper_value(idx, x)

        lo = a if x_from is None else float(x_from)
        if lo >= b - 1e-14:
            return 0.0 + 0.0j
        sing_lo = any(abs(lo - e) < 1e-11 for e in self.edges)

        def smooth(x):
            w = np.ones_like(x)
            if sing_lo:
                w = w * np.sqrt(x - lo)
            w = w * np.sqrt(b - x)
            return x ** (m - 1) * inv_sqrt(x) * w

        return quad_sqrt_weight(smooth, lo, b,
                                -0.5 if sing_lo else 0.0, -0.5, self._n)

    # -- Abel map -------------------------------------------------------------

    def _raw_u_from_moments(self, moments) -> np.ndarray:
        return self.c @ np.asarray(moments, dtype=complex)

    def abel_map(self, z, side: int | None = None) -> np.ndarray:
        """u(z) = Int_{beta_q}^z omega on the first sheet, upper-side limits.

        For real z inside (alpha_1, beta_q) a side flag is required by
        the spec; side=+1 (default used by the package) integrates along
        the upper lip, side=-1 returns the conjugate.
        """
        if self.g == 0:
            return np.zeros(0, dtype=complex)
        z = complex(z)
        if z.imag == 0.0:
            x = z.real
            if self.alpha[0] < x < self.beta[-1] and side is None:
                raise DomainError(
                    "abel_map on (alpha_1, beta_q) needs a side flag")
            u = self._u_plus_real(x)
            if side == -1:
                u = np.conj(u)
            return u
        moments = [self._complex_segment(z, m) for m in range(1, self.g + 1)]
        return self._raw_u_from_moments(moments)

    def _complex_segment(self, z: complex, m: int) -> complex:
        """Moment integral along the straight segment beta_q -> z."""
        b0 = float(self.beta[-1])

        def f(t):
            return t ** (m - 1) / sqrt_R_complex(self.edges, t)

        from .quadrature import quad_segment
        return quad_segment(f, b0, z, sqrt_at_start=True, n=self._n)

    def _u_plus_real(self, x: float) -> np.ndarray:
        """u(x + i0) assembled from full and partial real segments."""
        q, g = self.q, self.g
        if x >= self.beta[-1]:
            moments = [self._right_exterior_moment(x, m) for m in range(1, g + 1)]
            return self._raw_u_from_moments(moments)
        # locate x: band i or gap j or left exterior
        total = np.zeros(g, dtype=complex)
        moments = np.zeros(g, dtype=complex)
        for m in range(1, g + 1):
            acc = 0.0 + 0.0j
            if x <= self.alpha[0]:
                acc += self._segment_integral("band", 1, m)
                for i in range(2, q + 1):
                    acc += self._segment_integral("band", i, m)
                for j in range(1, q):
                    acc += self._segment_integral("gap", j, m)
                acc += self._left_exterior_moment(x, m)
            else:
                placed = False
                for i in range(1, q + 1):
                    a, b = self._band_interval(i)
                    if a <= x <= b:
                        acc += self._segment_integral("band", i, m, x_from=x)
                        for k in range(i + 1, q + 1):
                            acc += self._segment_integral("band", k, m)
                        for j in range(i, q):
                            acc += self._segment_integral("gap", j, m)
                        placed = True
                        break
                if not placed:
                    for j in range(1, q):
                        a, b = self._gap_interval(j)
                        if a <= x <= b:
                            acc += self._segment_integral("gap", j, m, x_from=x)
                            for k in range(j + 1, q + 1):
                                acc += self._segment_integral("band", k, m)
                            for jj in range(j + 1, q):
                                acc += self._segment_integral("gap", jj, m)
                            placed = True
                            break
                if not placed:
                    raise DomainError(f"could not locate {x} among segments")
            moments[m - 1] = acc
        total = -self._raw_u_from_moments(moments)
        return total

    def _right_exterior_moment(self, x, m) -> complex:
        def smooth(t):
            return t ** (m - 1) * np.sqrt(t - self.beta[-1]) \
                / self._abs_sqrt_R(t)
        return quad_sqrt_weight(smooth, float(self.beta[-1]), float(x),
                                -0.5, 0.0, self._n)

    def _left_exterior_moment(self, x, m) -> complex:
        """Integral from x up to alpha_1 along the left exterior, sheet 1."""
        sgn = (-1.0) ** self.q

        def smooth(t):
            return t ** (m - 1) * np.sqrt(self.alpha[0] - t) \
                / (sgn * self._abs_sqrt_R(t))
        return quad_sqrt_weight(smooth, float(x), float(self.alpha[0]),
                                0.0, -0.5, self._n)

    def _u_infinity(self) -> np.ndarray:
        if self.g == 0:
            return np.zeros(0, dtype=complex)
        b0 = float(self.beta[-1])
        span = float(self.beta[-1] - self.alpha[0])
        T = b0 + 10.0 * span
        moments = []
        for m in range(1, self.g + 1):
            head = self._right_exterior_moment(T, m)
            tail = self._tail_moment(T, m)
            moments.append(head + tail)
        return self._raw_u_from_moments(moments)

    def _tail_moment(self, T, m) -> complex:
        """Int_T^inf x^(m-1)/sqrt(R) dx via w = 1/x."""
        def f(w):
            out = np.ones_like(w)
            for e in self.edges:
                out = out * (1.0 - e * w)
            return w ** (self.q - m - 1) / np.sqrt(out)
        return quad_sqrt_weight(f, 0.0, 1.0 / T, 0.0, 0.0, self._n)

    # -- gap zeros, gamma, model functions ------------------------------------

    def _ratio_product(self, x: float) -> float:
        out = 1.0
        for a, b in zip(self.alpha, self.beta):
            out *= (x - a) / (x - b)
        return out

    def _gap_zero(self, j: int) -> float:
        a, b = self._gap_interval(j)
        span = b - a
        lo, hi = a + 1e-13 * max(1.0, abs(a)) + 1e-15, b - 1e-13 * max(1.0, abs(b))
        f_lo = self._ratio_product(a + 1e-9 * span) - 1.0
        f_hi = self._ratio_product(b - 1e-9 * span) - 1.0
        lo, hi = a + 1e-9 * span, b - 1e-9 * span
        if not (f_lo > 0.0 > f_hi or f_lo < 0.0 < f_hi):
            raise DegenerateSurfaceError(
                f"no sign change for the gap zero in gap {j}")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = self._ratio_product(mid) - 1.0
            if fm == 0.0:
                return mid
            if (fm > 0.0) == (f_lo > 0.0):
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15 * max(1.0, abs(mid)):
                break
        return 0.5 * (lo + hi)

    def gamma_quarter(self, z, side: int | None = None):
        """gamma(z) = prod ((z-alpha_j)/(z-beta_j))^(1/4), gamma(inf) = 1.

        Factor-wise principal quarter powers put the cuts exactly on the
        bands; real z inside a band needs the side flag (limit from
        above for side=+1).  z at an edge is rejected.
        """
        z = complex(z)
        if z.imag == 0.0:
            x = z.real
            for e in self.edges:
                if abs(x - e) < 1e-13 * max(1.0, abs(e)):
                    raise DomainError(f"gamma has a quarter-root singularity at {e}")
            out = 1.0 + 0.0j
            for a, b in zip(self.alpha, self.beta):
                r = (x - a) / (x - b)
                if r > 0:
                    out *= r ** 0.25
                else:
                    if side is None:
                        raise DomainError(
                            "gamma on a band needs a side flag")
                    out *= abs(r) ** 0.25 * np.exp(0.25j * np.pi * side)
            return out
        out = 1.0 + 0.0j
        for a, b in zip(self.alpha, self.beta):
            out *= ((z - a) / (z - b)) ** 0.25
        return out

    def model_functions(self, z, omega_over_2pi, side: int = 1,
                        theta_floor: float = 1e-12):
        """The scalar pair (M1, M2) built from gamma and four theta ratios."""
        gam = self.gamma_quarter(z, side=side)
        if self.g == 0:
            return (0.5 * (gam + 1.0 / gam), 0.5 * (gam - 1.0 / gam))
        v = np.asarray(omega_over_2pi, dtype=complex)
        u_z = self.abel_map(z, side=side)
        th = self.theta
        den_plus = th.theta(u_z + self.d)
        den_minus = th.theta(u_z - self.d)
        pref = th.theta(self.u_inf + self.d) / th.theta(self.u_inf + v + self.d)
        if abs(den_plus) < theta_floor:
            raise NumericalDegeneracyError(
                f"theta(u(z)+d) = {den_plus:.3e} at z={z}: should not vanish "
                "on the first sheet")
        if abs(den_minus) < theta_floor:
            if self.x_gap.size and np.min(np.abs(complex(z) - self.x_gap)) < 1e-6:
                raise DomainError(
                    f"z={z} is at a gap zero x_j where M2 is a 0/0 limit")
            raise NumericalDegeneracyError(
                f"theta(u(z)-d) = {den_minus:.3e} at z={z} away from gap zeros")
        m1 = pref * 0.5 * (gam + 1.0 / gam) * th.theta(u_z + v + self.d) / den_plus
        m2 = pref * 0.5 * (gam - 1.0 / gam) * th.theta(u_z - v - self.d) / den_minus
        return m1, m2

    # -- invariants ------------------------------------------------------------

    def invariant_report(self) -> dict:
        """A-normalization, tau structure, and gap-zero certification."""
        rep = {"genus": self.g, "a_residual": self.a_residual,
               "orientation_flip": self.orientation_flip}
        if self.g == 0:
            rep.update(tau_sym=0.0, tau_real=0.0, cholesky_ok=True,
                       theta_zero_at_gap=0.0, theta_nonzero_margin=np.inf)
            return rep
        rep["tau_sym"] = float(np.max(np.abs(self.tau - self.tau.T)))
        rep["tau_real"] = float(np.max(np.abs(np.real(self.tau))))
        try:
            np.linalg.cholesky(np.real(-1j * self.tau))
            rep["cholesky_ok"] = True
        except np.linalg.LinAlgError:
            rep["cholesky_ok"] = False
        zero_vals = [abs(self.theta.theta(self.abel_map(x, side=1) - self.d))
                     for x in self.x_gap]
        rep["theta_zero_at_gap"] = float(max(zero_vals))
        # theta(u+d) should have no zeros on the first sheet: probe grid
        probes = []
        b0, b1 = float(self.alpha[0]), float(self.beta[-1])
        span = b1 - b0
        for t in np.linspace(-0.3, 1.3, 9):
            for y in (0.0, 0.3 * span, -0.3 * span):
                zp = b0 + t * span + 1j * y
                if y == 0.0:
                    zp = zp + 0.0j
                    if any(abs(zp.real - e) < 1e-3 * span for e in self.edges):
                        continue
                    probes.append(abs(self.theta.theta(
                        self.abel_map(zp.real, side=1) + self.d)))
                else:
                    probes.append(abs(self.theta.theta(
                        self.abel_map(zp) + self.d)))
        rep["theta_nonzero_margin"] = float(min(probes))
        return rep


def build_surface(alpha, beta, n_nodes: int = 256,
                  eps_tail: float = 1e-12) -> SurfaceData:
    """Surface data from a refined edge list (genus 0 yields trivial data)."""
    return SurfaceData(alpha, beta, n_nodes=n_nodes, eps_tail=eps_tail)
