"""Constrained equilibrium measure of the lattice weight.

Minimizes the logarithmic energy with external field V over densities
0 <= rho <= 1 of unit mass, on a uniform grid of piecewise-constant
cells.  The log-kernel matrix uses exact closed-form integrals of
log|x-y| over cell pairs, so the diagonal singularity needs no fudge
factor.  The solve is a monotone FISTA warm start followed by an
active-set refinement that terminates with machine-level KKT residuals
on the discrete problem.

Classification, sub-grid edge refinement, and the regularity
certificate of the solved measure live here as well.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import SolverError, UnresolvedStructureError
from .potentials import Potential

DEFAULT_TOL_KKT = 1e-6
DEFAULT_TOL_BAND = 1e-4
DEFAULT_TOL_MASS = 1e-10
DEFAULT_MARGIN = 10.0
_EDGE_SLOPE_FLOOR = 5e-2
_Q_INTERIOR_FLOOR = 1e-3


def _pair_integral(s: np.ndarray) -> np.ndarray:
    """T(m) with Int_{c_i x c_j} log|x-y| = Delta^2 (log Delta + T(|i-j|)).

    T(s) = (1+s)^2/2 log(1+s) + (1-s)^2/2 log|1-s| - s^2 log s - 3/2,
    with the 0*log(0) limits; exact for piecewise-constant cells.
    """
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = 0.5 * (1.0 + s) ** 2 * np.log1p(s)
        t2 = np.where(s == 1.0, 0.0, 0.5 * (1.0 - s) ** 2 * np.log(np.abs(1.0 - s)))
        t3 = np.where(s == 0.0, 0.0, s * s * np.log(np.where(s == 0.0, 1.0, s)))
    return t1 + t2 - t3 - 1.5


def log_kernel_matrix(grid: np.ndarray, delta: float) -> np.ndarray:
    """K with energy rho^T K rho = -IntInt log|x-y| rho rho (cell-exact)."""
    m = np.arange(len(grid), dtype=float)
    row = -(delta * delta) * (np.log(delta) + _pair_integral(m))
    return scipy.linalg.toeplitz(row)


def _cell_potential_integrals(potential: Potential, edges: np.ndarray) -> np.ndarray:
    """Exact per-cell integrals of the polynomial V."""
    anti = np.zeros(len(potential.coeffs) + 1)
    for k, c in enumerate(potential.coeffs):
        anti[k + 1] = c / (k + 1)
    vals = np.zeros_like(edges)
    for k in range(len(anti) - 1, 0, -1):
        vals = (vals + anti[k]) * edges
    return np.diff(vals)


def default_interval(potential: Potential, margin: float = DEFAULT_MARGIN):
    """Symmetric bounding interval from the confinement probe.

    Radius where V(x) - 2 log(1+|x|) clears min(V) by ``margin``; the
    support of the equilibrium measure is strictly inside for any
    admissible V (enlarged automatically on contact).
    """
    xs = np.linspace(-256.0, 256.0, 200001)
    vmin = float(np.min(potential.value(xs)))
    r = 1.0
    while r < 300.0:
        probe = potential.value(np.array([r, -r])) - 2.0 * np.log1p(r)
        if np.all(probe >= vmin + margin):
            return (-r, r)
        r *= 1.09
    raise SolverError("could not locate a bounding interval")


@dataclass(frozen=True, eq=False)
class EquilibriumMeasure:
    """Solved grid density with KKT data; immutable and shareable."""

    potential: Potential
    interval: tuple[float, float]
    grid: np.ndarray            # cell centers
    delta: float
    rho: np.ndarray
    lagrange_l: float
    energy: float
    energy_trace: np.ndarray    # non-increasing across accepted iterates
    kkt_interior: float
    kkt_void: float
    kkt_saturated: float

    @property
    def kkt_residual(self) -> float:
        return max(self.kkt_interior, self.kkt_void, self.kkt_saturated)

    @property
    def mass_error(self) -> float:
        return abs(float(np.sum(self.rho)) * self.delta - 1.0)

    def effective_potential(self, kernel: np.ndarray | None = None) -> np.ndarray:
        """2 Int log|x-y| rho(y) dy - V(x) on the grid (cell-exact kernel)."""
        K = log_kernel_matrix(self.grid, self.delta) if kernel is None else kernel
        v = _cell_potential_integrals(
            self.potential,
            np.concatenate((self.grid - 0.5 * self.delta,
                            [self.grid[-1] + 0.5 * self.delta])))
        return -(2.0 * (K @ self.rho) + v) / self.delta


def _project_box_mass(y: np.ndarray, target: float) -> np.ndarray:
    """Euclidean projection onto {0 <= x <= 1, sum x = target}."""
    lo = float(np.min(y)) - 2.0
    hi = float(np.max(y)) + 1.0
    for _ in range(100):
        lam = 0.5 * (lo + hi)
        mass = float(np.sum(np.clip(y - lam, 0.0, 1.0)))
        if mass > target:
            lo = lam
        else:
            hi = lam
    return np.clip(y - 0.5 * (lo + hi), 0.0, 1.0)


def _mfista(K, v, x0, target, max_iter, trace):
    """Monotone FISTA on E(x) = x.Kx + v.x over the box-mass set."""
    b = np.ones(len(v)) / np.sqrt(len(v))
    for _ in range(60):
        b = K @ b
        b /= np.linalg.norm(b)
    L = 2.0 * float(b @ (K @ b))
    step = 1.0 / L

    def energy(x):
        return float(x @ (K @ x) + v @ x)

    x = x0
    x_prev = x0
    e_best = energy(x0)
    trace.append(e_best)
    y = x0.copy()
    t = 1.0
    stable = 0
    fingerprint = None
    for k in range(max_iter):
        grad = 2.0 * (K @ y) + v
        z = _project_box_mass(y - step * grad, target)
        e_z = energy(z)
        if e_z <= e_best:
            x_new, e_new = z, e_z
        else:
            x_new, e_new = x, e_best
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x_new + (t / t_new) * (z - x_new) + ((t - 1.0) / t_new) * (x_new - x_prev)
        x_prev, x, e_best, t = x, x_new, e_new, t_new
        trace.append(e_best)
        if (k + 1) % 25 == 0:
            fp = (int(np.sum(x <= 0.0)), int(np.sum(x >= 1.0)),
                  float(np.sum(np.nonzero(x <= 0.0)[0])))
            stable = stable + 1 if fp == fingerprint else 0
            fingerprint = fp
            if stable >= 4:
                break
    return x


def _subspace_solve(K, v, delta, on_upper, free_idx):
    """Equality-KKT solve with the bound cells frozen; returns (x_free, lambda)."""
    nf = len(free_idx)
    A = np.empty((nf + 1, nf + 1))
    A[:nf, :nf] = 2.0 * K[np.ix_(free_idx, free_idx)]
    A[:nf, nf] = -delta
    A[nf, :nf] = delta
    A[nf, nf] = 0.0
    rhs = np.empty(nf + 1)
    n_up = int(np.sum(on_upper))
    rhs[:nf] = -v[free_idx] - 2.0 * (K[np.ix_(free_idx, np.nonzero(on_upper)[0])]
                                     @ np.ones(n_up))
    rhs[nf] = 1.0 - delta * n_up
    sol = np.linalg.solve(A, rhs)
    return sol[:nf], sol[nf]


def _active_set_refine(K, v, delta, x, trace, max_rounds=600):
    """Primal active-set descent with exact subspace solves.

    Each accepted update is a feasible line step toward the current
    working-set minimizer, so the recorded energy is non-increasing;
    dual violators are released one at a time (worst first).
    """
    x = x.copy()
    on_upper = x >= 1.0 - 1e-9
    on_lower = (x <= 1e-9) & ~on_upper
    x[on_upper] = 1.0
    x[on_lower] = 0.0
    history: list[float] = []
    release_count: dict[int, int] = {}

    def energy(z):
        return float(z @ (K @ z) + v @ z)

    lam = 0.0
    for _ in range(max_rounds):
        free = ~(on_upper | on_lower)
        free_idx = np.nonzero(free)[0]
        if len(free_idx) == 0:
            raise SolverError("active-set collapse: no free cells", history)
        try:
            xf, lam = _subspace_solve(K, v, delta, on_upper, free_idx)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"KKT system singular: {exc}", history) from exc
        xs = np.where(on_upper, 1.0, 0.0)
        xs[free_idx] = xf
        d = xs - x
        dmax = float(np.max(np.abs(d)))
        at_subspace_min = dmax < 1e-13
        if not at_subspace_min:
            with np.errstate(divide="ignore", invalid="ignore"):
                t_up = np.where(d > 1e-15, (1.0 - x) / d, np.inf)
                t_dn = np.where(d < -1e-15, -x / d, np.inf)
            theta = min(1.0, float(np.min(t_up)), float(np.min(t_dn)))
            x = np.clip(x + theta * d, 0.0, 1.0)
            if theta < 1.0:
                hit_up = free & (t_up <= theta + 1e-12)
                hit_dn = free & (t_dn <= theta + 1e-12)
                on_upper |= hit_up
                on_lower |= hit_dn
                x[hit_up] = 1.0
                x[hit_dn] = 0.0
            else:
                at_subspace_min = True
            trace.append(energy(x))
        if at_subspace_min:
            r = 2.0 * (K @ x) + v - lam * delta
            history.append(float(np.max(np.abs(r[free]))))
            tol = max(1.0, float(np.max(np.abs(r)))) * 1e-11
            viol = np.where(on_lower & (r < -tol), -r,
                            np.where(on_upper & (r > tol), r, 0.0))
            if not np.any(viol > 0.0):
                return x, lam, history
            i = int(np.argmax(viol))
            if release_count.get(i, 0) >= 3:
                raise SolverError(
                    f"active-set cycling at cell {i}", history)
            release_count[i] = release_count.get(i, 0) + 1
            on_upper[i] = False
            on_lower[i] = False
    raise SolverError("QP failed to converge (active-set rounds exhausted)", history)


def solve_equilibrium(potential: Potential, grid_size: int = 2000,
                      bounding_interval: tuple[float, float] | None = None,
                      tol_kkt: float = DEFAULT_TOL_KKT,
                      fista_iters: int = 3000,
                      max_enlarge: int = 5) -> EquilibriumMeasure:
    """Solve the constrained variational problem on a uniform grid.

    The bounding interval defaults to the confinement probe and is
    enlarged (factor 1.4 per round) whenever the solved support touches
    its ends.  The returned measure carries the discrete Lagrange
    multiplier and the three KKT residual channels; a residual above
    ``tol_kkt`` raises :class:`SolverError`.
    """
    interval = bounding_interval or default_interval(potential)
    for _ in range(max_enlarge + 1):
        measure = _solve_on_interval(potential, grid_size, interval, fista_iters)
        a, b = interval
        touch = np.nonzero(measure.rho > 10 * DEFAULT_TOL_BAND)[0]
        if len(touch) and (touch[0] <= 2 or touch[-1] >= grid_size - 3):
            interval = (1.4 * a, 1.4 * b)
            continue
        if measure.kkt_residual > tol_kkt:
            raise SolverError(
                f"KKT residual {measure.kkt_residual:.3e} exceeds tol {tol_kkt:g}",
                measure.energy_trace.tolist()[-20:])
        return measure
    raise SolverError(f"support still touches the bounding interval after "
                      f"{max_enlarge} enlargements (last {interval})")


def _solve_on_interval(potential, grid_size, interval, fista_iters):
    a, b = interval
    if b - a <= 1.0:
        raise SolverError("bounding interval shorter than total mass allows")
    delta = (b - a) / grid_size
    grid = a + delta * (np.arange(grid_size) + 0.5)
    cell_edges = np.concatenate((grid - 0.5 * delta, [b]))
    K = log_kernel_matrix(grid, delta)
    v = _cell_potential_integrals(potential, cell_edges)

    target = 1.0 / delta
    x0 = _project_box_mass(
        np.where(np.abs(grid - grid[np.argmin(potential.value(grid))]) < 1.0, 0.6, 0.0),
        target)
    trace: list[float] = []
    x = _mfista(K, v, x0, target, fista_iters, trace)
    x, lam, _history = _active_set_refine(K, v, delta, x, trace)

    t_eff = -(2.0 * (K @ x) + v) / delta
    l = -lam
    on_upper = x >= 1.0 - 1e-9
    on_lower = x <= 1e-9
    free = ~(on_upper | on_lower)
    kkt_int = float(np.max(np.abs(t_eff[free] - l))) if np.any(free) else 0.0
    kkt_void = float(np.max(np.clip(t_eff[on_lower] - l, 0.0, None), initial=0.0))
    kkt_sat = float(np.max(np.clip(l - t_eff[on_upper], 0.0, None), initial=0.0))

    return EquilibriumMeasure(
        potential=potential, interval=(a, b), grid=grid, delta=delta,
        rho=x, lagrange_l=l, energy=float(x @ (K @ x) + v @ x),
        energy_trace=np.array(trace), kkt_interior=kkt_int,
        kkt_void=kkt_void, kkt_saturated=kkt_sat,
    )


# ---------------------------------------------------------------------------
# classification / refinement / regularity


@dataclass(frozen=True)
class ClassifiedRegions:
    """Grid-level band edges and gap tags; exterior gaps are always void."""

    alpha: np.ndarray           # band left edges, ascending
    beta: np.ndarray            # band right edges
    gap_types: tuple[str, ...]  # interior gaps (beta_j, alpha_j+1): 'void'|'saturated'
    labels: np.ndarray          # per-cell: 0 void, 1 band, 2 saturated

    @property
    def q(self) -> int:
        return len(self.alpha)


def classify_regions(measure: EquilibriumMeasure,
                     tol_band: float = DEFAULT_TOL_BAND) -> ClassifiedRegions:
    """Maximal runs of the density trichotomy, ordered left to right."""
    rho = measure.rho
    labels = np.ones(len(rho), dtype=int)
    labels[rho <= tol_band] = 0
    labels[rho >= 1.0 - tol_band] = 2

    runs = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            runs.append((labels[start], start, i - 1))
            start = i
    if runs[0][0] != 0 or runs[-1][0] != 0:
        raise UnresolvedStructureError("support reaches the grid boundary")

    half = 0.5 * measure.delta
    alpha, beta, gaps = [], [], []
    for kind, i0, i1 in runs:
        if kind == 1 and i1 - i0 + 1 < 3:
            raise UnresolvedStructureError(
                f"band of {i1 - i0 + 1} cells near x={measure.grid[i0]:.4f}: "
                "unresolved structure; refine grid")
    # bands alternate with gaps; a saturated run flanked by bands is one gap
    band_runs = [(i0, i1) for kind, i0, i1 in runs if kind == 1]
    # merge band runs separated by sub-resolution gaps is not attempted:
    # every non-band run between bands must be a clean single-type gap
    for j, (i0, i1) in enumerate(band_runs):
        alpha.append(measure.grid[i0] - half)
        beta.append(measure.grid[i1] + half)
        if j > 0:
            prev_end = band_runs[j - 1][1]
            between = labels[prev_end + 1:i0]
            if len(between) == 0 or len(np.unique(between)) != 1 or between[0] == 1:
                raise UnresolvedStructureError(
                    f"gap between bands {j - 1} and {j} is not a single clean region")
            gaps.append("void" if between[0] == 0 else "saturated")
    if not alpha:
        raise UnresolvedStructureError("no band found")
    return ClassifiedRegions(np.array(alpha), np.array(beta), tuple(gaps), labels)


@dataclass(frozen=True)
class RefinedEdges:
    """Sub-grid edge locations with square-root slope constants.

    ``c_left[j]``/``c_right[j]`` are the constants C in
    rho ~ C sqrt(dist) (band-void) or 1 - rho ~ C sqrt(dist)
    (band-saturated) at alpha_j / beta_j.
    """

    alpha: np.ndarray
    beta: np.ndarray
    c_left: np.ndarray
    c_right: np.ndarray
    gap_types: tuple[str, ...]
    near_singular: tuple[str, ...] = field(default=())

    @property
    def q(self) -> int:
        return len(self.alpha)

    def edge_type(self, j: int, side: str) -> str:
        """Type of the gap adjacent to edge ``side`` of band j."""
        if side == "left":
            return "void" if j == 0 else self.gap_types[j - 1]
        return "void" if j == self.q - 1 else self.gap_types[j]

    @property
    def all_edges(self) -> np.ndarray:
        return np.sort(np.concatenate((self.alpha, self.beta)))


def _fit_edge(x, y, e0, delta, inward):
    """Quadratic least-squares root fit of the squared density near an edge.

    Returns (refined_edge, C).  ``inward`` is +1 when the band lies to
    the right of the edge.
    """
    coeffs = np.polyfit(x - e0, y, 2)
    roots = np.roots(coeffs)
    roots = roots[np.abs(roots.imag) < 1e-9].real
    cand = [r for r in roots if abs(r) < 4.0 * delta]
    if cand:
        r = min(cand, key=abs)
    else:  # fall back to the linear fit
        p, c = np.polyfit(x - e0, y, 1)
        r = -c / p
    slope = abs(np.polyval(np.polyder(coeffs), r))
    return e0 + r, float(np.sqrt(slope))


def refine_edges(measure: EquilibriumMeasure, regions: ClassifiedRegions,
                 window_cells: int = 14, skip_cells: int = 2,
                 slope_floor: float = _EDGE_SLOPE_FLOOR) -> RefinedEdges:
    """Least-squares re-fit of every band edge from the band-side density.

    rho^2 (void edges) or (1-rho)^2 (saturated edges) is fit by a
    quadratic and its root gives the sub-grid edge; the slope at the
    root gives C > 0.  Fitted C below the regularity floor is flagged.
    """
    grid, rho, delta = measure.grid, measure.rho, measure.delta
    alpha_r, beta_r = [], []
    c_left, c_right = [], []
    flags = []
    for j in range(regions.q):
        i0 = int(np.searchsorted(grid, regions.alpha[j]))       # first band cell
        i1 = int(np.searchsorted(grid, regions.beta[j])) - 1    # last band cell
        n_band = i1 - i0 + 1
        skip = skip_cells if n_band >= 2 * skip_cells + 6 else max(0, (n_band - 6) // 2)
        if n_band - 2 * skip < 4:
            raise UnresolvedStructureError(
                f"band {j} too narrow to refine ({n_band} cells); refine grid")
        for side, e0 in (("left", regions.alpha[j]), ("right", regions.beta[j])):
            gap = ("void" if (j == 0 if side == "left" else j == regions.q - 1)
                   else regions.gap_types[j - 1 if side == "left" else j])
            if side == "left":
                lo = i0 + skip
                hi = min(lo + window_cells, i1 - skip + 1)
                sel = np.arange(lo, hi)
            else:
                hi = i1 - skip
                lo = max(hi - window_cells + 1, i0 + skip)
                sel = np.arange(lo, hi + 1)
            inward = 1 if side == "left" else -1
            y = rho[sel] ** 2 if gap == "void" else (1.0 - rho[sel]) ** 2
            e_fit, c_fit = _fit_edge(grid[sel], y, e0, delta, inward)
            if c_fit < slope_floor:
                flags.append(f"{side} edge of band {j} at {e_fit:.6f}: "
                             f"C={c_fit:.3e} below floor (regularity at risk)")
            if side == "left":
                alpha_r.append(e_fit)
                c_left.append(c_fit)
            else:
                beta_r.append(e_fit)
                c_right.append(c_fit)
    return RefinedEdges(np.array(alpha_r), np.array(beta_r),
                        np.array(c_left), np.array(c_right),
                        regions.gap_types, tuple(flags))


@dataclass(frozen=True)
class RegularityCertificate:
    """Positive margins for the four regularity conditions."""

    q1_interior_min: float
    q2_interior_min: float
    edge_slopes: tuple[float, ...]
    isolated_point_flag: bool
    valid: bool
    reasons: tuple[str, ...]


def certify_regularity(measure: EquilibriumMeasure, regions: ClassifiedRegions,
                       edges: RefinedEdges,
                       q_floor: float = _Q_INTERIOR_FLOOR,
                       slope_floor: float = _EDGE_SLOPE_FLOOR) -> RegularityCertificate:
    """Check interior non-vanishing of q1, q2, edge slopes, isolated points.

    Asymptotics modules refuse measures whose certificate is invalid.
    """
    reasons = []
    q1_min = np.inf
    q2_min = np.inf
    for j in range(regions.q):
        a, b = regions.alpha[j], regions.beta[j]
        m = 0.05 * (b - a)
        inside = (measure.grid > a + m) & (measure.grid < b - m)
        if not np.any(inside):
            reasons.append(f"band {j} has no interior cells")
            continue
        r = measure.rho[inside]
        q1_min = min(q1_min, float(np.min((np.pi * r) ** 2)))
        q2_min = min(q2_min, float(np.min((np.pi * (1.0 - r)) ** 2)))
    if q1_min <= q_floor:
        reasons.append(f"q1 interior min {q1_min:.3e} <= floor {q_floor:g} "
                       "(density pinches to 0 inside a band)")
    if q2_min <= q_floor:
        reasons.append(f"q2 interior min {q2_min:.3e} <= floor {q_floor:g} "
                       "(density pinches to 1 inside a band)")
    slopes = tuple(np.concatenate((edges.c_left, edges.c_right)).tolist())
    if min(slopes) < slope_floor:
        reasons.append(f"edge slope {min(slopes):.3e} below floor {slope_floor:g}")
    isolated = bool(edges.near_singular) and any(
        "below floor" in f for f in edges.near_singular)
    if edges.near_singular:
        reasons.extend(edges.near_singular)
    return RegularityCertificate(
        q1_interior_min=float(q1_min), q2_interior_min=float(q2_min),
        edge_slopes=slopes, isolated_point_flag=isolated,
        valid=not reasons, reasons=tuple(reasons))


@dataclass(frozen=True)
class SolvedEquilibrium:
    """Bundle of the solved, classified, refined, certified measure."""

    measure: EquilibriumMeasure
    regions: ClassifiedRegions
    edges: RefinedEdges
    certificate: RegularityCertificate


def solve_and_analyze(potential: Potential, grid_size: int = 2000,
                      bounding_interval=None, tol_kkt: float = DEFAULT_TOL_KKT,
                      tol_band: float = DEFAULT_TOL_BAND) -> SolvedEquilibrium:
    """solve -> classify -> refine -> certify in one call."""
    measure = solve_equilibrium(potential, grid_size, bounding_interval, tol_kkt)
    regions = classify_regions(measure, tol_band)
    edges = refine_edges(measure, regions)
    certificate = certify_regularity(measure, regions, edges)
    return SolvedEquilibrium(measure, regions, edges, certificate)
