"""Exact orthogonalization on the truncated lattice.

The ground-truth engine: norms h_n, recurrence coefficients beta_n and
gamma_n^2 for the monic polynomials orthogonal with respect to the
discrete weight exp(-N*V(x)) on {k/N}, computed by the discretized
Stieltjes procedure.  Lattice sums use exact (fsum) reduction and the
weights are rescaled by the largest node weight, with the rescaling
folded back into the reported norms.

All structures are immutable after construction and every operation is
a pure function, safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PrecisionExhaustedError
from .lattice import LatticeSpec

#: Relative floor on h_n / h_0 before declaring precision exhausted.
H_RATIO_FLOOR = 1e-280


def _csum(values: np.ndarray) -> float:
    """Compensated (exactly rounded) sum of a 1-D float array."""
    return math.fsum(values.tolist())


@dataclass(frozen=True, eq=False)
class RecurrenceTable:
    """Exact h_n, beta_n, gamma_n^2 for n <= n_max at fixed N.

    ``h`` are the true (unrescaled) norms; ``log_h`` is provided for
    scales where the norms underflow-adjacent territory matters.
    Carries the node set and rescaled weights as evaluation state.
    """

    N: int
    n_max: int
    h: np.ndarray          # shape (n_max+1,), h[n] > 0
    beta: np.ndarray       # shape (n_max+1,)
    gamma2: np.ndarray     # shape (n_max+1,), gamma2[0] unused (0), >0 for n>=1
    log_h: np.ndarray      # log h[n]
    nodes: np.ndarray      # lattice nodes
    weights: np.ndarray    # rescaled weights w / w_max
    log_wmax: float        # log of the rescaling factor

    def gamma2_at(self, n: int) -> float:
        if not 1 <= n <= self.n_max:
            raise IndexError(f"gamma2 defined for 1 <= n <= {self.n_max}")
        return float(self.gamma2[n])


def stieltjes_orthogonalize(lattice: LatticeSpec, n_max: int | None = None,
                            precision: str = "auto") -> RecurrenceTable:
    """Run the Stieltjes procedure up to degree n_max on the lattice.

    beta_n = sum(x P_n^2 w) / h_n and h_{n+1} = sum(P_{n+1}^2 w) with
    P_{n+1} = (x - beta_n) P_n - gamma_n^2 P_{n-1}; the asymptotic regime
    of interest is n ~ N, so n_max may not exceed N.

    ``precision``: 'double' (fast path), 'extended' (mpmath backend), or
    'auto', which runs the double path and escalates to the extended
    backend when the a-posteriori orthogonality probe exceeds 1e-9.
    Saturated-regime weights make h_n oscillate over several orders of
    magnitude per step, which exhausts doubles well before n = 64; the
    probe catches that instead of trusting a fixed degree cutoff.

    Raises
    ------
    PrecisionExhaustedError
        If positivity of h_n is lost at some degree (the failure is
        detected, never silent).
    """
    if n_max is None:
        n_max = lattice.n_max
    if n_max > lattice.n_max:
        raise ValueError(f"n_max={n_max} exceeds lattice guard degree {lattice.n_max}")
    if n_max > lattice.N:
        raise ValueError(f"n_max={n_max} exceeds N={lattice.N}: outside the "
                         "asymptotic regime this table is built for")
    if precision not in ("auto", "double", "extended"):
        raise ValueError(f"unknown precision mode {precision!r}")

    if precision == "extended":
        return _stieltjes_extended(lattice, n_max)
    table = _stieltjes_double(lattice, n_max)
    if precision == "auto" and n_max >= 1:
        probes = sorted({0, n_max // 4, n_max // 2, (3 * n_max) // 4, n_max - 1})
        worst = max(orthogonality_residual(table, m, n_max) for m in probes)
        if worst > 1e-9:
            return _stieltjes_extended(lattice, n_max)
    return table


def _stieltjes_double(lattice: LatticeSpec, n_max: int) -> RecurrenceTable:
    x = lattice.nodes
    logw = -lattice.N * lattice.potential.value(x)
    log_wmax = float(np.max(logw))
    w = np.exp(logw - log_wmax)

    h_scaled = np.empty(n_max + 1)
    beta = np.empty(n_max + 1)
    gamma2 = np.zeros(n_max + 1)

    p_prev = np.zeros_like(x)
    p_cur = np.ones_like(x)
    h_scaled[0] = _csum(p_cur * p_cur * w)
    if h_scaled[0] <= 0.0:
        raise PrecisionExhaustedError("precision exhausted at degree 0: h_0 <= 0")
    beta[0] = _csum(x * p_cur * p_cur * w) / h_scaled[0]

    for n in range(n_max):
        g2 = gamma2[n] if n >= 1 else 0.0
        p_next = (x - beta[n]) * p_cur - g2 * p_prev
        h_next = _csum(p_next * p_next * w)
        if not (h_next > 0.0) or h_next < H_RATIO_FLOOR * h_scaled[0]:
            raise PrecisionExhaustedError(
                f"precision exhausted at degree {n + 1}: h = {h_next:.3e}"
            )
        h_scaled[n + 1] = h_next
        gamma2[n + 1] = h_next / h_scaled[n]
        beta[n + 1] = _csum(x * p_next * p_next * w) / h_next
        p_prev, p_cur = p_cur, p_next

    wmax = math.exp(log_wmax) if log_wmax > -700 else 0.0
    h = h_scaled * wmax if wmax > 0.0 else h_scaled * 0.0
    log_h = np.log(h_scaled) + log_wmax
    if wmax == 0.0:
        # Norms below double range; callers must use log_h.
        h = np.exp(np.maximum(log_h, -745.0))
    return RecurrenceTable(
        N=lattice.N, n_max=n_max, h=h, beta=beta, gamma2=gamma2,
        log_h=log_h, nodes=x, weights=w, log_wmax=log_wmax,
    )


def _stieltjes_extended(lattice: LatticeSpec, n_max: int, dps: int = 50) -> RecurrenceTable:
    """Extended-precision Stieltjes pass, rounded to doubles at the end."""
    import mpmath as mp

    with mp.workdps(dps):
        N = lattice.N
        kmax = int(np.floor(lattice.radius * N + 1e-9))
        xs = [mp.mpf(k) / N for k in range(-kmax, kmax + 1)]
        coeffs = [mp.mpf(c) for c in lattice.potential.coeffs]

        def vval(x):
            v = mp.mpf(0)
            for c in reversed(coeffs):
                v = v * x + c
            return v

        ws = [mp.e ** (-N * vval(x)) for x in xs]
        log_wmax = float(max(mp.log(w) for w in ws))

        h = [mp.fsum(ws)]
        if h[0] <= 0:
            raise PrecisionExhaustedError("precision exhausted at degree 0")
        betas = [mp.fsum(x * w for x, w in zip(xs, ws)) / h[0]]
        g2s = [mp.mpf(0)]
        p_prev = [mp.mpf(0)] * len(xs)
        p_cur = [mp.mpf(1)] * len(xs)
        for n in range(n_max):
            g2 = g2s[n] if n >= 1 else mp.mpf(0)
            p_next = [(x - betas[n]) * pc - g2 * pp
                      for x, pc, pp in zip(xs, p_cur, p_prev)]
            hn = mp.fsum(p * p * w for p, w in zip(p_next, ws))
            if hn <= 0:
                raise PrecisionExhaustedError(
                    f"precision exhausted at degree {n + 1} (extended backend)"
                )
            h.append(hn)
            g2s.append(hn / h[n])
            betas.append(mp.fsum(x * p * p * w
                                 for x, p, w in zip(xs, p_next, ws)) / hn)
            p_prev, p_cur = p_cur, p_next

        log_h = np.array([float(mp.log(v)) for v in h])
        h_arr = np.exp(np.maximum(log_h, -745.0))
        x = np.array([float(v) for v in xs])
        w = np.exp(-N * lattice.potential.value(x) - log_wmax)
        return RecurrenceTable(
            N=N, n_max=n_max, h=h_arr,
            beta=np.array([float(b) for b in betas]),
            gamma2=np.array([float(g) for g in g2s]),
            log_h=log_h, nodes=x, weights=w, log_wmax=log_wmax,
        )


def eval_poly(table: RecurrenceTable, n: int, x):
    """Monic P_n(x) by the forward three-term recurrence; vectorized.

    Accepts real or complex scalars/arrays.  For magnitudes beyond double
    range use :func:`eval_poly_log`.
    """
    if n > table.n_max:
        raise IndexError(f"n={n} exceeds table n_max={table.n_max}")
    x = np.asarray(x)
    scalar = x.ndim == 0
    x = np.atleast_1d(x).astype(np.result_type(x, float))
    p_prev = np.zeros_like(x)
    p_cur = np.ones_like(x)
    for k in range(n):
        p_prev, p_cur = p_cur, (x - table.beta[k]) * p_cur - table.gamma2[k] * p_prev
    return p_cur[0] if scalar else p_cur


def eval_poly_log(table: RecurrenceTable, n: int, x):
    """Overflow-safe evaluation: returns (log|P_n(x)|, phase).

    ``phase`` is the complex unit P_n/|P_n| (a bare sign for real x).
    The recurrence pair is renormalized whenever it grows past 1e150.
    """
    if n > table.n_max:
        raise IndexError(f"n={n} exceeds table n_max={table.n_max}")
    x = np.asarray(x)
    scalar = x.ndim == 0
    x = np.atleast_1d(x).astype(np.result_type(x, float))
    p_prev = np.zeros_like(x)
    p_cur = np.ones_like(x)
    logscale = np.zeros(x.shape, dtype=float)
    for k in range(n):
        p_prev, p_cur = p_cur, (x - table.beta[k]) * p_cur - table.gamma2[k] * p_prev
        mag = np.maximum(np.abs(p_cur), np.abs(p_prev))
        big = mag > 1e150
        if np.any(big):
            factor = np.where(big, mag, 1.0)
            p_cur = p_cur / factor
            p_prev = p_prev / factor
            logscale = logscale + np.where(big, np.log(factor), 0.0)
    mag = np.abs(p_cur)
    logmag = np.where(mag > 0.0, np.log(np.where(mag > 0.0, mag, 1.0)), -np.inf)
    logmag = logmag + logscale
    phase = np.where(mag > 0.0, p_cur / np.where(mag > 0.0, mag, 1.0), 0.0)
    if scalar:
        return logmag[0], phase[0]
    return logmag, phase


def locate_zeros(table: RecurrenceTable, n: int, window=None,
                 resolution: float = 1e-12) -> np.ndarray:
    """All zeros of P_n in the window, by sign scanning plus bisection.

    The scan grid is the set of lattice-cell midpoints (where P_n is of
    regular size even deep inside saturated regions, unlike at the nodes
    themselves), so every sign change brackets exactly one simple zero.
    Brackets are bisected to the requested abscissa resolution.
    """
    if n == 0:
        return np.array([])
    X = table.nodes[-1]
    lo, hi = (-X - 0.5 / table.N, X + 0.5 / table.N) if window is None else window
    lo = max(lo, -X - 0.5 / table.N)
    hi = min(hi, X + 0.5 / table.N)
    if hi <= lo:
        return np.array([])
    N = table.N
    k_lo = int(np.floor(lo * N - 0.5))
    k_hi = int(np.ceil(hi * N - 0.5))
    grid = (np.arange(k_lo, k_hi + 1) + 0.5) / N
    grid = np.clip(grid, lo, hi)
    grid = np.concatenate(([lo], grid, [hi]))
    grid = np.unique(grid)
    vals = eval_poly(table, n, grid)
    sign = np.sign(vals)
    # A grid point landing exactly on a zero counts as its own bracket.
    zeros = list(grid[sign == 0.0])
    idx = np.nonzero(sign[:-1] * sign[1:] < 0.0)[0]
    for i in idx:
        a, b = grid[i], grid[i + 1]
        fa = vals[i]
        while b - a > resolution:
            m = 0.5 * (a + b)
            fm = eval_poly(table, n, m)
            if fm == 0.0:
                a = b = m
                break
            if np.sign(fm) == np.sign(fa):
                a, fa = m, fm
            else:
                b = m
        zeros.append(0.5 * (a + b))
    return np.sort(np.array(zeros))


def count_zeros(table: RecurrenceTable, n: int, interval=None) -> int:
    """Number of zeros of P_n inside the (open) interval.

    A zero within abscissa resolution of a lattice node is assigned to
    the cell on the node's left, matching the interlacing bookkeeping.
    """
    zeros = locate_zeros(table, n)
    if interval is None:
        return len(zeros)
    a, b = interval
    return int(np.sum((zeros > a) & (zeros < b)))


def cell_zero_counts(table: RecurrenceTable, n: int) -> dict[int, int]:
    """Zeros per lattice cell (k, k+1)/N; ties at nodes go to the left cell."""
    zeros = locate_zeros(table, n)
    counts: dict[int, int] = {}
    N = table.N
    for z in zeros:
        k = math.floor(z * N + 1e-9)
        if abs(z * N - round(z * N)) < 1e-9 * max(1.0, abs(z * N)) + 1e-12:
            k = int(round(z * N)) - 1     # tie: left interval
        counts[k] = counts.get(k, 0) + 1
    return counts


def orthogonality_residual(table: RecurrenceTable, m: int, n: int) -> float:
    """Normalized residual |sum P_m P_n w| / sqrt(h_m h_n)."""
    pm = eval_poly(table, m, table.nodes)
    pn = eval_poly(table, n, table.nodes)
    raw = _csum(pm * pn * table.weights)
    scale = math.sqrt(math.exp(table.log_h[m] - table.log_wmax)
                      * math.exp(table.log_h[n] - table.log_wmax))
    return abs(raw) / scale
