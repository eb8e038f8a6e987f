"""Extended-precision Gram-Schmidt reference for small instances.

Independent oracle for the Stieltjes engine: orthogonalizes the monomial
basis over the same truncated lattice in mpmath arithmetic, never using
the three-term recurrence.  Intended for N <= 8, n <= 8 desk checks.
"""

from __future__ import annotations

import mpmath as mp

from .lattice import LatticeSpec


def gram_schmidt_reference(lattice: LatticeSpec, n_max: int, dps: int = 50):
    """Norms and recurrence data via classical Gram-Schmidt on monomials.

    Returns
    -------
    (h, beta, gamma2) : tuple of lists of float
        ``h[n]`` and ``beta[n]`` for n = 0..n_max, ``gamma2[n]`` for
        n = 1..n_max (index 0 set to 0.0).
    """
    with mp.workdps(dps):
        xs = [mp.mpf(k) / lattice.N
              for k in range(-int(lattice.radius * lattice.N + 1e-9),
                             int(lattice.radius * lattice.N + 1e-9) + 1)]
        coeffs = [mp.mpf(c) for c in lattice.potential.coeffs]
        ws = []
        for x in xs:
            v = mp.mpf(0)
            for c in reversed(coeffs):
                v = v * x + c
            ws.append(mp.e ** (-lattice.N * v))

        def dot(u, v):
            return mp.fsum(ui * vi * wi for ui, vi, wi in zip(u, v, ws))

        basis = []          # values of Q_0..Q_n on the nodes
        h = []
        for j in range(n_max + 1):
            q = [x ** j for x in xs]
            for k in range(j):
                c = dot(q, basis[k]) / h[k]
                q = [qi - c * bi for qi, bi in zip(q, basis[k])]
            basis.append(q)
            hj = dot(q, q)
            if hj <= 0:
                raise ArithmeticError(f"Gram-Schmidt norm loss at degree {j}")
            h.append(hj)

        beta = []
        for j in range(n_max + 1):
            xq = [x * qi for x, qi in zip(xs, basis[j])]
            beta.append(dot(xq, basis[j]) / h[j])
        gamma2 = [mp.mpf(0)] + [h[j] / h[j - 1] for j in range(1, n_max + 1)]
        return ([float(v) for v in h],
                [float(v) for v in beta],
                [float(v) for v in gamma2])
