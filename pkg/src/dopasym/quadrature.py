"""Fixed-node quadrature helpers.

Gauss-Legendre for analytic integrands, Gauss-Jacobi for integrands
carrying (x-a)^(1/2) / (b-x)^(1/2) endpoint factors (the band-edge
behavior of equilibrium densities and of 1/sqrt(R) periods), and a
complex line-segment rule with a square-root substitution that absorbs
an inverse-square-root singularity at the starting endpoint.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=64)
def _gl_rule(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@lru_cache(maxsize=64)
def _jacobi_rule(n: int, alpha: float, beta: float):
    x, w = roots_jacobi(n, alpha, beta)
    return x, w


def quad_gl(f, a, b, n: int = 96):
    """Gauss-Legendre integral of a vectorized f over [a, b] (a, b may be complex)."""
    t, w = _gl_rule(n)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return half * np.sum(w * f(mid + half * t))

def quad_sqrt_weight(f, a, b, wa: float, wb: float, n: int = 96):
    """Integral over [a, b] of f(x) * (x-a)^wa * (b-x)^wb, wa/wb in {0, +-1/2}.

    ``f`` must be smooth on [a, b]; the endpoint weights (vanishing or
    integrable-singular square roots) are handled by the matching
    Gauss-Jacobi rule so no node lands on a singular point.
    """
    if wa == 0.0 and wb == 0.0:
        return quad_gl(f, a, b, n)
    t, w = _jacobi_rule(n, wb, wa)   # scipy weight: (1-t)^alpha (1+t)^beta
    half = 0.5 * (b - a)
    x = 0.5 * (a + b) + half * t
    return half ** (1.0 + wa + wb) * np.sum(w * f(x))


def quad_inv_sqrt(f, a, b, sing_a: bool, sing_b: bool, n: int = 96):
    """Integral over [a, b] of f(x) / sqrt((x-a)^sa (b-x)^sb) style kernels.

    Caller passes ``f`` as the full integrand TIMES the singular factors
    it wants absorbed, i.e. f must be the smooth part; ``sing_a``/``sing_b``
    mark which endpoints carry a 1/sqrt factor.
    """
    wa = -0.5 if sing_a else 0.0
    wb = -0.5 if sing_b else 0.0
    if wa == 0.0 and wb == 0.0:
        return quad_gl(f, a, b, n)
    t, w = _jacobi_rule(n, wb, wa)
    half = 0.5 * (b - a)
    x = 0.5 * (a + b) + half * t
    return half ** (1.0 + wa + wb) * np.sum(w * f(x))


def quad_segment(f, z0, z1, sqrt_at_start: bool = False, n: int = 96):
    """Path integral of f along the straight segment z0 -> z1.

    With ``sqrt_at_start`` the substitution z = z0 + (z1-z0) s^2 removes
    an integrable 1/sqrt(z - z0) endpoint singularity; f is evaluated
    only at interior points either way.
    """
    d = z1 - z0
    t, w = _gl_rule(n)
    if sqrt_at_start:
        s = 0.5 * (t + 1.0)          # s in (0, 1)
        z = z0 + d * s * s
        return np.sum(0.5 * w * f(z) * 2.0 * d * s)
    z = z0 + d * 0.5 * (t + 1.0)
    return 0.5 * d * np.sum(w * f(z))
