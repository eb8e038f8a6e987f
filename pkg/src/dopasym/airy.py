"""Airy functions Ai, Bi and derivatives for complex arguments.

Three zones, each chosen so no zone is asked for more accuracy than its
method can deliver:

* |z| <= 6: Maclaurin series summed in 80-bit extended precision; the
  cancellation in the decaying directions costs ~e^(2|zeta|) in units
  of the working epsilon, which extended precision keeps near 1e-12.
* 6 < |z| < 9: Taylor-series ODE continuation of y'' = z y inward along
  the ray from an asymptotic anchor at |z| = 12.  Moving inward the
  recessive solution grows, so the continuation is stable.
* |z| >= 9: the Poincare expansions with the standard u_k/v_k
  coefficient recurrences, truncated at the smallest term; outside
  |arg z| <= 2 pi/3 the argument is rotated with the connection
  identity y0 + y1 + y2 = 0 first.

Bi is assembled from Ai at the two rotated arguments, which is
cancellation-free everywhere Bi is dominant or comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_LD = np.clongdouble
_OMEGA = np.exp(2j * np.pi / 3.0)

#: Ai(0) = 3^(-2/3)/Gamma(2/3) and -Ai'(0) = 3^(-1/3)/Gamma(1/3).
_C1 = np.longdouble("0.35502805388781723926006318600418317639998")
_C2 = np.longdouble("0.25881940379280679840518356018920396347909")

_SERIES_RADIUS = 6.0
_ASYMPT_RADIUS = 9.0
_ANCHOR_RADIUS = 12.0
_CONTINUATION_STEP = 0.35
_TAYLOR_ORDER = 30


@dataclass(frozen=True)
class AiryValues:
    """Values of Ai, Ai', Bi, Bi' at one point."""

    ai: complex
    aip: complex
    bi: complex
    bip: complex

    def wronskian(self) -> complex:
        return self.ai * self.bip - self.aip * self.bi


def _maclaurin_ai(z: complex) -> tuple[complex, complex]:
    """(Ai, Ai') by the f/g series in extended precision."""
    zl = _LD(z)
    z3 = zl * zl * zl
    f = _LD(1.0)
    fp = _LD(0.0)
    tf = _LD(1.0)
    g = zl
    gp = _LD(1.0)
    tg = zl
    for k in range(1, 120):
        tf = tf * z3 / _LD(3 * k * (3 * k - 1))
        f += tf
        if zl != 0:
            fp += tf * _LD(3 * k) / zl
        tg = tg * z3 / _LD(3 * k * (3 * k + 1))
        g += tg
        if zl != 0:
            gp += tg * _LD(3 * k + 1) / zl
        if abs(tf) < 1e-25 * abs(f) and abs(tg) < 1e-25 * (abs(g) + 1e-30):
            break
    ai = complex(_C1 * f - _C2 * g)
    aip = complex(_C1 * fp - _C2 * gp)
    return ai, aip


def _asympt_ai_sector(z: complex) -> tuple[complex, complex]:
    """Poincare expansion, reliable for |arg z| <= 2 pi/3 and |z| >= ~9."""
    zeta = (2.0 / 3.0) * z ** 1.5
    pref = 1.0 / (2.0 * np.sqrt(np.pi) * z ** 0.25)
    prefp = -(z ** 0.25) / (2.0 * np.sqrt(np.pi))
    u = 1.0
    v = 1.0
    s_ai = 1.0 + 0.0j
    s_aip = 1.0 + 0.0j
    term_prev = 1.0
    inv = 1.0 / zeta
    acc = 1.0 + 0.0j
    for k in range(40):
        u_next = u * (6 * k + 1) * (6 * k + 5) / (72.0 * (k + 1))
        v_next = u_next * (6 * (k + 1) + 1) / (1.0 - 6 * (k + 1))
        acc = acc * (-inv)
        term_ai = u_next * acc
        term_aip = v_next * acc
        if abs(term_ai) > term_prev:
            break
        s_ai += term_ai
        s_aip += term_aip
        term_prev = abs(term_ai)
        u, v = u_next, v_next
        if term_prev < 1e-20 * abs(s_ai):
            break
    e = np.exp(-zeta)
    return pref * e * s_ai, prefp * e * s_aip


def _asympt_ai(z: complex) -> tuple[complex, complex]:
    if abs(np.angle(z)) <= 2.0 * np.pi / 3.0 + 1e-12:
        return _asympt_ai_sector(z)
    # rotate into the good sector: Ai(z) = -w Ai(wz) - w^2 Ai(w^2 z)
    a1, ap1 = _asympt_ai_sector(_OMEGA * z)
    a2, ap2 = _asympt_ai_sector(_OMEGA ** 2 * z)
    ai = -_OMEGA * a1 - _OMEGA ** 2 * a2
    aip = -_OMEGA ** 2 * ap1 - _OMEGA * ap2
    return ai, aip


def _continued_ai(z: complex) -> tuple[complex, complex]:
    """ODE continuation from the |z| = 12 anchor inward to z along the ray."""
    direction = z / abs(z) if z != 0 else 1.0
    w = _ANCHOR_RADIUS * direction
    y, yp = _asympt_ai(w)
    total = abs(w) - abs(z)
    steps = max(1, int(np.ceil(total / _CONTINUATION_STEP)))
    h = -direction * total / steps
    for _ in range(steps):
        d = np.empty(_TAYLOR_ORDER + 2, dtype=complex)
        d[0] = y
        d[1] = yp
        for k in range(_TAYLOR_ORDER):
            d[k + 2] = w * d[k] + (k * d[k - 1] if k >= 1 else 0.0)
        y_new = 0.0 + 0.0j
        yp_new = 0.0 + 0.0j
        hk = 1.0 + 0.0j
        fact = 1.0
        for k in range(_TAYLOR_ORDER + 1):
            y_new += d[k] * hk / fact
            if k + 1 <= _TAYLOR_ORDER + 1:
                yp_new += d[k + 1] * hk / fact
            hk *= h
            fact *= (k + 1)
        y, yp = y_new, yp_new
        w = w + h
    return y, yp


def _ai_core(z: complex) -> tuple[complex, complex]:
    r = abs(z)
    if r <= _SERIES_RADIUS:
        return _maclaurin_ai(z)
    if r >= _ASYMPT_RADIUS:
        return _asympt_ai(z)
    return _continued_ai(z)


def airy_eval(z) -> AiryValues:
    """Ai, Ai', Bi, Bi' at a real or complex scalar argument."""
    z = complex(z)
    ai, aip = _ai_core(z)
    b1, bp1 = _ai_core(_OMEGA * z)
    b2, bp2 = _ai_core(_OMEGA ** 2 * z)
    phase = np.exp(1j * np.pi / 6.0)
    bi = phase * b1 + np.conj(phase) * b2
    bip = (np.exp(5j * np.pi / 6.0) * bp1
           + np.exp(-5j * np.pi / 6.0) * bp2)
    if z.imag == 0.0:
        # real arguments have real values; kill rotation round-off
        ai, aip, bi, bip = (complex(v.real, 0.0) for v in (ai, aip, bi, bip))
    return AiryValues(ai, aip, bi, bip)


def ai(z) -> complex:
    return airy_eval(z).ai


def bi(z) -> complex:
    return airy_eval(z).bi


def airy_rotations(z) -> tuple[complex, complex, complex]:
    """(y0, y1, y2) = (Ai(z), w Ai(w z), w^2 Ai(w^2 z)); they sum to zero."""
    y0 = _ai_core(complex(z))[0]
    y1 = _OMEGA * _ai_core(_OMEGA * complex(z))[0]
    y2 = _OMEGA ** 2 * _ai_core(_OMEGA ** 2 * complex(z))[0]
    return y0, y1, y2
