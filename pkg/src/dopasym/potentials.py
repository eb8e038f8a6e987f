"""Confining potentials V driving the lattice weight exp(-N*V(x)).

A potential is admissible when V is real analytic and V(x)/log(x^2+1)
diverges at infinity; for polynomial data this amounts to an even degree
and a positive leading coefficient.  Admissibility is checked both
symbolically (for polynomial coefficients) and on a numeric probe grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GrowthConditionError

#: Named presets, ascending-degree coefficient lists.
PRESETS = {
    "quadratic": [0.0, 0.0, 1.0],          # V(x) = x^2
    "strong-quadratic": [0.0, 0.0, 10.0],  # V(x) = 10 x^2, saturated core
    "mild-saturation": [0.0, 0.0, 6.0],    # V(x) = 6 x^2, wide bands + saturation
    "quartic": [0.0, 0.0, 0.0, 0.0, 1.0],  # V(x) = x^4
}


@dataclass(frozen=True)
class Potential:
    """Polynomial confining potential with evaluator and derivative.

    Immutable after construction; all methods are pure and safe to call
    concurrently.
    """

    coeffs: tuple[float, ...]
    name: str = "poly"
    _dcoeffs: tuple[float, ...] = field(init=False, repr=False)

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if len(coeffs) < 3 or coeffs[-1] == 0.0:
            raise GrowthConditionError(
                f"potential degree {len(coeffs) - 1} too low for confinement"
            )
        degree = len(coeffs) - 1
        if degree % 2 != 0 or coeffs[-1] <= 0.0:
            raise GrowthConditionError(
                "confinement requires even degree >= 2 with positive leading "
                f"coefficient, got degree {degree}, leading {coeffs[-1]}"
            )
        object.__setattr__(self, "coeffs", coeffs)
        dc = tuple(k * coeffs[k] for k in range(1, len(coeffs)))
        object.__setattr__(self, "_dcoeffs", dc)
        self._growth_probe()

    @classmethod
    def from_spec(cls, spec) -> "Potential":
        """Build from a preset name or an ascending coefficient list."""
        if isinstance(spec, str):
            if spec not in PRESETS:
                raise KeyError(f"unknown potential preset {spec!r}; "
                               f"known: {sorted(PRESETS)}")
            return cls(tuple(PRESETS[spec]), name=spec)
        return cls(tuple(spec))

    def __call__(self, x):
        return self.value(x)

    def value(self, x):
        """V(x), vectorized; accepts real or complex arguments."""
        x = np.asarray(x)
        out = np.zeros_like(x, dtype=np.result_type(x, float))
        for c in reversed(self.coeffs):
            out = out * x + c
        return out if out.shape else out[()]

    def derivative(self, x):
        """V'(x), vectorized."""
        x = np.asarray(x)
        out = np.zeros_like(x, dtype=np.result_type(x, float))
        for c in reversed(self._dcoeffs):
            out = out * x + c
        return out if out.shape else out[()]

    @property
    def is_even(self) -> bool:
        return all(c == 0.0 for c in self.coeffs[1::2])

    def _growth_probe(self, radii=(2.0, 4.0, 8.0, 16.0, 32.0), threshold=3.0):
        # V / log(x^2+1) must grow along the probe and clear the threshold
        # at the largest radii, on both ends of the axis.
        for sign in (1.0, -1.0):
            x = sign * np.asarray(radii)
            ratio = self.value(x) / np.log(x * x + 1.0)
            if not (np.all(np.diff(ratio) > 0.0) and ratio[-1] > threshold):
                raise GrowthConditionError(
                    "growth probe failed: V(x)/log(x^2+1) is not increasing "
                    f"beyond threshold {threshold} along x={sign:+.0f}*{list(radii)} "
                    f"(ratios {np.array2string(ratio, precision=3)})"
                )
