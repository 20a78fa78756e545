"""Desk-scale laboratory for stochastic convolutions driven by cylindrical noise.

Simulates ``S<>G(t) = int_0^t S(t-s) G(s) dW_H(s)`` for finite-dimensional
surrogates of sectorial generators on ``l^q_d`` and checks maximal
inequalities, exponential tail bounds, dilation identities, renormings and
Burkholder-Davis-Gundy constants statistically.
"""

from stochconv.model import (
    LqSpace,
    MatrixGenerator,
    SpectralGenerator,
    frac_power_apply,
    heat_generator,
    sectorial_angle,
    semigroup_apply,
)

__all__ = [
    "LqSpace",
    "MatrixGenerator",
    "SpectralGenerator",
    "frac_power_apply",
    "heat_generator",
    "sectorial_angle",
    "semigroup_apply",
]

__version__ = "0.1.0"
