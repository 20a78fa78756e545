"""State spaces ``l^q_d``, generators, semigroups and fractional powers.

Two generator kinds are supported:

* :class:`SpectralGenerator` -- ``A = -diag(mu_k)`` with ``Re mu_k > 0``; the
  semigroup acts per mode.
* :class:`MatrixGenerator` -- a dense Hurwitz matrix ``A``; matrix functions go
  through the complex Schur form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq


class GeneratorError(ValueError):
    """A generator fails a structural requirement (Hurwitz, sectoriality)."""


class MatrixFunctionError(ArithmeticError):
    """A matrix function could not be evaluated to the required accuracy."""


DEFECT_TOL = 1e-10
HALF_PI = 0.5 * np.pi


@dataclass(frozen=True)
class LqSpace:
    q: float
    d: int

    def __post_init__(self):
        if not np.isfinite(self.q) or self.q < 1:
            raise ValueError(f"q must be ≥ 1 (got {self.q})")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer (got {self.d})")

    def norm(self, x, axis: int = -1) -> np.ndarray:
        return lq_norm(x, self.q, axis=axis)

    @property
    def conjugate(self) -> float:
        return np.inf if self.q == 1 else self.q / (self.q - 1)


def lq_norm(x, q: float, axis: int = -1):
    """``(sum_k |x_k|^q)^(1/q)`` along ``axis`` (``q = inf`` gives the max)."""
    a = np.abs(np.asarray(x))
    if q == np.inf:
        return a.max(axis=axis)
    if q == 2:
        return np.sqrt(np.sum(a * a, axis=axis))
    # rescale to avoid overflow for large q
    scale = a.max(axis=axis, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    out = np.sum((a / safe) ** q, axis=axis) ** (1.0 / q) * np.squeeze(safe, axis=axis)
    return out


@dataclass(frozen=True, eq=False)
class SpectralGenerator:
    """``A = -diag(modes)`` on ``l^q_d``."""

    modes: np.ndarray
    space: LqSpace = None
    angle_bound: float = HALF_PI

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.modes, dtype=complex))
        if mu.ndim != 1 or mu.size == 0:
            raise GeneratorError("modes must be a nonempty 1-d list")
        if np.any(mu.real <= 0):
            raise GeneratorError("all modes need Re mu > 0")
        if np.max(np.abs(np.angle(mu))) >= min(self.angle_bound, HALF_PI):
            raise GeneratorError("mode arguments must stay below the angle bound < pi/2")
        object.__setattr__(self, "modes", mu)
        if self.space is None:
            object.__setattr__(self, "space", LqSpace(2.0, mu.size))
        elif self.space.d != mu.size:
            raise GeneratorError(f"space dimension {self.space.d} != number of modes {mu.size}")

    @property
    def d(self) -> int:
        return self.modes.size

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.modes.imag == 0))

    @property
    def matrix(self) -> np.ndarray:
        a = np.diag(-self.modes)
        return a.real.copy() if self.is_real else a

    def resolvent_norm(self, lam: complex) -> float:
        """Operator 2-norm of ``(lam I - A)^{-1}``."""
        gap = np.abs(lam + self.modes)
        if np.any(gap == 0):
            return np.inf
        return float(1.0 / gap.min())


@dataclass(frozen=True, eq=False)
class MatrixGenerator:
    """Dense generator matrix ``a``; must be Hurwitz."""

    a: np.ndarray
    space: LqSpace = None

    def __post_init__(self):
        a = np.asarray(self.a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GeneratorError("generator matrix must be square")
        a = a.astype(complex if np.iscomplexobj(a) else float)
        if np.max(np.linalg.eigvals(a).real) >= 0:
            raise GeneratorError("generator is not Hurwitz")
        object.__setattr__(self, "a", a)
        if self.space is None:
            object.__setattr__(self, "space", LqSpace(2.0, a.shape[0]))
        elif self.space.d != a.shape[0]:
            raise GeneratorError(f"space dimension {self.space.d} != matrix size {a.shape[0]}")

    @property
    def d(self) -> int:
        return self.a.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self.a

    def resolvent_norm(self, lam: complex) -> float:
        m = lam * np.eye(self.d) - self.a
        s = np.linalg.svd(m, compute_uv=False)
        return np.inf if s[-1] == 0 else float(1.0 / s[-1])


Generator = Union[SpectralGenerator, MatrixGenerator]


def heat_generator(d: int, q: float = 2.0) -> SpectralGenerator:
    """Dirichlet-Laplacian surrogate: ``mu_k = k^2``, ``k = 1..d``."""
    k = np.arange(1, d + 1, dtype=float)
    return SpectralGenerator(k * k, LqSpace(q, d))


def _check_vector(gen: Generator, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-1:] != (gen.d,):
        raise ValueError(f"dimension mismatch: expected trailing size {gen.d}, got shape {x.shape}")
    return x


def semigroup_apply(gen: Generator, t: float, x) -> np.ndarray:
    """``e^{tA} x``; ``x`` may carry leading batch axes."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    x = _check_vector(gen, x)
    if isinstance(gen, SpectralGenerator):
        f = np.exp(-gen.modes * t)
        if gen.is_real:
            f = f.real
        return x * f
    s = sla.expm(t * gen.a)
    return x @ s.T


def semigroup_matrix(gen: Generator, t: float) -> np.ndarray:
    if isinstance(gen, SpectralGenerator):
        f = np.exp(-gen.modes * t)
        return np.diag(f.real if gen.is_real else f)
    return sla.expm(t * gen.a)


def _schur_power(b: np.ndarray, alpha: float) -> np.ndarray:
    t, z = sla.schur(b.astype(complex), output="complex")
    off = np.triu(t, 1)
    scale = max(np.abs(t).max(), 1.0)
    if np.abs(off).max() <= DEFECT_TOL * scale:
        # numerically normal: diagonal power is exact
        f = np.diag(np.diag(t) ** alpha)
        out = z @ f @ z.conj().T
    else:
        out = sla.fractional_matrix_power(b, alpha)
        if not np.all(np.isfinite(out)):
            raise MatrixFunctionError("fractional power is not finite")
        n = round(1.0 / alpha)
        if abs(n * alpha - 1.0) < 1e-14 and n <= 8:
            resid = np.linalg.norm(np.linalg.matrix_power(out, n) - b) / np.linalg.norm(b)
            if resid > 1e3 * DEFECT_TOL:
                raise MatrixFunctionError(
                    f"fractional power residual {resid:.2e} exceeds tolerance; matrix too defective"
                )
    if not np.iscomplexobj(b) and np.abs(out.imag).max() <= 1e-12 * max(np.abs(out).max(), 1.0):
        out = out.real
    return out


def frac_power_matrix(gen: Generator, alpha: float) -> np.ndarray:
    """Dense ``(-A)^alpha`` (principal branch)."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if isinstance(gen, SpectralGenerator):
        f = gen.modes**alpha
        return np.diag(f.real if gen.is_real else f)
    if alpha == 1:
        return -gen.a
    return _schur_power(-gen.a, alpha)


def frac_power_apply(gen: Generator, alpha: float, x) -> np.ndarray:
    """``(-A)^alpha x``."""
    x = _check_vector(gen, x)
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if isinstance(gen, SpectralGenerator):
        f = gen.modes**alpha
        return x * (f.real if gen.is_real else f)
    return x @ frac_power_matrix(gen, alpha).T


def _rotated_top(b: np.ndarray, phi: float) -> float:
    # largest eigenvalue of Im-part of e^{-i phi} b: positive iff W(b) pokes above the ray at angle phi
    c = np.exp(-1j * phi) * b
    h = (c - c.conj().T) / 2j
    return float(np.linalg.eigvalsh(h)[-1])


def numerical_range_angle(b: np.ndarray) -> float:
    """Half-opening angle of the smallest sector around ``R_+`` containing ``W(b)``."""
    b = np.asarray(b, dtype=complex)
    herm = (b + b.conj().T) / 2
    if np.linalg.eigvalsh(herm)[0] <= 0:
        raise GeneratorError("not sectorial of angle < pi/2: numerical range touches the closed left half-plane")

    def upper(phi):
        return _rotated_top(b, phi)

    def lower(phi):
        return _rotated_top(b.conj(), phi)

    angles = []
    for f in (upper, lower):
        if f(0.0) <= 0:
            angles.append(0.0)
        else:
            angles.append(brentq(f, 0.0, HALF_PI, xtol=1e-15, rtol=1e-15))
    return max(angles)


def sectorial_angle(gen: Generator) -> float:
    """Sector half-angle of ``-A``: exact for spectral generators, numerical range otherwise."""
    if isinstance(gen, SpectralGenerator):
        return float(np.max(np.abs(np.angle(gen.modes))))
    return numerical_range_angle(-gen.a)


def require_sectorial(gen: Generator) -> float:
    """Gate for convolution experiments: Hurwitz and sector angle below pi/2."""
    ang = sectorial_angle(gen)
    if not ang < HALF_PI:
        raise GeneratorError("not sectorial of angle < pi/2")
    return ang


def as_matrix_generator(gen: Generator) -> MatrixGenerator:
    if isinstance(gen, MatrixGenerator):
        return gen
    return MatrixGenerator(gen.matrix, gen.space)


@dataclass(frozen=True)
class GeneratorSpec:
    """Config-level description of a generator."""

    kind: str = "spectral"
    preset: str | None = "heat"
    d: int = 8
    eigenvalues: tuple = field(default_factory=tuple)
    entries: tuple = field(default_factory=tuple)

    def build(self, q: float = 2.0) -> Generator:
        if self.kind == "spectral":
            if self.eigenvalues:
                mu = np.asarray([complex(v) for v in self.eigenvalues])
                return SpectralGenerator(mu, LqSpace(q, mu.size))
            if self.preset == "heat":
                return heat_generator(self.d, q)
            raise GeneratorError(f"unknown spectral preset {self.preset!r}")
        if self.kind == "matrix":
            vals = np.asarray([complex(v) for v in self.entries])
            n = int(round(np.sqrt(vals.size)))
            if n * n != vals.size or n == 0:
                raise GeneratorError("matrix entries must form a nonempty square (row-major)")
            a = vals.reshape(n, n)
            if np.all(a.imag == 0):
                a = a.real
            return MatrixGenerator(a, LqSpace(q, n))
        raise GeneratorError(f"unknown generator kind {self.kind!r}")
