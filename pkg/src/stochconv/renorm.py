"""Smoothness of ``||x||_q^r`` and the contraction renorming of a semigroup.

The equivalent norm is

    |||x||| = || ( (int_0^inf |((-A)^{1/2} e^{tA} x)_k|^2 dt)^{1/2} )_k ||_q ,

for which ``|||S(s)x||| <= |||x|||`` because the inner integrals only lose
their initial segment ``[0, s)``.  Each inner integral is a Hermitian form
``x* Q_k x`` with ``A* Q_k + Q_k A = -r_k* r_k`` (``r_k`` the ``k``-th row of
``(-A)^{1/2}``); for ``q = 2`` the forms add up to one Lyapunov equation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.linalg as sla
from scipy.integrate import quad_vec

from stochconv import rng
from stochconv.model import (
    GeneratorError,
    MatrixGenerator,
    SpectralGenerator,
    as_matrix_generator,
    frac_power_matrix,
    lq_norm,
    semigroup_matrix,
)

LYAP_TOL = 1e-10


@dataclass(frozen=True)
class CrProbeResult:
    r: float
    q: float
    d: int
    n: int
    k1_hat: float
    k2_hat: float
    scale_residual: float


def _check_exponents(r: float, q: float) -> None:
    if q < 2:
        raise ValueError("q must be >= 2")
    if r < q:
        raise ValueError("C_r not guaranteed below q (need r >= q)")


def phi_derivatives(x, r: float, q: float):
    """``phi(x) = ||x||_q^r``, its gradient, and the Hessian as a bilinear form ``H(u, v)``.

    Real vectors only.  ``H`` accepts batches ``u, v`` of shape ``(..., d)``.
    """
    _check_exponents(r, q)
    x = np.asarray(x, dtype=float)
    N = float(lq_norm(x, q))
    if N == 0.0:
        zero = np.zeros_like(x)
        if r > 2:
            return 0.0, zero, lambda u, v: np.zeros(np.broadcast(np.asarray(u)[..., 0], np.asarray(v)[..., 0]).shape)
        # r == q == 2: phi = |x|^2 with constant Hessian 2<u, v>
        return 0.0, zero, lambda u, v: 2.0 * np.sum(np.asarray(u) * np.asarray(v), axis=-1)
    a = np.abs(x)
    s = np.sign(x)
    w = a ** (q - 1) * s  # derivative of |x_k|^q / q
    grad = r * N ** (r - q) * w
    # |x_k|^{q-2}; for q == 2 this is 1 even at zero coordinates
    curv = np.ones_like(a) if q == 2 else a ** (q - 2)
    c1 = r * (r - q) * N ** (r - 2 * q)
    c2 = r * (q - 1) * N ** (r - q)

    def hess(u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return c1 * (u @ w) * (v @ w) + c2 * np.sum(curv * u * v, axis=-1)

    return N**r, grad, hess


def hessian_matrix(x, r: float, q: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _, _, h = phi_derivatives(x, r, q)
    eye = np.eye(x.size)
    return np.array([[h(eye[i], eye[j]) for j in range(x.size)] for i in range(x.size)])


def _sphere_cloud(seed: int, offset: int, n: int, d: int, q: float) -> np.ndarray:
    z = rng.keyed_normals(seed, rng.CLOUD, np.arange(offset, offset + n), [0], np.arange(d))[:, 0, :]
    return z / lq_norm(z, q)[:, None]


def cr_bound_probe(r: float, q: float, d: int, n: int, seed: int, x_cloud: np.ndarray | None = None) -> CrProbeResult:
    """Empirical ``k1``, ``k2`` over random ``(x, u, v)`` on unit spheres of ``l^q_d``."""
    _check_exponents(r, q)
    if n < 1000:
        raise ValueError("need at least 1000 samples")
    X = _sphere_cloud(seed, 0, n, d, q) if x_cloud is None else np.asarray(x_cloud, dtype=float)
    norms = lq_norm(X, q)
    if np.all(norms < 1e-12):
        raise ValueError("degenerate sample: all points near the origin")
    X = X[norms >= 1e-12]
    U = _sphere_cloud(seed, n, X.shape[0], d, q)
    V = _sphere_cloud(seed, 2 * n, X.shape[0], d, q)
    qc = q / (q - 1)
    k1 = k2 = scale_res = 0.0
    c = np.exp(rng.keyed_normals(seed, rng.CLOUD, [3 * n], [0], np.arange(X.shape[0]))[0, 0])
    for i, x in enumerate(X):
        val, g, h = phi_derivatives(x, r, q)
        N = lq_norm(x, q)
        k1 = max(k1, float(lq_norm(g, qc) / N ** (r - 1)))
        uu = np.vstack([U[i], V[i], x / N])
        vv = np.vstack([V[i], V[i], x / N])
        k2 = max(k2, float(np.max(np.abs(h(uu, vv))) / N ** (r - 2)))
        v2, _, _ = phi_derivatives(c[i] * x, r, q)
        scale_res = max(scale_res, abs(v2 - c[i] ** r * val) / (c[i] ** r * val))
    return CrProbeResult(float(r), float(q), int(d), int(X.shape[0]), k1, k2, scale_res)


@dataclass(frozen=True, eq=False)
class RenormQ:
    """``|||x|||^2 = x* Q x`` with ``Q`` solving the Lyapunov equation (``q = 2``)."""

    generator: MatrixGenerator
    gram: np.ndarray
    residual: float

    def norm(self, x) -> np.ndarray:
        x = np.asarray(x)
        return np.sqrt(np.clip(np.einsum("...i,ij,...j->...", x.conj(), self.gram, x).real, 0.0, None))

    @property
    def q(self) -> float:
        return 2.0

    def equivalence(self) -> tuple[float, float]:
        """``(b, B)`` with ``b |||x||| <= ||x||_2 <= B |||x|||``."""
        w = np.linalg.eigvalsh(self.gram)
        return float(1.0 / np.sqrt(w[-1])), float(1.0 / np.sqrt(w[0]))


def _lyapunov(a: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, float]:
    # A* Q + Q A = -C via Bartels-Stewart on the Schur form
    Q = sla.solve_continuous_lyapunov(a.conj().T, -c)
    Q = 0.5 * (Q + Q.conj().T)
    res = float(np.linalg.norm(a.conj().T @ Q + Q @ a + c, 2))
    return Q, res


def lyapunov_renorm(gen) -> RenormQ:
    """Gram matrix of ``|||x|||^2 = int_0^inf ||(-A)^{1/2} e^{tA} x||^2 dt``."""
    try:
        mg = as_matrix_generator(gen)
    except GeneratorError:
        raise
    R = frac_power_matrix(mg, 0.5)
    C = R.conj().T @ R
    Q, res = _lyapunov(mg.a, C)
    if res > LYAP_TOL:
        raise ArithmeticError(f"Lyapunov residual {res:.2e} exceeds {LYAP_TOL}")
    if np.linalg.eigvalsh(Q)[0] <= 0:
        raise ArithmeticError("renorming Gram matrix is not positive definite")
    return RenormQ(mg, Q, res)


@dataclass(frozen=True, eq=False)
class SquareFunctionNorm:
    """``|||x||| = ||(sqrt(x* Q_k x))_k||_q`` for general ``q``."""

    generator: MatrixGenerator
    q: float
    grams: np.ndarray  # (d, d, d): one Hermitian form per coordinate
    residual: float

    def norm(self, x) -> np.ndarray:
        x = np.asarray(x)
        e = np.einsum("...i,kij,...j->...k", x.conj(), self.grams, x).real
        return lq_norm(np.sqrt(np.clip(e, 0.0, None)), self.q)


def square_function_renorm(gen, q: float) -> SquareFunctionNorm:
    mg = as_matrix_generator(gen)
    R = frac_power_matrix(mg, 0.5)
    grams = []
    worst = 0.0
    for k in range(mg.d):
        rk = R[k : k + 1, :]
        Qk, res = _lyapunov(mg.a, rk.conj().T @ rk)
        grams.append(Qk)
        worst = max(worst, res)
    if worst > LYAP_TOL:
        raise ArithmeticError(f"Lyapunov residual {worst:.2e} exceeds {LYAP_TOL}")
    return SquareFunctionNorm(mg, float(q), np.array(grams), worst)


def square_function_norm_quadrature(gen, q: float, x) -> float:
    """Same norm by adaptive ``t``-quadrature on ``[0, inf)`` (independent of the Lyapunov path)."""
    mg = as_matrix_generator(gen)
    R = frac_power_matrix(mg, 0.5)
    x = np.asarray(x)
    if isinstance(gen, SpectralGenerator):
        mu = gen.modes

        def f(t):
            return np.abs(R @ (np.exp(-mu * t) * x)) ** 2
    else:
        def f(t):
            return np.abs(R @ (sla.expm(t * mg.a) @ x)) ** 2

    val, _ = quad_vec(f, 0.0, np.inf, epsabs=1e-15, epsrel=1e-12, limit=2000)
    return float(lq_norm(np.sqrt(val), q))


Renorm = Union[RenormQ, SquareFunctionNorm]


def contractivity_check(gen, norm: Renorm, n: int, s_grid, seed: int) -> float:
    """Max over random ``x`` and ``s`` in ``s_grid`` of ``|||S(s)x||| / |||x|||``."""
    mg = as_matrix_generator(gen)
    if norm.generator.d != mg.d or not np.allclose(norm.generator.a, mg.a):
        raise ValueError("norm was built from a different generator")
    X = rng.keyed_normals(seed, rng.CLOUD, np.arange(n), [0, 1], np.arange(mg.d))
    X = X[:, 0, :] + (1j * X[:, 1, :] if np.iscomplexobj(mg.a) else 0.0)
    base = norm.norm(X)
    worst = 0.0
    for s in s_grid:
        Ss = semigroup_matrix(gen, float(s))
        worst = max(worst, float(np.max(norm.norm(X @ Ss.T) / base)))
    return worst


def random_sectorial_matrix(d: int, seed: int, index: int = 0, skew: float = 1.0) -> np.ndarray:
    """``A = -(H + K)`` with ``H`` symmetric positive definite and ``K`` skew; Hurwitz and sectorial."""
    z = rng.keyed_normals(seed, rng.TEST, [index], [0, 1], np.arange(d * d))[0]
    B = z[0].reshape(d, d)
    H = B @ B.T / d + 0.5 * np.eye(d)
    S = z[1].reshape(d, d)
    K = skew * (S - S.T) / np.sqrt(2 * d)
    return -(H + K)


def renorm_for(gen, q: float) -> Renorm:
    return lyapunov_renorm(gen) if q == 2 else square_function_renorm(gen, q)


PhiTriple = tuple[float, np.ndarray, Callable]
