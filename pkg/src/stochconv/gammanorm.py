"""gamma-radonifying norms of operators ``H -> l^q_d`` and of step processes.

The square-function norm ``||(sum_j |F h_j|^2)^{1/2}||_q`` is the deterministic
value; Gaussian sums ``(E||sum_j g_j F h_j||^2)^{1/2}`` estimated by Monte Carlo
serve as the cross-check.  For ``q >= 2`` the two are sandwiched by the
Gaussian moment constant ``kappa_q = (E|Z|^q)^{1/q}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from stochconv import rng
from stochconv.model import LqSpace, lq_norm
from stochconv.stats import Estimate, batch_means

MIN_SAMPLES = 1000


@dataclass(frozen=True, eq=False)
class GammaOperator:
    """Finite operator ``H -> l^q_d`` given by its ``d x m`` matrix in a basis of ``H``."""

    entries: np.ndarray
    codomain: LqSpace

    def __post_init__(self):
        f = np.asarray(self.entries)
        if f.ndim == 1:
            f = f[:, None]
        if f.ndim != 2:
            raise ValueError("entries must be a d x m matrix")
        if f.shape[0] != self.codomain.d:
            raise ValueError(f"operator has {f.shape[0]} rows, codomain dimension is {self.codomain.d}")
        object.__setattr__(self, "entries", f)

    @classmethod
    def rank_one(cls, h, x, q: float) -> "GammaOperator":
        """``h (x) x``: maps ``k -> <k, h> x``."""
        x = np.asarray(x)
        return cls(np.outer(x, np.conj(h)), LqSpace(q, x.size))

    @property
    def m(self) -> int:
        return self.entries.shape[1]

    def __mul__(self, c) -> "GammaOperator":
        return GammaOperator(self.entries * c, self.codomain)

    __rmul__ = __mul__


def gaussian_abs_moment(q: float) -> float:
    """``kappa_q = (E|Z|^q)^{1/q}`` for a standard normal ``Z``."""
    if q <= 0:
        raise ValueError("q must be positive")
    log_m = 0.5 * q * np.log(2.0) + gammaln(0.5 * (q + 1)) - 0.5 * np.log(np.pi)
    return float(np.exp(log_m / q))


def row_energy(ops, diagonal: bool = False) -> np.ndarray:
    """Per-coordinate ``sum_j |F_kj|^2``; ``ops`` has shape ``(..., d, m)`` or ``(..., d)`` if diagonal."""
    a = np.abs(np.asarray(ops))
    if diagonal:
        return a * a
    return np.sum(a * a, axis=-1)


def square_function_norm(F, q: float | None = None, diagonal: bool = False):
    """``(sum_k (sum_j |F_kj|^2)^{q/2})^{1/q}``; vectorized over leading axes."""
    if isinstance(F, GammaOperator):
        q = F.codomain.q if q is None else q
        F = F.entries
    if q is None:
        raise ValueError("q is required for raw arrays")
    if q < 1:
        raise ValueError("q must be ≥ 1")
    return lq_norm(np.sqrt(row_energy(F, diagonal)), q, axis=-1)


def gamma_norm_mc(F: GammaOperator, n: int, seed: int) -> Estimate:
    """``(E||F g||_q^2)^{1/2}`` over ``n`` standard Gaussian vectors ``g``."""
    if n < MIN_SAMPLES:
        raise ValueError(f"sample count {n} too small (need >= {MIN_SAMPLES})")
    g = rng.keyed_normals(seed, rng.GAMMA, np.arange(n), [0], np.arange(F.m))[:, 0, :]
    v = g @ F.entries.T
    sq = lq_norm(v, F.codomain.q) ** 2
    est = batch_means(sq)
    return Estimate(
        float(np.sqrt(est.value)),
        float(np.sqrt(max(est.ci_low, 0.0))),
        float(np.sqrt(est.ci_high)),
        n,
        "mc",
    )


@dataclass(frozen=True)
class StepProcessNorms:
    l2gamma: float
    fullgamma: Estimate


def _deterministic_ops(G):
    if G.is_strategy:
        raise ValueError("norm of a strategy-driven process is path dependent; use an ensemble")
    if G.grid.n_steps == 0:
        raise ValueError("empty grid")
    return G.ops


def process_l2gamma_norm(G, q: float | None = None) -> float:
    """``(sum_i dt_i ||G_i||_gamma^2)^{1/2}`` for a deterministic step process."""
    ops = _deterministic_ops(G)
    q = G.q if q is None else q
    sf = square_function_norm(ops, q, G.diagonal)
    return float(np.sqrt(np.sum(G.grid.steps * sf**2)))


def process_square_function_norm(G, q: float | None = None) -> float:
    """Square function over time and noise: ``||(sum_i dt_i sum_j |G_i h_j|^2)^{1/2}||_q``."""
    ops = _deterministic_ops(G)
    q = G.q if q is None else q
    energy = np.tensordot(G.grid.steps, row_energy(ops, G.diagonal), axes=(0, 0))
    return float(lq_norm(np.sqrt(energy), q))


def process_full_gamma_norm(G, n: int, seed: int, q: float | None = None) -> Estimate:
    """Gaussian-sum estimate of ``||G||_{gamma(L^2(0,T;H), X)}`` over the tensor basis of indicators."""
    if n < MIN_SAMPLES:
        raise ValueError(f"sample count {n} too small (need >= {MIN_SAMPLES})")
    ops = _deterministic_ops(G)
    q = G.q if q is None else q
    N = G.grid.n_steps
    sq = np.empty(n)
    root = np.sqrt(G.grid.steps)
    chunk = max(1, 200_000 // max(1, N * G.m))
    for start in range(0, n, chunk):
        idx = np.arange(start, min(n, start + chunk))
        g = rng.keyed_normals(seed, rng.GAMMA, idx, np.arange(N), np.arange(G.m))
        g = g * root[None, :, None]
        if G.diagonal:
            v = np.einsum("pik,ik->pk", g, np.broadcast_to(ops, (N, G.d)))
        else:
            v = np.einsum("pij,ikj->pk", g, np.broadcast_to(ops, (N, G.d, G.m)))
        sq[idx] = lq_norm(v, q) ** 2
    est = batch_means(sq)
    return Estimate(
        float(np.sqrt(est.value)),
        float(np.sqrt(max(est.ci_low, 0.0))),
        float(np.sqrt(est.ci_high)),
        n,
        "mc",
    )


def step_process_norms(G, n: int, seed: int, q: float | None = None) -> StepProcessNorms:
    return StepProcessNorms(process_l2gamma_norm(G, q), process_full_gamma_norm(G, n, seed, q))


def operator_norm(B: np.ndarray, q: float = 2.0, iters: int = 200, seed: int = 0) -> float:
    """``||B||_{l^q -> l^q}`` lower estimate by the nonlinear power method (exact for ``q = 2``)."""
    B = np.asarray(B)
    if q == 2:
        return float(np.linalg.norm(B, 2))
    qc = q / (q - 1)
    x = rng.normals(seed, rng.TEST, (B.shape[1],)) + 1.0
    x = x / lq_norm(x, q)
    best = 0.0
    for _ in range(iters):
        y = B @ x
        ny = float(lq_norm(y, q))
        best = max(best, ny)
        if ny == 0:
            break
        # dual map of y, pulled back through B^T, then dual map into l^q
        yd = np.abs(y / ny) ** (q - 1) * np.sign(y)
        z = B.conj().T @ yd
        nz = float(lq_norm(z, qc))
        if nz == 0:
            break
        x = np.abs(z / nz) ** (qc - 1) * np.sign(z)
        x = x / lq_norm(x, q)
    return best
