"""Strategy families: the adapted integrands over which constants are probed.

Scalar members are rules ``g(i, t, s)`` on the current value ``s`` of the
process they drive.  They embed into ``l^q_d`` either as rank-one operators
``g * x`` (one noise, unit vector ``x``) or as ``d`` independent copies on the
diagonal.  The heat family drives the Dirichlet-Laplacian surrogate with a
``1/k`` noise profile and indexes its members by switching frequency.
"""

from __future__ import annotations

import numpy as np

from stochconv.model import lq_norm
from stochconv.simulate import StepProcess, TimeGrid

SCALAR_MEMBERS = ("constant", "oscillatory", "random-sign", "stop-loss")
HEAT_KINDS = ("oscillatory", "random-sign", "stop-loss", "rank-varying")
HEAT_FREQUENCIES = (1, 2, 4, 8, 16)


def _sign(s: np.ndarray) -> np.ndarray:
    return np.where(np.real(s) >= 0, 1.0, -1.0)


def scalar_rule(name: str, grid: TimeGrid, level: float = 1.0):
    """Rule returning the scalar integrand value(s) for the current state(s)."""
    T = grid.T
    if name == "constant":
        return lambda i, t, s: np.ones(np.shape(s))
    if name == "oscillatory":
        return lambda i, t, s: np.full(np.shape(s), 1.0 + 0.5 * np.sin(6.0 * np.pi * t / T))
    if name == "random-sign":
        return lambda i, t, s: _sign(s)
    if name == "stop-loss":
        return lambda i, t, s: np.where(np.abs(s) < level, 1.0, 0.0)
    raise ValueError(f"unknown scalar member {name!r}")


def scalar_family(grid: TimeGrid, members=SCALAR_MEMBERS) -> dict:
    out = {}
    for name in members:
        rule = scalar_rule(name, grid)
        out[name] = StepProcess.strategy(grid, lambda i, t, s, r=rule: r(i, t, s)[..., None], d=1, m=1,
                                         q=2.0, name=name)
    return out


def embed_rank_one(name: str, grid: TimeGrid, d: int, q: float) -> StepProcess:
    """``G = g(s) x (x) e_1`` with ``x`` flat and ``||x||_q = 1``; ``s`` is recovered from coordinate 0."""
    x = np.full(d, d ** (-1.0 / q))
    rule = scalar_rule(name, grid)

    def op(i, t, state):
        s = np.real(state[:, 0]) / x[0]
        g = rule(i, t, s)
        return g[:, None, None] * x[None, :, None]

    return StepProcess.strategy(grid, op, d=d, m=1, q=q, name=f"{name}/rank-one")


def embed_diagonal(name: str, grid: TimeGrid, d: int, q: float) -> StepProcess:
    """``d`` independent copies of the scalar strategy, one per coordinate and noise."""
    rule = scalar_rule(name, grid)
    return StepProcess.strategy(grid, lambda i, t, s: rule(i, t, np.real(s)), d=d, m=d, diagonal=True, q=q,
                                name=f"{name}/diagonal")


def embedded_family(grid: TimeGrid, d: int, q: float, members=SCALAR_MEMBERS) -> dict:
    out = {}
    for name in members:
        out[f"{name}/rank-one"] = embed_rank_one(name, grid, d, q)
        out[f"{name}/diagonal"] = embed_diagonal(name, grid, d, q)
    return out


def heat_profile(d: int, q: float = 2.0) -> np.ndarray:
    """``f_k proportional to 1/k``, normalized so ``||diag(f)||_{gamma(H, l^q)} = 1``."""
    f = 1.0 / np.arange(1, d + 1)
    return f / lq_norm(f, q)


def heat_member(kind: str, freq: int, grid: TimeGrid, d: int, q_profile: float = 2.0,
                level: float = 0.3) -> StepProcess:
    """One heat-family member; decisions are taken at block starts, ``2 * freq`` blocks over the grid."""
    N = grid.n_steps
    blocks = 2 * freq
    if N % blocks:
        raise ValueError(f"{N} steps cannot be split into {blocks} blocks")
    per = N // blocks
    f = heat_profile(d, q_profile)
    name = f"{kind}@{freq}"
    if kind == "oscillatory":
        signs = np.repeat((-1.0) ** np.arange(blocks), per)
        return StepProcess.deterministic(grid, signs[:, None] * f[None, :], diagonal=True, name=name)
    if kind == "rank-varying":
        ranks = np.maximum(1, d >> (np.arange(blocks) % 3))
        mask = (np.arange(d)[None, :] < ranks[:, None]).astype(float)
        return StepProcess.deterministic(grid, np.repeat(mask, per, axis=0) * f[None, :], diagonal=True, name=name)
    if kind == "random-sign":
        rule = lambda b, t, s: _sign(s[:, :1]) * f[None, :]  # noqa: E731
    elif kind == "stop-loss":
        rule = lambda b, t, s: np.where(lq_norm(s, 2.0)[:, None] < level, 1.0, 0.25) * f[None, :]  # noqa: E731
    else:
        raise ValueError(f"unknown heat member kind {kind!r}")
    return StepProcess(grid, d, d, True, rule=rule, q=q_profile, name=name, hold=per)


def heat_family(grid: TimeGrid, d: int, kinds=HEAT_KINDS, freqs=HEAT_FREQUENCIES) -> list[tuple[int, StepProcess]]:
    """Members ordered by frequency index; returns ``(frequency, process)`` pairs."""
    return [(fr, heat_member(kind, fr, grid, d)) for fr in freqs for kind in kinds]
