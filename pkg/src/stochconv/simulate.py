"""Cylindrical Wiener increments, Ito integrals and stochastic convolutions.

Three integrators share one stepping engine:

``ito``      partial sums ``sum_{i<=n} G_i dW_i`` (a discrete martingale);
``euler``    exponential Euler ``y_{i+1} = S(dt)(y_i + G_i dW_i)``, pathwise
             coupled to the same increments as ``ito``;
``exact``    exact-in-law sampling of the convolution at grid nodes for
             spectral generators (not coupled to ``dW``).

Strategy-driven integrands see only the process value at the left end of the
step (``rule(i, t, state)``), which is what makes them adapted.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from stochconv import rng
from stochconv.gammanorm import row_energy
from stochconv.model import Generator, LqSpace, MatrixGenerator, SpectralGenerator, lq_norm, semigroup_matrix

METHODS = ("ito", "euler", "exact")


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TimeGrid:
    nodes: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.nodes, dtype=float)
        if t.ndim != 1 or t.size < 1 or t[0] != 0.0:
            raise ValueError("grid must start at 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        object.__setattr__(self, "nodes", t)

    @classmethod
    def uniform(cls, T: float, N: int) -> "TimeGrid":
        if N < 1 or T <= 0:
            raise ValueError("uniform grid needs T > 0 and N >= 1")
        t = np.linspace(0.0, T, N + 1)
        t[-1] = T
        return cls(t)

    @property
    def n_steps(self) -> int:
        return self.nodes.size - 1

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    def refine(self, factor: int = 2) -> "TimeGrid":
        t = self.nodes
        frac = np.arange(factor) / factor
        fine = (t[:-1, None] + np.diff(t)[:, None] * frac[None, :]).ravel()
        fine = np.append(fine, t[-1])
        return TimeGrid(fine)

    def same_as(self, other: "TimeGrid") -> bool:
        return self.nodes.shape == other.nodes.shape and np.array_equal(self.nodes, other.nodes)


Rule = Callable[..., np.ndarray]


@dataclass(frozen=True, eq=False)
class StepProcess:
    """Step-constant operator-valued integrand on ``grid``.

    Operators are ``d x m`` matrices, or length-``d`` vectors when ``diagonal``
    (then ``m == d`` and noise ``j`` drives coordinate ``j`` only).
    """

    grid: TimeGrid
    d: int
    m: int
    diagonal: bool = False
    ops: Optional[np.ndarray] = None
    rule: Optional[Rule] = None
    q: float = 2.0
    name: str = "G"
    hold: int = 1
    _lookahead: bool = field(default=False, repr=False)

    def __post_init__(self):
        if (self.ops is None) == (self.rule is None):
            raise ValueError("give exactly one of ops or rule")
        if self.diagonal and self.m != self.d:
            raise ValueError("diagonal processes need m == d")
        if self.ops is not None:
            ops = np.asarray(self.ops)
            shape = (self.grid.n_steps, self.d) if self.diagonal else (self.grid.n_steps, self.d, self.m)
            if ops.shape != shape:
                raise ValueError(f"ops shape {ops.shape} != {shape}")
            object.__setattr__(self, "ops", ops)

    @classmethod
    def deterministic(cls, grid: TimeGrid, ops, diagonal: bool = False, q: float = 2.0, name: str = "G"):
        ops = np.asarray(ops)
        if diagonal:
            d = m = ops.shape[-1]
            if ops.ndim == 1:
                ops = np.broadcast_to(ops, (grid.n_steps, d)).copy()
        else:
            if ops.ndim == 2:
                ops = np.broadcast_to(ops, (grid.n_steps,) + ops.shape).copy()
            d, m = ops.shape[-2:]
        return cls(grid, d, m, diagonal, ops=ops, q=q, name=name)

    @classmethod
    def constant(cls, grid: TimeGrid, F, q: float = 2.0, name: str = "G"):
        F = np.atleast_2d(np.asarray(F))
        return cls.deterministic(grid, F, q=q, name=name)

    @classmethod
    def strategy(cls, grid: TimeGrid, rule: Rule, d: int, m: int, diagonal: bool = False,
                 q: float = 2.0, name: str = "G"):
        return cls(grid, d, m, diagonal, rule=rule, q=q, name=name)

    @property
    def is_strategy(self) -> bool:
        return self.rule is not None

    def operator(self, i: int, state: np.ndarray, peek: np.ndarray | None = None) -> np.ndarray:
        if self.ops is not None:
            return self.ops[i]
        t = self.grid.nodes[i]
        if self._lookahead:
            return np.asarray(self.rule(i // self.hold, t, state, peek=peek))
        return np.asarray(self.rule(i // self.hold, t, state))

    def scaled(self, c: float) -> "StepProcess":
        if self.ops is not None:
            return StepProcess(self.grid, self.d, self.m, self.diagonal, ops=self.ops * c, q=self.q,
                               name=self.name, hold=self.hold)
        rule = self.rule
        return StepProcess(self.grid, self.d, self.m, self.diagonal,
                           rule=lambda i, t, s, **kw: c * np.asarray(rule(i, t, s / c if c else s, **kw)),
                           q=self.q, name=self.name, hold=self.hold, _lookahead=self._lookahead)

    def refined(self, factor: int = 2) -> "StepProcess":
        """Same integrand on a ``factor``-times finer grid; strategies still decide at coarse nodes."""
        fine = self.grid.refine(factor)
        if self.ops is not None:
            return StepProcess(fine, self.d, self.m, self.diagonal, ops=np.repeat(self.ops, factor, axis=0),
                               q=self.q, name=self.name)
        return StepProcess(fine, self.d, self.m, self.diagonal, rule=self.rule, q=self.q, name=self.name,
                           hold=self.hold * factor, _lookahead=self._lookahead)

    def with_lookahead(self) -> "StepProcess":
        """Test-only backdoor: the rule also receives the increment of its own step."""
        if self.rule is None:
            raise ValueError("only strategies can peek")
        return StepProcess(self.grid, self.d, self.m, self.diagonal, rule=self.rule, q=self.q,
                           name=self.name + "+peek", hold=self.hold, _lookahead=True)

    def describe(self) -> dict:
        return {"name": self.name, "d": self.d, "m": self.m, "diagonal": self.diagonal,
                "kind": "strategy" if self.is_strategy else "deterministic",
                "T": self.grid.T, "N": self.grid.n_steps}


@dataclass(frozen=True, eq=False)
class WienerPath:
    increments: np.ndarray
    grid: TimeGrid
    seed: int
    path_index: int


def wiener_increments(grid: TimeGrid, m: int, seed: int, paths, step: int | None = None) -> np.ndarray:
    """Increments ``dW ~ N(0, dt I_m)``; shape ``(n, N, m)`` or ``(n, m)`` for one ``step``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    paths = np.atleast_1d(paths)
    if step is None:
        z = rng.keyed_normals(seed, rng.WIENER, paths, np.arange(grid.n_steps), np.arange(m))
        return z * np.sqrt(grid.steps)[None, :, None]
    z = rng.keyed_normals(seed, rng.WIENER, paths, [step], np.arange(m))[:, 0, :]
    return z * np.sqrt(grid.steps[step])


def sample_wiener(grid: TimeGrid, m: int, seed: int, path_index: int) -> WienerPath:
    inc = wiener_increments(grid, m, seed, [path_index])[0]
    return WienerPath(inc, grid, seed, path_index)


def _increment(ops: np.ndarray, dw: np.ndarray, diagonal: bool) -> np.ndarray:
    if diagonal:
        return ops * dw
    if ops.ndim == 2:
        return dw @ ops.T
    return np.einsum("nkj,nj->nk", ops, dw)


class _ExactKernel:
    """Per-step covariance factors of ``eta_k = int_0^dt e^{-mu_k s} dW(s)``."""

    def __init__(self, gen: SpectralGenerator):
        self.mu = gen.modes
        self.real = gen.is_real
        self.d = gen.d
        self.c = 1 if self.real else 2
        self._cache: dict[float, tuple] = {}

    @staticmethod
    def _E(nu: np.ndarray, dt: float) -> np.ndarray:
        # int_0^dt e^{-nu s} ds, stable for small nu
        nu = np.asarray(nu, dtype=complex)
        out = np.empty_like(nu)
        small = np.abs(nu * dt) < 1e-300
        out[small] = dt
        nz = ~small
        out[nz] = -np.expm1(-nu[nz] * dt) / nu[nz]
        return out

    def factors(self, dt: float):
        if dt in self._cache:
            return self._cache[dt]
        mu = self.mu
        s = mu[:, None] + mu[None, :]
        sc = mu[:, None] + mu.conj()[None, :]
        e_s = self._E(s, dt)
        e_sc = self._E(sc, dt)
        if self.real:
            K = e_s.real
        else:
            rr = 0.5 * (e_s + e_sc).real
            ii = 0.5 * (e_sc - e_s).real
            ri = 0.5 * (e_s - e_sc).imag
            K = np.block([[rr, ri], [ri.T, ii]])
        K = 0.5 * (K + K.T)
        w, V = np.linalg.eigh(K)
        L_full = V * np.sqrt(np.clip(w, 0.0, None))
        # per-mode marginal factors for diagonal integrands
        if self.real:
            L_diag = np.sqrt(np.clip(np.diag(K), 0.0, None))[:, None, None]
        else:
            d = self.d
            blocks = np.empty((d, 2, 2))
            for k in range(d):
                b = K[np.ix_([k, d + k], [k, d + k])]
                wb, Vb = np.linalg.eigh(b)
                blocks[k] = Vb * np.sqrt(np.clip(wb, 0.0, None))
            L_diag = blocks
        self._cache[dt] = (L_full, L_diag)
        return self._cache[dt]

    def noise(self, ops, diagonal: bool, m: int, dt: float, seed: int, paths, step: int) -> np.ndarray:
        L_full, L_diag = self.factors(dt)
        c, d = self.c, self.d
        if diagonal:
            z = rng.keyed_normals(seed, rng.EXACT, paths, [step], np.arange(d * c))[:, 0, :].reshape(-1, d, c)
            eta = np.einsum("kab,nkb->nka", L_diag, z)
            eta_c = eta[..., 0] if self.real else eta[..., 0] + 1j * eta[..., 1]
            return ops * eta_c
        z = rng.keyed_normals(seed, rng.EXACT, paths, [step], np.arange(m * d * c))[:, 0, :].reshape(-1, m, d * c)
        eta = z @ L_full.T
        eta_c = eta if self.real else eta[..., :d] + 1j * eta[..., d:]
        if ops.ndim == 2:
            return np.einsum("kj,njk->nk", ops, eta_c)
        return np.einsum("nkj,njk->nk", ops, eta_c)


def _step_matrices(gen, grid: TimeGrid):
    cache: dict[float, np.ndarray] = {}
    out = []
    for dt in grid.steps:
        key = float(dt)
        if key not in cache:
            if isinstance(gen, SpectralGenerator):
                f = np.exp(-gen.modes * dt)
                cache[key] = f.real if gen.is_real else f
            else:
                cache[key] = semigroup_matrix(gen, dt)
        out.append(cache[key])
    return out


def _run(gen: Optional[Generator], G: StepProcess, method: str, paths: np.ndarray, seed: int,
         qs: tuple, keep_paths: bool, noise: Optional[np.ndarray] = None) -> dict:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    grid = G.grid
    N, n, d = grid.n_steps, len(paths), G.d
    if gen is not None and gen.d != d:
        raise ValueError(f"generator dimension {gen.d} != process dimension {d}")
    if method == "exact" and not isinstance(gen, SpectralGenerator):
        raise TypeError("exact sampling needs a spectral generator")
    if method == "euler" and gen is None:
        raise ValueError("euler needs a generator")
    is_complex = gen is not None and isinstance(gen, SpectralGenerator) and not gen.is_real
    if isinstance(gen, MatrixGenerator) and np.iscomplexobj(gen.a):
        is_complex = True
    state = np.zeros((n, d), dtype=complex if is_complex else float)
    node = {q: np.zeros((n, N + 1)) for q in qs}
    l2 = {q: np.zeros(n) for q in qs}
    traj = np.zeros((n, N + 1, d), dtype=state.dtype) if keep_paths else None
    dts = grid.steps
    if method != "ito":
        steps = _step_matrices(gen, grid)
    if method == "exact":
        kernel = _ExactKernel(gen)
    ops = None
    for i in range(N):
        if method != "exact":
            dw = noise[:, i, :] if noise is not None else wiener_increments(grid, G.m, seed, paths, step=i)
        else:
            dw = None
        if ops is None or G.rule is None or i % G.hold == 0:
            ops = G.operator(i, state, peek=dw)
        energy = row_energy(ops, G.diagonal)
        for q in qs:
            l2[q] += dts[i] * lq_norm(np.sqrt(energy), q) ** 2
        if method == "ito":
            state = state + _increment(ops, dw, G.diagonal)
        elif method == "euler":
            y = state + _increment(ops, dw, G.diagonal)
            S = steps[i]
            state = y * S if S.ndim == 1 else y @ S.T
        else:
            state = steps[i] * state + kernel.noise(ops, G.diagonal, G.m, float(dts[i]), seed, paths, i)
        for q in qs:
            node[q][:, i + 1] = lq_norm(state, q)
        if keep_paths:
            traj[:, i + 1] = state
    for q in qs:
        l2[q] = np.broadcast_to(np.sqrt(l2[q]), (n,)).copy()
    return {"node": node, "l2": l2, "paths": traj}


def _single_path(gen, G: StepProcess, method: str, W: Optional[WienerPath], seed: int = 0, path_index: int = 0):
    if W is not None:
        if not W.grid.same_as(G.grid):
            raise GridMismatch("integrand and Wiener path live on different grids")
        if W.increments.shape[1] != G.m:
            raise ValueError("noise dimension mismatch")
        out = _run(gen, G, method, np.array([W.path_index]), W.seed, (G.q,), True, noise=W.increments[None])
    else:
        out = _run(gen, G, method, np.array([path_index]), seed, (G.q,), True)
    return out["paths"][0]


def ito_integral(G: StepProcess, W: WienerPath) -> np.ndarray:
    """Partial sums ``sum_{i<=n} G_i dW_i`` at every node, shape ``(N+1, d)``."""
    return _single_path(None, G, "ito", W)


def convolve_exponential_euler(gen: Generator, G: StepProcess, W: WienerPath) -> np.ndarray:
    """``y_{i+1} = S(dt_i)(y_i + G_i dW_i)``, coupled to ``W``."""
    return _single_path(gen, G, "euler", W)


def convolve_exact(gen: SpectralGenerator, G: StepProcess, seed: int, path_index: int = 0) -> np.ndarray:
    """Exact-in-law node values of the convolution for a spectral generator."""
    if not isinstance(gen, SpectralGenerator):
        raise TypeError("exact sampling needs a spectral generator")
    return _single_path(gen, G, "exact", None, seed, path_index)


def running_sup(path, norm) -> np.ndarray:
    """Max over grid nodes of ``||y(t_i)||_q``; ``path`` has shape ``(..., N+1, d)``."""
    q = norm.q if isinstance(norm, LqSpace) else float(norm)
    path = np.asarray(path)
    if path.shape[-2] == 0:
        raise ValueError("empty path")
    return lq_norm(path, q, axis=-1).max(axis=-1)


@dataclass(eq=False)
class PathEnsemble:
    """Monte-Carlo ensemble with per-path running suprema.

    ``node_norms[q]`` holds ``||y(t_i)||_q`` for every path and node, and
    ``l2gamma[q]`` the pathwise ``||G||_{L^2(R_+; gamma(H, l^q))}``.
    """

    method: str
    seed: int
    first_path: int
    grid: TimeGrid
    qs: tuple
    node_norms: dict
    l2gamma: dict
    descriptor: dict
    paths: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return next(iter(self.node_norms.values())).shape[0]

    def sup(self, q: float) -> np.ndarray:
        return self.node_norms[q].max(axis=1)

    def terminal(self, q: float) -> np.ndarray:
        return self.node_norms[q][:, -1]

    def to_csv(self, path, q: float) -> None:
        sup, term = self.sup(q), self.terminal(q)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path_index", "sup", "terminal_norm"])
            for k in range(self.n):
                w.writerow([self.first_path + k, repr(float(sup[k])), repr(float(term[k]))])

    def summary(self) -> dict:
        out = {"method": self.method, "seed": self.seed, "first_path": self.first_path, "n": self.n,
               "T": self.grid.T, "N": self.grid.n_steps, "process": self.descriptor, "norms": {}}
        for q in self.qs:
            s = self.sup(q)
            out["norms"][repr(float(q))] = {
                "mean_sup": float(s.mean()),
                "mean_terminal": float(self.terminal(q).mean()),
                "mean_l2gamma": float(self.l2gamma[q].mean()),
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2)


def simulate_ensemble(gen: Optional[Generator], G: StepProcess, n_paths: int, seed: int, method: str = "exact",
                      qs: tuple | None = None, workers: int = 1, batch_size: int = 2000,
                      keep_paths: bool = False, first_path: int = 0) -> PathEnsemble:
    """Simulate ``n_paths`` independent paths; results do not depend on ``workers`` or ``batch_size``."""
    if n_paths < 1:
        raise ValueError("need at least one path")
    qs = (G.q,) if qs is None else tuple(float(q) for q in qs)
    starts = list(range(first_path, first_path + n_paths, batch_size))
    chunks = [np.arange(s, min(s + batch_size, first_path + n_paths)) for s in starts]

    def work(idx):
        return _run(gen, G, method, idx, seed, qs, keep_paths)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    node = {q: np.concatenate([p["node"][q] for p in parts]) for q in qs}
    l2 = {q: np.concatenate([p["l2"][q] for p in parts]) for q in qs}
    traj = np.concatenate([p["paths"] for p in parts]) if keep_paths else None
    desc = G.describe()
    if gen is not None:
        desc["generator_d"] = gen.d
    return PathEnsemble(method, seed, first_path, G.grid, qs, node, l2, desc, traj)


def integrate_increments(gen: Optional[Generator], G: StepProcess, increments: np.ndarray, method: str = "euler",
                         qs: tuple | None = None, keep_paths: bool = False) -> dict:
    """Run ``ito`` or ``euler`` on given increments ``(n, N, m)``; for coupling across grids.

    Returns ``{"node": {q: (n, N+1)}, "l2": {q: (n,)}, "paths": (n, N+1, d) or None}``.
    """
    if method == "exact":
        raise ValueError("exact sampling draws its own noise")
    increments = np.asarray(increments, dtype=float)
    if increments.ndim != 3 or increments.shape[1:] != (G.grid.n_steps, G.m):
        raise GridMismatch("increments do not match the integrand grid")
    qs = (G.q,) if qs is None else tuple(float(q) for q in qs)
    return _run(gen, G, method, np.arange(increments.shape[0]), 0, qs, keep_paths, noise=increments)


def coarsen_increments(increments: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive blocks of ``factor`` steps: the same Brownian path on a coarser grid."""
    n, N, m = increments.shape
    if N % factor:
        raise GridMismatch(f"{N} steps are not divisible by {factor}")
    return increments.reshape(n, N // factor, factor, m).sum(axis=2)
