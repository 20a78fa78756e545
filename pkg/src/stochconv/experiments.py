"""Experiment runners, one per config kind, and the acceptance suite.

Each runner maps an :class:`ExperimentConfig` to a :class:`Result` holding
check records and CSV tables.  Check names start with the tag of the
acceptance criterion they serve (``A01`` ... ``A12``).
"""

from __future__ import annotations

import fnmatch
from dataclasses import replace
from math import gamma, sqrt

import numpy as np

from stochconv import dilation, estimators as est, families, renorm, rng
from stochconv.config import ConfigError, ExperimentConfig
from stochconv.model import GeneratorSpec, MatrixGenerator, SpectralGenerator, heat_generator, lq_norm
from stochconv.report import Result, Table, check
from stochconv.simulate import (
    StepProcess,
    TimeGrid,
    coarsen_increments,
    integrate_increments,
    simulate_ensemble,
    wiener_increments,
)
from stochconv.stats import Estimate, batch_means, batch_split, batch_statistic

SLACK = est.SLACK
REPLICATES = 20  # batches for intervals on derived (nonlinear) statistics

# Ensembles shared between experiments within one process (bdg/embedded and interp);
# keys exclude the worker count, which never changes results.
_CACHE: dict = {}


def clear_cache() -> None:
    _CACHE.clear()


def _ci(e: Estimate):
    return (e.ci_low, e.ci_high)


def _replicated(stat, arrays: list, n_batches: int = REPLICATES) -> Estimate:
    """Point value of ``stat(*arrays)`` with an interval from contiguous batch replicates."""
    n = arrays[0].shape[0]
    labels = batch_split(n, n_batches)
    reps = np.array([stat(*[a[labels == b] for a in arrays]) for b in range(n_batches)])
    return batch_statistic(reps, float(stat(*arrays)), n)


def _moment_ratio(num: np.ndarray, den: np.ndarray, p: float) -> float:
    return float((np.mean(num**p) / np.mean(den**p)) ** (1.0 / p))


def _modulated_operator(grid: TimeGrid, d: int, seed: int) -> StepProcess:
    """Deterministic full-rank ``G(t) = F (1 + sin(2 pi t)/2)`` with a fixed Gaussian ``F``."""
    F = rng.keyed_normals(seed, rng.TEST, [0], [0], np.arange(d * d))[0, 0].reshape(d, d) / sqrt(d)
    mod = 1.0 + 0.5 * np.sin(2.0 * np.pi * grid.nodes[:-1] / grid.T)
    return StepProcess.deterministic(grid, mod[:, None, None] * F[None], name=f"modulated-l2-{d}")


# ----------------------------------------------------------------------------- bdg


def _bdg_deterministic(cfg: ExperimentConfig, workers: int) -> Result:
    res = Result()
    grid = TimeGrid.uniform(cfg.T, cfg.N)
    width = cfg.threshold("isometry_ci_width", 0.02)
    gauss_tol = cfg.threshold("gaussian_moment_rel", 0.02)
    scalar = StepProcess.constant(grid, [[1.0]], name="constant")
    ens = simulate_ensemble(None, scalar, cfg.paths, cfg.seed, "ito", workers=workers)
    r = est.bdg_ratio_from_ensemble(ens, 2.0, 2.0)
    res.checks.append(check("A01/ito-isometry/scalar", r.value, {"covers": 1.0, "max_ci_width": width},
                            r.covers(1.0) and r.ci_high - r.ci_low <= width, "mc", _ci(r)))
    Gl2 = _modulated_operator(grid, cfg.d, cfg.seed)
    ens2 = simulate_ensemble(None, Gl2, cfg.paths, cfg.seed, "ito", qs=(2.0,), workers=workers)
    r2 = est.bdg_ratio_from_ensemble(ens2, 2.0, 2.0)
    res.checks.append(check(f"A01/ito-isometry/l2-{cfg.d}", r2.value, {"covers": 1.0, "max_ci_width": width},
                            r2.covers(1.0) and r2.ci_high - r2.ci_low <= width, "mc", _ci(r2)))
    target = 3.0**0.25 * sqrt(cfg.T)
    m4 = est.estimate_pth_moment(ens.terminal(2.0), 4.0)
    res.checks.append(check("A02/gaussian-fourth-moment", m4.value, {"target": target, "rel_tol": gauss_tol},
                            abs(m4.value - target) <= gauss_tol * target, "mc", (m4.ci_low, m4.ci_high)))
    return res


def _scalar_ratios(N: int, T: float, n: int, seed: int, workers: int) -> dict:
    """``{(member, p): Estimate}`` for the scalar family at ``p`` in 2, 4, 8, 16."""
    key = ("scalar", N, T, n, seed)
    if key not in _CACHE:
        grid = TimeGrid.uniform(T, N)
        out = {}
        for name, G in families.scalar_family(grid).items():
            ens = simulate_ensemble(None, G, n, seed, "ito", workers=workers)
            for p in (2.0, 4.0, 8.0, 16.0):
                out[(name, p)] = est.bdg_ratio_from_ensemble(ens, p, 2.0)
        _CACHE[key] = out
    return _CACHE[key]


def _embedded_ratios(N: int, T: float, d: int, n: int, seed: int, workers: int) -> dict:
    """``{(member, p, q): Estimate}`` for the scalar family embedded in ``l^q_d``, q in 2, 3, 4."""
    key = ("embedded", N, T, d, n, seed)
    if key not in _CACHE:
        grid = TimeGrid.uniform(T, N)
        qs = (2.0, 3.0, 4.0)
        out = {}
        for name, G in families.embedded_family(grid, d, 2.0).items():
            ens = simulate_ensemble(None, G, n, seed, "ito", qs=qs, workers=workers)
            for q in qs:
                for p in (4.0, 8.0):
                    out[(name, p, q)] = est.bdg_ratio_from_ensemble(ens, p, q)
        _CACHE[key] = out
    return _CACHE[key]


def _k_hat_scalar(ratios: dict, p: float) -> est.KHat:
    return est.k_hat_from_ratios({m: r for (m, pp), r in ratios.items() if pp == p}, p, 2.0)


def _k_hat_embedded(ratios: dict, p: float, q: float) -> est.KHat:
    return est.k_hat_from_ratios({m: r for (m, pp, qq), r in ratios.items() if pp == p and qq == q}, p, q)


def _bdg_scalar(cfg: ExperimentConfig, workers: int) -> Result:
    res = Result()
    ratios = _scalar_ratios(cfg.N, cfg.T, cfg.paths, cfg.seed, workers)
    ps = [p for p in (2.0, 4.0, 8.0, 16.0) if p in cfg.p] or [2.0, 4.0, 8.0, 16.0]
    khats = {p: _k_hat_scalar(ratios, p) for p in ps}
    table = Table("p_grid", ["p", "member", "ratio", "ci_low", "ci_high", "k_hat"])
    for p in ps:
        for (m, pp), r in sorted(ratios.items()):
            if pp == p:
                table.rows.append([p, m, r.value, r.ci_low, r.ci_high, khats[p].value])
    res.tables.append(table)
    if 2.0 in khats:
        cover = all(r.covers(1.0) for (m, pp), r in ratios.items() if pp == 2.0)
        k2 = khats[2.0]
        best = k2.members[k2.argmax]
        res.checks.append(check("A07/isometry-anchor/p2", best.value, {"covers": 1.0}, cover, "mc", _ci(best),
                                k_hat=k2.value))
    if len(ps) >= 4:
        lo, hi = cfg.threshold("sqrt_slope_min", 0.3), cfg.threshold("sqrt_slope_max", 0.7)
        slope = est.sqrt_growth_slope(ps, [khats[p].value for p in ps])
        res.checks.append(check("A07/sqrt-growth-slope", slope.slope, [lo, hi], lo <= slope.slope <= hi, "mc",
                                (slope.ci_low, slope.ci_high), k_hat={repr(p): khats[p].value for p in ps}))
    return res


def _bdg_embedded(cfg: ExperimentConfig, workers: int) -> Result:
    res = Result()
    sc = _scalar_ratios(cfg.N, cfg.T, cfg.paths, cfg.seed, workers)
    em = _embedded_ratios(cfg.N, cfg.T, cfg.d, cfg.paths, cfg.seed, workers)
    table = Table("p_grid", ["p", "q", "k_hat_lq", "half_width_lq", "k_hat_scalar", "half_width_scalar"])
    for p, q in ((4.0, 2.0), (4.0, 4.0), (8.0, 4.0)):
        kx, kr = _k_hat_embedded(em, p, q), _k_hat_scalar(sc, p)
        ci = sqrt(kx.half_width**2 + kr.half_width**2)
        diff = kx.value - kr.value
        table.rows.append([p, q, kx.value, kx.half_width, kr.value, kr.half_width])
        res.checks.append(check(f"A08/embedding-agreement/p{p:g}-q{q:g}", diff, {"abs_max_ci_multiple": SLACK},
                                abs(diff) <= SLACK * ci, "mc", (diff - ci, diff + ci),
                                k_hat_lq=kx.value, k_hat_scalar=kr.value, argmax_lq=kx.argmax))
    res.tables.append(table)
    return res


def _interp(cfg: ExperimentConfig, workers: int) -> Result:
    res = Result()
    em = _embedded_ratios(cfg.N, cfg.T, cfg.d, cfg.paths, cfg.seed, workers)
    p = cfg.p[0] if cfg.p else 4.0
    q = cfg.q[0]
    gap = est.interpolation_gap(p, q, _k_hat_embedded(em, p, 2.0), _k_hat_embedded(em, p, q),
                                _k_hat_embedded(em, p, p))
    res.checks.append(check(f"A08/interpolation-gap/p{p:g}-q{q:g}", gap.gap, {"min_ci_multiple": -SLACK},
                            gap.passed, "mc", (gap.gap - gap.ci, gap.gap + gap.ci), theta=gap.theta))
    return res


def _by_family(runners: dict, cfg: ExperimentConfig, workers: int) -> Result:
    if cfg.family not in runners:
        raise ConfigError(f"process.family: unknown family {cfg.family!r} for kind {cfg.kind!r} "
                          f"(choose from {', '.join(runners)})")
    return runners[cfg.family](cfg, workers)


def _bdg(cfg, workers):
    runners = {"deterministic": _bdg_deterministic, "scalar": _bdg_scalar, "embedded": _bdg_embedded}
    return _by_family(runners, cfg, workers)


# ----------------------------------------------------------------------------- convolve


def _convolve_ou(cfg: ExperimentConfig, workers: int) -> Result:
    res = Result()
    mu = 1.0
    gen = SpectralGenerator(np.array([mu]))
    target = (1.0 - np.exp(-2.0 * mu * cfg.T)) / (2.0 * mu)
    tol = cfg.threshold("ou_variance_rel", 0.01)
    for N in cfg.steps or (1, 8, 64):
        G = StepProcess.constant(TimeGrid.uniform(cfg.T, N), [[1.0]])
        ens = simulate_ensemble(gen, G, cfg.paths, cfg.seed, "exact", workers=workers)
        v = batch_means(ens.terminal(2.0) ** 2)
        res.checks.append(check(f"A03/ou-variance/exact-N{N}", v.value, {"target": target, "rel_tol": tol},
                                abs(v.value - target) <= tol * target, "mc", _ci(v)))
    # exponential Euler on coupled dyadic levels: successive differences cancel the shared noise
    levels = [cfg.N >> k for k in range(5, -1, -1) if cfg.N >> k >= 1]
    fine = TimeGrid.uniform(cfg.T, cfg.N)
    sq = {N: [] for N in levels}
    batch = 20_000
    for s in range(0, cfg.paths, batch):
        inc = wiener_increments(fine, 1, cfg.seed, np.arange(s, min(s + batch, cfg.paths)))
        for N in levels:
            G = StepProcess.constant(TimeGrid.uniform(cfg.T, N), [[1.0]])
            out = integrate_increments(gen, G, coarsen_increments(inc, cfg.N // N), "euler")
            sq[N].append(out["node"][2.0][:, -1] ** 2)
    sq = {N: np.concatenate(v) for N, v in sq.items()}
    dts = np.array([cfg.T / N for N in levels[:-1]])

    def order(*vals):
        diffs = [np.mean(a) - np.mean(b) for a, b in zip(vals, vals[1:])]
        return np.polyfit(np.log(dts), np.log(np.abs(diffs)), 1)[0]

    o = _replicated(order, [sq[N] for N in levels])
    min_order = cfg.threshold("euler_order_min", 0.9)
    table = Table("euler_levels", ["N", "dt", "variance", "euler_mean_exact", "limit"])
    for N in levels:
        h = cfg.T / N
        mean_exact = h * np.exp(-2 * mu * h) * (1 - np.exp(-2 * mu * cfg.T)) / (1 - np.exp(-2 * mu * h))
        table.rows.append([N, h, float(sq[N].mean()), float(mean_exact), float(target)])
    res.tables.append(table)
    res.checks.append(check("A03/euler-order", o.value, {"min": min_order}, o.value >= min_order, "mc", _ci(o),
                            levels=levels))
    return res


def _maximal_ratios(d: int, N: int, T: float, n: int, seed: int, qs, ps, workers: int) -> dict:
    """Per member of the heat family: frequency, and point/batch ratios sup-moment over gamma-norm moment."""
    grid = TimeGrid.uniform(T, N)
    gen = heat_generator(d, 2.0)
    out = []
    for freq, G in families.heat_family(grid, d):
        ens = simulate_ensemble(gen, G, n, seed, "exact", qs=qs, workers=workers)
        rec = {"name": G.name, "freq": freq}
        for q in qs:
            rec[q] = (ens.sup(q), ens.l2gamma[q])
        out.append(rec)
    return out


def _convolve_heat(cfg: ExperimentConfig, workers: int) -> Result:
    res = Result()
    dims = sorted({cfg.d, cfg.generator.d}) if cfg.generator.d != cfg.d else [cfg.d]
    max_med = cfg.threshold("max_over_median", 5.0)
    rho_max = cfg.threshold("spearman_abs_max", 0.5)
    stab = cfg.threshold("dimension_stability", 0.2)
    table = Table("maximal_ratios", ["d", "q", "p", "member", "frequency", "ratio"])
    per_dim = {}
    for d in dims:
        members = _maximal_ratios(d, cfg.N, cfg.T, cfg.paths, cfg.seed, cfg.q, cfg.p, workers)
        freqs = np.array([m["freq"] for m in members], dtype=float)
        for q in cfg.q:
            sups = np.stack([m[q][0] for m in members], axis=1)
            l2 = np.stack([m[q][1] for m in members], axis=1)
            for p in cfg.p:
                def ratios(s, g, p=p):
                    return np.array([_moment_ratio(s[:, j], g[:, j], p) for j in range(s.shape[1])])

                r = ratios(sups, l2)
                per_dim[(d, q, p)] = r
                for j, m in enumerate(members):
                    table.rows.append([d, q, p, m["name"], m["freq"], float(r[j])])
                spread = _replicated(lambda s, g: np.max(ratios(s, g)) / np.median(ratios(s, g)), [sups, l2])
                rho = _replicated(lambda s, g: est.spearman(freqs, ratios(s, g)), [sups, l2])
                tag = f"d{d}-q{q:g}-p{p:g}"
                res.checks.append(check(f"A05/max-over-median/{tag}", spread.value, {"max": max_med},
                                        spread.value <= max_med, "mc", _ci(spread)))
                res.checks.append(check(f"A05/spearman/{tag}", rho.value, {"abs_max": rho_max},
                                        abs(rho.value) < rho_max, "mc", _ci(rho)))
    if len(dims) == 2:
        lo, hi = dims
        for q in cfg.q:
            for p in cfg.p:
                change = np.abs(per_dim[(hi, q, p)] / per_dim[(lo, q, p)] - 1.0)
                worst = float(change.max())
                # interval from the extreme relative changes of the member ratios themselves
                res.checks.append(check(f"A05/dimension-stability/q{q:g}-p{p:g}", worst, {"max": stab},
                                        worst <= stab, "mc", (float(change.min()), worst), d_from=lo, d_to=hi))
    res.tables.append(table)
    return res


def _convolve_refine(cfg: ExperimentConfig, workers: int) -> Result:
    res = Result()
    d = cfg.generator.d
    gen = heat_generator(d, 2.0)
    factor = 2**cfg.refinements
    coarse = TimeGrid.uniform(cfg.T, cfg.N)
    G = StepProcess.deterministic(coarse, families.heat_profile(d), diagonal=True, name="heat-profile")
    Gf = G.refined(factor) if factor > 1 else G
    q = cfg.q[0]
    ens = simulate_ensemble(gen, Gf, cfg.paths, cfg.seed, "exact", qs=(q,), workers=workers)
    node = ens.node_norms[q]
    levels = [factor >> k for k in range(cfg.refinements + 1)]  # strides, coarse to fine
    sups = [node[:, ::s].max(axis=1) for s in levels]
    gaps = [np.abs(b - a) for a, b in zip(sups, sups[1:])]

    # Roughly half the paths keep their maximum on a node the coarser grid already has, so the
    # plain median gap is zero at every level; the median over paths the refinement moves is not.
    def moved_median(g):
        return float(np.median(g[g > 0])) if np.any(g > 0) else 0.0

    cond = [_replicated(moved_median, [g]) for g in gaps]
    means = [batch_means(g) for g in gaps]
    table = Table("refinement", ["N_coarse", "N_fine", "median_gap", "zero_fraction", "moved_median_gap",
                                 "ci_low", "ci_high", "mean_gap"])
    for k, g in enumerate(gaps):
        table.rows.append([cfg.N * 2**k, cfg.N * 2 ** (k + 1), float(np.median(g)), float(np.mean(g == 0)),
                           cond[k].value, cond[k].ci_low, cond[k].ci_high, means[k].value])
    res.tables.append(table)
    worst = float(min(np.min(b - a) for a, b in zip(sups, sups[1:])))
    res.checks.append(check("A12/refined-sup-dominates", worst, {"min": 0.0}, worst >= 0.0, "exact"))
    for k in range(len(gaps) - 1):
        for label, est_a, est_b in (("moved-median", cond[k], cond[k + 1]), ("mean", means[k], means[k + 1])):
            ratio = est_b.value / est_a.value
            res.checks.append(check(f"A12/{label}-gap-decreases/{k + 1}", ratio, {"max": 1.0},
                                    est_b.value < est_a.value, "mc",
                                    (est_b.ci_low / est_a.value, est_b.ci_high / est_a.value),
                                    coarse_gap=est_a.value, fine_gap=est_b.value,
                                    plain_median=[float(np.median(gaps[k])), float(np.median(gaps[k + 1]))]))
    return res


def _convolve(cfg, workers):
    runners = {"ou": _convolve_ou, "heat": _convolve_heat, "refine": _convolve_refine}
    return _by_family(runners, cfg, workers)


# ----------------------------------------------------------------------------- tail and doob


def _tail(cfg: ExperimentConfig, workers: int) -> Result:
    res = Result()
    d = cfg.generator.d
    grid = TimeGrid.uniform(cfg.T, cfg.N)
    gen = heat_generator(d, 2.0)
    M = cfg.threshold("M", 1.0)
    q = cfg.q[0]
    kinds = cfg.family.split("+") if "+" in cfg.family else ("random-sign", "stop-loss")
    bad = [k for k in kinds if k not in families.HEAT_KINDS]
    if bad:
        raise ConfigError(f"process.family: unknown heat members {bad} (choose from {', '.join(families.HEAT_KINDS)})")
    for kind in kinds:
        G = families.heat_member(kind, 4, grid, d)
        ens = simulate_ensemble(gen, G, cfg.paths, cfg.seed, "exact", qs=(q,), workers=workers)
        tag = f"{kind}"
        m2 = float(np.max(ens.l2gamma[q] ** 2))
        res.checks.append(check(f"A06/{tag}/gamma-norm-bound", m2, {"max": M}, m2 <= M * (1 + 1e-12), "exact"))
        sups = ens.sup(q)
        lam = est.tail_lambda_grid(sups, 1e-1, 1e-3, 12)
        tail = est.empirical_tail(sups, lam)
        slope = est.tail_slope(tail)
        res.checks.append(check(f"A06/{tag}/tail-slope", slope.slope, {"ci_low_min": 0.0}, slope.ci_low > 0,
                                "mc", (slope.ci_low, slope.ci_high)))
        reps = est.moment_reports(sups)
        C = est.calibrate_c_tail(reps, M)
        verdict = est.markov_chernoff_check(reps, M, C)
        tail = tail.with_bound(M, C)
        margin = float(np.min(tail.bound_curve - tail.ci_high))
        eps, _ = est.exp1_bound(M, C, 0.0)
        res.checks.append(check(f"A06/{tag}/bound-dominates", margin, {"min": 0.0}, margin >= 0.0 and verdict.passed,
                                "mc", (float(np.min(tail.bound_curve - tail.ci_high)),
                                       float(np.min(tail.bound_curve - tail.ci_low))),
                                c_tail=C, eps_star=eps))
        t = Table(f"tail_{kind}", ["lambda", "prob", "ci_low", "ci_high", "bound"])
        t.rows = [list(r) for r in tail.rows()]
        res.tables.append(t)
    return res


def _doob(cfg: ExperimentConfig, workers: int) -> Result:
    res = Result()
    grid = TimeGrid.uniform(cfg.T, cfg.N)
    processes = [StepProcess.constant(grid, [[1.0]], name="scalar"),
                 StepProcess.deterministic(grid, np.ones(cfg.d), diagonal=True, name=f"l2-{cfg.d}")]
    table = Table("doob", ["process", "p", "ratio", "ci_low", "ci_high", "limit"])
    for G in processes:
        ens = simulate_ensemble(None, G, cfg.paths, cfg.seed, "ito", qs=(2.0,), workers=workers)
        for p in cfg.p:
            r = est.doob_ratio(ens.sup(2.0), ens.terminal(2.0), p)
            limit = est.conjugate(p) * (1 + SLACK * r.half_width / r.value)
            table.rows.append([G.name, p, r.value, r.ci_low, r.ci_high, limit])
            res.checks.append(check(f"A09/doob/{G.name}/p{p:g}", r.value, {"max": limit, "conjugate": est.conjugate(p)},
                                    r.value <= limit, "mc", _ci(r)))
    res.tables.append(table)
    return res


# ----------------------------------------------------------------------------- deterministic checks


def _dilation_check(cfg: ExperimentConfig, workers: int) -> Result:
    res = Result()
    tol = cfg.threshold("identity_residual", 1e-8)
    lattice = np.concatenate([np.geomspace(0.1, 100.0, 13), [0.5 + 2j, 5.0 - 3j, 40.0 + 25j]])
    gen = SpectralGenerator(lattice)
    ts = np.linspace(0.0, 10.0, 41)
    x = np.ones(gen.d)
    rows = dilation.residual_table(gen, ts, x, "quadrature")
    worst = max(r for _, _, r in rows)
    res.checks.append(check("A04/identity-residual", worst, {"max_relative": tol}, worst <= tol, "quadrature",
                            modes=len(lattice), times=len(ts)))
    table = Table("dilation_residuals", ["mode", "mu_re", "mu_im", "t", "residual"])
    table.rows = [[k, float(lattice[k].real), float(lattice[k].imag), t, r] for k, t, r in rows]
    res.tables.append(table)

    # coupled pathwise comparison with exponential Euler
    d = cfg.generator.d
    heat = heat_generator(d, 2.0)
    grid = TimeGrid.uniform(cfg.T, cfg.N)
    G = _modulated_operator(grid, d, cfg.seed)
    gap_tol = cfg.threshold("pathwise_relative", 1e-6)
    for q in cfg.q:
        worst_gap, worst_excess = 0.0, -np.inf
        for s in range(0, cfg.paths, 250):
            inc = wiener_increments(grid, G.m, cfg.seed, np.arange(s, min(s + 250, cfg.paths)))
            direct = integrate_increments(heat, G, inc, "euler", keep_paths=True)["paths"]
            dil = dilation.convolve_via_dilation_batch(heat, G, inc, q, "quadrature")
            diff = lq_norm(np.abs(dil.values - direct), q).max(axis=1)
            scale = lq_norm(direct, q).max(axis=1)
            worst_gap = max(worst_gap, float(np.max(diff / scale)))
            excess = lq_norm(np.abs(dil.values), q) - dil.z_norms
            worst_excess = max(worst_excess, float(np.max(excess / np.maximum(dil.z_norms, 1e-300))))
        res.checks.append(check(f"A04/pathwise-gap/q{q:g}", worst_gap, {"max_relative": gap_tol},
                                worst_gap <= gap_tol, "quadrature", paths=cfg.paths, d=d))
        res.checks.append(check(f"A04/projection-contracts/q{q:g}", worst_excess, {"max": 1e-9},
                                worst_excess <= 1e-9, "quadrature"))
    return res


def _renorm_check(cfg: ExperimentConfig, workers: int) -> Result:
    res = Result()
    count = int(cfg.threshold("generators", 100))
    lyap_tol = cfg.threshold("lyapunov_residual", 1e-10)
    contr_tol = cfg.threshold("contraction_excess", 1e-8)
    s_grid = (0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0)
    worst_res, worst_ratio, cond = 0.0, 0.0, 0.0
    if cfg.generator.kind == "matrix" and cfg.generator.entries:
        gens = [cfg.generator.build(2.0)]
    else:
        gens = (MatrixGenerator(renorm.random_sectorial_matrix(cfg.d, cfg.seed, i)) for i in range(count))
    for i, gen in enumerate(gens):
        nrm = renorm.lyapunov_renorm(gen)
        worst_res = max(worst_res, nrm.residual)
        worst_ratio = max(worst_ratio, renorm.contractivity_check(gen, nrm, 100, s_grid, cfg.seed + i))
        b, B = nrm.equivalence()
        cond = max(cond, B / b)
    res.checks.append(check("A10/lyapunov-residual", worst_res, {"max": lyap_tol}, worst_res <= lyap_tol, "exact",
                            generators=i + 1, d=gen.d))
    res.checks.append(check("A10/contraction-ratio", worst_ratio, {"max": 1 + contr_tol},
                            worst_ratio <= 1 + contr_tol, "exact", equivalence_ratio_max=cond))

    modes = np.geomspace(0.1, 100.0, 6)
    diag = SpectralGenerator(modes)
    X = rng.keyed_normals(cfg.seed, rng.TEST, np.arange(20), [1], np.arange(diag.d))[:, 0, :]
    collapse_tol = cfg.threshold("collapse_relative", 1e-10)
    for q in (2.0, 3.0, 4.0, 6.0):
        nrm = renorm.renorm_for(diag, q)
        err = float(np.max(np.abs(nrm.norm(X) / (lq_norm(X, q) / sqrt(2.0)) - 1.0)))
        res.checks.append(check(f"A10/diagonal-collapse/q{q:g}", err, {"max_relative": collapse_tol},
                                err <= collapse_tol, "exact"))
        quad = max(abs(renorm.square_function_norm_quadrature(diag, q, x) / (lq_norm(x, q) / sqrt(2.0)) - 1.0)
                   for x in X[:3])
        res.checks.append(check(f"A10/diagonal-collapse-quadrature/q{q:g}", quad, {"max_relative": collapse_tol},
                                quad <= collapse_tol, "quadrature"))
    return res


def _cr_probe(cfg: ExperimentConfig, workers: int) -> Result:
    res = Result()
    d = cfg.d
    table = Table("cr_constants", ["r", "q", "d", "k1_hat", "k2_hat", "hessian_fd_rel", "homogeneity_rel"])
    for r, q in ((2.0, 2.0), (4.0, 2.0), (4.0, 4.0)):
        cloud = np.vstack([renorm._sphere_cloud(cfg.seed, 0, cfg.paths, d, q), np.eye(d)])
        probe = renorm.cr_bound_probe(r, q, d, cfg.paths, cfg.seed, x_cloud=cloud)
        k1_err = abs(probe.k1_hat - r) / r
        pts = cloud[:20] * np.exp(rng.keyed_normals(cfg.seed, rng.TEST, np.arange(20), [2], [0])[:, 0, :])
        fd_err = hom_err = 0.0
        for x in pts:
            H = renorm.hessian_matrix(x, r, q)
            h = 1e-5 * lq_norm(x, q)
            fd = np.empty_like(H)
            for j in range(d):
                e = np.zeros(d)
                e[j] = h
                fd[:, j] = (renorm.phi_derivatives(x + e, r, q)[1] - renorm.phi_derivatives(x - e, r, q)[1]) / (2 * h)
            fd_err = max(fd_err, float(np.linalg.norm(fd - H) / np.linalg.norm(H)))
            c = 1.7
            Hc = renorm.hessian_matrix(c * x, r, q)
            hom_err = max(hom_err, float(np.linalg.norm(Hc - c ** (r - 2) * H) / np.linalg.norm(c ** (r - 2) * H)))
        tag = f"r{r:g}-q{q:g}"
        table.rows.append([r, q, d, probe.k1_hat, probe.k2_hat, fd_err, hom_err])
        res.checks.append(check(f"A11/k1/{tag}", probe.k1_hat, {"target": r, "rel_tol": 1e-10}, k1_err <= 1e-10,
                                "exact", k2_hat=probe.k2_hat))
        res.checks.append(check(f"A11/hessian-finite-difference/{tag}", fd_err, {"max_relative": 1e-6},
                                fd_err <= 1e-6, "exact"))
        res.checks.append(check(f"A11/hessian-homogeneity/{tag}", hom_err, {"max_relative": 1e-12},
                                hom_err <= 1e-12, "exact"))
    res.tables.append(table)
    return res


RUNNERS = {
    "bdg": _bdg,
    "convolve": _convolve,
    "tail": _tail,
    "interp": _interp,
    "doob": _doob,
    "dilation-check": _dilation_check,
    "renorm-check": _renorm_check,
    "cr-probe": _cr_probe,
}


def run(cfg: ExperimentConfig, workers: int = 1) -> Result:
    """Dispatch on ``cfg.kind``; a configured generator is built (and validated) first."""
    if cfg.generator.kind == "spectral" or cfg.generator.entries:
        cfg.generator.build(cfg.q[0])
    return RUNNERS[cfg.kind](cfg, workers)


# ----------------------------------------------------------------------------- suite


def _heat(d: int) -> GeneratorSpec:
    return GeneratorSpec("spectral", "heat", d)


def suite_configs(seed: int = 20261017) -> list[ExperimentConfig]:
    """The acceptance battery; every entry is an ordinary config."""
    C = ExperimentConfig
    return [
        C("A01-A02-isometry", "bdg", family="deterministic", d=8, N=16, p=(2.0, 4.0), paths=100_000, seed=seed),
        C("A03-ou-law", "convolve", generator=GeneratorSpec("spectral", None, 1, ("1",)), family="ou",
          N=256, steps=(1, 8, 64), paths=100_000, seed=seed),
        C("A04-dilation", "dilation-check", generator=_heat(8), q=(2.0, 4.0), d=8, N=64, paths=1000, seed=seed),
        C("A05-maximal-estimate", "convolve", generator=_heat(64), family="heat", q=(2.0, 4.0), d=16,
          p=(2.0, 4.0), N=64, paths=2000, seed=seed),
        C("A06-tail", "tail", generator=_heat(16), family="random-sign+stop-loss", N=64, paths=100_000, seed=seed,
          thresholds=(("M", 1.0),)),
        C("A07-sqrt-growth", "bdg", family="scalar", p=(2.0, 4.0, 8.0, 16.0), N=64, paths=100_000, seed=seed),
        C("A08-embedding", "bdg", family="embedded", q=(2.0, 4.0), d=8, p=(4.0, 8.0), N=64, paths=100_000,
          seed=seed),
        C("A08-interpolation", "interp", family="embedded", q=(3.0,), d=8, p=(4.0,), N=64, paths=100_000,
          seed=seed),
        C("A09-doob", "doob", family="martingale", d=8, p=(2.0, 4.0), N=256, paths=100_000, seed=seed),
        C("A10-renorming", "renorm-check", generator=GeneratorSpec("matrix", None, 4), d=4, paths=100, seed=seed),
        C("A11-cr-constants", "cr-probe", family="cloud", d=8, paths=1000, seed=seed),
        C("A12-continuity", "convolve", generator=_heat(16), family="refine", N=32, refinements=3, paths=2000,
          seed=seed),
    ]


def default_config(kind: str, seed: int | None = None) -> ExperimentConfig:
    for cfg in suite_configs():
        if cfg.kind == kind:
            return cfg if seed is None else replace(cfg, seed=seed)
    raise KeyError(kind)


def matches(pattern: str | None, name: str) -> bool:
    return pattern is None or pattern in name or fnmatch.fnmatchcase(name, pattern)


def criterion_verdicts(checks: list) -> dict:
    """``{"A01": True, ...}`` from check names."""
    out: dict = {}
    for c in checks:
        tag = c["name"].split("/", 1)[0]
        out[tag] = out.get(tag, True) and c["verdict"] == "pass"
    return dict(sorted(out.items()))


def gaussian_fourth_root() -> float:
    """``(E|Z|^4)^{1/4}`` for a standard normal, via the absolute-moment formula."""
    return (4.0 * gamma(2.5) / sqrt(np.pi)) ** 0.25
