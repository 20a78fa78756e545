"""Monte-Carlo estimators: moments, BDG ratios and constants, tails, Chernoff bound.

Moments get batch-means 95% intervals, tail probabilities get Wilson
intervals, and inequality checks allow a slack of three interval half-widths.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from math import factorial
from typing import Sequence

import numpy as np
from scipy import stats as sps

from stochconv.simulate import PathEnsemble, StepProcess, simulate_ensemble
from stochconv.stats import DEFAULT_BATCHES, Estimate, batch_split, batch_statistic, t_quantile, wilson_interval

MIN_PATHS = 1000
SLACK = 3.0


@dataclass(frozen=True)
class MomentReport:
    p: float
    value: float
    ci_low: float
    ci_high: float
    n: int

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)

    def as_estimate(self) -> Estimate:
        return Estimate(self.value, self.ci_low, self.ci_high, self.n, "mc")


def _batch_power_means(values: np.ndarray, p: float, n_batches: int) -> np.ndarray:
    labels = batch_split(values.size, n_batches)
    return np.bincount(labels, weights=values**p, minlength=n_batches) / np.bincount(labels, minlength=n_batches)


def estimate_pth_moment(values, p: float, n_batches: int = DEFAULT_BATCHES) -> MomentReport:
    """``(E Z^p)^{1/p}`` with a batch-means interval on ``E Z^p`` mapped through ``^(1/p)``."""
    if p <= 0:
        raise ValueError("p must be positive")
    z = np.abs(np.asarray(values, dtype=float))
    if z.size < MIN_PATHS:
        raise ValueError(f"need at least {MIN_PATHS} samples, got {z.size}")
    # scale out the maximum so high powers do not overflow
    s = z.max()
    if s == 0:
        return MomentReport(p, 0.0, 0.0, 0.0, z.size)
    u = z / s
    bm = _batch_power_means(u, p, n_batches)
    mean = float(np.mean(u**p))
    se = float(bm.std(ddof=1) / np.sqrt(n_batches))
    hw = t_quantile(n_batches) * se
    lo = max(mean - hw, 0.0)
    value = s * mean ** (1.0 / p)
    return MomentReport(float(p), float(value), float(s * lo ** (1.0 / p)), float(s * (mean + hw) ** (1.0 / p)), z.size)


def ratio_of_moments(num, den, p: float, n_batches: int = DEFAULT_BATCHES) -> Estimate:
    """``(E num^p)^{1/p} / (E den^p)^{1/p}`` with a batch-means interval for the ratio."""
    num = np.abs(np.asarray(num, dtype=float))
    den = np.abs(np.asarray(den, dtype=float))
    if num.size < MIN_PATHS:
        raise ValueError(f"need at least {MIN_PATHS} samples, got {num.size}")
    sn, sd = max(num.max(), 1e-300), den.max()
    if sd == 0:
        raise ValueError("zero-norm integrand")
    bn = _batch_power_means(num / sn, p, n_batches)
    bd = _batch_power_means(den / sd, p, n_batches)
    if np.any(bd == 0):
        raise ValueError("integrand vanishes on a whole batch")
    point = (sn / sd) * (np.mean((num / sn) ** p) / np.mean((den / sd) ** p)) ** (1.0 / p)
    reps = (sn / sd) * (bn / bd) ** (1.0 / p)
    return batch_statistic(reps, float(point), num.size)


def bdg_ratio_from_ensemble(ens: PathEnsemble, p: float, q: float) -> Estimate:
    """BDG ratio at the worst grid node: ``max_t (E||M_t||^p)^{1/p} / (E||G||^p)^{1/p}``."""
    if ens.method != "ito":
        raise ValueError("BDG ratios are defined for the stochastic integral (method 'ito')")
    node = ens.node_norms[q]
    den = ens.l2gamma[q]
    if np.all(den == 0):
        raise ValueError("zero-norm integrand")
    scale = max(node.max(), 1e-300)
    moments = np.mean((node / scale) ** p, axis=0)
    worst = int(np.argmax(moments))
    return ratio_of_moments(node[:, worst], den, p)


def bdg_ratio(G: StepProcess, p: float, q: float | None = None, n: int = 100_000, seed: int = 0,
              workers: int = 1) -> Estimate:
    q = G.q if q is None else q
    if n < MIN_PATHS:
        raise ValueError(f"need at least {MIN_PATHS} paths")
    ens = simulate_ensemble(None, G, n, seed, "ito", qs=(q,), workers=workers)
    return bdg_ratio_from_ensemble(ens, p, q)


@dataclass(frozen=True)
class KHat:
    """Lower-bound estimate of ``K_{p,X}``: largest upper confidence limit over a family."""

    p: float
    q: float
    value: float
    half_width: float
    argmax: str
    members: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["members"] = {k: v.to_dict() for k, v in self.members.items()}
        return d


def k_hat_from_ratios(ratios: dict, p: float, q: float) -> KHat:
    if not ratios:
        raise ValueError("empty family")
    name = max(ratios, key=lambda k: ratios[k].ci_high)
    best = ratios[name]
    return KHat(float(p), float(q), float(best.ci_high), float(best.half_width), name, dict(ratios))


def bdg_constant_estimate(family: dict, p: float, q: float, n: int, seed: int, workers: int = 1) -> KHat:
    """``K_hat_{p,X}`` over a named family of step processes."""
    if not family:
        raise ValueError("empty family")
    ratios = {name: bdg_ratio(G, p, q, n, seed, workers) for name, G in family.items()}
    return k_hat_from_ratios(ratios, p, q)


@dataclass(frozen=True)
class Slope:
    slope: float
    ci_low: float
    ci_high: float
    intercept: float


def sqrt_growth_slope(ps: Sequence[float], Ks: Sequence[float]) -> Slope:
    """Least-squares slope of ``log K`` against ``log p``."""
    ps = np.asarray(ps, dtype=float)
    Ks = np.asarray(Ks, dtype=float)
    if ps.size < 4:
        raise ValueError("need at least 4 exponents")
    res = sps.linregress(np.log(ps), np.log(Ks))
    tq = sps.t.ppf(0.975, ps.size - 2)
    return Slope(float(res.slope), float(res.slope - tq * res.stderr), float(res.slope + tq * res.stderr),
                 float(res.intercept))


@dataclass(frozen=True)
class InterpolationGap:
    p: float
    q: float
    theta: float
    gap: float
    ci: float

    @property
    def passed(self) -> bool:
        return self.gap >= -SLACK * self.ci


def interpolation_theta(p: float, q: float) -> float:
    """``theta`` with ``1/q = (1 - theta)/2 + theta/p``."""
    if not 2 <= q <= p:
        raise ValueError("need 2 <= q <= p")
    if p == 2:
        return 0.0
    return (0.5 - 1.0 / q) / (0.5 - 1.0 / p)


def interpolation_gap(p: float, q: float, k2: Estimate | KHat, kq: Estimate | KHat, kp: Estimate | KHat) -> InterpolationGap:
    """``K_{p,l2}^{1-theta} K_{p,lp}^theta - K_{p,lq}`` with a delta-method interval."""
    theta = interpolation_theta(p, q)

    def vh(k):
        return (k.value, k.half_width)

    (a, ha), (b, hb), (c, hc) = vh(k2), vh(kq), vh(kp)
    interp = a ** (1 - theta) * c**theta
    gap = interp - b
    da = (1 - theta) * interp / a * ha
    dc = theta * interp / c * hc
    return InterpolationGap(float(p), float(q), float(theta), float(gap), float(np.sqrt(da * da + hb * hb + dc * dc)))


def doob_ratio(sups, terminals, p: float) -> Estimate:
    """``(E sup^p)^{1/p} / (E terminal^p)^{1/p}``; Doob bounds it by ``p/(p-1)``."""
    if p <= 1:
        raise ValueError("Doob's inequality needs p > 1")
    return ratio_of_moments(sups, terminals, p)


def conjugate(p: float) -> float:
    return p / (p - 1)


@dataclass(frozen=True)
class TailReport:
    lambda_grid: np.ndarray
    probs: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n: int
    M: float | None = None
    bound_curve: np.ndarray | None = None

    def with_bound(self, M: float, C_tail: float) -> "TailReport":
        _, b = exp1_bound(M, C_tail, self.lambda_grid)
        return TailReport(self.lambda_grid, self.probs, self.ci_low, self.ci_high, self.n, M, b)

    def rows(self):
        for i, lam in enumerate(self.lambda_grid):
            yield (float(lam), float(self.probs[i]), float(self.ci_low[i]), float(self.ci_high[i]),
                   None if self.bound_curve is None else float(self.bound_curve[i]))


def empirical_tail(sups, lambda_grid) -> TailReport:
    """Survival function ``P(sup >= lambda)`` with Wilson intervals."""
    sups = np.asarray(sups, dtype=float)
    lam = np.asarray(lambda_grid, dtype=float)
    if lam.ndim != 1 or lam.size == 0 or np.any(np.diff(lam) <= 0):
        raise ValueError("lambda grid must be strictly increasing")
    s = np.sort(sups)
    count = s.size - np.searchsorted(s, lam, side="left")
    lo, hi = wilson_interval(count, s.size)
    return TailReport(lam, count / s.size, lo, hi, s.size)


def tail_lambda_grid(sups, p_hi: float = 1e-1, p_lo: float = 1e-3, n_points: int = 12) -> np.ndarray:
    """Thresholds spanning empirical tail probabilities ``p_hi`` down to ``p_lo``."""
    a, b = np.quantile(np.asarray(sups), [1 - p_hi, 1 - p_lo])
    return np.linspace(a, b, n_points)


def tail_slope(report: TailReport) -> Slope:
    """Weighted least-squares slope of ``-log P`` against ``lambda^2`` (delta-method weights)."""
    keep = report.probs > 0
    lam2 = report.lambda_grid[keep] ** 2
    y = -np.log(report.probs[keep])
    var = (1 - report.probs[keep]) / (report.n * report.probs[keep])
    if lam2.size < 3:
        raise ValueError("need at least three nonzero tail points")
    w = 1.0 / var
    X = np.column_stack([np.ones_like(lam2), lam2])
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    beta = cov @ (XtW @ y)
    resid = y - X @ beta
    dof = lam2.size - 2
    # inflate by the residual scale when the model misfits beyond sampling noise
    scale = max(1.0, float(np.sum(w * resid**2) / dof)) if dof > 0 else 1.0
    se = float(np.sqrt(cov[1, 1] * scale))
    z = sps.norm.ppf(0.975)
    return Slope(float(beta[1]), float(beta[1] - z * se), float(beta[1] + z * se), float(beta[0]))


def exp1_bound(M: float, C_tail: float, lam):
    """``eps* = 1/(2 e M C^2)`` and the bound ``2 exp(-eps* lambda^2)``."""
    if M <= 0 or C_tail <= 0:
        raise ValueError("M and C_tail must be positive")
    eps = 1.0 / (2.0 * np.e * M * C_tail**2)
    return eps, 2.0 * np.exp(-eps * np.asarray(lam, dtype=float) ** 2)


def exp1_series(M: float, C_tail: float, eps: float, terms: int = 200) -> np.ndarray:
    """Partial sums of the geometric series ``sum_n (2 e M C^2 eps)^n``.

    The ratio is 1 at ``eps*`` itself, where the sum diverges; it is 1/2 and the
    sum is 2 at ``eps*/2`` (see ``exp1_series_eps``).
    """
    ratio = 2.0 * np.e * M * C_tail**2 * eps
    return np.cumsum(ratio ** np.arange(terms))


def exp1_series_eps(M: float, C_tail: float) -> float:
    """The ``eps`` at which the series sums to exactly 2: ``1/(4 e M C^2)``."""
    return 0.5 * exp1_bound(M, C_tail, 0.0)[0]


def moment_series_terms(moments: dict, eps: float) -> np.ndarray:
    """``eps^n E sup^{2n} / n!`` from estimated moments (``moments[n]`` is ``(E sup^{2n})^{1/2n}``)."""
    return np.array([eps**n * moments[n] ** (2 * n) / factorial(n) for n in sorted(moments)])


@dataclass(frozen=True)
class ChernoffVerdict:
    C_tail: float
    M: float
    per_n: dict
    passed: bool


def _moment_map(reports) -> dict:
    if isinstance(reports, dict):
        out = dict(reports)
    else:
        out = {int(round(r.p / 2)): r for r in reports}
    for n, r in out.items():
        if abs(r.p - 2 * n) > 1e-12:
            raise ValueError(f"moment report for n={n} has p={r.p}, expected {2 * n}")
    return out


def markov_chernoff_check(reports, M: float, C_tail: float, ns: Sequence[int] = (1, 2, 3, 4, 5)) -> ChernoffVerdict:
    """Term-wise ``E sup^{2n} <= C^{2n} (2n)^n M^n`` using the lower confidence limit of each moment."""
    mm = _moment_map(reports)
    missing = [n for n in ns if n not in mm]
    if missing:
        raise ValueError(f"missing moments for n = {missing}")
    per = {}
    for n in ns:
        r = mm[n]
        limit = C_tail * np.sqrt(2 * n * M)
        per[n] = {"moment": r.value, "ci_low": r.ci_low, "limit": float(limit), "pass": bool(r.ci_low <= limit)}
    return ChernoffVerdict(float(C_tail), float(M), per, all(v["pass"] for v in per.values()))


def calibrate_c_tail(reports, M: float, ns: Sequence[int] = (1, 2, 3, 4, 5)) -> float:
    """Smallest ``C`` with ``(E sup^{2n})^{1/2n} <= C sqrt(2 n M)`` at the upper confidence limits."""
    mm = _moment_map(reports)
    return float(max(mm[n].ci_high / np.sqrt(2 * n * M) for n in ns))


def moment_reports(values, ns: Sequence[int] = (1, 2, 3, 4, 5)) -> dict:
    return {n: estimate_pth_moment(values, 2 * n) for n in ns}


def spearman(x, y) -> float:
    return float(sps.spearmanr(x, y).statistic)
