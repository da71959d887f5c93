"""Elimination tournament that anchors the tail of max / second max, and
executable forms of the bounds it comes with.

Round t keeps the better half of the pool ranked by alpha at p = sqrt(K/2^t)
(K = pool size padded to a power of two) and records the best eliminated
variable's alpha as beta_t. beta1 = max_t beta_t; beta2 is alpha_{sqrt 2} of
the last survivor.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .distributions import (
    ContinuousFamily,
    DiscreteDistribution,
    as_discrete,
    quantile_alpha_sqrt,
    sample,
    tail_contribution,
    truncate_at_quantile,
)
from .exact import tail_prob_max, tail_prob_smax

MAX_PROB_BOUND = Fraction(1, 2)
SMAX_PROB_BOUND = Fraction(98, 1000)


def _num(x):
    return str(x) if isinstance(x, Fraction) else float(x)


@dataclass
class BetaRound:
    t: int
    q_squared: int
    ranking: list[int]       # pool order after sorting, best first
    alphas: list             # alpha of each ranked variable, same order
    survivors: list[int]
    beta: object


@dataclass
class BetaTrace:
    n: int
    k_padded: int
    rounds: list[BetaRound]
    survivor: int
    beta_last: object
    beta1: object = None
    beta2: object = None

    @property
    def beta(self):
        return max(self.beta1, self.beta2)

    def signature(self) -> tuple:
        """Everything a re-run must reproduce: outputs and elimination order."""
        return (self.beta1, self.beta2, self.survivor,
                tuple((tuple(r.ranking), r.beta) for r in self.rounds))

    def to_dict(self) -> dict:
        d = asdict(self)
        for r in d["rounds"]:
            r["alphas"] = [_num(a) for a in r["alphas"]]
            r["beta"] = _num(r["beta"])
        for key in ("beta_last", "beta1", "beta2"):
            d[key] = _num(d[key])
        d["beta"] = _num(self.beta)
        return d


def padded_size(n: int) -> int:
    return max(2, 1 << (n - 1).bit_length())


def pad_with_zeros(variables: Sequence) -> list:
    """Append zero point masses up to a power of two (at least 2)."""
    out = list(variables)
    zero = DiscreteDistribution.point_mass(0)
    out.extend([zero] * (padded_size(len(out)) - len(out)))
    return out


def compute_beta(variables: Sequence) -> BetaTrace:
    """Run the elimination tournament. Ties rank the lower index first;
    padding zeros take the indices after the real variables."""
    if not variables:
        raise ValueError("need at least one variable")
    pool = pad_with_zeros(variables)
    K = len(pool)
    order = list(range(K))
    rounds = []
    t = 0
    while len(order) > 1:
        q2 = K >> t
        alphas = {i: quantile_alpha_sqrt(pool[i], q2) for i in order}
        ranking = sorted(order, key=lambda i: (-alphas[i], i))
        half = len(ranking) // 2
        rounds.append(BetaRound(t, q2, ranking, [alphas[i] for i in ranking],
                                sorted(ranking[:half]), alphas[ranking[half]]))
        order = ranking[:half]
        t += 1
    last = order[0]
    beta_last = quantile_alpha_sqrt(pool[last], 2)
    return BetaTrace(len(variables), K, rounds, last, beta_last,
                     beta1=max(r.beta for r in rounds), beta2=beta_last)


# ---------------------------------------------------------------------------
# truncation equivariance

def truncate_all(variables: Sequence, k_padded: int) -> list[DiscreteDistribution]:
    """Truncate each variable at alpha_{sqrt(k_padded)}."""
    return [truncate_at_quantile(as_discrete(v), k_padded, sqrt=True) for v in variables]


def truncation_equivariance_check(variables: Sequence, trace: BetaTrace | None = None) -> bool:
    """True when the tournament on the truncated inputs reproduces the same
    outputs and elimination order. Continuous inputs are discretized first so
    both runs see the same atoms."""
    base = [as_discrete(v) for v in variables]
    if trace is None or any(isinstance(v, ContinuousFamily) for v in variables):
        trace = compute_beta(base)
    other = compute_beta(truncate_all(base, trace.k_padded))
    return other.signature() == trace.signature()


# ---------------------------------------------------------------------------
# probability lower bounds (any distributions)

def probability_lower_bound_check(variables: Sequence, trace: BetaTrace | None = None):
    """Exact ``(Pr[max >= beta], Pr[smax >= beta1])`` over the padded pool."""
    pool = pad_with_zeros([as_discrete(v) for v in variables])
    if trace is None:
        trace = compute_beta(pool[:len(variables)])
    return tail_prob_max(pool, trace.beta), tail_prob_smax(pool, trace.beta1)


def probability_bounds_hold(p_max, p_smax) -> bool:
    return p_max >= MAX_PROB_BOUND and p_smax >= SMAX_PROB_BOUND


def smax_lower_bound_g(x: int):
    """g(x) = 1 - (2^x + 1)(1 - 2^{-(x+1)/2})^{2^x}; a Fraction when 2^{x+1} is a square."""
    if x < 0 or int(x) != x:
        raise ValueError("x must be a nonnegative integer")
    m, s = 1 << x, 1 << (x + 1)
    r = math.isqrt(s)
    if r * r == s:
        return 1 - (m + 1) * (1 - Fraction(1, r)) ** m
    return 1.0 - (m + 1) * (1.0 - 1.0 / math.sqrt(s)) ** m


def max_truncation_factor(eps: float) -> float:
    """2 (d + 14 sqrt(eps) d) with d = log2(1/eps)."""
    d = math.log2(1 / eps)
    return 2 * (d + 14 * math.sqrt(eps) * d)


def smax_truncation_factor(eps: float) -> float:
    """(d + 8 sqrt(eps) d) / 0.098 with d = log2(1/eps)."""
    d = math.log2(1 / eps)
    return (d + 8 * math.sqrt(eps) * d) / float(SMAX_PROB_BOUND)


# ---------------------------------------------------------------------------
# tail upper bounds (MHR families)

@dataclass
class BoundLine:
    epsilon: float
    name: str
    lhs: float
    rhs: float
    mc_estimate: float | None = None
    mc_stderr: float | None = None

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-12) + 1e-15


@dataclass
class TailBoundReport:
    beta1: float
    beta2: float
    lines: list[BoundLine] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(line.holds for line in self.lines)

    def to_dict(self) -> dict:
        return {
            "beta1": self.beta1, "beta2": self.beta2, "ok": self.ok,
            "lines": [dict(asdict(x), margin=x.margin, holds=x.holds) for x in self.lines],
        }


def _tail_mc(draws: np.ndarray, cut: float) -> tuple[float, float]:
    vals = np.where(draws >= cut, draws, 0.0)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


def tail_bound_report(families: Sequence[ContinuousFamily], trace: BetaTrace | None = None,
                      eps_grid=(1 / 32, 1 / 64, 1 / 256), *, mc_trials: int = 20_000,
                      rng: np.random.Generator | None = None) -> TailBoundReport:
    """Compare the summed tail contributions above d*beta (d = log2(1/eps)) with
    their bounds, and log a Monte Carlo estimate of the true max/smax tails.

    Lines: ``sum_tails`` (all but the last survivor, at d beta1, bound
    8 sqrt(eps) d beta1), ``last_tail`` (last survivor at d beta2, bound
    6 sqrt(eps) d beta2), ``max_tail`` (everyone at d beta, bound
    14 sqrt(eps) d beta) and ``smax_tail`` (same sum as ``sum_tails``; the Monte
    Carlo column estimates E[smax 1{smax >= d beta1}]).
    """
    if len(families) < 2:
        raise ValueError("need at least two variables")
    if not all(isinstance(f, ContinuousFamily) for f in families):
        raise TypeError("tail bounds are stated for continuous MHR families")
    for eps in eps_grid:
        if not 0 < eps < 1 / 16:
            raise ValueError(f"epsilon must be in (0, 1/16), got {eps}")
    if trace is None:
        trace = compute_beta(families)
    b1, b2 = float(trace.beta1), float(trace.beta2)
    beta = max(b1, b2)
    n = len(families)
    last = trace.survivor

    draws = None
    if mc_trials and rng is not None:
        X = np.stack([np.asarray(sample(f, rng, mc_trials), dtype=np.float64) for f in families])
        top = np.sort(X, axis=0)
        draws = (top[-1], top[-2])

    rep = TailBoundReport(b1, b2)
    for eps in eps_grid:
        d = math.log2(1 / eps)
        root = math.sqrt(eps) * d
        others = sum(float(tail_contribution(families[i], d * b1)) for i in range(n) if i != last)
        everyone = sum(float(tail_contribution(f, d * beta)) for f in families)
        last_con = float(tail_contribution(families[last], d * b2)) if last < n else 0.0
        mc_max = _tail_mc(draws[0], d * beta) if draws else (None, None)
        mc_smax = _tail_mc(draws[1], d * b1) if draws else (None, None)
        rep.lines += [
            BoundLine(eps, "sum_tails", others, 8 * root * b1),
            BoundLine(eps, "last_tail", last_con, 6 * root * b2),
            BoundLine(eps, "max_tail", everyone, 14 * root * beta, *mc_max),
            BoundLine(eps, "smax_tail", others, 8 * root * b1, *mc_smax),
        ]
    return rep


# ---------------------------------------------------------------------------
# truncation loss

def truncation_loss(variables: Sequence, p_squared=None):
    """``(E[max X]/E[max X_hat], E[smax X]/E[smax X_hat])`` with X_hat truncated
    at alpha_p, p = sqrt(p_squared) (default p^2 = number of variables)."""
    from .exact import expected_max, expected_smax

    base = [as_discrete(v) for v in variables]
    q2 = len(base) if p_squared is None else p_squared
    trunc = [truncate_at_quantile(v, q2, sqrt=True) for v in base]
    ratios = []
    for f in (expected_max, expected_smax):
        num, den = f(base), f(trunc)
        ratios.append(math.inf if den == 0 and num > 0 else (1 if den == 0 else num / den))
    return tuple(ratios)


# ---------------------------------------------------------------------------
# quantile facts for MHR families

@dataclass
class QuantileFactCheck:
    family: dict
    worst_power: tuple | None = None   # (p, d, d*alpha_p - alpha_{p^d})
    worst_tail: tuple | None = None    # (p, 6 alpha_p / p - Con[X >= alpha_p])
    tol: float = 1e-9

    @property
    def holds(self) -> bool:
        ok = True
        if self.worst_power is not None:
            ok &= self.worst_power[2] >= -self.tol
        if self.worst_tail is not None:
            ok &= self.worst_tail[1] >= -self.tol
        return ok


def mhr_quantile_check(f: ContinuousFamily, p_grid, d_grid, tol: float = 1e-9) -> QuantileFactCheck:
    """Check d alpha_p >= alpha_{p^d} (p, d >= 1) and Con[X >= alpha_p] <= 6 alpha_p / p
    (p >= 2) over the grids, recording the smallest margins (relative to
    max(1, |rhs|))."""
    rep = QuantileFactCheck(f.params(), tol=tol)
    for p in map(float, p_grid):
        a = f.alpha(p)
        for d in map(float, d_grid):
            try:
                big = f.alpha(math.pow(p, d))
            except OverflowError:
                continue
            m = (d * a - big) / max(1.0, abs(big))
            if rep.worst_power is None or m < rep.worst_power[2]:
                rep.worst_power = (p, d, m)
        if p >= 2:
            bound = 6 * a / p
            m = (bound - f.tail_contribution(a)) / max(1.0, abs(bound))
            if rep.worst_tail is None or m < rep.worst_tail[1]:
                rep.worst_tail = (p, m)
    return rep
