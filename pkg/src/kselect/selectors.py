"""Score-based and greedy selection rules.

Score rules compute one number per variable and keep the k largest
(score descending, then index ascending). Greedy adds, k times, the variable
with the largest exact marginal gain of the objective.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .distributions import DiscreteDistribution, quantile_alpha, quantile_alpha_sqrt, truncate_at_quantile
from .distributions import mean as dist_mean
from .exact import Instance, NumberMode, Objective, evaluate, resolve_mode


@dataclass
class SelectionResult:
    subset: tuple[int, ...]
    scores: list | None
    value_max: float | Fraction
    value_smax: float | Fraction | None
    method: str = ""
    param: object = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def num(x):
            if x is None:
                return None
            return str(x) if isinstance(x, Fraction) else float(x)

        return {
            "method": self.method,
            "param": self.param if not isinstance(self.param, Fraction) else str(self.param),
            "subset": list(self.subset),
            "scores": None if self.scores is None else [num(s) for s in self.scores],
            "value_max": num(self.value_max),
            "value_smax": num(self.value_smax),
            "meta": self.meta,
        }


def top_k(scores: Sequence, k: int) -> tuple[int, ...]:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return tuple(sorted(order[:k]))


def finish(inst: Instance, subset, scores=None, method="", param=None, **meta) -> SelectionResult:
    subset = tuple(sorted(subset))
    if len(subset) != inst.k or len(set(subset)) != inst.k:
        raise AssertionError(f"selector produced invalid subset {subset}")
    chosen = inst.subset(subset)
    vmax = evaluate(chosen, Objective.MAX)
    vsmax = evaluate(chosen, Objective.SMAX) if len(chosen) >= 2 else None
    return SelectionResult(subset, scores, vmax, vsmax, method, param, meta)


def _score_select(inst, score: Callable, method, param, **meta):
    scores = [score(v) for v in inst.variables]
    return finish(inst, top_k(scores, inst.k), scores, method, param, **meta)


# ---------------------------------------------------------------------------
# quantile rule

def quantile_score(d, p, k: int):
    if p == "sqrt_k":
        return quantile_alpha_sqrt(d, k)
    return quantile_alpha(d, p)


def select_quantile(inst: Instance, p="sqrt_k") -> SelectionResult:
    """Top-k by alpha_p; ``p="sqrt_k"`` uses p = sqrt(k)."""
    if p != "sqrt_k":
        if isinstance(p, str) or p < 1:
            raise ValueError(f"invalid quantile parameter {p!r}")
    return _score_select(inst, lambda d: quantile_score(d, p, inst.k), "quantile", p)


# ---------------------------------------------------------------------------
# KR scores

def top_quantile_expectation(d: DiscreteDistribution, q):
    """E[X | X in the top q mass], splitting the boundary atom so the event has mass exactly q."""
    if d.is_exact and not isinstance(q, float):
        q = Fraction(q)
        need, acc = q, Fraction(0)
        for v, p in reversed(d.exact):
            take = min(p, need)
            acc += take * v
            need -= take
            if need == 0:
                break
        return acc / q
    q = float(q)
    need, acc = q, 0.0
    for v, p in zip(d.values[::-1], d.probs[::-1]):
        take = min(float(p), need)
        acc += take * float(v)
        need -= take
        if need <= 0:
            break
    return acc / q


def _fast_top_quantile_expectation(d: DiscreteDistribution, q: float) -> float:
    tail = d.tail_probs
    # first atom index j (from the top) whose inclusion reaches mass q
    j = int(np.searchsorted(-tail, -q, side="right")) - 1
    j = max(j, 0)
    above = tail[j + 1] if j + 1 < d.support_size else 0.0
    full = float(np.dot(d.values[j + 1:], d.probs[j + 1:]))
    return (full + (q - above) * float(d.values[j])) / q


def kr_top_quantile_score(d, q, k: int):
    if q == "one_over_k":
        q = Fraction(1, k) if d.is_exact else 1.0 / k
    if d.is_exact or d.support_size < 64:
        return top_quantile_expectation(d, q)
    return _fast_top_quantile_expectation(d, float(q))


def select_kr_top_quantile(inst: Instance, q="one_over_k") -> SelectionResult:
    """Top-k by E[X_i | X_i in its top-q quantile]."""
    if q != "one_over_k" and (isinstance(q, str) or not 0 < q < 1):
        raise ValueError(f"top-quantile mass must be in (0, 1), got {q!r}")
    return _score_select(inst, lambda d: kr_top_quantile_score(d, q, inst.k), "kr-q", q)


def best_of_samples(d: DiscreteDistribution, r: int):
    """E[max of r iid copies] = sum_v v (F(v)^r - F(v-)^r)."""
    if d.is_exact:
        acc, prev, total = Fraction(0), Fraction(0), Fraction(0)
        for v, p in d.exact:
            acc += p
            cur = acc ** r
            total += v * (cur - prev)
            prev = cur
        return total
    Fr = d.cum_probs ** r
    return float(np.dot(d.values, np.diff(Fr, prepend=0.0)))


def select_kr_best_of_samples(inst: Instance, r="k") -> SelectionResult:
    """Top-k by the expected best of r samples; ``r="k"`` uses r = k."""
    rr = inst.k if r == "k" else r
    if isinstance(rr, str) or int(rr) != rr or rr < 1:
        raise ValueError(f"sample count must be a positive integer, got {r!r}")
    return _score_select(inst, lambda d: best_of_samples(d, int(rr)), "kr-samples", r)


def select_expectation(inst: Instance) -> SelectionResult:
    return _score_select(inst, dist_mean, "mean", None)


# ---------------------------------------------------------------------------
# greedy

class _MaxGreedyState:
    """Running P(v) = prod_{i in S} F_i(v) on the sorted union of all atoms.

    For nonnegative X_i the marginal gain of adding i is E[G(X_i)] with
    G(x) = integral_0^x P(v) dv. Every atom is a grid point, so G at an atom is
    read off by its fixed grid rank.
    """

    def __init__(self, values: np.ndarray, probs: np.ndarray, owner: np.ndarray, n: int):
        # atoms sorted by (owner, value) with distinct values per owner
        self.values, self.probs, self.owner, self.n = values, probs, owner, n
        self.cuts = np.searchsorted(owner, np.arange(n + 1))
        self.grid, rank = np.unique(np.concatenate(([0.0], values)), return_inverse=True)
        self.rank = rank.ravel()[1:]
        self.P = np.ones(len(self.grid))
        self.G = np.concatenate(([0.0], np.cumsum(np.diff(self.grid))))

    @classmethod
    def from_variables(cls, variables: Sequence[DiscreteDistribution]) -> "_MaxGreedyState":
        sizes = [v.support_size for v in variables]
        return cls(np.concatenate([v.values for v in variables]),
                   np.concatenate([v.probs for v in variables]),
                   np.repeat(np.arange(len(variables)), sizes), len(variables))

    def marginals(self) -> np.ndarray:
        return np.bincount(self.owner, weights=self.G[self.rank] * self.probs, minlength=self.n)

    def add(self, i: int):
        a, b = self.cuts[i], self.cuts[i + 1]
        cum = np.cumsum(self.probs[a:b])
        cum[-1] = 1.0
        r = self.rank[a:b]
        F = np.repeat(np.concatenate(([0.0], cum)), np.diff(np.concatenate(([0], r, [len(self.grid)]))))
        self.P *= F
        self.G = np.concatenate(([0.0], np.cumsum(self.P[:-1] * np.diff(self.grid))))


def greedy_max_order(state: _MaxGreedyState, steps: int) -> list[int]:
    chosen: list[int] = []
    for _ in range(steps):
        gains = state.marginals()
        gains[chosen] = -np.inf
        i = int(np.argmax(gains))
        chosen.append(i)
        state.add(i)
    return chosen


def greedy_order(inst: Instance, objective=Objective.MAX, mode=None, steps: int | None = None) -> list[int]:
    """Greedy insertion order (``steps`` rounds, default k)."""
    objective = Objective.parse(objective)
    steps = inst.k if steps is None else steps
    variables = inst.variables
    mode = resolve_mode(variables, mode)
    chosen: list[int] = []
    if objective is Objective.MAX and mode is NumberMode.FLOAT:
        return greedy_max_order(_MaxGreedyState.from_variables(variables), steps)

    for _ in range(steps):
        best, best_val = None, None
        for i in range(inst.n):
            if i in chosen:
                continue
            trial = inst.subset(chosen + [i])
            if objective is Objective.SMAX and len(trial) < 2:
                val = evaluate(trial, Objective.MAX, mode)
            else:
                val = evaluate(trial, objective, mode)
            if best_val is None or val > best_val:
                best, best_val = i, val
        chosen.append(best)
    return chosen


def select_greedy(inst: Instance, objective=Objective.MAX, mode=None) -> SelectionResult:
    objective = Objective.parse(objective)
    order = greedy_order(inst, objective, mode)
    meta = {"order": order}
    if objective is Objective.SMAX:
        meta["guarantee"] = "none"
    else:
        meta["guarantee"] = "1-1/e"
    return finish(inst, order, None, "greedy", objective.value, **meta)


# ---------------------------------------------------------------------------

METHODS = {
    "quantile": select_quantile,
    "kr-q": select_kr_top_quantile,
    "kr-samples": select_kr_best_of_samples,
    "mean": lambda inst, param=None: select_expectation(inst),
    "greedy": lambda inst, param=Objective.MAX: select_greedy(inst, param),
}


def bottom_to_top(q_bottom: float) -> float:
    """Convert a bottom-quantile fraction (0.7 = top 30%) to top mass."""
    if not 0 < q_bottom < 1:
        raise ValueError("bottom quantile must be in (0, 1)")
    return 1.0 - q_bottom


def p_from_bottom_quantile(q_bottom: float) -> float:
    """alpha_p threshold parameter for a bottom-quantile fraction: p = 1/(1-q)."""
    return 1.0 / bottom_to_top(q_bottom)


# ---------------------------------------------------------------------------
# guarantee of the quantile rule on truncated inputs

def truncated_selection_factors(p, k: int):
    """(1 - (1-1/p)^k, 1 - (k+1)(1-1/p)^(k-1)); exact for rational p."""
    if isinstance(p, float):
        miss = 1.0 - 1.0 / p
    else:
        miss = 1 - Fraction(1) / Fraction(p)
    return 1 - miss ** k, 1 - (k + 1) * miss ** (k - 1)


@dataclass
class TruncatedSelectionReport:
    p: object
    selected: tuple[int, ...]
    factor_max: object
    factor_smax: object
    worst_max: tuple | None = None   # (subset, lhs - factor * rhs)
    worst_smax: tuple | None = None
    subsets_checked: int = 0

    @property
    def holds(self) -> bool:
        return all(w is None or w[1] >= 0 for w in (self.worst_max, self.worst_smax))


def truncated_selection_check(inst: Instance, p) -> TruncatedSelectionReport:
    """Truncate every variable at alpha_p, take S = top-k by alpha_p and compare
    E[max_S] and E[smax_S] against the scaled value of every size-k subset.

    Rational inputs with rational p are checked in exact arithmetic.
    """
    trunc = [truncate_at_quantile(v, p) for v in inst.variables]
    scores = [quantile_alpha(v, p) for v in inst.variables]
    S = top_k(scores, inst.k)
    fmax, fsmax = truncated_selection_factors(p, inst.k)
    rep = TruncatedSelectionReport(p, S, fmax, fsmax)
    chosen = [trunc[i] for i in S]
    smax_ok = inst.k >= 2
    lhs_max = evaluate(chosen, Objective.MAX)
    lhs_smax = evaluate(chosen, Objective.SMAX) if smax_ok else None
    for A in itertools.combinations(range(inst.n), inst.k):
        other = [trunc[i] for i in A]
        m = lhs_max - fmax * evaluate(other, Objective.MAX)
        if rep.worst_max is None or m < rep.worst_max[1]:
            rep.worst_max = (A, m)
        if smax_ok:
            m = lhs_smax - fsmax * evaluate(other, Objective.SMAX)
            if rep.worst_smax is None or m < rep.worst_smax[1]:
                rep.worst_smax = (A, m)
        rep.subsets_checked += 1
    return rep
