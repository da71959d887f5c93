"""Exact order-statistic evaluation, brute-force optima and a Monte Carlo cross-check.

Expected max / second max are computed by a sweep over the sorted union of atom
values: ``Pr[max <= v] = prod_i F_i(v)`` and
``Pr[smax <= v] = prod_i F_i(v) + sum_i (1 - F_i(v)) prod_{j != i} F_j(v)``.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .distributions import ContinuousFamily, DiscreteDistribution, as_discrete, sample


class Objective(enum.Enum):
    MAX = "max"
    SMAX = "smax"

    @classmethod
    def parse(cls, s) -> "Objective":
        if isinstance(s, cls):
            return s
        return cls(str(s).lower())


class NumberMode(enum.Enum):
    FLOAT = "float"
    RATIONAL = "rational"

    @classmethod
    def parse(cls, s) -> "NumberMode":
        if s is None or isinstance(s, cls):
            return s
        return cls(str(s).lower())


class OracleTooLarge(ValueError):
    """Raised when brute force would enumerate more subsets than allowed."""


@dataclass
class Instance:
    """n random variables, a budget k and optional labels.

    Continuous families are discretized on ingest; the originals stay
    available in ``sources``.
    """

    variables: list
    k: int
    labels: list[str] | None = None
    sources: list = field(default=None, repr=False)

    def __post_init__(self):
        if not self.variables:
            raise ValueError("an instance needs at least one variable")
        self.sources = list(self.sources) if self.sources is not None else list(self.variables)
        self.variables = [as_discrete(v) for v in self.variables]
        if not 1 <= self.k <= len(self.variables):
            raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={len(self.variables)}")
        if self.labels is not None and len(self.labels) != len(self.variables):
            raise ValueError("one label per variable")

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def is_exact(self) -> bool:
        return all(v.is_exact for v in self.variables)

    def subset(self, idx) -> list[DiscreteDistribution]:
        return [self.variables[i] for i in idx]

    def scaled(self, c) -> "Instance":
        return Instance([v.scaled(c) for v in self.variables], self.k, self.labels)


def resolve_mode(variables: Sequence[DiscreteDistribution], mode=None) -> NumberMode:
    mode = NumberMode.parse(mode)
    if mode is not None:
        return mode
    return NumberMode.RATIONAL if all(v.is_exact for v in variables) else NumberMode.FLOAT


def _prepare(variables):
    out = []
    for v in variables:
        if isinstance(v, ContinuousFamily):
            v = as_discrete(v)
        out.append(v)
    return out


# ---------------------------------------------------------------------------
# float path

def union_grid(variables: Sequence[DiscreteDistribution]) -> np.ndarray:
    return np.unique(np.concatenate([v.values for v in variables]))


def cdf_matrix(variables: Sequence[DiscreteDistribution], grid: np.ndarray) -> np.ndarray:
    """Row i holds F_i evaluated at every grid point."""
    out = np.empty((len(variables), len(grid)))
    marks = np.zeros(len(grid), dtype=np.int64)
    for i, v in enumerate(variables):
        if len(v.values) * 8 < len(grid):
            # mark atom positions on the grid, then count marks to the left
            marks[:] = 0
            pos = np.searchsorted(grid, v.values, side="left")
            inside = pos < len(grid)
            np.add.at(marks, pos[inside], 1)
            idx = np.cumsum(marks)
        else:
            idx = np.searchsorted(v.values, grid, side="right")
        cum = np.concatenate(([0.0], v.cum_probs))
        out[i] = cum[idx]
    return out


def _max_cdf(F: np.ndarray) -> np.ndarray:
    return F.prod(axis=-2)


def _smax_cdf(F: np.ndarray) -> np.ndarray:
    """Pr[at most one variable exceeds v] along axis -2 (no division, so zeros are safe)."""
    k = F.shape[-2]
    ones = np.ones(F.shape[:-2] + (1,) + F.shape[-1:])
    prefix = np.cumprod(np.concatenate([ones, F[..., :-1, :]], axis=-2), axis=-2)
    suffix = np.flip(np.cumprod(np.flip(np.concatenate([F[..., 1:, :], ones], axis=-2), axis=-2), axis=-2), axis=-2)
    others = prefix * suffix
    allv = prefix[..., k - 1:k, :] * F[..., k - 1:k, :]
    return allv[..., 0, :] + ((1.0 - F) * others).sum(axis=-2)


def _sweep(grid: np.ndarray, P: np.ndarray) -> np.ndarray:
    dP = np.diff(P, axis=-1, prepend=0.0)
    return dP @ grid


def _float_max_logsum(variables) -> float:
    """E[max] from log prod F_i accumulated as jumps on the union grid (O(total atoms))."""
    grid = union_grid(variables)
    start = max(float(v.values[0]) for v in variables)
    logsum = np.zeros(len(grid))
    for v in variables:
        lc = np.log(v.cum_probs)
        pos = np.searchsorted(grid, v.values)
        logsum[pos] += np.diff(lc, prepend=0.0)
    P = np.exp(np.cumsum(logsum))
    P[grid < start] = 0.0
    return float(_sweep(grid, P))


def _float_eval(variables, objective: Objective) -> float:
    if objective is Objective.MAX and len(variables) > 1 and sum(v.support_size for v in variables) > 4096:
        return _float_max_logsum(variables)
    grid = union_grid(variables)
    F = cdf_matrix(variables, grid)
    P = _max_cdf(F) if objective is Objective.MAX else _smax_cdf(F)
    return float(_sweep(grid, P))


# ---------------------------------------------------------------------------
# rational path

def _exact_cdf_rows(variables, grid):
    rows = []
    for v in variables:
        atoms = v.to_exact().exact
        row, acc, j = [], Fraction(0), 0
        for g in grid:
            while j < len(atoms) and atoms[j][0] <= g:
                acc += atoms[j][1]
                j += 1
            row.append(acc)
        rows.append(row)
    return rows


def _exact_eval(variables, objective: Objective) -> Fraction:
    exact = [v.to_exact() for v in variables]
    grid = sorted({a for v in exact for a, _ in v.exact})
    rows = _exact_cdf_rows(exact, grid)
    n = len(rows)
    total, prev = Fraction(0), Fraction(0)
    for j, g in enumerate(grid):
        col = [rows[i][j] for i in range(n)]
        prefix = [Fraction(1)]
        for c in col:
            prefix.append(prefix[-1] * c)
        if objective is Objective.MAX:
            cur = prefix[-1]
        else:
            suffix = [Fraction(1)] * (n + 1)
            for i in range(n - 1, -1, -1):
                suffix[i] = suffix[i + 1] * col[i]
            cur = prefix[-1] + sum(((1 - col[i]) * prefix[i] * suffix[i + 1] for i in range(n)), Fraction(0))
        total += g * (cur - prev)
        prev = cur
    return total


# ---------------------------------------------------------------------------
# public evaluation API

def evaluate(variables, objective=Objective.MAX, mode=None):
    objective = Objective.parse(objective)
    variables = _prepare(variables)
    if not variables:
        raise ValueError("need at least one variable")
    if objective is Objective.SMAX and len(variables) < 2:
        raise ValueError("second max needs at least two variables")
    if resolve_mode(variables, mode) is NumberMode.RATIONAL:
        return _exact_eval(variables, objective)
    return _float_eval(variables, objective)


def expected_max(variables, mode=None):
    """E[max_i X_i] for independent variables."""
    return evaluate(variables, Objective.MAX, mode)


def expected_smax(variables, mode=None):
    """E[second largest of X_i] (ties count: two variables at v give smax = v)."""
    return evaluate(variables, Objective.SMAX, mode)


def tail_prob_max(variables, tau, mode=None):
    """Pr[max_i X_i >= tau] = 1 - prod_i Pr[X_i < tau]."""
    variables = _prepare(variables)
    if not variables:
        raise ValueError("need at least one variable")
    if resolve_mode(variables, mode) is NumberMode.RATIONAL:
        t = Fraction(tau)
        below = Fraction(1)
        for v in variables:
            below *= sum((p for a, p in v.to_exact().exact if a < t), Fraction(0))
        return 1 - below
    below = 1.0
    for v in variables:
        j = int(np.searchsorted(v.values, tau, side="left"))
        below *= 0.0 if j == 0 else float(v.cum_probs[j - 1])
    return 1.0 - below


def tail_prob_smax(variables, tau, mode=None):
    """Pr[second max >= tau]: at least two variables reach tau."""
    variables = _prepare(variables)
    exact = resolve_mode(variables, mode) is NumberMode.RATIONAL
    if exact:
        t = Fraction(tau)
        reach = [sum((p for a, p in v.to_exact().exact if a >= t), Fraction(0)) for v in variables]
        one = Fraction(1)
    else:
        reach = []
        for v in variables:
            j = int(np.searchsorted(v.values, tau, side="left"))
            reach.append(float(v.tail_probs[j]) if j < v.support_size else 0.0)
        one = 1.0
    none = one
    for r in reach:
        none *= one - r
    exactly_one = 0 * one
    for i, r in enumerate(reach):
        term = r
        for j, s in enumerate(reach):
            if j != i:
                term *= one - s
        exactly_one += term
    return one - none - exactly_one


# ---------------------------------------------------------------------------
# brute force

DEFAULT_ORACLE_CAP = 2_000_000


def brute_force_opt(inst: Instance, objective=Objective.MAX, mode=None, *,
                    cap: int = DEFAULT_ORACLE_CAP, rel_tol: float = 1e-12):
    """Best size-k subset by full enumeration.

    Ties go to the lexicographically smallest index tuple; in float mode values
    within ``rel_tol`` of the incumbent count as ties.
    Returns ``(subset_tuple, value)``.
    """
    objective = Objective.parse(objective)
    n, k = inst.n, inst.k
    if objective is Objective.SMAX and k < 2:
        raise ValueError("second max needs k >= 2")
    count = math.comb(n, k)
    if count > cap:
        raise OracleTooLarge(f"instance too large for oracle: C({n},{k}) = {count} > cap {cap}")
    mode = resolve_mode(inst.variables, mode)
    if mode is NumberMode.RATIONAL:
        best, best_val = None, None
        for combo in itertools.combinations(range(n), k):
            val = _exact_eval(inst.subset(combo), objective)
            if best_val is None or val > best_val:
                best, best_val = combo, val
        return best, best_val

    grid = union_grid(inst.variables)
    M = cdf_matrix(inst.variables, grid)
    chunk = max(1, int(2e7 // max(1, k * len(grid))))
    best, best_val = None, -math.inf
    combos = itertools.combinations(range(n), k)
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            break
        idx = np.asarray(block, dtype=np.intp)
        F = M[idx]
        P = _max_cdf(F) if objective is Objective.MAX else _smax_cdf(F)
        vals = _sweep(grid, P)
        top = float(vals.max())
        # earliest near-maximal entry keeps lexicographic tie-breaking
        j = int(np.flatnonzero(vals >= top - rel_tol * abs(top))[0])
        if best is None or vals[j] > best_val + rel_tol * abs(best_val):
            best, best_val = tuple(block[j]), float(vals[j])
    return best, best_val


def evaluate_subsets(inst: Instance, subsets, objective=Objective.MAX) -> np.ndarray:
    """Float values of many equal-size subsets at once."""
    objective = Objective.parse(objective)
    grid = union_grid(inst.variables)
    M = cdf_matrix(inst.variables, grid)
    idx = np.asarray(subsets, dtype=np.intp)
    F = M[idx]
    P = _max_cdf(F) if objective is Objective.MAX else _smax_cdf(F)
    return _sweep(grid, P)


def monte_carlo(variables, objective=Objective.MAX, trials: int = 10_000, rng=None):
    """Sample estimate of E[max] or E[smax]; returns ``(mean, std_error)``."""
    objective = Objective.parse(objective)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if rng is None:
        raise ValueError("monte_carlo needs an rng")
    draws = np.stack([np.asarray(sample(v, rng, trials), dtype=np.float64) for v in variables])
    if objective is Objective.MAX:
        stat = draws.max(axis=0)
    else:
        if draws.shape[0] < 2:
            raise ValueError("second max needs at least two variables")
        stat = np.partition(draws, -2, axis=0)[-2]
    m = float(stat.mean())
    se = float(stat.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return m, se
