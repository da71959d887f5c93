"""Approximation scheme for the expected-maximum objective.

Pipeline: collapse the far tail above tau, zero out values below eps^2 tau,
round the rest down to geometric interval endpoints, split each variable into
core and tail at eta, prune/round tail contributions into a small "type"
signature, then enumerate type histograms.

Thresholds tau and eta are searched over atom values with ">= eps" and
">= 1 - eps" semantics since exact equality is generically unattainable for
discrete inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from collections.abc import Sequence

import numpy as np

from .distributions import DiscreteDistribution
from .exact import Instance, NumberMode, _max_cdf, _sweep, brute_force_opt, cdf_matrix
from .selectors import SelectionResult, _MaxGreedyState, finish, greedy_max_order

_TOL = 1e-12


@dataclass(frozen=True)
class PtasConfig:
    epsilon: float = 0.1
    counts: str = "exact"  # or "geometric"
    # when eps*k < 1 the core is empty; enumerate the rounded instance if this many subsets suffice
    brute_force_cap: int = 200_000

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must be in (0, 1]")
        if self.counts not in ("exact", "geometric"):
            raise ValueError("counts must be 'exact' or 'geometric'")


@dataclass
class PreprocessTrace:
    epsilon: float
    tau: float
    h_max: float | None
    H: list
    eta: float | None
    core: list[int]
    ell: int
    interval_lefts: list[float]
    boundaries: list[float]
    n_types: int = 0
    fallback: str | None = None
    best_histogram: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class RelVector:
    """Per-interval exponents z (entry = (1-eps)^z), ``None`` for pruned or empty intervals."""

    exponents: tuple
    tail_mean: float
    epsilon: float

    @property
    def entries(self) -> list[float]:
        return [0.0 if z is None else (1 - self.epsilon) ** z for z in self.exponents]

    @property
    def signature(self) -> tuple:
        return self.exponents


# ---------------------------------------------------------------------------
# atom pool: every variable's atoms in three flat arrays

class AtomPool:
    def __init__(self, values, probs, owner, n):
        self.values, self.probs, self.owner, self.n = values, probs, owner, n

    @classmethod
    def from_vars(cls, variables: Sequence[DiscreteDistribution]) -> "AtomPool":
        sizes = [v.support_size for v in variables]
        return cls(np.concatenate([v.values for v in variables]),
                   np.concatenate([v.probs for v in variables]),
                   np.repeat(np.arange(len(variables)), sizes), len(variables))

    def normalized(self) -> "AtomPool":
        """Sort by (owner, value), merge duplicates, drop zero mass."""
        keep = self.probs > 0
        v, p, o = self.values[keep], self.probs[keep], self.owner[keep]
        if len(v) == 0:
            return AtomPool(v, p, o, self.n)
        # the per-step value maps are monotone, so pools usually arrive sorted
        do, dv = np.diff(o), np.diff(v)
        if not np.all((do > 0) | ((do == 0) & (dv >= 0))):
            order = np.lexsort((v, o))
            v, p, o = v[order], p[order], o[order]
        start = np.ones(len(v), dtype=bool)
        start[1:] = (np.diff(o) != 0) | (np.diff(v) != 0)
        idx = np.flatnonzero(start)
        return AtomPool(v[idx], np.add.reduceat(p, idx), o[idx], self.n)

    def to_vars(self) -> list[DiscreteDistribution]:
        pool = self.normalized()
        cuts = np.searchsorted(pool.owner, np.arange(self.n + 1))
        out = []
        for i in range(self.n):
            a, b = cuts[i], cuts[i + 1]
            p = pool.probs[a:b]
            out.append(DiscreteDistribution.from_arrays(pool.values[a:b], p / p.sum(), tol=1e-6))
        return out

    def lazy(self) -> "LazyVariables":
        return LazyVariables(self.normalized())

    def per_var(self, weights) -> np.ndarray:
        return np.bincount(self.owner, weights=weights, minlength=self.n)

    def reach(self, t) -> np.ndarray:
        """Pr[X_i >= t] for every variable."""
        return self.per_var(self.probs * (self.values >= t))


class LazyVariables(Sequence):
    """Read-only sequence view of a pool that builds distributions on demand."""

    def __init__(self, pool: AtomPool):
        self.pool = pool
        self.cuts = np.searchsorted(pool.owner, np.arange(pool.n + 1))
        self._cache: dict[int, DiscreteDistribution] = {}

    def __len__(self):
        return self.pool.n

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        i = int(i)
        if i not in self._cache:
            a, b = self.cuts[i], self.cuts[i + 1]
            p = self.pool.probs[a:b]
            self._cache[i] = DiscreteDistribution.from_arrays(self.pool.values[a:b], p / p.sum(), tol=1e-6)
        return self._cache[i]

    def means(self) -> np.ndarray:
        return self.pool.per_var(self.pool.values * self.pool.probs)


def _means(variables) -> np.ndarray:
    if isinstance(variables, LazyVariables):
        return variables.means()
    return np.array([float(np.dot(v.values, v.probs)) for v in variables])


def _best_reach(reach: np.ndarray, size: int) -> float:
    """Pr[max >= t] for the ``size`` variables most likely to reach t."""
    if size < len(reach):
        reach = np.partition(reach, len(reach) - size)[len(reach) - size:]
    with np.errstate(divide="ignore"):
        return float(-np.expm1(np.log1p(-np.minimum(reach, 1.0)).sum()))


def _largest_feasible(candidates: np.ndarray, feasible) -> float:
    """Largest candidate (ascending array) for which ``feasible`` holds; the smallest always does."""
    lo, hi = 0, len(candidates) - 1
    if feasible(candidates[hi]):
        return float(candidates[hi])
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if feasible(candidates[mid]):
            lo = mid
        else:
            hi = mid
    return float(candidates[lo])


def _vars(x) -> list[DiscreteDistribution]:
    variables = x.variables if isinstance(x, Instance) else list(x)
    return [v.to_float() for v in variables]


# ---------------------------------------------------------------------------
# step 1: far tail

def _find_tau(pool: AtomPool, k: int, eps: float) -> float:
    cands = np.unique(pool.values)
    return _largest_feasible(cands, lambda t: _best_reach(pool.reach(t), k) >= eps - _TOL)


def find_tau(inst: Instance, epsilon: float) -> float:
    """Largest atom value tau whose best k-set reaches tau with probability >= epsilon."""
    return _find_tau(AtomPool.from_vars(_vars(inst)), inst.k, epsilon)


def _collapse(pool: AtomPool, tau: float):
    above = pool.values > tau
    mass = pool.per_var(pool.probs * above)
    con = pool.per_var(pool.values * pool.probs * above)
    has = mass > 0
    H = np.full(pool.n, np.nan)
    H[has] = con[has] / mass[has]
    if not has.any():
        return pool, H, None
    h_max = float(H[has].max())
    ids = np.flatnonzero(has)
    ratio = H[ids] / h_max
    values = np.concatenate([pool.values[~above], np.full(len(ids), h_max), np.zeros(len(ids))])
    probs = np.concatenate([pool.probs[~above], mass[ids] * ratio, mass[ids] * (1 - ratio)])
    owner = np.concatenate([pool.owner[~above], ids, ids])
    return AtomPool(values, probs, owner, pool.n).normalized(), H, h_max


def collapse_far_tail(variables, tau: float):
    """Replace mass above tau by {H_max w.p. H_i/H_max, 0 otherwise}, scaled by Pr[X_i > tau].

    Returns ``(new_variables, H, h_max)`` where ``H[i] = E[X_i | X_i > tau]``
    (NaN when variable i has no mass above tau).
    """
    pool, H, h_max = _collapse(AtomPool.from_vars(_vars(variables)), tau)
    return pool.to_vars(), [None if math.isnan(h) else float(h) for h in H], h_max


# ---------------------------------------------------------------------------
# steps 2-3: small values, interval rounding

def _discard_small(pool: AtomPool, eps: float, tau: float) -> AtomPool:
    cut = eps * eps * tau
    values = np.where(pool.values < cut, 0.0, pool.values)
    return AtomPool(values, pool.probs, pool.owner, pool.n).normalized()


def discard_small_values(variables, epsilon: float, tau: float) -> list[DiscreteDistribution]:
    """Move every atom below eps^2 tau to 0 (the cut value itself is kept)."""
    return _discard_small(AtomPool.from_vars(_vars(variables)), epsilon, tau).to_vars()


def interval_count(eps: float) -> int:
    """ell = ceil(log_{1-eps}(eps^2)); a single interval when eps = 1."""
    if eps >= 1:
        return 1
    return max(1, math.ceil(math.log(eps * eps) / math.log(1 - eps) - 1e-9))


def interval_lefts(eps: float, tau: float) -> np.ndarray:
    ell = interval_count(eps)
    if eps >= 1:
        return np.array([tau])
    return eps * eps * tau / (1 - eps) ** np.arange(ell)


def _round_intervals(pool: AtomPool, eps: float, tau: float) -> AtomPool:
    lefts = interval_lefts(eps, tau)
    v = pool.values
    inside = (v >= lefts[0]) & (v <= tau)
    j = np.clip(np.searchsorted(lefts, v, side="right") - 1, 0, len(lefts) - 1)
    values = np.where(inside, lefts[j], v)
    return AtomPool(values, pool.probs, pool.owner, pool.n).normalized()


def round_to_intervals(variables, epsilon: float, tau: float) -> list[DiscreteDistribution]:
    """Round values in [eps^2 tau, tau] down to their interval's left endpoint.

    Intervals are [eps^2 tau/(1-eps)^(j-1), eps^2 tau/(1-eps)^j); the top one is
    closed at tau. Zero and values above tau are untouched.
    """
    return _round_intervals(AtomPool.from_vars(_vars(variables)), epsilon, tau).to_vars()


# ---------------------------------------------------------------------------
# step 4: core / tail

def core_size(eps: float, k: int) -> int:
    return max(1, math.floor(eps * k + 1e-9))


def _find_eta(pool: AtomPool, eps: float, k: int):
    c = core_size(eps, k)
    cands = np.unique(pool.values)
    eta = _largest_feasible(cands, lambda t: _best_reach(pool.reach(t), c) >= 1 - eps - _TOL)
    reach = pool.reach(eta)
    order = np.lexsort((np.arange(pool.n), -reach))
    return eta, sorted(int(i) for i in order[:c])


def find_eta_and_core(variables, epsilon: float, k: int):
    """Largest atom eta that the best floor(eps k)-set (at least 1) reaches w.p. >= 1 - eps, and that set."""
    return _find_eta(AtomPool.from_vars(_vars(variables)), epsilon, k)


def _split(pool: AtomPool, eta: float):
    high = pool.values > eta
    core = AtomPool(np.where(high, 0.0, pool.values), pool.probs, pool.owner, pool.n).normalized()
    tail = AtomPool(np.where(high, pool.values, 0.0), pool.probs, pool.owner, pool.n).normalized()
    return core, tail


def core_tail_split(variables, eta: float):
    """C_i = Y_i 1{Y_i <= eta}, T_i = Y_i 1{Y_i > eta}."""
    core, tail = _split(AtomPool.from_vars(_vars(variables)), eta)
    return core.to_vars(), tail.to_vars()


# ---------------------------------------------------------------------------
# step 5: prune and round relative contributions

def prune_threshold(eps: float) -> float:
    return eps ** (1.0 / eps + 3.0)


def _round_exponent(rel: np.ndarray, eps: float) -> np.ndarray:
    """Smallest integer z >= 0 with (1-eps)^z <= rel."""
    base = math.log(1 - eps)
    z = np.ceil(np.log(rel) / base - 1e-9).astype(np.int64)
    z = np.maximum(z, 0)
    # guard log rounding on both sides
    z = np.where((1 - eps) ** z > rel * (1 + 1e-12), z + 1, z)
    z = np.where((z > 0) & ((1 - eps) ** np.maximum(z - 1, 0) <= rel * (1 + 1e-12)), z - 1, z)
    return z


def _prune_round(tail: AtomPool, eps: float, points: np.ndarray):
    """Returns (pruned tail pool, exponent matrix n x len(points) with -1 for empty, tail means)."""
    pos = tail.values > 0
    means = tail.per_var(tail.values * tail.probs * pos)
    v, p, o = tail.values[pos], tail.probs[pos], tail.owner[pos]
    rel = v * p / means[o]
    keep = rel > prune_threshold(eps)
    exps = np.full((tail.n, len(points)), -1, dtype=np.int64)
    if keep.any() and eps < 1:
        v, p, o, rel = v[keep], p[keep], o[keep], rel[keep]
        z = _round_exponent(rel, eps)
        newp = (1 - eps) ** z * means[o] / v
        slot = np.searchsorted(points, v)
        exps[o, slot] = z
    else:
        v = p = np.zeros(0)
        o = np.zeros(0, dtype=np.int64)
        newp = p
    # remaining mass of each variable sits at zero
    zero_mass = 1.0 - np.bincount(o, weights=newp, minlength=tail.n)
    values = np.concatenate([v, np.zeros(tail.n)])
    probs = np.concatenate([newp, np.maximum(zero_mass, 0.0)])
    owner = np.concatenate([o, np.arange(tail.n)])
    return AtomPool(values, probs, owner, tail.n).normalized(), exps, means


def prune_and_round_rel(tail: DiscreteDistribution, epsilon: float, points: Sequence[float]):
    """Drop intervals contributing at most eps^(1/eps+3) E[T]; round the others' contribution
    down to (1-eps)^z E[T] by shrinking their probability.

    ``points`` lists the interval values (left endpoints, then H_max) that
    index the returned :class:`RelVector`.
    """
    pts = np.asarray(points, dtype=np.float64)
    pool, exps, means = _prune_round(AtomPool.from_vars([tail.to_float()]), epsilon, pts)
    rel = RelVector(tuple(None if z < 0 else int(z) for z in exps[0]), float(means[0]), epsilon)
    return pool.to_vars()[0], rel


# ---------------------------------------------------------------------------
# histogram enumeration

def _count_options(avail: int, budget: int, eps: float, counts: str) -> list[int]:
    top = min(avail, budget)
    if counts == "exact":
        return list(range(top + 1))
    opts, x = {0}, 1.0
    while math.floor(x) <= top:
        opts.add(math.floor(x))
        x *= 1 + eps
    opts.add(top)
    return sorted(opts)


def enumerate_and_solve(types: Sequence[tuple], k_prime: int, core: Sequence[int],
                        Y: Sequence[DiscreteDistribution], T_hat: Sequence[DiscreteDistribution],
                        cfg: PtasConfig, *, return_histogram: bool = False):
    """Try every type histogram with total <= k'; keep the best candidate set.

    ``types`` is a list of ``(signature, member_ids)`` with members sorted by
    tail mean descending. Each candidate takes, per type, its first ``c``
    members. The objective is E[max(max_cand T_hat, max_core Y)]. The winner is
    joined with the core and padded with the unused variables of largest mean
    Y up to ``k = |core| + k'``.
    """
    used_tails = [i for _, members in types for i in members[:k_prime]]
    grid = np.unique(np.concatenate([Y[i].values for i in core] + [T_hat[i].values for i in used_tails]
                                    + [np.zeros(1)]))
    base = _max_cdf(cdf_matrix([Y[i] for i in core], grid)[None])[0] if core else np.ones(len(grid))
    prefix = []
    for _, members in types:
        m = members[:k_prime]
        rows = cdf_matrix([T_hat[i] for i in m], grid) if m else np.ones((0, len(grid)))
        pref = np.ones((len(m) + 1, len(grid)))
        if m:
            pref[1:] = np.cumprod(rows, axis=0)
        prefix.append(pref)
    options = [_count_options(len(members), k_prime, cfg.epsilon, cfg.counts) for _, members in types]

    best = {"value": -math.inf, "counts": None}

    def dfs(t, budget, P, counts):
        if t == len(types):
            val = float(_sweep(grid, P))
            if val > best["value"] + _TOL * abs(val):
                best["value"], best["counts"] = val, list(counts)
            return
        for c in options[t]:
            if c > budget:
                break
            counts.append(c)
            dfs(t + 1, budget - c, P * prefix[t][c] if c else P, counts)
            counts.pop()

    dfs(0, k_prime, base, [])
    chosen = list(core)
    for (_, members), c in zip(types, best["counts"]):
        chosen.extend(members[:c])
    k = len(core) + k_prime
    if len(chosen) < k:
        means = _means(Y)
        used = set(chosen)
        for i in np.lexsort((np.arange(len(Y)), -means)):
            if len(chosen) >= k:
                break
            if int(i) not in used:
                chosen.append(int(i))
                used.add(int(i))
    subset = sorted(chosen)
    if return_histogram:
        return subset, best
    return subset


def _types_from_exponents(exps: np.ndarray, means: np.ndarray, exclude: set[int]):
    live = [i for i in range(len(means)) if means[i] > 0 and i not in exclude]
    if not live:
        return []
    sig, inv = np.unique(exps[live], axis=0, return_inverse=True)
    inv = np.asarray(inv).ravel()
    groups: dict[int, list[int]] = {}
    for pos, g in enumerate(inv):
        groups.setdefault(int(g), []).append(live[pos])
    types = []
    for g, members in sorted(groups.items()):
        members.sort(key=lambda i: (-means[i], i))
        types.append((tuple(int(z) for z in sig[g]), members))
    return types


def ptas_select(inst: Instance, cfg: PtasConfig | None = None) -> SelectionResult:
    """Run the preprocessing pipeline and histogram enumeration; evaluate the
    chosen subset on the original instance.

    When eps*k < 1 there is no room for a core; if C(n, k) is within
    ``cfg.brute_force_cap`` the rounded instance is enumerated instead,
    otherwise a singleton core is used.
    """
    cfg = cfg or PtasConfig()
    eps, k = cfg.epsilon, inst.k
    if k == inst.n:
        return finish(inst, range(k), None, "ptas", eps)

    X = AtomPool.from_vars(_vars(inst)).normalized()
    tau = _find_tau(X, k, eps)
    Xh, H, h_max = _collapse(X, tau)
    Yp = _round_intervals(_discard_small(Xh, eps, tau), eps, tau)
    lefts = interval_lefts(eps, tau)
    trace = PreprocessTrace(
        epsilon=eps, tau=float(tau), h_max=h_max,
        H=[None if math.isnan(h) else float(h) for h in H], eta=None, core=[], ell=len(lefts),
        interval_lefts=list(map(float, lefts)),
        boundaries=list(map(float, lefts)) + [float(tau)] + ([float(h_max)] if h_max is not None else []),
    )

    if math.floor(eps * k + 1e-9) < 1 and math.comb(inst.n, k) <= cfg.brute_force_cap:
        trace.fallback = "brute-force"
        subset, _ = brute_force_opt(Instance(Yp.to_vars(), k), mode=NumberMode.FLOAT)
        return finish(inst, subset, None, "ptas", eps, trace=trace.to_dict())

    eta, core = _find_eta(Yp, eps, k)
    _, tail = _split(Yp, eta)
    points = np.append(lefts, h_max if h_max is not None else np.inf)
    That, exps, means = _prune_round(tail, eps, points)
    types = _types_from_exponents(exps, means, set(core))
    trace.eta, trace.core, trace.n_types = float(eta), core, len(types)

    Y = Yp.lazy()
    if not types:
        trace.fallback = "greedy"
        pool = Y.pool
        subset = greedy_max_order(_MaxGreedyState(pool.values, pool.probs, pool.owner, pool.n), k)
        return finish(inst, subset, None, "ptas", eps, trace=trace.to_dict())

    subset, best = enumerate_and_solve(types, k - len(core), core, Y, That.lazy(), cfg, return_histogram=True)
    trace.best_histogram = {"value": best["value"], "counts": best["counts"]}
    return finish(inst, subset, None, "ptas", eps, trace=trace.to_dict())
