"""Instance generators: the two hardness reductions (exact rationals), the
clipped-normal experiment family, the data-scarcity variant and random graphs."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .distributions import ContinuousFamily, DiscreteDistribution, empirical_from_samples
from .exact import Instance

SMALL, BIG = "small", "big"
MAX_REDUCTION_EDGES = 8
MAX_DKS_BITS = 1 << 15


@dataclass(frozen=True)
class Graph:
    n_vertices: int
    edges: tuple
    regular: int | None = None

    def __post_init__(self):
        canon = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise ValueError(f"edge ({u}, {v}) out of range")
            canon.add((min(u, v), max(u, v)))
        if len(canon) != len(self.edges):
            raise ValueError("duplicate edges")
        object.__setattr__(self, "edges", tuple(sorted(canon)))
        if self.regular is not None and any(d != self.regular for d in self.degrees()):
            raise ValueError(f"graph is not {self.regular}-regular")

    @property
    def m(self) -> int:
        return len(self.edges)

    def degrees(self) -> list[int]:
        deg = [0] * self.n_vertices
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def is_regular(self) -> bool:
        return len(set(self.degrees())) <= 1

    def induced_edges(self, S: Iterable[int]) -> int:
        S = set(S)
        return sum(1 for u, v in self.edges if u in S and v in S)

    def is_independent(self, S: Iterable[int]) -> bool:
        return self.induced_edges(S) == 0

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(n, tuple(itertools.combinations(range(n), 2)))

    @classmethod
    def cycle(cls, n: int) -> "Graph":
        return cls(n, tuple((i, (i + 1) % n) for i in range(n)))

    @classmethod
    def matching(cls, m: int) -> "Graph":
        return cls(2 * m, tuple((2 * i, 2 * i + 1) for i in range(m)))

    def disjoint_union(self, other: "Graph") -> "Graph":
        shift = self.n_vertices
        return Graph(shift + other.n_vertices,
                     self.edges + tuple((u + shift, v + shift) for u, v in other.edges))

    def to_dict(self) -> dict:
        return {"n_vertices": self.n_vertices, "edges": [list(e) for e in self.edges]}


@dataclass
class RationalInstance:
    """Exact instance plus the reduction's certificate data."""

    instance: Instance
    family: str
    certificates: dict = field(default_factory=dict)

    @property
    def variables(self):
        return self.instance.variables

    @property
    def k(self) -> int:
        return self.instance.k


# ---------------------------------------------------------------------------
# independent set reduction

def gen_independent_set_instance(g: Graph, k: int) -> RationalInstance:
    """Edge number p (1-based, canonical order) contributes atom m^{4p} w.p. m^{-2p}
    to both endpoints; a balancing atom at m^{10m} equalizes every mean to
    mu = max_v sum_{e at v} m^{2p_e}."""
    m = g.m
    if m < 1:
        raise ValueError("graph needs at least one edge")
    if m > MAX_REDUCTION_EDGES:
        raise ValueError(f"m = {m} edges exceeds the guard of {MAX_REDUCTION_EDGES} (values reach m^(10m))")
    if not g.is_regular():
        raise ValueError("independent-set reduction needs a regular graph")
    if not 1 <= k <= g.n_vertices:
        raise ValueError("need 1 <= k <= n")
    incident = [[] for _ in range(g.n_vertices)]
    for p, (u, v) in enumerate(g.edges, start=1):
        incident[u].append(p)
        incident[v].append(p)
    s = [sum(m ** (2 * p) for p in ps) for ps in incident]
    mu = max(s)
    top = m ** (10 * m)
    variables = []
    for v, ps in enumerate(incident):
        atoms = {}
        for p in ps:
            atoms[m ** (4 * p)] = atoms.get(m ** (4 * p), 0) + Fraction(1, m ** (2 * p))
        bal = Fraction(mu - s[v], top)
        if bal:
            atoms[top] = atoms.get(top, 0) + bal
        rest = 1 - sum(atoms.values())
        if rest < 0:
            raise ValueError("probabilities exceed one")
        if rest:
            atoms[0] = atoms.get(0, 0) + rest
        variables.append(DiscreteDistribution(sorted(atoms.items())))
    certs = {
        "mu": mu,
        "completeness": k * mu - Fraction(2, m),
        "soundness": k * mu - 1,
        "edge_index": {f"{u},{v}": p for p, (u, v) in enumerate(g.edges, start=1)},
    }
    return RationalInstance(Instance(variables, k), "clique-reduction", certs)


# ---------------------------------------------------------------------------
# densest subgraph reduction

def edge_rank(i: int, j: int) -> int:
    """(max-1)(max-2)/2 + min on 1-based vertices."""
    hi, lo = max(i, j), min(i, j)
    return (hi - 1) * (hi - 2) // 2 + lo


def gen_densest_subgraph_instance(g: Graph, k: int) -> RationalInstance:
    """Edge (i, j) adds atom p^2 w.p. 1/p to both endpoints, p = (2k+1)^rank."""
    if not 2 <= k <= g.n_vertices:
        raise ValueError("need 2 <= k <= n")
    base = 2 * k + 1
    ranks = [edge_rank(u + 1, v + 1) for u, v in g.edges]
    if ranks and 2 * max(ranks) * math.log2(base) > MAX_DKS_BITS:
        raise ValueError("edge ranks too large for exact arithmetic guard")
    per_vertex = [dict() for _ in range(g.n_vertices)]
    for r, (u, v) in zip(ranks, g.edges):
        p = base ** r
        for w in (u, v):
            per_vertex[w][p * p] = per_vertex[w].get(p * p, 0) + Fraction(1, p)
    variables = []
    for atoms in per_vertex:
        rest = 1 - sum(atoms.values(), Fraction(0))
        if rest:
            atoms[0] = atoms.get(0, 0) + rest
        variables.append(DiscreteDistribution(sorted(atoms.items())))
    certs = {"base": base, "ranks": {f"{u},{v}": r for r, (u, v) in zip(ranks, g.edges)}}
    return RationalInstance(Instance(variables, k), "dks-reduction", certs)


def dks_bounds(g: Graph, S: Iterable[int], k: int) -> tuple[int, Fraction]:
    """(l, l + 1/(2k)) for l = number of edges inside S."""
    ell = g.induced_edges(S)
    return ell, ell + Fraction(1, 2 * k)


# ---------------------------------------------------------------------------
# experiment families

def gen_clipped_normal_instance(n: int, k: int, rng: np.random.Generator, mu_range=(0.0, 60.0),
                                sigma_range=(0.0, 30.0), draws: int = 5000,
                                v_max: float = 1000.0) -> Instance:
    """Empirical distributions of ``draws`` normal samples clipped to [0, v_max]."""
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    mus = rng.uniform(*mu_range, size=n)
    sds = rng.uniform(*sigma_range, size=n)
    samples = rng.normal(mus[:, None], sds[:, None], size=(n, draws))
    return Instance([empirical_from_samples(row, v_max) for row in samples], k)


def gen_bias_instance(n: int, k: int, rng: np.random.Generator, small_draws: int = 10,
                      big_draws: int = 5000, mu_range=(0.0, 60.0), sigma_range=(0.0, 30.0),
                      v_max: float = 1000.0):
    """Like the clipped-normal family, but each variable is labeled small/big
    with probability 1/2 and built from that many draws. Returns the instance
    and the underlying normal families."""
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    mus = rng.uniform(*mu_range, size=n)
    sds = rng.uniform(*sigma_range, size=n)
    small = rng.random(n) < 0.5
    variables, labels = [], []
    for i in range(n):
        count = small_draws if small[i] else big_draws
        variables.append(empirical_from_samples(rng.normal(mus[i], sds[i], size=count), v_max))
        labels.append(SMALL if small[i] else BIG)
    families = [ContinuousFamily.normal(float(m), float(s)) for m, s in zip(mus, sds)]
    return Instance(variables, k, labels), families


def true_performance(families, subset, rng: np.random.Generator, samples: int = 500):
    """Average max and second max over ``samples`` joint draws from the true normals."""
    draws = np.stack([families[i].sample(rng, samples) for i in subset])
    ordered = np.sort(draws, axis=0)
    smax = float(ordered[-2].mean()) if len(subset) >= 2 else float("nan")
    return float(ordered[-1].mean()), smax


def random_discrete_instance(rng: np.random.Generator, n: int, k: int, support: int = 4,
                             value_max: int = 100, exact: bool = False) -> Instance:
    """n variables with ``support`` distinct integer atoms in [0, value_max]."""
    variables = []
    for _ in range(n):
        vals = np.sort(rng.choice(value_max + 1, size=support, replace=False))
        if exact:
            w = rng.integers(1, 20, size=support)
            total = int(w.sum())
            variables.append(DiscreteDistribution([(int(v), Fraction(int(c), total)) for v, c in zip(vals, w)]))
        else:
            variables.append(DiscreteDistribution.from_arrays(vals.astype(float), rng.dirichlet(np.ones(support))))
    return Instance(variables, k)


# ---------------------------------------------------------------------------
# random graphs

def random_graph(n: int, rng: np.random.Generator, p: float | None = None,
                 degree: int | None = None, max_tries: int = 10_000) -> Graph:
    """G(n, p), or a uniform-ish d-regular graph by the pairing model with rejection."""
    if (p is None) == (degree is None):
        raise ValueError("give exactly one of p or degree")
    if p is not None:
        if not 0 <= p <= 1:
            raise ValueError("p must be in [0, 1]")
        pairs = list(itertools.combinations(range(n), 2))
        keep = rng.random(len(pairs)) < p
        return Graph(n, tuple(e for e, kept in zip(pairs, keep) if kept))
    d = degree
    if d < 0 or d >= max(n, 1) and not (n == 0 and d == 0):
        raise ValueError("need 0 <= d < n")
    if (n * d) % 2:
        raise ValueError("n * d must be even")
    points = np.repeat(np.arange(n), d)
    for _ in range(max_tries):
        perm = rng.permutation(points)
        pairs = perm.reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        edges = {(min(a, b), max(a, b)) for a, b in pairs.tolist()}
        if len(edges) == len(pairs):
            return Graph(n, tuple(edges), regular=d)
    raise RuntimeError("pairing model did not produce a simple graph")
