"""Batch experiments: method comparison, data-scarcity bias, inequality
verification and PTAS scaling. Every experiment writes tidy CSV rows; plots
are left to external tools.

Per-trial randomness comes from ``derive_seed(cfg.seed, trial, ...)`` so any
trial can be re-run on its own.
"""
from __future__ import annotations

import csv
import gc
import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from .anchoring import (
    compute_beta,
    mhr_quantile_check,
    probability_lower_bound_check,
    tail_bound_report,
    truncation_equivariance_check,
    truncation_loss,
)
from .distributions import ContinuousFamily, DiscreteDistribution, derive_seed, make_rng
from .exact import Instance, Objective, brute_force_opt, evaluate
from .generators import (
    SMALL,
    Graph,
    dks_bounds,
    gen_bias_instance,
    gen_clipped_normal_instance,
    gen_densest_subgraph_instance,
    gen_independent_set_instance,
    random_discrete_instance,
    true_performance,
)
from .ptas import PtasConfig, ptas_select
from .selectors import (
    finish,
    greedy_order,
    p_from_bottom_quantile,
    select_expectation,
    select_kr_best_of_samples,
    select_kr_top_quantile,
    select_quantile,
    truncated_selection_check,
)

EXPERIMENTS = ("compare", "bias", "verify", "scaling")
DEFAULT_QUANTILES = (0.7, 0.8, 0.9, 0.95, 0.99)
DEFAULT_METHODS = ("quantile", "kr-q", "kr-samples", "mean", "greedy")
KNOWN_METHODS = DEFAULT_METHODS + ("oracle", "ptas")
THEORY = "theory"
GREEDY_FACTOR = 1 - 1 / math.e


@dataclass
class ExperimentConfig:
    experiment: str = "compare"
    n: int = 500
    k_list: list = field(default_factory=lambda: [10, 20, 30])
    trials: int = 100
    seed: int = 0
    methods: list = field(default_factory=lambda: list(DEFAULT_METHODS))
    quantiles: list = field(default_factory=lambda: list(DEFAULT_QUANTILES))
    sweep: bool = True
    ptas_epsilon: float = 0.1
    draws: int = 5000
    v_max: float = 1000.0
    small_draws: int = 10
    big_draws: int = 5000
    score_samples: int = 500
    suites: list | None = None
    sizes: list = field(default_factory=lambda: [1000, 10_000, 100_000])
    epsilon: float = 0.25
    scaling_k: int = 50
    repeats: int = 3
    out: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.experiment in ("compare", "bias"):
            for k in self.k_list:
                if not 2 <= k <= self.n:
                    raise ValueError(f"k = {k} outside [2, n = {self.n}]")
            unknown = set(self.methods) - set(KNOWN_METHODS)
            if unknown:
                raise ValueError(f"unknown methods {sorted(unknown)}")
        for q in self.quantiles:
            if not 0 < q < 1:
                raise ValueError("quantiles are bottom fractions in (0, 1)")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class ResultRow:
    experiment: str
    trial: int
    method: str
    param: str
    k: int
    objective: str
    value: float
    small_label_fraction: float | None = None
    runtime_ms: float = 0.0
    n: int | None = None


def _row_values(rows, sel, value, runtime_ms, small=None, **base):
    out = []
    for obj, v in (("max", value[0]), ("smax", value[1])):
        if v is None:
            continue
        out.append(ResultRow(objective=obj, value=float(v), runtime_ms=runtime_ms,
                             small_label_fraction=small, **base))
    rows.extend(out)


# ---------------------------------------------------------------------------
# method runs shared by compare and bias

def _fmt(q) -> str:
    return f"{q:g}"


def method_runs(inst: Instance, cfg: ExperimentConfig, greedy_prefix: list[int] | None = None):
    """Yield ``(method, param_label, SelectionResult, runtime_ms)`` for every
    configured method and parameter point on ``inst``."""
    k = inst.k

    def timed(fn):
        t0 = time.perf_counter()
        res = fn()
        return res, (time.perf_counter() - t0) * 1e3

    quantiles = cfg.quantiles if cfg.sweep else []
    for method in cfg.methods:
        if method == "quantile":
            points = [(THEORY, "sqrt_k")] + [(_fmt(q), p_from_bottom_quantile(q)) for q in quantiles]
            for label, p in points:
                res, ms = timed(lambda: select_quantile(inst, p))
                yield method, label, res, ms
        elif method == "kr-q":
            points = [(THEORY, "one_over_k")] + [(_fmt(q), 1 - q) for q in quantiles]
            for label, q in points:
                res, ms = timed(lambda: select_kr_top_quantile(inst, q))
                yield method, label, res, ms
        elif method == "kr-samples":
            res, ms = timed(lambda: select_kr_best_of_samples(inst, "k"))
            yield method, THEORY, res, ms
        elif method == "mean":
            res, ms = timed(lambda: select_expectation(inst))
            yield method, "", res, ms
        elif method == "greedy":
            if greedy_prefix is not None and len(greedy_prefix) >= k:
                res, ms = timed(lambda: finish(inst, greedy_prefix[:k], None, "greedy", "max"))
            else:
                res, ms = timed(lambda: finish(inst, greedy_order(inst), None, "greedy", "max"))
            yield method, "", res, ms
        elif method == "ptas":
            res, ms = timed(lambda: ptas_select(inst, PtasConfig(cfg.ptas_epsilon)))
            yield method, _fmt(cfg.ptas_epsilon), res, ms
        elif method == "oracle":
            t0 = time.perf_counter()
            best_max = brute_force_opt(inst, Objective.MAX)
            best_smax = brute_force_opt(inst, Objective.SMAX)
            ms = (time.perf_counter() - t0) * 1e3
            res = finish(inst, best_max[0], None, "oracle", None)
            res.value_smax = best_smax[1]
            res.meta["smax_subset"] = list(best_smax[0])
            yield method, "", res, ms


def _greedy_prefix(variables, cfg: ExperimentConfig):
    if "greedy" not in cfg.methods:
        return None
    return greedy_order(Instance(variables, max(cfg.k_list)))


def run_compare(cfg: ExperimentConfig) -> list[ResultRow]:
    """Per trial: one clipped-normal instance, every method at every k."""
    rows: list[ResultRow] = []
    for trial in range(cfg.trials):
        rng = make_rng(derive_seed(cfg.seed, trial))
        base = gen_clipped_normal_instance(cfg.n, max(cfg.k_list), rng, draws=cfg.draws, v_max=cfg.v_max)
        prefix = _greedy_prefix(base.variables, cfg)
        for k in cfg.k_list:
            inst = Instance(base.variables, k)
            for method, label, res, ms in method_runs(inst, cfg, prefix):
                _row_values(rows, res, (res.value_max, res.value_smax), ms, experiment="compare",
                            trial=trial, method=method, param=label, k=k, n=cfg.n)
    return rows


def run_bias(cfg: ExperimentConfig) -> list[ResultRow]:
    """Per trial: labeled instance; score each selection against the true normals."""
    rows: list[ResultRow] = []
    for trial in range(cfg.trials):
        rng = make_rng(derive_seed(cfg.seed, trial))
        base, families = gen_bias_instance(cfg.n, max(cfg.k_list), rng, cfg.small_draws, cfg.big_draws,
                                           v_max=cfg.v_max)
        prefix = _greedy_prefix(base.variables, cfg)
        for k in cfg.k_list:
            inst = Instance(base.variables, k, base.labels)
            for m_idx, (method, label, res, ms) in enumerate(method_runs(inst, cfg, prefix)):
                score_rng = make_rng(derive_seed(cfg.seed, trial, k, m_idx))
                truth = true_performance(families, res.subset, score_rng, cfg.score_samples)
                small = sum(base.labels[i] == SMALL for i in res.subset) / k
                _row_values(rows, res, truth, ms, small=small, experiment="bias", trial=trial,
                            method=method, param=label, k=k, n=cfg.n)
    return rows


# ---------------------------------------------------------------------------
# scaling

def gen_scaling_instance(n: int, k: int, rng: np.random.Generator) -> Instance:
    """Two-point variables {0, v} with v ~ U[1, 100] and Pr[v] ~ U[0.001, 0.2]."""
    values = rng.uniform(1.0, 100.0, n)
    probs = rng.uniform(0.001, 0.2, n)
    variables = [DiscreteDistribution.from_arrays(np.array([0.0, v]), np.array([1 - p, p]))
                 for v, p in zip(values, probs)]
    return Instance(variables, k)


def run_scaling(cfg: ExperimentConfig) -> list[ResultRow]:
    rows: list[ResultRow] = []
    for size_idx, n in enumerate(cfg.sizes):
        inst = gen_scaling_instance(n, min(cfg.scaling_k, n), make_rng(derive_seed(cfg.seed, size_idx)))
        for rep in range(cfg.repeats):
            # as timeit does: keep cyclic GC passes over the instance out of the timing
            gc.collect()
            gc.disable()
            try:
                t0 = time.perf_counter()
                res = ptas_select(inst, PtasConfig(cfg.epsilon))
                ms = (time.perf_counter() - t0) * 1e3
            finally:
                gc.enable()
            rows.append(ResultRow("scaling", rep, "ptas", _fmt(cfg.epsilon), inst.k, "max",
                                  float(res.value_max), None, ms, n))
    return rows


def doubling_factors(rows: list[ResultRow]) -> list[tuple[int, int, float]]:
    """Per consecutive pair of sizes: runtime growth per doubling of n, using
    the fastest repeat at each size."""
    best: dict[int, float] = {}
    for r in rows:
        best[r.n] = min(best.get(r.n, math.inf), r.runtime_ms)
    sizes = sorted(best)
    out = []
    for a, b in zip(sizes, sizes[1:]):
        out.append((a, b, (best[b] / best[a]) ** (1 / math.log2(b / a))))
    return out


# ---------------------------------------------------------------------------
# verification battery

@dataclass
class Check:
    suite: str
    seed: int
    name: str
    lhs: float
    rhs: float
    ok: bool
    detail: str = ""

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs


@dataclass
class VerifyReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def violations(self) -> list[Check]:
        return [c for c in self.checks if not c.ok]

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1

    def rows(self) -> list[dict]:
        return [dict(asdict(c), margin=c.margin) for c in self.checks]


def _ge(suite, seed, name, lhs, rhs, detail="", rel=1e-9) -> Check:
    lhs_f, rhs_f = float(lhs), float(rhs)
    if isinstance(lhs, (int, Fraction)) and isinstance(rhs, (int, Fraction)):
        ok = lhs >= rhs
    else:
        ok = lhs_f >= rhs_f - rel * max(1.0, abs(rhs_f))
    return Check(suite, seed, name, lhs_f, rhs_f, bool(ok), detail)


def _random_mhr(rng, n) -> list[ContinuousFamily]:
    out = []
    for _ in range(n):
        kind = rng.integers(3)
        if kind == 0:
            out.append(ContinuousFamily.exponential(float(rng.uniform(0.2, 3))))
        elif kind == 1:
            a = float(rng.uniform(0, 5))
            out.append(ContinuousFamily.uniform(a, a + float(rng.uniform(0.5, 10))))
        else:
            out.append(ContinuousFamily.normal(float(rng.uniform(0, 20)), float(rng.uniform(0.5, 8))))
    return out


def _random_two_point_exact(rng, k) -> list[DiscreteDistribution]:
    out = []
    for _ in range(k):
        lo, hi = sorted(int(x) for x in rng.choice(50, size=2, replace=False))
        p = Fraction(int(rng.integers(1, 40)), 40)
        out.append(DiscreteDistribution([(lo, 1 - p), (hi, p)]))
    return out


def suite_greedy(seed):
    rng = make_rng(seed)
    n = int(rng.integers(4, 11))
    inst = random_discrete_instance(rng, n, int(rng.integers(2, min(4, n) + 1)), support=3)
    opt = brute_force_opt(inst)[1]
    val = evaluate(inst.subset(greedy_order(inst)), Objective.MAX)
    return [_ge("greedy", seed, "greedy >= (1-1/e) opt", val, GREEDY_FACTOR * opt)]


def suite_quantile_truncated(seed):
    rng = make_rng(seed)
    n = int(rng.integers(3, 7))
    inst = random_discrete_instance(rng, n, int(rng.integers(2, min(3, n) + 1)), support=3,
                                    value_max=30, exact=True)
    p = [Fraction(2), Fraction(3), Fraction(3, 2), Fraction(5, 2), Fraction(4)][int(rng.integers(5))]
    rep = truncated_selection_check(inst, p)
    return [_ge("quantile-truncated", seed, "max_S >= factor max_A", rep.worst_max[1], 0, f"p={p}"),
            _ge("quantile-truncated", seed, "smax_S >= factor smax_A", rep.worst_smax[1], 0, f"p={p}")]


def suite_quantile_guarantee(seed):
    rng = make_rng(seed)
    n = int(rng.integers(4, 9))
    k = 2 if n < 6 else 4
    inst = Instance(_random_mhr(rng, n), k)
    res = select_quantile(inst, "sqrt_k")
    opt_max = brute_force_opt(inst, Objective.MAX)[1]
    opt_smax = brute_force_opt(inst, Objective.SMAX)[1]
    return [_ge("quantile-guarantee", seed, "max >= opt/32", res.value_max, opt_max / 32),
            _ge("quantile-guarantee", seed, "smax >= opt/1000", res.value_smax, opt_smax / 1000)]


def suite_truncation_loss(seed):
    rng = make_rng(seed)
    fams = _random_mhr(rng, int(rng.choice([2, 4, 8])))
    r_max, r_smax = truncation_loss(fams)
    return [_ge("truncation-loss", seed, "28.8 >= max ratio", 28.8, r_max),
            _ge("truncation-loss", seed, "122 >= smax ratio", 122, r_smax)]


def suite_beta_probability(seed):
    rng = make_rng(seed)
    vs = _random_two_point_exact(rng, int(rng.choice([2, 4, 8, 16])))
    p_max, p_smax = probability_lower_bound_check(vs)
    return [_ge("beta-probability", seed, "Pr[max >= beta] >= 1/2", p_max, Fraction(1, 2)),
            _ge("beta-probability", seed, "Pr[smax >= beta1] >= 0.098", p_smax, Fraction(98, 1000))]


def suite_beta_equivariance(seed):
    rng = make_rng(seed)
    vs = _random_two_point_exact(rng, int(rng.choice([2, 3, 4, 8, 16])))
    ok = truncation_equivariance_check(vs, compute_beta(vs))
    return [Check("beta-equivariance", seed, "trace(X) == trace(X_hat)", float(ok), 1.0, ok)]


def suite_mhr_quantile_facts(seed):
    rng = make_rng(seed)
    f = _random_mhr(rng, 1)[0]
    if f.kind == "normal":
        f = ContinuousFamily.exponential(float(rng.uniform(0.2, 3)))
    rep = mhr_quantile_check(f, np.geomspace(1, 1e4, 25), np.linspace(1, 20, 20))
    return [_ge("mhr-quantile-facts", seed, "d alpha_p >= alpha_{p^d}", rep.worst_power[2], 0, str(f.params())),
            _ge("mhr-quantile-facts", seed, "6 alpha_p/p >= Con", rep.worst_tail[1], 0, str(f.params()))]


def suite_tail_bounds(seed):
    rng = make_rng(seed)
    fams = [ContinuousFamily.exponential(float(r)) for r in rng.uniform(0.2, 3, 8)]
    rep = tail_bound_report(fams, eps_grid=(2 ** -5, 2 ** -6, 2 ** -8), mc_trials=2000, rng=rng)
    return [_ge("tail-bounds", seed, f"{x.name} eps={x.epsilon:g}", x.rhs, x.lhs) for x in rep.lines]


def suite_ptas(seed):
    rng = make_rng(seed)
    n = int(rng.integers(4, 13))
    inst = random_discrete_instance(rng, n, int(rng.integers(2, min(4, n) + 1)), support=3)
    opt = brute_force_opt(inst)[1]
    res = ptas_select(inst, PtasConfig(0.1))
    return [_ge("ptas", seed, "ptas >= (1 - 10 eps) opt", res.value_max, (1 - 10 * 0.1) * opt)]


_REGULAR = [Graph.cycle(3), Graph.cycle(4), Graph.cycle(5), Graph.matching(2), Graph.matching(3),
            Graph.complete(4)]


def suite_independent_set(seed):
    g = _REGULAR[seed % len(_REGULAR)]
    k = 2 + (seed // len(_REGULAR)) % (g.n_vertices - 1)
    red = gen_independent_set_instance(g, k)
    c = red.certificates
    out = []
    for S in itertools.combinations(range(g.n_vertices), k):
        val = evaluate(red.instance.subset(S), Objective.MAX)
        if g.is_independent(S):
            out.append(_ge("independent-set", seed, f"IS {S}: E[max] >= k mu - 2/m", val, c["completeness"]))
        else:
            out.append(_ge("independent-set", seed, f"non-IS {S}: k mu - 1 >= E[max]", c["soundness"], val))
    return out


def _dks_cases(seed):
    rng = make_rng(seed)
    n = int(rng.integers(3, 6))
    g = Graph(n, tuple(e for e in itertools.combinations(range(n), 2) if rng.random() < 0.5))
    k = int(rng.integers(2, min(3, n) + 1))
    red = gen_densest_subgraph_instance(g, k)
    for S in itertools.combinations(range(n), k):
        yield S, dks_bounds(g, S, k), evaluate(red.instance.subset(S), Objective.SMAX)


def suite_dks_lower(seed):
    return [_ge("dks-lower", seed, f"S={S}: E[smax] >= l", val, lo) for S, (lo, _), val in _dks_cases(seed)]


def suite_dks_upper(seed):
    return [_ge("dks-upper", seed, f"S={S}: l + 1/(2k) >= E[smax]", hi, val) for S, (_, hi), val in _dks_cases(seed)]


SUITES: dict[str, Callable[[int], list[Check]]] = {
    "greedy": suite_greedy,
    "quantile-truncated": suite_quantile_truncated,
    "quantile-guarantee": suite_quantile_guarantee,
    "truncation-loss": suite_truncation_loss,
    "beta-probability": suite_beta_probability,
    "beta-equivariance": suite_beta_equivariance,
    "mhr-quantile-facts": suite_mhr_quantile_facts,
    "tail-bounds": suite_tail_bounds,
    "ptas": suite_ptas,
    "independent-set": suite_independent_set,
    "dks-lower": suite_dks_lower,
    "dks-upper": suite_dks_upper,
}
# the stated upper sandwich bound is violated by the construction itself; run it on request only
DEFAULT_SUITES = [name for name in SUITES if name != "dks-upper"]


def run_verify(cfg: ExperimentConfig, registry: dict | None = None) -> VerifyReport:
    """Run each selected suite on seeds ``cfg.seed .. cfg.seed + trials - 1``.
    Exceptions inside a suite become failed checks."""
    registry = SUITES if registry is None else registry
    if cfg.suites is not None:
        names = cfg.suites
    else:
        names = DEFAULT_SUITES if registry is SUITES else list(registry)
    rep = VerifyReport()
    for name in names:
        if name not in registry:
            raise ValueError(f"unknown suite {name!r}")
        for seed in range(cfg.seed, cfg.seed + cfg.trials):
            try:
                rep.checks.extend(registry[name](seed))
            except Exception as exc:  # reported, not raised
                rep.checks.append(Check(name, seed, "suite raised", math.nan, math.nan, False, repr(exc)))
    return rep


# ---------------------------------------------------------------------------
# output

def write_rows(rows: list, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dicts = [asdict(r) if not isinstance(r, dict) else r for r in rows]
    cols = list(dicts[0]) if dicts else [f.name for f in fields(ResultRow)]
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        w.writerows(dicts)


def read_rows(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def summarize(rows: list[ResultRow]) -> list[dict]:
    """Mean, sample std and std/sqrt(count) of ``value`` (and of the small-label
    fraction when present) per (experiment, method, param, k, objective)."""
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.experiment, r.method, r.param, r.k, r.objective), []).append(r)
    out = []
    for key, rs in groups.items():
        vals = np.array([r.value for r in rs])
        std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        entry = dict(zip(("experiment", "method", "param", "k", "objective"), key))
        entry.update(count=len(vals), mean=float(vals.mean()), std=std, stderr=std / math.sqrt(len(vals)))
        small = [r.small_label_fraction for r in rs if r.small_label_fraction is not None]
        if small:
            s = np.array(small)
            s_std = float(s.std(ddof=1)) if len(s) > 1 else 0.0
            entry.update(small_mean=float(s.mean()), small_stderr=s_std / math.sqrt(len(s)))
        out.append(entry)
    return out


def summary_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".summary.csv")


def run(cfg: ExperimentConfig):
    """Dispatch on ``cfg.experiment``; writes CSV output when ``cfg.out`` is set."""
    if cfg.experiment == "verify":
        rep = run_verify(cfg)
        if cfg.out:
            write_rows(rep.rows(), cfg.out)
        return rep
    runner = {"compare": run_compare, "bias": run_bias, "scaling": run_scaling}[cfg.experiment]
    rows = runner(cfg)
    if cfg.out:
        write_rows(rows, cfg.out)
        write_rows(summarize(rows), summary_path(cfg.out))
    return rows
