"""``kselect`` command line.

Exit codes: 0 success, 1 a checked inequality was violated, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import harness
from .anchoring import (
    compute_beta,
    probability_bounds_hold,
    probability_lower_bound_check,
    tail_bound_report,
    truncation_equivariance_check,
)
from .distributions import ContinuousFamily, make_rng
from .exact import Instance, NumberMode, OracleTooLarge, brute_force_opt, evaluate, monte_carlo
from .generators import (
    Graph,
    gen_bias_instance,
    gen_clipped_normal_instance,
    gen_densest_subgraph_instance,
    gen_independent_set_instance,
    random_graph,
)
from .io import FormatError, dumps, load_graph, load_instance, save_instance
from .ptas import PtasConfig, ptas_select
from .selectors import (
    select_expectation,
    select_greedy,
    select_kr_best_of_samples,
    select_kr_top_quantile,
    select_quantile,
)

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return Fraction(text) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"not a number: {text!r}") from exc


def _emit(obj, out=None):
    text = dumps(obj)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _load(args) -> Instance:
    return load_instance(args.instance, getattr(args, "k", None))


# ---------------------------------------------------------------------------

def cmd_eval(args):
    inst = _load(args)
    subset = range(inst.n) if args.subset is None else [int(x) for x in args.subset.split(",")]
    chosen = inst.subset(subset)
    value = evaluate(chosen, args.objective, args.mode)
    out = {"subset": list(subset), "objective": args.objective, "value": value}
    if args.mc:
        out["monte_carlo"] = dict(zip(("mean", "stderr"),
                                      monte_carlo(chosen, args.objective, args.mc, make_rng(args.seed))))
    _emit(out)
    return EXIT_OK


def cmd_oracle(args):
    inst = _load(args)
    subset, value = brute_force_opt(inst, args.objective, args.mode, cap=args.cap)
    _emit({"subset": list(subset), "objective": args.objective, "value": value})
    return EXIT_OK


def _resolve_param(method: str, raw: str | None, convention: str):
    if raw is None or raw == "auto":
        return None
    x = _number(raw)
    if method == "quantile":
        if convention == "bottom":
            if not 0 < x < 1:
                raise UsageError("bottom-quantile fraction must be in (0, 1)")
            return 1 / (1 - x)
        return x
    if method == "kr-q":
        return 1 - x if convention == "bottom" else x
    if method == "kr-samples":
        return int(x)
    raise UsageError(f"method {method} takes no parameter")


def cmd_select(args):
    inst = _load(args)
    p = _resolve_param(args.method, args.param, args.quantile_convention)
    if args.method == "quantile":
        res = select_quantile(inst, "sqrt_k" if p is None else p)
    elif args.method == "kr-q":
        res = select_kr_top_quantile(inst, "one_over_k" if p is None else p)
    elif args.method == "kr-samples":
        res = select_kr_best_of_samples(inst, "k" if p is None else p)
    elif args.method == "mean":
        res = select_expectation(inst)
    else:
        res = select_greedy(inst, args.objective)
    out = res.to_dict()
    out["value"] = out["value_max"] if args.objective == "max" else out["value_smax"]
    _emit(out)
    return EXIT_OK


def cmd_ptas(args):
    inst = _load(args)
    res = ptas_select(inst, PtasConfig(args.epsilon, args.counts))
    trace = res.meta.pop("trace", None)
    if args.trace:
        _emit(trace, args.trace)
    _emit(res.to_dict())
    return EXIT_OK


def cmd_beta(args):
    inst = _load(args)
    sources = inst.sources
    trace = compute_beta(sources)
    out = {"beta1": trace.beta1, "beta2": trace.beta2, "beta": trace.beta}
    code = EXIT_OK
    if args.report:
        p_max, p_smax = probability_lower_bound_check(inst.variables)
        equi = truncation_equivariance_check(sources)
        out["probability"] = {"p_max": p_max, "p_smax": p_smax, "holds": probability_bounds_hold(p_max, p_smax)}
        out["truncation_equivariant"] = equi
        out["trace"] = trace.to_dict()
        ok = out["probability"]["holds"] and equi
        if all(isinstance(v, ContinuousFamily) for v in sources) and len(sources) >= 2:
            rep = tail_bound_report(sources, trace, rng=make_rng(args.seed))
            out["tail_bounds"] = rep.to_dict()
            ok = ok and rep.ok
        code = EXIT_OK if ok else EXIT_VIOLATION
    _emit(out)
    return code


def _kv(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise UsageError(f"--params entries look like key=value, got {item!r}")
        key, val = item.split("=", 1)
        out[key] = val
    return out


def _graph(spec: str, rng) -> Graph:
    """``cycle:5``, ``complete:4``, ``matching:3``, ``gnp:8:0.3``, ``regular:8:3`` or a JSON path."""
    kind, *rest = spec.split(":")
    if kind == "cycle":
        return Graph.cycle(int(rest[0]))
    if kind == "complete":
        return Graph.complete(int(rest[0]))
    if kind == "matching":
        return Graph.matching(int(rest[0]))
    if kind == "gnp":
        return random_graph(int(rest[0]), rng, p=float(rest[1]))
    if kind == "regular":
        return random_graph(int(rest[0]), rng, degree=int(rest[1]))
    return load_graph(spec)


def cmd_gen(args):
    params = _kv(args.params)
    rng = make_rng(args.seed)
    fam = args.family
    try:
        if fam in ("clique-reduction", "dks-reduction"):
            g = _graph(params.get("graph", "cycle:3"), rng)
            k = int(params.get("k", 2))
            gen = gen_independent_set_instance if fam == "clique-reduction" else gen_densest_subgraph_instance
            red = gen(g, k)
            certs = {key: v for key, v in red.certificates.items()}
            save_instance(red.instance, args.out, {"family": fam, "graph": g.to_dict(), "certificates": certs})
        elif fam == "clipped-normal":
            inst = gen_clipped_normal_instance(int(params.get("n", 500)), int(params.get("k", 10)), rng,
                                               draws=int(params.get("draws", 5000)),
                                               v_max=float(params.get("v_max", 1000)))
            save_instance(inst, args.out, {"family": fam, "seed": args.seed})
        elif fam == "bias":
            inst, families = gen_bias_instance(int(params.get("n", 500)), int(params.get("k", 10)), rng,
                                               int(params.get("small_draws", 10)),
                                               int(params.get("big_draws", 5000)))
            save_instance(inst, args.out, {"family": fam, "seed": args.seed,
                                           "true_families": [f.params() for f in families]})
        else:
            raise UsageError(f"unknown family {fam!r}")
    except KeyError as exc:
        raise UsageError(f"missing parameter {exc}") from exc
    return EXIT_OK


def cmd_experiment(args):
    data = json.loads(Path(args.config).read_text()) if args.config else {}
    data["experiment"] = args.command
    if args.out:
        data["out"] = args.out
    cfg = harness.ExperimentConfig.from_dict(data)
    result = harness.run(cfg)
    if args.command == "verify":
        summary = {"checks": len(result.checks), "violations": [dict(c.__dict__, margin=c.margin) for c in result.violations]}
        _emit(summary)
        return result.exit_code
    if args.command == "scaling":
        _emit({"doubling_factors": harness.doubling_factors(result)})
    else:
        _emit(harness.summarize(result))
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kselect", description="Select k of n random variables to maximize E[max] or E[second max].")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_instance(p):
        p.add_argument("--instance", required=True, help="instance JSON")
        p.add_argument("--k", type=int, help="override k from the file")
        return p

    p = with_instance(sub.add_parser("eval", help="exact E[max]/E[smax] of a subset"))
    p.add_argument("--subset", help="comma separated indices (default: all)")
    p.add_argument("--objective", choices=["max", "smax"], default="max")
    p.add_argument("--mode", choices=[m.value for m in NumberMode])
    p.add_argument("--mc", type=int, default=0, help="also run this many Monte Carlo trials")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = with_instance(sub.add_parser("oracle", help="brute-force optimum"))
    p.add_argument("--objective", choices=["max", "smax"], default="max")
    p.add_argument("--mode", choices=[m.value for m in NumberMode])
    p.add_argument("--cap", type=int, default=2_000_000)
    p.set_defaults(func=cmd_oracle)

    p = with_instance(sub.add_parser("select", help="score-based or greedy selection"))
    p.add_argument("--method", choices=["quantile", "kr-q", "kr-samples", "mean", "greedy"], required=True)
    p.add_argument("--param", help="p, q or r; 'auto' for sqrt(k), 1/k or k")
    p.add_argument("--objective", choices=["max", "smax"], default="max")
    p.add_argument("--quantile-convention", choices=["top", "bottom"], default="top",
                   help="top: p for quantile, top mass for kr-q; bottom: fraction below the cut (0.7 = top 30%%)")
    p.set_defaults(func=cmd_select)

    p = with_instance(sub.add_parser("ptas", help="approximation scheme for E[max]"))
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--counts", choices=["exact", "geometric"], default="exact")
    p.add_argument("--trace", help="write the preprocessing trace to this JSON file")
    p.set_defaults(func=cmd_ptas)

    p = with_instance(sub.add_parser("beta", help="anchoring thresholds beta1, beta2"))
    p.add_argument("--report", action="store_true", help="check the probability and tail bounds")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_beta)

    p = sub.add_parser("gen", help="generate an instance")
    p.add_argument("--family", required=True, choices=["clique-reduction", "dks-reduction", "clipped-normal", "bias"])
    p.add_argument("--params", nargs="*", help="key=value pairs, e.g. graph=cycle:5 k=2 or n=500 k=10")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    for name in harness.EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--out", help="CSV output path")
        p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, FormatError, OracleTooLarge, OSError, ValueError) as exc:
        print(f"kselect: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
