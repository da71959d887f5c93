"""JSON instance format.

::

    {"k": 2,
     "variables": [
        {"atoms": [["0", "9/10"], ["10", "1/10"]], "label": "risky"},
        {"atoms": [[1.1, 1.0]]},
        {"family": "exponential", "rate": 2.0}
     ]}

Strings (``"3"``, ``"0.25"``, ``"1/3"``) are parsed as exact rationals, JSON
integers stay integers and JSON floats stay floats. A variable is exact only
if all of its atoms are. ``n`` is optional and checked when present. Exact
values are written back as strings, float ones as numbers.
"""
from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from .distributions import ContinuousFamily, DiscreteDistribution
from .exact import Instance
from .generators import Graph


class FormatError(ValueError):
    pass


def _parse_number(x):
    if isinstance(x, bool):
        raise FormatError(f"not a number: {x!r}")
    if isinstance(x, (int, float)):
        return x
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise FormatError(f"bad number {x!r}") from exc
    raise FormatError(f"not a number: {x!r}")


def _family(spec: dict) -> ContinuousFamily:
    kind = spec["family"]
    try:
        if kind == "uniform":
            return ContinuousFamily.uniform(spec["low"], spec["high"])
        if kind == "exponential":
            return ContinuousFamily.exponential(spec["rate"])
        if kind == "normal":
            return ContinuousFamily.normal(spec["mean"], spec["sd"])
    except KeyError as exc:
        raise FormatError(f"{kind} family missing parameter {exc}") from exc
    raise FormatError(f"unknown family {kind!r}")


def variable_from_json(spec: dict):
    if "atoms" in spec:
        atoms = spec["atoms"]
        if not atoms:
            raise FormatError("empty atom list")
        try:
            return DiscreteDistribution([(_parse_number(v), _parse_number(p)) for v, p in atoms])
        except (TypeError, ValueError) as exc:
            raise FormatError(str(exc)) from exc
    if "family" in spec:
        return _family(spec)
    raise FormatError("variable needs 'atoms' or 'family'")


def _num_out(x):
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return float(x)


def variable_to_json(v) -> dict:
    if isinstance(v, ContinuousFamily):
        return v.params()
    if v.is_exact:
        return {"atoms": [[_num_out(a), _num_out(p)] for a, p in v.exact]}
    return {"atoms": [[float(a), float(p)] for a, p in zip(v.values, v.probs)]}


def instance_from_json(data: dict, k: int | None = None) -> Instance:
    if "variables" not in data:
        raise FormatError("instance needs a 'variables' list")
    specs = data["variables"]
    variables = [variable_from_json(s) for s in specs]
    labels = [s.get("label") for s in specs]
    if "n" in data and data["n"] != len(variables):
        raise FormatError(f"n = {data['n']} but {len(variables)} variables given")
    k = k if k is not None else data.get("k")
    if k is None:
        raise FormatError("instance needs k")
    has_labels = any(lbl is not None for lbl in labels)
    return Instance(variables, int(k), [str(lbl) for lbl in labels] if has_labels else None)


def instance_to_json(inst: Instance, extra: dict | None = None) -> dict:
    out = {"n": inst.n, "k": inst.k, "variables": []}
    for i, v in enumerate(inst.sources):
        spec = variable_to_json(v)
        if inst.labels is not None:
            spec["label"] = inst.labels[i]
        out["variables"].append(spec)
    if extra:
        out.update(extra)
    return out


def load_instance(path, k: int | None = None) -> Instance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    return instance_from_json(data, k)


def save_instance(inst: Instance, path, extra: dict | None = None) -> None:
    Path(path).write_text(json.dumps(instance_to_json(inst, extra), indent=1, default=_json_default))


def load_graph(path) -> Graph:
    data = json.loads(Path(path).read_text())
    return Graph(int(data["n_vertices"]), tuple(tuple(e) for e in data["edges"]), data.get("regular"))


def _json_default(x):
    if isinstance(x, Fraction):
        return _num_out(x)
    if hasattr(x, "item"):
        return x.item()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, default=_json_default)
