"""Random variables: explicit finite-support distributions and a few parametric MHR families.

Every discrete distribution keeps a float64 view (``values``/``probs``) for fast
numerics. Distributions built from rationals (``Fraction``, ``int`` or decimal
strings) additionally keep their exact atoms so order-statistic evaluations can
run in rational arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence, Union

import numpy as np
from scipy import special

PROB_TOL = 1e-9
# slack for float comparisons of tail mass against 1/p
FLOAT_CMP_TOL = 1e-12

Number = Union[int, float, Fraction]


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; identical seeds give identical streams."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def derive_seed(master: int, *keys: int) -> int:
    """Deterministic child seed for (master, keys...)."""
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _as_exact(x) -> Fraction | None:
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, (int, Fraction, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    return None


class DiscreteDistribution:
    """Finite-support nonnegative random variable.

    ``atoms`` is an iterable of ``(value, prob)`` pairs. Duplicate values are
    merged, zero-probability atoms dropped, and probabilities renormalized
    (their sum must already be within ``1e-9`` of one).
    """

    __slots__ = ("values", "probs", "exact", "_cum", "_tail")

    def __init__(self, atoms: Iterable[Sequence], *, tol: float = PROB_TOL):
        atoms = [tuple(a) for a in atoms]
        if not atoms:
            raise ValueError("a distribution needs at least one atom")
        exact_pairs = [(_as_exact(v), _as_exact(p)) for v, p in atoms]
        if all(v is not None and p is not None for v, p in exact_pairs):
            merged: dict[Fraction, Fraction] = {}
            for v, p in exact_pairs:
                if v < 0:
                    raise ValueError(f"negative value {v}")
                if p < 0:
                    raise ValueError(f"negative probability {p}")
                if p > 0:
                    merged[v] = merged.get(v, Fraction(0)) + p
            total = sum(merged.values(), Fraction(0))
            if abs(total - 1) > Fraction(tol):
                raise ValueError(f"probabilities sum to {float(total)!r}, not 1")
            vals = sorted(merged)
            exact = tuple((v, merged[v] / total) for v in vals)
            self._init_from_exact(exact)
        else:
            values = np.array([float(v) for v, _ in atoms], dtype=np.float64)
            probs = np.array([float(p) for _, p in atoms], dtype=np.float64)
            self._init_from_arrays(values, probs, tol=tol)

    def _init_from_exact(self, exact):
        self.exact = exact
        values = np.array([float(v) for v, _ in exact])
        probs = np.array([float(p) for _, p in exact])
        if np.any(np.diff(values) <= 0):
            # distinct rationals can share a float; merge for the float view
            values, inv = np.unique(values, return_inverse=True)
            probs = np.bincount(inv, weights=probs, minlength=len(values))
        self.values = values
        self.probs = probs
        self._finish()

    def _init_from_arrays(self, values, probs, *, tol=PROB_TOL):
        if values.shape != probs.shape or values.ndim != 1:
            raise ValueError("values and probs must be 1-D and of equal length")
        if not np.all(np.isfinite(values)) or not np.all(np.isfinite(probs)):
            raise ValueError("values and probabilities must be finite")
        if np.any(values < 0):
            raise ValueError("values must be nonnegative")
        if np.any(probs < 0):
            raise ValueError("probabilities must be nonnegative")
        total = float(probs.sum())
        if abs(total - 1.0) > tol:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        keep = probs > 0
        values, probs = values[keep], probs[keep]
        order = np.argsort(values, kind="stable")
        values, probs = values[order], probs[order]
        if len(values) > 1 and np.any(np.diff(values) == 0):
            values, inv = np.unique(values, return_inverse=True)
            probs = np.bincount(inv, weights=probs, minlength=len(values))
        self.exact = None
        self.values = values
        self.probs = probs / probs.sum()
        self._finish()

    def _finish(self):
        self.values.setflags(write=False)
        self.probs.setflags(write=False)
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0
        self._cum = cum
        tail = np.cumsum(self.probs[::-1])[::-1].copy()
        tail[0] = 1.0
        self._tail = tail

    @classmethod
    def from_arrays(cls, values, probs, *, tol: float = PROB_TOL) -> "DiscreteDistribution":
        """Float-only constructor from parallel arrays (no exact atoms)."""
        obj = cls.__new__(cls)
        obj._init_from_arrays(np.asarray(values, dtype=np.float64).copy(),
                              np.asarray(probs, dtype=np.float64).copy(), tol=tol)
        return obj

    @classmethod
    def point_mass(cls, value: Number = 0) -> "DiscreteDistribution":
        return cls([(value, 1)])

    # views -------------------------------------------------------------
    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    @property
    def support_size(self) -> int:
        return len(self.values)

    @property
    def cum_probs(self) -> np.ndarray:
        """F at each atom (last entry pinned to 1)."""
        return self._cum

    @property
    def tail_probs(self) -> np.ndarray:
        """Pr[X >= v] at each atom (first entry pinned to 1)."""
        return self._tail

    def atoms(self, exact: bool | None = None) -> list[tuple]:
        if exact is None:
            exact = self.is_exact
        if exact:
            return list(self.to_exact().exact)
        return list(zip(self.values.tolist(), self.probs.tolist()))

    def to_exact(self) -> "DiscreteDistribution":
        """Rational copy; float atoms are converted exactly and renormalized."""
        if self.is_exact:
            return self
        pairs = [(Fraction(v), Fraction(p)) for v, p in zip(self.values.tolist(), self.probs.tolist())]
        total = sum(p for _, p in pairs)
        obj = DiscreteDistribution.__new__(DiscreteDistribution)
        obj._init_from_exact(tuple((v, p / total) for v, p in pairs))
        return obj

    def to_float(self) -> "DiscreteDistribution":
        if not self.is_exact:
            return self
        return DiscreteDistribution.from_arrays(self.values, self.probs)

    def scaled(self, c: Number) -> "DiscreteDistribution":
        """Distribution of c*X for c > 0."""
        if c <= 0:
            raise ValueError("scale must be positive")
        if self.is_exact and _as_exact(c) is not None:
            cf = Fraction(c)
            return DiscreteDistribution([(v * cf, p) for v, p in self.exact])
        return DiscreteDistribution.from_arrays(self.values * float(c), self.probs)

    def __eq__(self, other):
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        if self.is_exact and other.is_exact:
            return self.exact == other.exact
        return np.array_equal(self.values, other.values) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        if self.is_exact:
            return hash(self.exact)
        return hash((self.values.tobytes(), self.probs.tobytes()))

    def __repr__(self):
        if self.support_size <= 6:
            body = ", ".join(f"({v:g}, {p:g})" for v, p in zip(self.values, self.probs))
        else:
            body = f"{self.support_size} atoms in [{self.values[0]:g}, {self.values[-1]:g}]"
        return f"DiscreteDistribution({body})"


@dataclass(frozen=True)
class ContinuousFamily:
    """Parametric continuous law: ``uniform(a, b)``, ``exponential(rate)`` or ``normal(mean, sd)``."""

    kind: str
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind == "uniform":
            if not self.b > self.a:
                raise ValueError("uniform needs b > a")
        elif self.kind == "exponential":
            if not self.a > 0:
                raise ValueError("exponential needs rate > 0")
        elif self.kind == "normal":
            if not self.b > 0:
                raise ValueError("normal needs sd > 0")
        else:
            raise ValueError(f"unknown family {self.kind!r}")

    @classmethod
    def uniform(cls, low: float, high: float) -> "ContinuousFamily":
        return cls("uniform", float(low), float(high))

    @classmethod
    def exponential(cls, rate: float) -> "ContinuousFamily":
        return cls("exponential", float(rate), 0.0)

    @classmethod
    def normal(cls, mean: float, sd: float) -> "ContinuousFamily":
        return cls("normal", float(mean), float(sd))

    @property
    def rate(self) -> float:
        return self.a

    def params(self) -> dict:
        if self.kind == "uniform":
            return {"family": "uniform", "low": self.a, "high": self.b}
        if self.kind == "exponential":
            return {"family": "exponential", "rate": self.a}
        return {"family": "normal", "mean": self.a, "sd": self.b}

    def cdf(self, v):
        v = np.asarray(v, dtype=np.float64)
        if self.kind == "uniform":
            out = np.clip((v - self.a) / (self.b - self.a), 0.0, 1.0)
        elif self.kind == "exponential":
            out = np.where(v > 0, -np.expm1(-self.a * np.maximum(v, 0.0)), 0.0)
        else:
            out = special.ndtr((v - self.a) / self.b)
        return out if out.ndim else float(out)

    def log_survival(self, v):
        """log(1 - F(v)); concave in v exactly when the family is MHR."""
        v = np.asarray(v, dtype=np.float64)
        if self.kind == "uniform":
            with np.errstate(divide="ignore"):
                out = np.log(np.clip((self.b - v) / (self.b - self.a), 0.0, 1.0))
        elif self.kind == "exponential":
            out = -self.a * np.maximum(v, 0.0)
        else:
            out = special.log_ndtr(-(v - self.a) / self.b)
        return out if out.ndim else float(out)

    def alpha(self, p: float) -> float:
        """Top-quantile value: F^{-1}(1 - 1/p), computed without cancellation."""
        if p < 1:
            raise ValueError("quantile parameter p must be >= 1")
        if self.kind == "uniform":
            return self.b - (self.b - self.a) / p
        if self.kind == "exponential":
            return math.log(p) / self.a
        if p == 1:
            return -math.inf
        return self.a - self.b * float(special.ndtri(1.0 / p))

    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5 * (self.a + self.b)
        if self.kind == "exponential":
            return 1.0 / self.a
        return self.a

    def tail_contribution(self, x: float) -> float:
        """E[X 1{X >= x}] in closed form."""
        if self.kind == "uniform":
            a, b = self.a, self.b
            if x >= b:
                return 0.0
            lo = max(x, a)
            return (b * b - lo * lo) / (2.0 * (b - a))
        if self.kind == "exponential":
            lam = self.a
            x = max(x, 0.0)
            return (x + 1.0 / lam) * math.exp(-lam * x)
        mu, sd = self.a, self.b
        t = (x - mu) / sd
        return mu * float(special.ndtr(-t)) + sd * math.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, size)
        if self.kind == "exponential":
            return rng.exponential(1.0 / self.a, size)
        return rng.normal(self.a, self.b, size)

    def default_discretization(self) -> tuple[float, float]:
        """(grid, clip_max) used when a family is ingested as a discrete variable."""
        hi = self.alpha(1e9)
        if self.kind == "uniform":
            hi = self.b
        if hi <= 0:
            return 1.0, 1.0
        return hi / 4096.0, hi


Distribution = Union[DiscreteDistribution, ContinuousFamily]


# ---------------------------------------------------------------------------
# queries

def cdf(d: Distribution, v: float):
    """Pr[X <= v]."""
    if isinstance(d, ContinuousFamily):
        return d.cdf(v)
    if d.is_exact and _as_exact(v) is not None:
        v = Fraction(v)
        return sum((p for x, p in d.exact if x <= v), Fraction(0))
    idx = int(np.searchsorted(d.values, v, side="right"))
    return 0.0 if idx == 0 else float(d.cum_probs[idx - 1])


def _check_p(p):
    if isinstance(p, float) and math.isnan(p):
        raise ValueError("quantile parameter is NaN")
    if p < 1:
        raise ValueError(f"quantile parameter p must be >= 1, got {p}")


def _discrete_alpha(d: DiscreteDistribution, reaches) -> Number:
    """Largest atom v whose tail mass Pr[X >= v] satisfies ``reaches``."""
    if d.is_exact:
        tail = Fraction(0)
        for v, p in reversed(d.exact):
            tail += p
            if reaches(tail):
                return v
        return d.exact[0][0]
    hits = np.flatnonzero(reaches(d.tail_probs))
    return float(d.values[hits[-1]]) if hits.size else float(d.values[0])


def quantile_alpha(d: Distribution, p: Number) -> Number:
    """alpha_p = sup{t : Pr[X > t] >= 1/p}.

    For discrete inputs this is the largest atom ``v`` with ``Pr[X >= v] >= 1/p``.
    Exact distributions with rational ``p`` compare exactly; the float path
    allows a ``1e-12`` slack.
    """
    _check_p(p)
    if isinstance(d, ContinuousFamily):
        return d.alpha(float(p))
    if d.is_exact and _as_exact(p) is not None:
        pf = Fraction(p)
        return _discrete_alpha(d, lambda t: t * pf >= 1)
    pf = float(p)
    return _discrete_alpha(d, lambda t: t * pf >= 1.0 - FLOAT_CMP_TOL)


def quantile_alpha_sqrt(d: Distribution, p_squared: Number) -> Number:
    """alpha_p at p = sqrt(p_squared), compared without forming the square root.

    ``Pr[X >= v] >= 1/sqrt(q)`` is tested as ``tail**2 * q >= 1`` so exact inputs
    stay exact even when ``sqrt(q)`` is irrational.
    """
    _check_p(p_squared)
    if isinstance(d, ContinuousFamily):
        return d.alpha(math.sqrt(float(p_squared)))
    if d.is_exact and _as_exact(p_squared) is not None:
        q = Fraction(p_squared)
        return _discrete_alpha(d, lambda t: t * t * q >= 1)
    q = float(p_squared)
    return _discrete_alpha(d, lambda t: t * math.sqrt(q) >= 1.0 - FLOAT_CMP_TOL)


def tail_contribution(d: Distribution, x: Number) -> Number:
    """Con[X >= x] = E[X 1{X >= x}]."""
    if isinstance(d, ContinuousFamily):
        return d.tail_contribution(float(x))
    if d.is_exact and _as_exact(x) is not None:
        xf = Fraction(x)
        return sum((v * p for v, p in d.exact if v >= xf), Fraction(0))
    j = int(np.searchsorted(d.values, x, side="left"))
    return float(np.dot(d.values[j:], d.probs[j:]))


def mean(d: Distribution) -> Number:
    if isinstance(d, ContinuousFamily):
        return d.mean()
    if d.is_exact:
        return sum((v * p for v, p in d.exact), Fraction(0))
    return float(np.dot(d.values, d.probs))


def sample(d: Distribution, rng: np.random.Generator, size=None):
    """Draw from ``d``; discrete draws use inverse-CDF on one uniform per draw."""
    if isinstance(d, ContinuousFamily):
        return d.sample(rng, size)
    u = rng.random(size)
    idx = np.searchsorted(d.cum_probs, u, side="right")
    idx = np.minimum(idx, d.support_size - 1)
    out = d.values[idx]
    return float(out) if size is None else out


def truncate_at_quantile(d: Distribution, p: Number, *, sqrt: bool = False,
                         grid: float | None = None, clip_max: float | None = None) -> DiscreteDistribution:
    """Collapse all mass at or above alpha_p onto the atom alpha_p.

    With ``sqrt=True`` the parameter is ``p**2`` (see :func:`quantile_alpha_sqrt`).
    Continuous families are discretized first.
    """
    if isinstance(d, ContinuousFamily):
        g, c = d.default_discretization()
        d = discretize(d, grid or g, clip_max or c)
    a = quantile_alpha_sqrt(d, p) if sqrt else quantile_alpha(d, p)
    if d.is_exact:
        below = [(v, q) for v, q in d.exact if v < a]
        top = sum((q for v, q in d.exact if v >= a), Fraction(0))
        return DiscreteDistribution(below + [(a, top)])
    j = int(np.searchsorted(d.values, a, side="left"))
    values = np.append(d.values[:j], a)
    probs = np.append(d.probs[:j], d.tail_probs[j])
    return DiscreteDistribution.from_arrays(values, probs)


def discretize(c: ContinuousFamily, grid: float, clip_max: float) -> DiscreteDistribution:
    """Round a continuous law down onto multiples of ``grid`` inside ``[0, clip_max]``.

    Cell ``[j*grid, (j+1)*grid)`` goes to ``j*grid``; mass below 0 goes to 0 and
    mass at or above ``clip_max`` goes to ``clip_max``.
    """
    if not grid > 0:
        raise ValueError("grid must be positive")
    if not clip_max > 0:
        raise ValueError("clip_max must be positive")
    m = int(math.floor(clip_max / grid + 1e-9))
    lefts = np.arange(m + 1, dtype=np.float64) * grid
    lefts = lefts[lefts < clip_max]
    edges = np.append(lefts, clip_max)
    F = np.asarray(c.cdf(edges), dtype=np.float64)
    probs = np.empty(len(lefts) + 1)
    probs[0] = F[1] if len(lefts) > 0 else F[0]
    probs[1:len(lefts)] = np.diff(F[1:])
    probs[-1] = 1.0 - F[-1]
    probs = np.maximum(probs, 0.0)
    values = np.append(lefts, clip_max)
    return DiscreteDistribution.from_arrays(values, probs / probs.sum())


def empirical_from_samples(samples, clip_max: float) -> DiscreteDistribution:
    """Clip samples to ``[0, clip_max]`` and give each mass 1/N."""
    s = np.asarray(samples, dtype=np.float64).ravel()
    if s.size == 0:
        raise ValueError("no samples")
    s = np.clip(s, 0.0, clip_max)
    values, counts = np.unique(s, return_counts=True)
    return DiscreteDistribution.from_arrays(values, counts / s.size)


def as_discrete(d: Distribution) -> DiscreteDistribution:
    if isinstance(d, ContinuousFamily):
        return discretize(d, *d.default_discretization())
    return d
