"""Bivariate mean functions.

A :class:`Mean` wraps an evaluator ``func(x, y, xp)`` that works both on
numpy arrays (``xp`` is :mod:`numpy`) and on mpmath scalars (``xp`` is an
mpmath context).  Means that are affine combinations of other means carry
that decomposition in ``parts`` so that linear functionals (integral means,
transforms) can be resolved term by term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._backend import frac, maximum, minimum

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class PositivePair:
    """Argument of every mean: two strictly positive finite reals."""

    a: float
    b: float

    def __post_init__(self):
        for v in (self.a, self.b):
            if not (isinstance(v, (int, float, np.floating, np.integer)) and math.isfinite(v) and v > 0):
                raise ValueError(f"pair coordinates must be positive finite reals, got ({self.a}, {self.b})")

    @classmethod
    def of(cls, p) -> "PositivePair":
        return p if isinstance(p, cls) else cls(*p)

    @property
    def lo(self) -> float:
        return min(self.a, self.b)

    @property
    def hi(self) -> float:
        return max(self.a, self.b)

    @property
    def is_diagonal(self) -> bool:
        return self.a == self.b

    def __iter__(self):
        yield self.a
        yield self.b


@dataclass(frozen=True, eq=False)
class Mean:
    """A symmetric function on positive pairs lying between min and max.

    ``homogeneous`` is ``True``/``False`` when known and ``None`` for opaque
    evaluators.  ``parts`` is an optional affine decomposition
    ``((w1, M1), (w2, M2), ...)`` with weights summing to one.
    """

    name: str
    func: Callable = field(repr=False)
    homogeneous: bool | None = None
    parts: tuple = field(default=(), repr=False)
    closed_integral: bool = False

    def __call__(self, x, y, xp=np):
        return self.func(x, y, xp)


def _sqrtxy(x, y, xp):
    if xp is not np:
        return xp.sqrt(x * y)
    with np.errstate(over="ignore", under="ignore"):
        prod = np.multiply(x, y)
    ok = np.isfinite(prod) & (prod > np.finfo(float).tiny)
    if np.all(ok):
        return np.sqrt(prod)
    # the product over- or underflows: split the root
    return np.where(ok, np.sqrt(np.where(ok, prod, 1.0)), np.sqrt(x) * np.sqrt(y))[()]


def _rms(x, y, xp):
    if xp is not np:
        return xp.sqrt((x * x + y * y) / 2)
    # scaled by the larger argument: exact on the diagonal, no overflow
    hi, lo = np.maximum(x, y), np.minimum(x, y)
    r = lo / hi
    return hi * np.sqrt((1 + r * r) / 2)


MIN = Mean("Min", lambda x, y, xp: minimum(x, y, xp), True)
MAX = Mean("Max", lambda x, y, xp: maximum(x, y, xp), True)
A = Mean("A", lambda x, y, xp: (x + y) / 2, True, closed_integral=True)
G = Mean("G", _sqrtxy, True, closed_integral=True)
H = Mean("H", lambda x, y, xp: 2 * x * y / (x + y), True, closed_integral=True)
C = Mean("C", lambda x, y, xp: (x * x + y * y) / (x + y), True,
         parts=((2, A), (-1, H)), closed_integral=True)
R = Mean("R", _rms, True, closed_integral=True)
GRAV = Mean("Grav", lambda x, y, xp: 2 * ((x * x + y * y) + x * y) / (3 * (x + y)), True,
            parts=((frac(4, 3, np), A), (frac(-1, 3, np), H)), closed_integral=True)
HN = Mean("Hn", lambda x, y, xp: ((x + y) + _sqrtxy(x, y, xp)) / 3, True,
          parts=((frac(2, 3, np), A), (frac(1, 3, np), G)), closed_integral=True)
AGHALF = Mean("AGhalf", lambda x, y, xp: ((x + y) / 2 + _sqrtxy(x, y, xp)) / 2, True,
              parts=((0.5, A), (0.5, G)), closed_integral=True)

MEANS: dict[str, Mean] = {m.name: m for m in (MIN, MAX, A, G, H, C, R, GRAV, HN, AGHALF)}
ALIASES = {"r": "R", "g": "Grav", "min": "Min", "max": "Max"}

CLASSICAL_ORDER = ("Max", "C", "R", "Grav", "A", "Hn", "G", "H", "Min")


def get_mean(name) -> Mean:
    if isinstance(name, Mean):
        return name
    key = ALIASES.get(name, name)
    try:
        return MEANS[key]
    except KeyError:
        raise KeyError(f"unknown mean {name!r}; registered: {', '.join(MEANS)}") from None


def eval_mean(kind, p, xp=np):
    """Value of the mean ``kind`` (a :class:`Mean` or registered name) at ``p``."""
    p = PositivePair.of(p)
    return get_mean(kind)(p.a, p.b, xp)


def classical_chain(p) -> list[tuple[str, float]]:
    """The nine values max, C, r, g, A, Hn, G, H, min at ``p``, in that order."""
    p = PositivePair.of(p)
    return [(name, float(MEANS[name](p.a, p.b))) for name in CLASSICAL_ORDER]


# ------------------------------------------------------------ combinations ---

def _linear_parts(m: Mean):
    return m.parts if m.parts else ((1, m),)


def _combine(name, terms, homogeneous):
    terms = tuple(terms)

    def func(x, y, xp):
        total = 0
        for w, m in terms:
            total = total + (xp.mpf(w) if xp is not np else w) * m(x, y, xp)
        return total

    return Mean(name, func, homogeneous, parts=terms,
                closed_integral=all(m.closed_integral for _, m in terms))


def complement_A(m: Mean) -> Mean:
    """The arithmetic complement ``2A - m``."""
    m = get_mean(m)
    # 2A - (2A - M) = M: unwrap instead of nesting
    if len(m.parts) == 2 and m.parts[0] == (2, A) and m.parts[1][0] == -1:
        return m.parts[1][1]
    if m is A:
        return A
    return _combine(f"({m.name})_A", ((2, A), (-1, m)), m.homogeneous)


def complement_G(m: Mean, *, interpretation: str) -> Mean:
    """Geometric complement, exposed only under an explicit reading.

    The only accepted ``interpretation`` is ``"G^2/M"``, i.e.
    ``(x, y) -> x*y / m(x, y)``, the reflection of ``m`` about ``G`` in the
    multiplicative sense.
    """
    if interpretation != "G^2/M":
        raise ValueError("complement_G requires interpretation='G^2/M'")
    m = get_mean(m)
    return Mean(f"({m.name})_G", lambda x, y, xp: x * y / m(x, y, xp), m.homogeneous)


class InvalidMean(ValueError):
    """A candidate combination fails the mean axioms on sampled pairs."""


def convex(lam: float, m1, m2, *, sampler: "PairSampler | None" = None, n: int = 10_000) -> Mean:
    """``lam*m1 + (1-lam)*m2``, accepted only if it samples as a mean.

    ``lam`` may lie outside ``[0, 1]``; betweenness is then not automatic and
    the sampled check decides.
    """
    m1, m2 = get_mean(m1), get_mean(m2)
    lam = float(lam)
    terms = [(lam * w, m) for w, m in _linear_parts(m1)] + \
            [((1 - lam) * w, m) for w, m in _linear_parts(m2)]
    merged: dict[str, list] = {}
    for w, m in terms:
        merged.setdefault(m.name, [0.0, m])[0] += w
    terms = tuple((w, m) for w, m in merged.values() if w != 0)
    homog = m1.homogeneous and m2.homogeneous
    cand = _combine(f"Convex({lam:g},{m1.name},{m2.name})", terms, homog)
    report = is_mean_function(cand, sampler or PairSampler(seed=0), n)
    if not report.passed:
        raise InvalidMean(f"{cand.name} is not a mean: {report.reason} at {report.witness}")
    return cand


# -------------------------------------------------------------- sampling ---

@dataclass
class PairSampler:
    """Seeded sampler of positive pairs, log-uniform by default.

    ``min_rel_gap`` rejects pairs with ``|a-b| < min_rel_gap * A(a,b)``.
    """

    lo: float = 1e-3
    hi: float = 1e3
    seed: int = 0
    log: bool = True
    min_rel_gap: float = 0.0

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise ValueError("sampler region must satisfy 0 < lo < hi")
        self._rng = np.random.default_rng(self.seed)

    def _draw(self, n):
        if self.log:
            return np.exp(self._rng.uniform(math.log(self.lo), math.log(self.hi), n))
        return self._rng.uniform(self.lo, self.hi, n)

    def pairs(self, n: int):
        a, b = self._draw(n), self._draw(n)
        if self.min_rel_gap > 0:
            while True:
                bad = np.abs(a - b) < self.min_rel_gap * (a + b) / 2
                k = int(bad.sum())
                if not k:
                    break
                a[bad], b[bad] = self._draw(k), self._draw(k)
        return a, b

    def triples(self, n: int):
        a, b = self.pairs(n)
        z = np.exp(self._rng.uniform(math.log(1e-2), math.log(1e2), n))
        return a, b, z


# ------------------------------------------------------------- validation ---

@dataclass(frozen=True)
class MeanCheck:
    passed: bool
    samples: int
    reason: str | None = None
    witness: tuple | None = None
    values: tuple | None = None


def _call(f, x, y):
    if isinstance(f, Mean):
        return np.asarray(f(x, y), dtype=float)
    try:
        out = np.asarray(f(x, y), dtype=float)
        if out.shape == np.shape(x):
            return out
    except Exception:
        pass
    return np.array([float(f(float(u), float(v))) for u, v in zip(x, y)])


def is_mean_function(f, sampler: PairSampler | None = None, n: int = 1000, *,
                     rtol: float = 1e-12) -> MeanCheck:
    """Sample ``n`` pairs and look for the first axiom violation.

    Checks, in order of severity at each pair: a finite positive value,
    symmetry (relative tolerance ``rtol``), betweenness (a few ulps of
    slack) and ``F(x, x) = x``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    sampler = sampler or PairSampler()
    x, y = sampler.pairs(n)
    fxy, fyx, fxx = _call(f, x, y), _call(f, y, x), _call(f, x, x)
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    slack = 8 * _EPS
    checks = (
        ("non-positive or non-finite value", ~(np.isfinite(fxy) & (fxy > 0))),
        ("symmetry", np.abs(fxy - fyx) > rtol * np.maximum(np.abs(fxy), np.abs(fyx))),
        ("betweenness", (fxy < lo * (1 - slack)) | (fxy > hi * (1 + slack))),
        ("F(x,x) != x", np.abs(fxx - x) > rtol * x),
    )
    first = None
    for reason, bad in checks:
        if bad.any():
            i = int(np.argmax(bad))
            if first is None or i < first[0]:
                first = (i, reason)
    if first is None:
        return MeanCheck(True, n)
    i, reason = first
    return MeanCheck(False, n, reason, (float(x[i]), float(y[i])),
                     (float(fxy[i]), float(fyx[i]), float(fxx[i])))


@dataclass(frozen=True)
class HomogeneityCheck:
    homogeneous: bool
    sampled: int
    witness: tuple | None = None
    values: tuple | None = None


def is_homogeneous_order1(m, sampler: PairSampler | None = None, n: int = 1000, *,
                          rtol: float = 1e-12) -> HomogeneityCheck:
    """Check ``m(zx, zy) = z m(x, y)``; known-homogeneous means skip sampling."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if isinstance(m, (Mean, str)):
        m = get_mean(m)
        if m.homogeneous:
            return HomogeneityCheck(True, 0)
    sampler = sampler or PairSampler()
    x, y, z = sampler.triples(n)
    lhs, rhs = _call(m, z * x, z * y), z * _call(m, x, y)
    bad = ~(np.abs(lhs - rhs) <= rtol * np.abs(rhs))
    if not bad.any():
        return HomogeneityCheck(True, n)
    i = int(np.argmax(bad))
    return HomogeneityCheck(False, n, (float(x[i]), float(y[i]), float(z[i])),
                            (float(lhs[i]), float(rhs[i])))
