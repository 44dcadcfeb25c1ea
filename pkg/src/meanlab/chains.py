"""Strict-inequality checking over batches of pairs.

A chain is a sequence of links ``lhs > rhs`` between named expressions.  Each
expression is evaluated in double precision for the whole batch; a link is
accepted at a pair when ``lhs - rhs > 1e-12 * max(1, |lhs|)``.  Pairs where
double precision cannot decide (tiny differences, or pairs so close to the
diagonal that every gap has collapsed) are re-evaluated at high precision
before being declared violations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._backend import hp_context

STRICT_REL = 1e-12
NEAR_DIAGONAL = 1e-6
AMBIGUOUS_REL = 1e-9
DEFAULT_HP_DIGITS = 50


@dataclass(frozen=True)
class Expr:
    """A named expression ``fn(a, b, xp)`` of a pair."""

    name: str
    fn: Callable = field(repr=False, compare=False)

    def __call__(self, a, b, xp=np):
        return self.fn(a, b, xp)


@dataclass(frozen=True)
class Comparison:
    lhs: str
    rhs: str
    min_margin: float | None     # smallest relative margin over checked pairs
    at: tuple | None             # pair where it occurred
    escalated: int = 0


@dataclass(frozen=True)
class Violation:
    pair: tuple
    lhs: str
    rhs: str
    values: tuple
    difference: float
    digits: int


@dataclass
class ChainReport:
    chain_name: str
    comparisons: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    samples_checked: int = 0
    degenerate: int = 0
    seed: int | None = None
    identities: dict = field(default_factory=dict)
    identity_tol: float | None = None

    @property
    def ok(self) -> bool:
        ids_ok = all(r <= self.identity_tol for r in self.identities.values()) if self.identities else True
        return not self.violations and ids_ok

    def as_dict(self) -> dict:
        return {
            "chain": self.chain_name,
            "seed": self.seed,
            "samples": self.samples_checked,
            "degenerate": self.degenerate,
            "comparisons": [c.__dict__ for c in self.comparisons],
            "violations": [v.__dict__ for v in self.violations],
            **({"identities": self.identities} if self.identities else {}),
        }


def _hp_difference(lhs: Expr, rhs: Expr, a: float, b: float, digits: int):
    ctx = hp_context(digits)
    x, y = ctx.mpf(a), ctx.mpf(b)
    lv, rv = lhs(x, y, ctx), rhs(x, y, ctx)
    return lv - rv, lv, rv


def check_links(chain_name: str, links: Sequence[tuple[Expr, Expr]], a, b, *,
                seed: int | None = None, hp_digits: int = DEFAULT_HP_DIGITS,
                max_violations: int = 20) -> ChainReport:
    """Verify every ``lhs > rhs`` link at every pair ``(a[i], b[i])``.

    Diagonal pairs are counted as degenerate; there the strict checks are
    replaced by an equality check.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    report = ChainReport(chain_name, seed=seed, samples_checked=int(a.size))
    diag = a == b
    report.degenerate = int(diag.sum())
    avg = (a + b) / 2
    near = np.abs(a - b) < NEAR_DIAGONAL * avg
    cache: dict[str, np.ndarray] = {}

    def values(e: Expr):
        if e.name not in cache:
            with np.errstate(all="ignore"):
                cache[e.name] = np.broadcast_to(np.asarray(e(a, b), dtype=float), a.shape)
        return cache[e.name]

    hp_threshold = 10.0 ** (-hp_digits + 10)
    for lhs, rhs in links:
        lv, rv = values(lhs), values(rhs)
        diff = lv - rv
        scale = np.maximum(1.0, np.abs(lv))
        rel = diff / scale
        strict = (rel > STRICT_REL) & ~diag & ~near
        bad_diag = diag & ~(np.abs(diff) <= STRICT_REL * scale)
        undecided = ~strict & ~diag & (near | (np.abs(rel) <= AMBIGUOUS_REL) | ~np.isfinite(rel))
        clear_fail = ~strict & ~diag & ~undecided
        margins = np.where(diag, np.inf, rel)
        escalated = 0
        fails = [(i, float(diff[i]), lv[i], rv[i], 16) for i in np.flatnonzero(clear_fail | bad_diag)]
        for i in np.flatnonzero(undecided):
            escalated += 1
            d, l_hp, r_hp = _hp_difference(lhs, rhs, float(a[i]), float(b[i]), hp_digits)
            s = max(1, abs(l_hp))
            margins[i] = float(d / s)
            if not d > hp_threshold * s:
                fails.append((i, float(d), float(l_hp), float(r_hp), hp_digits))
        off = ~diag
        if off.any():
            j = int(np.argmin(np.where(off, margins, np.inf)))
            comp = Comparison(lhs.name, rhs.name, float(margins[j]), (float(a[j]), float(b[j])), escalated)
        else:
            comp = Comparison(lhs.name, rhs.name, None, None, 0)
        report.comparisons.append(comp)
        for i, d, l_, r_, dig in sorted(fails)[:max_violations]:
            report.violations.append(Violation((float(a[i]), float(b[i])), lhs.name, rhs.name,
                                               (float(l_), float(r_)), d, dig))
    return report


def chain_links(exprs: Sequence[Expr]) -> list[tuple[Expr, Expr]]:
    """Adjacent links of a descending chain ``e0 > e1 > ...``."""
    return list(zip(exprs[:-1], exprs[1:]))


def sum_expr(name: str, exprs: Sequence[Expr], weights: Sequence[float] | None = None) -> Expr:
    weights = weights or [1] * len(exprs)

    def fn(a, b, xp):
        return sum((xp.mpf(w) if xp is not np else w) * e(a, b, xp) for w, e in zip(weights, exprs))

    return Expr(name, fn)

