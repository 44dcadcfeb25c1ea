"""Array/precision backend shims.

Every closed-form expression in the package takes an ``xp`` argument that is
either the :mod:`numpy` module (vectorised double precision) or an mpmath
context (scalar arbitrary precision).  The two expose the same names for the
functions used here (``sqrt``, ``log``, ``log1p``, ``sin``, ``cos``, ``asinh``,
``pi``); the few that differ are wrapped below.
"""

from __future__ import annotations

import numpy as np

try:
    import mpmath
except ImportError:  # pragma: no cover - mpmath is a hard dependency
    mpmath = None

MAX_DIGITS = 10_000


class PrecisionUnavailable(RuntimeError):
    """Raised when the arbitrary-precision backend cannot be used."""


def is_mp(xp) -> bool:
    return xp is not np


def hp_context(digits: int):
    """Return a fresh mpmath context working at ``digits`` decimal digits."""
    if mpmath is None:
        raise PrecisionUnavailable("mpmath is not installed")
    if not 15 <= digits <= MAX_DIGITS:
        raise ValueError(f"precision must be in [15, {MAX_DIGITS}] digits, got {digits}")
    ctx = mpmath.MPContext()
    ctx.dps = int(digits)
    return ctx


def to_xp(x, xp):
    """Convert ``x`` for use with ``xp``; strings are parsed exactly under mpmath."""
    if is_mp(xp):
        return x if isinstance(x, xp.mpf) else xp.mpf(x if isinstance(x, str) else float(x))
    return np.asarray(x, dtype=float)


def frac(p: int, q: int, xp):
    return xp.mpf(p) / q if is_mp(xp) else p / q


def minimum(x, y, xp):
    return np.minimum(x, y) if xp is np else (x if x <= y else y)


def maximum(x, y, xp):
    return np.maximum(x, y) if xp is np else (x if x >= y else y)


def where(cond, x, y, xp):
    return np.where(cond, x, y) if xp is np else (x if cond else y)


def scalar_or_array(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x
