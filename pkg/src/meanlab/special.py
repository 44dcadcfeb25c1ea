"""Gamma function: Lanczos in double precision, Stirling at high precision."""

from __future__ import annotations

import math

import numpy as np

from ._backend import is_mp

# g = 7, n = 9 Lanczos coefficients (Godfrey).
_LANCZOS_G = 7
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma_lanczos(x: float) -> float:
    """Gamma function for real ``x`` (not a non-positive integer).

    Relative error is about 1e-15 for moderate ``x``; it grows roughly like
    ``x * eps`` through the power term.
    """
    x = float(x)
    if x < 0.5:
        # reflection
        return math.pi / (math.sin(math.pi * x) * gamma_lanczos(1.0 - x))
    x -= 1.0
    acc = _LANCZOS_COEF[0]
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        acc += c / (x + i)
    t = x + _LANCZOS_G + 0.5
    # split the power so exp(-t) can compensate before t**(x + 1/2) overflows
    half = t ** ((x + 0.5) / 2)
    return math.sqrt(2.0 * math.pi) * half * (math.exp(-t) * half) * acc


def gamma_stirling(x, ctx):
    """Gamma function at the working precision of the mpmath context ``ctx``.

    The argument is shifted up by the recurrence until the Stirling series
    can be truncated below ``10**-(dps+5)``; the truncation bound is the
    magnitude of the first omitted term (the series is enveloping for real
    positive arguments).  Returns ``(value, remainder_bound)``.
    """
    x = ctx.mpf(x)
    if x <= 0 and x == ctx.floor(x):
        raise ValueError("gamma has poles at non-positive integers")
    if x < ctx.mpf(1) / 2:
        val, rem = gamma_stirling(1 - x, ctx)
        return ctx.pi / (ctx.sin(ctx.pi * x) * val), rem
    with ctx.extradps(10):
        target = ctx.mpf(10) ** (-(ctx.dps + 5))
        shift = max(0, int(ctx.dps) - int(x) + 1)
        z = x + shift
        series = (z - ctx.mpf(1) / 2) * ctx.log(z) - z + ctx.log(2 * ctx.pi) / 2
        k = 1
        while True:
            term = ctx.bernoulli(2 * k) / (2 * k * (2 * k - 1) * z ** (2 * k - 1))
            next_term = ctx.bernoulli(2 * k + 2) / ((2 * k + 2) * (2 * k + 1) * z ** (2 * k + 1))
            series += term
            if abs(next_term) < target:
                remainder = abs(next_term)
                break
            k += 1
        value = ctx.exp(series)
        for j in range(shift):
            value /= x + j
    return +value, remainder


def gamma(x, xp=np):
    """Gamma at double precision (``xp`` numpy) or at the context's precision."""
    if is_mp(xp):
        return gamma_stirling(x, xp)[0]
    return gamma_lanczos(x)
