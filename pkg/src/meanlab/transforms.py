"""Mean transforms.

* ``S_{M,phi,psi}`` shifts the arguments of ``M`` by a weight ``phi`` and a
  1-Lipschitz map ``psi`` and recentres the result.
* ``P_{M,phi,psi}`` does the same multiplicatively.
* ``S_M`` rescales the trigonometric average ``S^_M`` (``s_hat``) into
  ``[min, max]``; ``S_{M,xi,zeta}`` is the general selector form.
* ``T_{M1,M2}`` averages ``M1(M2(a, b), x)`` over ``x`` in ``[a, b]``.

Named instances (``N_c``, ``L_c``, ``J_psi``, ``I_phi``) have closed forms
written to avoid cancellation near the diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import means as mm
from ._backend import frac, is_mp, maximum, minimum, scalar_or_array
from .chains import ChainReport, Expr, chain_links, check_links
from .integral_means import closed_form_integral_mean
from .quadrature import DEFAULT_TOL, QuadratureError, Tolerance, integrate_1d
from .special import gamma

HALF_PI = math.pi / 2


# --------------------------------------------------------- phi and psi ---

@dataclass(frozen=True, eq=False)
class Phi:
    """Non-negative integrable weight on ``[0, 1]``."""

    name: str
    f: Callable = field(repr=False)      # f(t, xp)
    exact_mean: float | None = None
    constant: float | None = None

    def __call__(self, t, xp=np):
        return self.f(t, xp)


@dataclass(frozen=True, eq=False)
class Psi:
    """1-Lipschitz map of the positive reals into the positive reals.

    ``diff(x, y, xp)`` evaluates ``psi(x) - psi(y)`` without cancellation
    when supplied.
    """

    name: str
    f: Callable = field(repr=False)
    diff: Callable | None = field(default=None, repr=False)
    constant: float | None = None

    def __call__(self, t, xp=np):
        return self.f(t, xp)

    def difference(self, x, y, xp=np):
        if self.diff is not None:
            return self.diff(x, y, xp)
        return self.f(x, xp) - self.f(y, xp)


def phi_const(c: float) -> Phi:
    if not c >= 0:
        raise ValueError("a constant weight must be non-negative")
    c = float(c)
    return Phi(f"const({c:g})", lambda t, xp: t * 0 + (xp.mpf(c) if is_mp(xp) else c), c, c)


def psi_const(c: float) -> Psi:
    if not c > 0:
        raise ValueError("a constant map must be positive")
    c = float(c)
    return Psi(f"const({c:g})", lambda t, xp: t * 0 + (xp.mpf(c) if is_mp(xp) else c),
               lambda x, y, xp: x * 0, c)


def _t_minus_sin(t, xp):
    """``t - sin t`` with a series for small ``t`` in double precision."""
    if is_mp(xp):
        with xp.extradps(xp.dps):
            return +(t - xp.sin(t))
    t = np.asarray(t, dtype=float)
    small = np.abs(t) < 1
    t2 = t * t
    # sum_k (-1)^(k+1) t^(2k+1) / (2k+1)!, k = 1..11
    ser = np.zeros_like(t)
    term = t * t2 / 6
    for k in range(1, 12):
        ser = ser + term
        term = -term * t2 / ((2 * k + 2) * (2 * k + 3))
    return np.where(small, ser, t - np.sin(t))


def _half_t_minus_sin_diff(x, y, xp):
    # (x - y) - (sin x - sin y), with sin x - sin y = 2 cos((x+y)/2) sin((x-y)/2)
    if is_mp(xp):
        with xp.extradps(xp.dps):
            return +(((x - y) - 2 * xp.cos((x + y) / 2) * xp.sin((x - y) / 2)) / 2)
    d = x - y
    return (d - 2 * np.cos((x + y) / 2) * np.sin(d / 2)) / 2


def _log_t2p1_diff(x, y, xp):
    # log1p near the diagonal; a plain log of the ratio once log1p's
    # argument approaches -1 and is itself inaccurate
    if is_mp(xp):
        with xp.extradps(10):
            q = (x * x + 1) / (y * y + 1)
            out = xp.log1p((x - y) * (x + y) / (y * y + 1)) if abs(q - 1) < 0.5 else xp.log(q)
        return +out
    q = (x * x + 1) / (y * y + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        near = xp.log1p((x - y) * (x + y) / (y * y + 1))
    return np.where(np.abs(q - 1) < 0.5, near, np.log(q))


PHI: dict[str, Phi] = {
    "Id": Phi("Id", lambda t, xp: t, 0.5),
    "t2": Phi("t2", lambda t, xp: t * t, 1 / 3),
    "1": phi_const(1.0),
}
PSI: dict[str, Psi] = {
    "Id": Psi("Id", lambda t, xp: t, lambda x, y, xp: x - y),
    "half_t_minus_sin": Psi("half_t_minus_sin", lambda t, xp: _t_minus_sin(t, xp) / 2,
                            _half_t_minus_sin_diff),
    "log_t2p1": Psi("log_t2p1", lambda t, xp: xp.log1p(t * t), _log_t2p1_diff),
}
PSI_CHECK = PSI["half_t_minus_sin"]
PSI_TILDE = PSI["log_t2p1"]


def get_phi(phi) -> Phi:
    if isinstance(phi, Phi):
        return phi
    if isinstance(phi, (int, float)):
        return phi_const(phi)
    if isinstance(phi, str) and phi.startswith("const(") and phi.endswith(")"):
        return phi_const(float(phi[6:-1]))
    try:
        return PHI[phi]
    except KeyError:
        raise KeyError(f"unknown weight {phi!r}; built-ins: {', '.join(PHI)}") from None


def get_psi(psi) -> Psi:
    if isinstance(psi, Psi):
        return psi
    if isinstance(psi, (int, float)):
        return psi_const(psi)
    if isinstance(psi, str) and psi.startswith("const(") and psi.endswith(")"):
        return psi_const(float(psi[6:-1]))
    try:
        return PSI[psi]
    except KeyError:
        raise KeyError(f"unknown map {psi!r}; built-ins: {', '.join(PSI)}") from None


@dataclass(frozen=True)
class LipschitzReport:
    passed: bool
    max_ratio: float
    witness: tuple
    pairs_checked: int


def check_lipschitz1(psi, region=(1e-3, 1e3), n: int = 100, *, seed: int = 0,
                     slack: float = 1e-12) -> LipschitzReport:
    """Largest difference quotient of ``psi`` over ``n^2`` sampled pairs.

    Points are drawn log-uniformly in ``region`` plus a uniform set, so that
    both small arguments and the bulk of a wide region are represented.
    """
    if n < 2:
        raise ValueError("need at least two sample points")
    lo, hi = map(float, region)
    if not 0 < lo < hi:
        raise ValueError("region must satisfy 0 < lo < hi")
    f = psi if not isinstance(psi, Psi) else (lambda t: psi(t))
    rng = np.random.default_rng(seed)
    k = n // 2
    x = np.concatenate([np.exp(rng.uniform(math.log(lo), math.log(hi), n - k)), rng.uniform(lo, hi, k)])
    fx = np.asarray(f(x), dtype=float)
    dx = x[:, None] - x[None, :]
    df = fx[:, None] - fx[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dx != 0, np.abs(df) / np.abs(dx), 0.0)
    if isinstance(psi, Psi) and psi.diff is not None:
        # the cancellation-free difference is the honest one
        with np.errstate(divide="ignore", invalid="ignore"):
            exact = np.abs(psi.difference(x[:, None], x[None, :])) / np.abs(dx)
        ratio = np.where(dx != 0, exact, 0.0)
    i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    worst = float(ratio[i, j])
    return LipschitzReport(worst <= 1 + slack, worst, (float(x[i]), float(x[j])), n * n)


class InvalidWeight(ValueError):
    """A supplied phi or psi violates the transform hypotheses."""


def from_callable(f: Callable, kind: str, name: str = "custom", *, n: int = 10_000,
                  seed: int = 0, region=(1e-3, 1e3)):
    """Admit an opaque scalar/vectorised callable as a ``Phi`` or ``Psi``.

    Weights must be finite and non-negative on ``n`` sampled points of
    ``[0, 1]``; maps must be positive and pass :func:`check_lipschitz1` on
    ``n`` sampled pairs.
    """
    def vec(t, xp=np):
        if is_mp(xp):
            return xp.mpf(f(t))
        out = np.asarray(f(t), dtype=float)
        if out.shape != np.shape(t):
            out = np.array([float(f(v)) for v in np.ravel(t)]).reshape(np.shape(t))
        return out

    rng = np.random.default_rng(seed)
    if kind == "phi":
        t = rng.uniform(0.0, 1.0, n)
        v = vec(t)
        if not np.all(np.isfinite(v) & (v >= 0)):
            i = int(np.argmax(~(np.isfinite(v) & (v >= 0))))
            raise InvalidWeight(f"weight {name} is negative or non-finite at t={t[i]}")
        return Phi(name, lambda t, xp: vec(t, xp))
    if kind == "psi":
        lo, hi = region
        t = np.exp(rng.uniform(math.log(lo), math.log(hi), n))
        v = vec(t)
        if not np.all(np.isfinite(v) & (v > 0)):
            raise InvalidWeight(f"map {name} is not positive on the sampled region")
        rep = check_lipschitz1(lambda s: vec(s), region, max(2, int(math.isqrt(n))), seed=seed)
        if not rep.passed:
            raise InvalidWeight(f"map {name} is not 1-Lipschitz: ratio {rep.max_ratio:.6g} at {rep.witness}")
        return Psi(name, lambda t, xp: vec(t, xp))
    raise ValueError("kind must be 'phi' or 'psi'")


@dataclass(frozen=True)
class WeightPair:
    """``(phi, psi)`` with the hypotheses checked and ``phi_mean`` cached."""

    phi: Phi
    psi: Psi
    phi_mean: float = field(init=False)

    def __init__(self, phi, psi, *, validate: bool = True):
        phi, psi = get_phi(phi), get_psi(psi)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)
        if phi.constant is not None:
            mean = phi.constant
        else:
            est = integrate_1d(lambda t: phi(t), 0.0, 1.0, Tolerance(1e-14, 1e-14))
            if not est.converged:
                raise QuadratureError(f"mean of weight {phi.name} did not converge")
            mean = float(est.value)
            if phi.exact_mean is not None and abs(mean - phi.exact_mean) > 1e-12:
                raise InvalidWeight(f"weight {phi.name}: quadrature mean {mean} "
                                    f"disagrees with declared {phi.exact_mean}")
        object.__setattr__(self, "phi_mean", mean)
        if validate and psi.constant is None and psi.name not in PSI:
            rep = check_lipschitz1(psi)
            if not rep.passed:
                raise InvalidWeight(f"map {psi.name} is not 1-Lipschitz (ratio {rep.max_ratio:.6g})")


def _psi_values(w: WeightPair, a, b, xp):
    pa, pb = w.psi(a, xp), w.psi(b, xp)
    bad = (pa <= 0) | (pb <= 0) if not is_mp(xp) else (pa <= 0 or pb <= 0)
    if np.any(bad):
        raise ValueError(f"psi={w.psi.name} produced a non-positive value; the mean is undefined there")
    return pa, pb


def _pairs(p):
    a, b = p
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise ValueError("pair coordinates must be positive")
    return a, b


def _integrate_components(g, n, lo, hi, tol, what, points=()):
    est = integrate_1d(g, lo, hi, tol, points=points, components=n)
    if not est.converged:
        raise QuadratureError(f"{what}: quadrature did not converge")
    return est.value, est.error_bound


def _weight_breaks(pa, pb):
    """Geometric break points ``10^-k`` of ``(0, 1)`` down to the psi scale.

    With small ``psi`` values the integrand has a tail of the form
    ``(psi(a) - psi(b))^2 / (phi(t) + psi)`` that ends near ``t = 0``,
    which an unrefined rule steps over without noticing.
    """
    small = float(np.min(np.minimum(pa, pb)))
    k = int(np.clip(np.ceil(-np.log10(small)), 1, 16)) if small < 1 else 1
    return tuple(10.0 ** -np.arange(k, 0, -1))


# ------------------------------------------------------------- S and P ---

def s_transform(m, w: WeightPair, p, tol: Tolerance = DEFAULT_TOL, *, xp=np):
    """``S_{M,phi,psi}(a, b)``; arrays of pairs are integrated together."""
    m = mm.get_mean(m)
    if is_mp(xp):
        a, b = xp.mpf(p[0]), xp.mpf(p[1])
        pa, pb = _psi_values(w, a, b, xp)
        if w.phi.constant is not None:
            c = xp.mpf(w.phi.constant)
            return -c + m(c + pa, c + pb, xp) - (pa + pb) / 2 + (a + b) / 2
        phibar = xp.quad(lambda t: w.phi(t, xp), [0, 1])
        integral = xp.quad(lambda t: m(w.phi(t, xp) + pa, w.phi(t, xp) + pb, xp), [0, 1])
        return -phibar + (a + b) / 2 - (pa + pb) / 2 + integral
    a, b = _pairs(p)
    shape = a.shape
    a, b = a.ravel(), b.ravel()
    pa, pb = _psi_values(w, a, b, np)
    base = (a + b) / 2 - (pa + pb) / 2
    if w.phi.constant is not None:
        c = w.phi.constant
        out = -c + m(c + pa, c + pb) + base
    else:
        def g(t, idx):
            ft = w.phi(t)[:, None]
            return m(ft + pa[idx][None, :], ft + pb[idx][None, :])
        integral, _ = _integrate_components(g, a.size, 0.0, 1.0, tol, f"S_{m.name}", _weight_breaks(pa, pb))
        out = -w.phi_mean + base + integral
    return scalar_or_array(np.where(a == b, a, out).reshape(shape))


def p_transform(m, w: WeightPair, p, tol: Tolerance = DEFAULT_TOL, *, xp=np,
                use_homogeneity: bool = True):
    """``P_{M,phi,psi}(a, b)``.

    For means known to be homogeneous of order one the integral collapses
    to ``M(psi(a), psi(b))`` and is skipped unless ``use_homogeneity`` is
    false.
    """
    m = mm.get_mean(m)
    if not w.phi_mean > 0:
        raise ValueError("P transform needs a weight with positive mean")
    if is_mp(xp):
        a, b = xp.mpf(p[0]), xp.mpf(p[1])
        pa, pb = _psi_values(w, a, b, xp)
        base = (a + b) / 2 - (pa + pb) / 2
        if use_homogeneity and m.homogeneous:
            return base + m(pa, pb, xp)
        phibar = xp.quad(lambda t: w.phi(t, xp), [0, 1])
        integral = xp.quad(lambda t: m(w.phi(t, xp) * pa, w.phi(t, xp) * pb, xp), [0, 1])
        return base + integral / phibar
    a, b = _pairs(p)
    shape = a.shape
    a, b = a.ravel(), b.ravel()
    pa, pb = _psi_values(w, a, b, np)
    base = (a + b) / 2 - (pa + pb) / 2
    if use_homogeneity and m.homogeneous:
        out = base + m(pa, pb)
    elif w.phi.constant is not None:
        c = w.phi.constant
        out = base + m(c * pa, c * pb) / c
    else:
        def g(t, idx):
            ft = w.phi(t)[:, None]
            return m(ft * pa[idx][None, :], ft * pb[idx][None, :])
        integral, _ = _integrate_components(g, a.size, 0.0, 1.0, tol, f"P_{m.name}", _weight_breaks(pa, pb))
        out = base + integral / w.phi_mean
    return scalar_or_array(np.where(a == b, a, out).reshape(shape))


# ----------------------------------------------------- named instances ---

def _shifted_g_gap(c, w_psi: Psi, a, b, xp):
    """``A(a,b) - S_{G,c,psi}(a,b) = (sqrt(c+psi a) - sqrt(c+psi b))^2 / 2``."""
    u, v = c + w_psi(a, xp), c + w_psi(b, xp)
    root_diff = w_psi.difference(a, b, xp) / (xp.sqrt(u) + xp.sqrt(v))
    return root_diff * root_diff / 2


def _check_c(c):
    if not c >= 0:
        raise ValueError("c must be non-negative")


def n_mean(c: float, p, xp=np):
    """``N_c = S_{G,c,psi_check}`` with ``psi_check(t) = (t - sin t)/2``."""
    _check_c(c)
    a, b = (xp.mpf(p[0]), xp.mpf(p[1])) if is_mp(xp) else _pairs(p)
    c = xp.mpf(c) if is_mp(xp) else float(c)
    out = (a + b) / 2 - _shifted_g_gap(c, PSI_CHECK, a, b, xp)
    return out if is_mp(xp) else scalar_or_array(out)


def l_mean(c: float, p, xp=np):
    """``L_c = S_{G,c,psi_tilde}`` with ``psi_tilde(t) = ln(t^2 + 1)``."""
    _check_c(c)
    a, b = (xp.mpf(p[0]), xp.mpf(p[1])) if is_mp(xp) else _pairs(p)
    c = xp.mpf(c) if is_mp(xp) else float(c)
    out = (a + b) / 2 - _shifted_g_gap(c, PSI_TILDE, a, b, xp)
    return out if is_mp(xp) else scalar_or_array(out)


def j_psi_mean(psi, p, xp=np):
    """``J_psi = S_{H,Id,psi}``."""
    psi = get_psi(psi)
    a, b = (xp.mpf(p[0]), xp.mpf(p[1])) if is_mp(xp) else _pairs(p)
    pa, pb = psi(a, xp), psi(b, xp)
    half = psi.difference(a, b, xp) / 2
    out = (a + b) / 2 - half * half * xp.log1p(2 / (pa + pb))
    return out if is_mp(xp) else scalar_or_array(out)


def F1(x, y, xp=np):
    return (x + y) * xp.sqrt(x * y) / 4


def F2(x, y, xp=np):
    return (x - y) ** 2 / 4 * xp.log((xp.sqrt(x) + xp.sqrt(y)) / xp.sqrt(2))


def i_phi_mean(phi, p, tol: Tolerance = DEFAULT_TOL, xp=np):
    """``I_phi = S_{G,phi,Id}``.

    ``phi = Id`` uses the ``F1``/``F2`` closed form, constant weights the
    shifted-root form, anything else quadrature.
    """
    phi = get_phi(phi)
    if phi.name == "Id":
        a, b = (xp.mpf(p[0]), xp.mpf(p[1])) if is_mp(xp) else _pairs(p)
        if is_mp(xp):
            with xp.extradps(20):
                out = -frac(1, 2, xp) + F1(a + 1, b + 1, xp) - F1(a, b, xp) \
                    - F2(a + 1, b + 1, xp) + F2(a, b, xp)
            return +out
        out = -0.5 + F1(a + 1, b + 1) - F1(a, b) - F2(a + 1, b + 1) + F2(a, b)
        return scalar_or_array(np.where(a == b, a, out))
    if phi.constant is not None:
        a, b = (xp.mpf(p[0]), xp.mpf(p[1])) if is_mp(xp) else _pairs(p)
        c = xp.mpf(phi.constant) if is_mp(xp) else phi.constant
        out = (a + b) / 2 - _shifted_g_gap(c, PSI["Id"], a, b, xp)
        return out if is_mp(xp) else scalar_or_array(out)
    return s_transform(mm.G, WeightPair(phi, "Id"), p, tol, xp=xp)


# ------------------------------------------------------ trigonometric S ---

def _s_hat_breaks(a, b, xp=np):
    """Break points of ``(0, pi/2)`` for ``S^``: the cut ``a sin t = b cos t``
    plus points where the argument ratio is ``10^k`` on either side.

    Means like C and r carry a ``1/(b cos t)`` tail that ends at the cut; a
    geometric grid keeps the quadrature error estimate honest there.
    """
    if is_mp(xp):
        lo, hi = min(a, b), max(a, b)
        k = min(16, max(1, int(xp.ceil(xp.log10(hi / lo)))))
        return [xp.atan(b / a * xp.mpf(10) ** j) for j in range(-k, k + 1)]
    ratio = np.maximum(a, b) / np.minimum(a, b)
    k = int(np.clip(np.ceil(np.log10(ratio.max())), 1, 16))
    r = 10.0 ** np.arange(-k, k + 1)
    return np.arctan2(b[:, None] * r[None, :], a[:, None])


def s_hat(m, p, tol: Tolerance = DEFAULT_TOL, *, xp=np):
    """``S^_M(a, b)``: integral of ``M(a sin t, b cos t)`` over ``(0, pi/2)``.

    The interval is split at the cut ``a sin t = b cos t`` (both arguments
    equal, where min/max-type means have a kink) and geometrically around
    it; the rule never touches the endpoints, so ``M`` is never evaluated
    at zero.
    """
    m = mm.get_mean(m)
    if is_mp(xp):
        a, b = xp.mpf(p[0]), xp.mpf(p[1])
        pts = [xp.mpf(0)] + _s_hat_breaks(a, b, xp) + [xp.pi / 2]
        return xp.quad(lambda t: m(a * xp.sin(t), b * xp.cos(t), xp), pts)
    a, b = _pairs(p)
    val = _cut_integral(lambda x, y: m(x, y), a.ravel(), b.ravel(), tol, f"S^_{m.name}")
    return scalar_or_array(val.reshape(a.shape))


def _cut_integral(f, a, b, tol, what):
    """Integral of ``f(a sin t, b cos t)`` over ``(0, pi/2)``, split at the cut."""
    edges = np.concatenate([np.zeros((a.size, 1)), _s_hat_breaks(a, b), np.full((a.size, 1), HALF_PI)], axis=1)
    nseg = edges.shape[1] - 1
    start, width = edges[:, :-1], np.diff(edges, axis=1)

    # u in (j, j+1) maps linearly onto segment j; one component per pair
    def g(u, idx):
        j = np.minimum(u.astype(int), nseg - 1)
        s0, w = start[idx][:, j].T, width[idx][:, j].T
        t = s0 + w * (u - j)[:, None]
        return w * f(a[idx][None, :] * np.sin(t), b[idx][None, :] * np.cos(t))

    est = integrate_1d(g, 0.0, float(nseg), tol, points=tuple(range(1, nseg)), components=a.size)
    if not est.converged:
        raise QuadratureError(f"{what}: quadrature did not converge")
    return est.value


class SelectorError(ValueError):
    """A selector pair violates its admissibility bounds at the given pair."""


@dataclass(frozen=True)
class SelectorPair:
    """``(xi, zeta)`` as functions of ``(a, b)``."""

    xi: Callable
    zeta: Callable
    name: str = "custom"

    @staticmethod
    def xi_max(a, b):
        s = math.hypot(a, b)
        return abs(a - b) * s / (2 * s - (a + b))

    @classmethod
    def standard(cls) -> "SelectorPair":
        return cls(lambda a, b: abs(a - b),
                   lambda a, b: (a + b) / 2 - abs(a * a - b * b) / (2 * math.hypot(a, b)), "standard")

    @classmethod
    def maximal(cls) -> "SelectorPair":
        # at the largest xi the zeta window collapses to max - xi
        return cls(cls.xi_max, lambda a, b: max(a, b) - cls.xi_max(a, b), "maximal")

    def check(self, a: float, b: float, rtol: float = 1e-12):
        a, b = float(a), float(b)
        if a == b:
            raise SelectorError("xi must satisfy 0 < xi <= 0 on the diagonal: no admissible selector")
        xi, zeta = float(self.xi(a, b)), float(self.zeta(a, b))
        s = math.hypot(a, b)
        cap = self.xi_max(a, b)
        slack = rtol * max(a, b)
        if not xi > 0:
            raise SelectorError(f"xi={xi} must be positive")
        if xi > cap + slack:
            raise SelectorError(f"xi={xi} exceeds its upper bound {cap}")
        z_lo = min(a, b) + (1 - (a + b) / s) * xi
        z_hi = max(a, b) - xi
        if not z_lo - slack <= zeta <= z_hi + slack:
            raise SelectorError(f"zeta={zeta} outside [{z_lo}, {z_hi}]")
        return xi, zeta


def s_selector_mean(m, sel: SelectorPair, p, tol: Tolerance = DEFAULT_TOL) -> float:
    """``S_{M,xi,zeta} = xi / sqrt(a^2+b^2) * S^_M + zeta`` at a single pair."""
    a, b = map(float, p)
    xi, zeta = sel.check(a, b)
    return xi / math.hypot(a, b) * float(s_hat(m, (a, b), tol)) + zeta


def _s_parts(a, b, xp):
    s2 = a * a + b * b
    s = xp.sqrt(s2)
    X = abs(a * a - b * b) * (s2 - 4 * a * b) / (2 * s2 * s)
    Y = 4 * a * a * b * b * abs(a - b) / (s2 * s2) * xp.log((a + b + s) / xp.sqrt(2 * a * b))
    return X, Y


def _s_closed_G(a, b, xp):
    s = xp.sqrt(a * a + b * b)
    g34 = gamma(frac(3, 4, xp) if is_mp(xp) else 0.75, xp)
    return (a + b) / 2 + xp.sqrt(a * b) * abs(a - b) * g34 * g34 / (xp.sqrt(xp.pi) * s) \
        - abs(a * a - b * b) / (2 * s)


def _s_closed(name):
    def f(a, b, xp):
        X, Y = _s_parts(a, b, xp)
        third = frac(1, 3, xp)
        return {"H": (a + b) / 2 - X - Y, "Grav": (a + b) / 2 + third * (X + Y),
                "C": (a + b) / 2 + X + Y}[name]
    return f


S_CLOSED = {"A": lambda a, b, xp: (a + b) / 2, "G": _s_closed_G,
            "H": _s_closed("H"), "Grav": _s_closed("Grav"), "C": _s_closed("C")}


def _s_generic(m, a, b, tol, xp):
    s = xp.sqrt(a * a + b * b) if is_mp(xp) else np.hypot(a, b)
    sh = s_hat(m, (a, b), tol, xp=xp)
    return (a + b) / 2 - abs(a * a - b * b) / (2 * s) + abs(a - b) / s * sh


def _s_resolve(m, a, b, tol, xp, closed_only):
    f = S_CLOSED.get(m.name)
    if f is not None and mm.MEANS.get(m.name) is m:
        return f(a, b, xp)
    if m.parts and all(part.name in S_CLOSED or part.parts for _, part in m.parts):
        return sum((xp.mpf(w) if is_mp(xp) else w) * _s_resolve(part, a, b, tol, xp, closed_only)
                   for w, part in m.parts)
    if closed_only:
        raise KeyError(f"no closed form for S_{m.name}")
    return _s_generic(m, a, b, tol, xp)


def s_mean(m, p, tol: Tolerance = DEFAULT_TOL, *, xp=np, method: str = "auto"):
    """``S_M(a, b)``; closed forms for A, G, H, g, C and their combinations.

    ``method="quadrature"`` forces the ``s_hat`` route.
    """
    m = mm.get_mean(m)
    if is_mp(xp):
        a, b = xp.mpf(p[0]), xp.mpf(p[1])
        if a == b:
            return +a
        return _s_generic(m, a, b, tol, xp) if method == "quadrature" else _s_resolve(m, a, b, tol, xp, False)
    a, b = _pairs(p)
    off = a != b
    out = a.astype(float).copy()
    if off.any():
        ao, bo = a[off], b[off]
        out[off] = _s_generic(m, ao, bo, tol, np) if method == "quadrature" else \
            _s_resolve(m, ao, bo, tol, np, False)
    return scalar_or_array(out)


def elliptic_arc(p, tol: Tolerance = DEFAULT_TOL):
    """Integral of ``sqrt(a^2 sin^2 t + b^2 cos^2 t)`` over ``(0, pi/2)``."""
    a, b = _pairs(p)
    val = _cut_integral(np.hypot, a.ravel(), b.ravel(), tol, "elliptic arc")
    return scalar_or_array(val.reshape(a.shape))


def elliptic_arc_sandwich(p, tol: Tolerance = DEFAULT_TOL):
    """``(lower, integral, upper)`` from ``S_g < S_r < S_C``."""
    a, b = _pairs(p)
    if np.any(a == b):
        raise ValueError("the sandwich needs a != b")
    s = np.hypot(a, b)
    d = np.abs(a - b)

    def bracket(S):
        return math.sqrt(2) * s / d * S - (a + b) / math.sqrt(2) * (s / d - 1)

    lower = bracket(S_CLOSED["Grav"](a, b, np))
    upper = bracket(S_CLOSED["C"](a, b, np))
    return scalar_or_array(lower), elliptic_arc((a, b), tol), scalar_or_array(upper)


# -------------------------------------------------------------------- T ---

def _t_closed_A(M, a, b, xp):
    return (M + (a + b) / 2) / 2


def _t_closed_G(M, a, b, xp):
    return xp.sqrt(M * closed_form_integral_mean("IG", a, b, xp))


def _t_closed_H(M, a, b, xp):
    lo, hi = minimum(a, b, xp), maximum(a, b, xp)
    u = (hi - lo) / (lo + M)
    ratio = xp.log1p(u) / u
    return 2 * M * (1 - M / (lo + M) * ratio)


def _t_closed_R(M, a, b, xp):
    lo, hi = minimum(a, b, xp), maximum(a, b, xp)
    ra, rb = xp.sqrt(M * M + lo * lo), xp.sqrt(M * M + hi * hi)
    first = (lo + hi) * (lo * lo + hi * hi + M * M) / (lo * ra + hi * rb)
    # ln((hi + rb)/(lo + ra)) = asinh(hi/M) - asinh(lo/M), combined
    q = (hi - lo) * (hi + lo) / (hi * ra + lo * rb)
    second = M * M * xp.asinh(q) / (hi - lo)
    return (first + second) / (2 * xp.sqrt(2))


T_CLOSED = {"A": _t_closed_A, "G": _t_closed_G, "H": _t_closed_H, "R": _t_closed_R}


def _t_quadrature(m1, M, a, b, tol):
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    n = a.size
    # split at x = M where min/max-type m1 have a kink
    start = np.concatenate([lo, M])
    width = np.concatenate([M - lo, hi - M])
    MM = np.concatenate([M, M])

    def g(u, idx):
        x = start[idx][None, :] + width[idx][None, :] * u[:, None]
        return width[idx][None, :] * m1(np.broadcast_to(MM[idx][None, :], x.shape), x)

    halves, _ = _integrate_components(g, 2 * n, 0.0, 1.0, tol, f"T_{m1.name}")
    return (halves[:n] + halves[n:]) / (hi - lo)


def _t_resolve(m1, M, a, b, tol, xp, method):
    f = T_CLOSED.get(m1.name)
    if method != "quadrature":
        if f is not None and mm.MEANS.get(m1.name) is m1:
            return f(M, a, b, xp)
        if m1.parts:
            return sum((xp.mpf(w) if is_mp(xp) else w) * _t_resolve(part, M, a, b, tol, xp, method)
                       for w, part in m1.parts)
    if is_mp(xp):
        lo, hi = minimum(a, b, xp), maximum(a, b, xp)
        return xp.quad(lambda x: m1(M, x, xp), [lo, M, hi]) / (hi - lo)
    return _t_quadrature(m1, M, a, b, tol)


def t_mean(m1, m2, p, tol: Tolerance = DEFAULT_TOL, *, xp=np, method: str = "auto"):
    """``T_{M1,M2}(a, b)``.

    Closed forms for ``M1`` in A, G, H, r and their affine combinations
    (Hn, g, complements); otherwise, or with ``method="quadrature"``, a
    1-D integral.
    """
    m1, m2 = mm.get_mean(m1), mm.get_mean(m2)
    if is_mp(xp):
        a, b = xp.mpf(p[0]), xp.mpf(p[1])
        if a == b:
            return +a
        return _t_resolve(m1, m2(a, b, xp), a, b, tol, xp, method)
    a, b = _pairs(p)
    shape = a.shape
    a, b = a.ravel(), b.ravel()
    off = a != b
    out = a.copy()
    if off.any():
        ao, bo = a[off], b[off]
        out[off] = _t_resolve(m1, np.asarray(m2(ao, bo), dtype=float), ao, bo, tol, np, method)
    return scalar_or_array(out.reshape(shape))


def _t_expr(m1, m2):
    m1, m2 = mm.get_mean(m1), mm.get_mean(m2)
    return Expr(f"T_{m1.name},{m2.name}", lambda a, b, xp: t_mean(m1, m2, (a, b), xp=xp))


def t_chain_links():
    links = []
    for inner in ("A", "G", "H"):
        links += chain_links([_t_expr(o, inner) for o in ("R", "A", "G", "H")])
    for outer in ("A", "G", "H"):
        links += chain_links([_t_expr(outer, i) for i in ("A", "G", "H")])
    return links


def t_identity_residuals(a, b, inner=("A", "G", "H")) -> dict[str, float]:
    """Closed-form combinations against direct quadrature of the combined mean.

    Returns the largest relative residual of each identity over the pairs.
    """
    a, b = _pairs((a, b))
    off = a != b
    a, b = a[off], b[off]
    tight = Tolerance(1e-13, 1e-13)
    out = {}
    if a.size == 0:
        return out
    for m2 in inner:
        ta, tg, th = (t_mean(k, m2, (a, b)) for k in ("A", "G", "H"))
        cases = {
            f"T_Hn,{m2}": (t_mean("Hn", m2, (a, b), tight, method="quadrature"), 2 / 3 * ta + 1 / 3 * tg),
            f"T_g,{m2}": (t_mean("Grav", m2, (a, b), tight, method="quadrature"), 4 / 3 * ta - 1 / 3 * th),
        }
        for m1 in ("G", "H", "R"):
            comp = mm.complement_A(mm.get_mean(m1))
            direct = t_mean(comp, m2, (a, b), tight, method="quadrature")
            cases[f"T_({m1})_A,{m2}"] = (direct, 2 * ta - t_mean(m1, m2, (a, b)))
        for name, (lhs, rhs) in cases.items():
            res = np.abs(np.asarray(lhs) - np.asarray(rhs)) / np.maximum(1.0, np.abs(rhs))
            out[name] = float(np.max(res))
    return out


def t_chain_report(p, tol: Tolerance = DEFAULT_TOL, *, identity_tol: float = 1e-12,
                   seed=None) -> ChainReport:
    """Outer and inner T-chains plus the combination identities at ``p``."""
    a, b = p
    report = check_links("T", t_chain_links(), a, b, seed=seed)
    report.identities = t_identity_residuals(a, b)
    report.identity_tol = identity_tol
    return report


# ------------------------------------------------ transforms as means ---

def s_transform_mean(m, w: WeightPair) -> mm.Mean:
    m = mm.get_mean(m)
    return mm.Mean(f"S_{m.name},{w.phi.name},{w.psi.name}",
                   lambda x, y, xp: s_transform(m, w, (x, y), xp=xp))


def p_transform_mean(m, w: WeightPair) -> mm.Mean:
    m = mm.get_mean(m)
    return mm.Mean(f"P_{m.name},{w.phi.name},{w.psi.name}",
                   lambda x, y, xp: p_transform(m, w, (x, y), xp=xp))


def s_mean_mean(m) -> mm.Mean:
    m = mm.get_mean(m)
    return mm.Mean(f"S_{m.name}", lambda x, y, xp: s_mean(m, (x, y), xp=xp), m.homogeneous)


def t_mean_mean(m1, m2) -> mm.Mean:
    m1, m2 = mm.get_mean(m1), mm.get_mean(m2)
    return mm.Mean(f"T_{m1.name},{m2.name}", lambda x, y, xp: t_mean(m1, m2, (x, y), xp=xp))


N0 = mm.Mean("N0", lambda x, y, xp: n_mean(0, (x, y), xp), False)
L0 = mm.Mean("L0", lambda x, y, xp: l_mean(0, (x, y), xp), False)
J_ID = mm.Mean("JId", lambda x, y, xp: j_psi_mean("Id", (x, y), xp), False)
I_ID = mm.Mean("IId", lambda x, y, xp: i_phi_mean("Id", (x, y), xp=xp), False)
