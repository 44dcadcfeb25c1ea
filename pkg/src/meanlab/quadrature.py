"""Adaptive Gauss-Kronrod quadrature in one and two dimensions.

Both integrators accept vector-valued integrands so that a whole batch of
parameter values (typically a batch of pairs ``(a, b)``) is integrated over a
shared subdivision.  The integrand receives 1-D abscissa arrays of length
``k`` and must return an array of shape ``(k,)`` or ``(k, *S)``; the
estimate then has shape ``S``.

The 15-point Kronrod rule never evaluates at the interval endpoints, so
integrands that are undefined at an endpoint (``M(a sin t, b cos t)`` at
``t = 0``) are handled without special casing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_EPS = np.finfo(float).eps

# Kronrod 15-point abscissae (non-negative half) and weights; the odd
# indices are the 7-point Gauss nodes.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# Full symmetric 15-point rule on [-1, 1].
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[1:7:2] = _WG[:3]
GAUSS_WEIGHTS[9:15:2] = _WG[:3][::-1]
GAUSS_WEIGHTS[7] = _WG[3]


class QuadratureError(ArithmeticError):
    """Integrand produced a non-finite value."""


@dataclass(frozen=True)
class Tolerance:
    """Absolute/relative error target; a component converges when its error
    bound is at most ``max(abs, rel * |value|)``."""

    abs: float = 1e-10
    rel: float = 1e-10

    def __post_init__(self):
        if self.abs < 0 or self.rel < 0:
            raise ValueError("tolerances must be non-negative")
        if self.abs == 0 and self.rel == 0:
            raise ValueError("abs and rel tolerance cannot both be zero")

    def allowed(self, value):
        return np.maximum(self.abs, self.rel * np.abs(value))


DEFAULT_TOL = Tolerance()
DEFAULT_MAX_EVALS = 1_000_000
# cap on stored (region, component) values; beyond it refinement stops
MAX_CELLS = 8_000_000


@dataclass(frozen=True)
class QuadratureEstimate:
    value: float | np.ndarray
    error_bound: float | np.ndarray
    evaluations: int
    converged: bool
    regions: int = 1

    def __float__(self):
        return float(self.value)


def _finite_or_raise(values, points):
    bad = ~np.isfinite(values)
    if bad.any():
        idx = np.argwhere(bad)[0]
        where = tuple(float(p[idx[0], idx[1]]) for p in points)
        raise QuadratureError(f"non-finite integrand value at abscissa {where}")


def _component_view(f, components):
    """Normalise ``f`` to the ``g(*x, idx) -> (k, len(idx))`` protocol."""
    if components is not None:
        return f, (int(components),)
    shape_holder = {}

    def g(*args):
        *x, idx = args
        out = np.asarray(f(*x), dtype=float)
        shape_holder.setdefault("shape", out.shape[1:])
        return out.reshape(out.shape[0], -1)[:, idx]

    return g, shape_holder


def _adaptive(rule, split, regions, f, tol, max_evals, components):
    """Globally adaptive driver shared by the 1-D and 2-D integrators.

    ``rule(g, regions, idx)`` returns per-region values, errors and the
    auxiliary data ``split`` needs to bisect a region.  Components whose
    accumulated error meets the tolerance are frozen: their totals are final
    and later refinements no longer evaluate them.
    """
    g, shape_info = _component_view(f, components)
    if components is None:
        # probe the component count with a one-region evaluation
        probe_idx = slice(None)
        vals, errs, aux, npts = rule(g, regions, probe_idx)
        comp_shape = shape_info["shape"]
    else:
        comp_shape = shape_info
        vals, errs, aux, npts = rule(g, regions, np.arange(components))
    n_comp = vals.shape[1]
    evals = npts * len(regions[0])
    final_val = np.zeros(n_comp)
    final_err = np.zeros(n_comp)
    active = np.arange(n_comp)
    converged = True
    while True:
        va, ea = vals[:, active], errs[:, active]
        total, err_total = va.sum(axis=0), ea.sum(axis=0)
        allowed = tol.allowed(total)
        done = err_total <= allowed
        final_val[active] = total
        final_err[active] = err_total
        active, va, ea, allowed = active[~done], va[:, ~done], ea[:, ~done], allowed[~done]
        if active.size == 0:
            break
        ratio = ea / allowed
        key = ratio.max(axis=1)
        key = np.where(split.can_split(regions), key, 0.0)
        if key.max() <= 0:
            converged = False
            break
        pick = key >= 0.25 * key.max()
        n_new = 2 * int(pick.sum())
        if evals + npts * n_new > max_evals or (len(regions[0]) + n_new) * n_comp > MAX_CELLS:
            converged = False
            break
        children = split(regions, pick, [a[pick][:, active] for a in aux] if aux else None, allowed)
        cv, ce, caux, _ = rule(g, children, active)
        evals += npts * n_new
        keep = ~pick
        full_v = np.zeros((n_new, n_comp))
        full_e = np.zeros((n_new, n_comp))
        full_v[:, active], full_e[:, active] = cv, ce
        regions = tuple(np.concatenate([r[keep], c]) for r, c in zip(regions, children))
        vals = np.concatenate([vals[keep], full_v])
        errs = np.concatenate([errs[keep], full_e])
        new_aux = []
        for a, ca in zip(aux, caux):
            full = np.zeros((n_new, n_comp))
            full[:, active] = ca
            new_aux.append(np.concatenate([a[keep], full]))
        aux = new_aux
    total = final_val.reshape(comp_shape)
    err = final_err.reshape(comp_shape)
    if total.ndim == 0:
        total, err = float(total), float(err)
    return QuadratureEstimate(total, err, int(evals), bool(converged), len(regions[0]))


# -------------------------------------------------------------------- 1-D ---

def _gk15(g, regions, idx):
    lo, hi = regions
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    x = c[:, None] + h[:, None] * NODES[None, :]
    fx = np.asarray(g(x.ravel(), idx), dtype=float)
    fx = fx.reshape(len(lo), 15, -1)
    _finite_or_raise(fx, (x,))
    k = np.einsum("rnc,n->rc", fx, KRONROD_WEIGHTS)
    gs = np.einsum("rnc,n->rc", fx, GAUSS_WEIGHTS)
    resabs = np.einsum("rnc,n->rc", np.abs(fx), KRONROD_WEIGHTS)
    resasc = np.einsum("rnc,n->rc", np.abs(fx - 0.5 * k[:, None, :]), KRONROD_WEIGHTS)
    err = np.abs(k - gs)
    # QUADPACK error scaling
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc > 0) & (err > 0), scaled, err)
    err = np.maximum(err, 50.0 * _EPS * resabs)
    ah = np.abs(h)[:, None]
    return k * h[:, None], err * ah, [], 15


class _Bisect1D:
    @staticmethod
    def can_split(regions):
        lo, hi = regions
        return (hi - lo) > 64 * _EPS * np.maximum(np.abs(lo), np.abs(hi))

    def __call__(self, regions, pick, aux, allowed):
        lo, hi = regions[0][pick], regions[1][pick]
        mid = 0.5 * (lo + hi)
        return np.concatenate([lo, mid]), np.concatenate([mid, hi])


def integrate_1d(f, lo, hi, tol: Tolerance = DEFAULT_TOL, *, points=(),
                 max_evals: int = DEFAULT_MAX_EVALS, components: int | None = None
                 ) -> QuadratureEstimate:
    """Globally adaptive G7-K15 integration of ``f`` over ``(lo, hi)``.

    Parameters
    ----------
    f : callable
        Vectorised integrand, see module docstring.  With ``components=N``
        it is instead called as ``f(x, idx)`` and must return the
        ``(len(x), len(idx))`` values of the selected components only.
    lo, hi : float
        Finite limits with ``lo < hi``.  Endpoints are never evaluated.
    tol : Tolerance
    points : sequence of float
        Interior break points (kinks, discontinuities).
    max_evals : int
        Abscissa budget.  When exhausted the estimate is returned with
        ``converged=False``.
    """
    lo, hi = float(lo), float(hi)
    if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
        raise ValueError(f"invalid interval ({lo}, {hi})")
    edges = np.unique(np.concatenate([[lo], [p for p in points if lo < p < hi], [hi]]))
    return _adaptive(_gk15, _Bisect1D(), (edges[:-1], edges[1:]), f, tol, max_evals, components)


# -------------------------------------------------------------------- 2-D ---

_W_KK = np.outer(KRONROD_WEIGHTS, KRONROD_WEIGHTS).ravel()
_W_GG = np.outer(GAUSS_WEIGHTS, GAUSS_WEIGHTS).ravel()
_W_GK = np.outer(GAUSS_WEIGHTS, KRONROD_WEIGHTS).ravel()  # Gauss in x
_W_KG = np.outer(KRONROD_WEIGHTS, GAUSS_WEIGHTS).ravel()  # Gauss in y
_NX, _NY = (a.ravel() for a in np.meshgrid(NODES, NODES, indexing="ij"))


def _tensor15(g, regions, idx):
    x0, x1, y0, y1 = regions
    cx, hx = 0.5 * (x0 + x1), 0.5 * (x1 - x0)
    cy, hy = 0.5 * (y0 + y1), 0.5 * (y1 - y0)
    X = cx[:, None] + hx[:, None] * _NX[None, :]
    Y = cy[:, None] + hy[:, None] * _NY[None, :]
    fx = np.asarray(g(X.ravel(), Y.ravel(), idx), dtype=float)
    fx = fx.reshape(len(x0), 225, -1)
    _finite_or_raise(fx, (X, Y))
    area = np.abs(hx * hy)[:, None]
    kk = np.einsum("rnc,n->rc", fx, _W_KK)
    gg = np.einsum("rnc,n->rc", fx, _W_GG)
    gk = np.einsum("rnc,n->rc", fx, _W_GK)
    kg = np.einsum("rnc,n->rc", fx, _W_KG)
    resabs = np.einsum("rnc,n->rc", np.abs(fx), _W_KK)
    err = np.maximum(np.abs(kk - gg), 50.0 * _EPS * resabs) * area
    return kk * area, err, [np.abs(kk - gk) * area, np.abs(kk - kg) * area], 225


class _Bisect2D:
    @staticmethod
    def can_split(regions):
        x0, x1, y0, y1 = regions
        return ((x1 - x0) > 64 * _EPS * np.maximum(np.abs(x0), np.abs(x1))) & \
            ((y1 - y0) > 64 * _EPS * np.maximum(np.abs(y0), np.abs(y1)))

    def __call__(self, regions, pick, aux, allowed):
        ex, ey = aux
        along_x = (ex / allowed).max(axis=1) >= (ey / allowed).max(axis=1)
        x0, x1, y0, y1 = (r[pick] for r in regions)
        mx, my = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        return (np.concatenate([x0, np.where(along_x, mx, x0)]),
                np.concatenate([np.where(along_x, mx, x1), x1]),
                np.concatenate([y0, np.where(along_x, y0, my)]),
                np.concatenate([np.where(along_x, y1, my), y1]))


def integrate_2d(f, x_lo, x_hi, y_lo, y_hi, tol: Tolerance = DEFAULT_TOL, *,
                 max_evals: int = DEFAULT_MAX_EVALS, components: int | None = None
                 ) -> QuadratureEstimate:
    """Adaptive tensor-product G7-K15 cubature over a box.

    The local error of a rectangle is ``|KK - GG|`` (Kronrod-by-Kronrod
    against Gauss-by-Gauss), which is conservative for smooth integrands.
    Rectangles are bisected along the coordinate whose embedded rule
    disagrees most.  ``components`` works as in :func:`integrate_1d`, with
    ``f(x, y, idx)``.
    """
    lims = [float(v) for v in (x_lo, x_hi, y_lo, y_hi)]
    if not all(np.isfinite(lims)) or not (lims[0] < lims[1] and lims[2] < lims[3]):
        raise ValueError(f"invalid box {lims}")
    regions = tuple(np.array([v]) for v in lims)
    return _adaptive(_tensor15, _Bisect2D(), regions, f, tol, max_evals, components)


# ------------------------------------------------------- integral of a mean ---

def mean_of_integrand(m, a, b, tol: Tolerance = DEFAULT_TOL, *, symmetric: bool = True,
                      max_evals: int = DEFAULT_MAX_EVALS) -> QuadratureEstimate:
    """Average of the mean ``m`` over the square ``[a, b]^2`` by cubature.

    ``a`` and ``b`` may be arrays (broadcast together).  Diagonal pairs get
    the exact value ``a`` with zero error.  With ``symmetric=True`` the
    symmetry of ``m`` is used to integrate over the triangle ``x <= y``
    only, mapped onto the unit square; this also removes the kink of
    ``min``/``max`` along the diagonal.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    shape = a.shape
    a, b = a.ravel(), b.ravel()
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    off = lo != hi
    value = lo.copy()
    error = np.zeros_like(lo)
    evals, converged, regions = 0, True, 0
    if off.any():
        l, w = lo[off], (hi - lo)[off]
        if symmetric:
            def integrand(s, v, idx):
                li, wi = l[idx][None, :], w[idx][None, :]
                y = li + wi * v[:, None]
                x = li + wi * (v * s)[:, None]
                return 2.0 * v[:, None] * m(x, y)
        else:
            def integrand(s, v, idx):
                li, wi = l[idx][None, :], w[idx][None, :]
                return m(li + wi * s[:, None], li + wi * v[:, None])
        est = integrate_2d(integrand, 0.0, 1.0, 0.0, 1.0, tol, max_evals=max_evals,
                           components=len(l))
        value[off] = est.value
        error[off] = est.error_bound
        evals, converged, regions = est.evaluations, est.converged, est.regions
    value, error = value.reshape(shape), error.reshape(shape)
    if value.ndim == 0:
        value, error = float(value), float(error)
    return QuadratureEstimate(value, error, max(evals, 1), converged, regions)
