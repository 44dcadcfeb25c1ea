"""Inequality laboratory: chain scans, counterexample search, certificates.

Expressions are looked up by id in :data:`EXPRESSIONS` (classical means,
integral means ``I*``/``J*``, trigonometric ``S*``, and the named transform
instances).  Every expression evaluates both in double precision and in an
mpmath context, which is what certificates are issued from.
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field

import numpy as np

from . import integral_means as im
from . import means as mm
from . import transforms as tr
from ._backend import MAX_DIGITS, PrecisionUnavailable, hp_context, mpmath
from .chains import ChainReport, Expr, chain_links, check_links
from .special import gamma_lanczos, gamma_stirling

GAMMA_34_ANCHOR = "1.225416702"


@dataclass(frozen=True)
class PrecisionConfig:
    decimal_digits: int = 50

    def __post_init__(self):
        if not 15 <= int(self.decimal_digits) <= MAX_DIGITS:
            raise ValueError(f"decimal_digits must be in [15, {MAX_DIGITS}]")


# ------------------------------------------------------------ registry ---

def _mean_expr(m: mm.Mean) -> Expr:
    return Expr(m.name, lambda a, b, xp: m(a, b, xp))


def _registry() -> dict[str, Expr]:
    reg = {name: _mean_expr(m) for name, m in mm.MEANS.items()}
    for alias, target in mm.ALIASES.items():
        reg[alias] = reg[target]
    for mean_name, kind in im.KIND_OF_MEAN.items():
        reg[kind] = Expr(kind, lambda a, b, xp, k=kind: im.closed_form_integral_mean(k, a, b, xp))
        jname = "J" + kind[1:]
        reg[jname] = Expr(jname, lambda a, b, xp, k=kind:
                          3 * im.closed_form_integral_mean(k, a, b, xp) - (a + b))
    for name in tr.S_CLOSED:
        reg["S" + name] = Expr("S" + name, lambda a, b, xp, n=name: tr.s_mean(n, (a, b), xp=xp))
    reg["N0"] = _mean_expr(tr.N0)
    reg["L0"] = _mean_expr(tr.L0)
    reg["JId"] = _mean_expr(tr.J_ID)
    reg["IId"] = _mean_expr(tr.I_ID)
    for psi in tr.PSI:
        reg[f"J_{psi}"] = Expr(f"J_{psi}", lambda a, b, xp, s=psi: tr.j_psi_mean(s, (a, b), xp))
    return reg


EXPRESSIONS: dict[str, Expr] = _registry()
_PARAM = re.compile(r"^(N|L)(\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)$")


def get_expression(name: str) -> Expr:
    """Registered expression, or ``N<c>`` / ``L<c>`` for a numeric ``c >= 0``."""
    if name in EXPRESSIONS:
        return EXPRESSIONS[name]
    match = _PARAM.match(name)
    if match:
        fam, c = match.group(1), float(match.group(2))
        f = tr.n_mean if fam == "N" else tr.l_mean
        return Expr(name, lambda a, b, xp: f(c, (a, b), xp))
    raise KeyError(f"unknown expression {name!r}; registered: {', '.join(sorted(EXPRESSIONS))}")


def _exact(ctx, v):
    """Parse ``v`` into ``ctx`` exactly (decimal strings are not rounded to double)."""
    return ctx.mpf(v) if isinstance(v, str) else ctx.mpf(float(v))


def high_precision_eval(expr, p, digits: int = 50):
    """Value of ``expr`` at ``p`` with ``digits`` correct decimal digits.

    The evaluation runs with ten guard digits and is rounded back; string
    coordinates are read exactly.
    """
    if mpmath is None:
        raise PrecisionUnavailable("mpmath is required for high-precision evaluation")
    e = get_expression(expr) if isinstance(expr, str) else expr
    ctx = hp_context(int(digits) + 10)
    a, b = _exact(ctx, p[0]), _exact(ctx, p[1])
    if not (a > 0 and b > 0):
        raise ValueError("pair coordinates must be positive")
    val = e(a, b, ctx)
    out = hp_context(int(digits))
    return out.mpf(val)


# -------------------------------------------------------- certificates ---

@dataclass(frozen=True)
class ScanCertificate:
    lhs: str
    rhs: str
    witness: tuple
    difference: float
    difference_text: str
    precision_digits: int
    direction: str                 # "lhs_greater" or "rhs_greater"
    confirmed: bool                # sign re-checked at precision_digits + 10

    def as_dict(self) -> dict:
        return asdict(self)


def certify(lhs, rhs, p, digits: int = 50) -> ScanCertificate | None:
    """Certificate for the sign of ``lhs - rhs`` at ``p``, if it clears the
    noise floor ``10**(10 - digits)``."""
    le = get_expression(lhs) if isinstance(lhs, str) else lhs
    re_ = get_expression(rhs) if isinstance(rhs, str) else rhs
    d = high_precision_eval(Expr("diff", lambda a, b, xp: le(a, b, xp) - re_(a, b, xp)), p, digits)
    floor = 10.0 ** (10 - digits)
    if not abs(d) > floor:
        return None
    again = high_precision_eval(Expr("diff", lambda a, b, xp: le(a, b, xp) - re_(a, b, xp)), p, digits + 10)
    witness = tuple(v if isinstance(v, str) else float(v) for v in p)
    return ScanCertificate(le.name, re_.name, witness, float(d), mpmath.nstr(d, 20), int(digits),
                           "lhs_greater" if d > 0 else "rhs_greater", bool((again > 0) == (d > 0)))


@dataclass(frozen=True)
class Reproduction:
    label: str
    lhs: str
    rhs: str
    pair: tuple
    claimed: str
    anchors: tuple                 # printed decimal bounds, as (lhs_bound, rhs_bound) or (gap,)
    lhs_value: str
    rhs_value: str
    difference: str
    digits: int
    certificate: ScanCertificate | None
    reproduced: bool


_WITNESSES = (
    # label, lhs, rhs, pair, claimed direction, (bound on lhs, bound on rhs) or (gap,), digits
    ("JId<G", "JId", "G", ("0.5", "1"), "rhs_greater", ("0.6971", "0.7071"), 30),
    ("JId>G", "JId", "G", ("0.5", "0.2"), "lhs_greater", ("0.31962", "0.31623"), 30),
    ("L0>G", "L0", "G", ("0.1", "0.2"), "lhs_greater", ("0.14516", "0.14143"), 30),
    ("L0<H", "L0", "H", ("4.1754412", "4.175399"), "rhs_greater", ("-1e-9",), 30),
    ("N0>G", "N0", "G", ("0.5", "0.2"), "lhs_greater", ("0.34713", "0.31623"), 30),
    ("N0<H", "N0", "H", ("4.1", "4.100000001"), "rhs_greater", ("-1e-19",), 40),
)
HIGH_PRECISION_WITNESSES = ("L0<H", "N0<H")


def reproduce_incomparability() -> list[Reproduction]:
    """Re-evaluate the six incomparability witnesses and their printed anchors.

    A reproduction succeeds when the certified sign matches the claim and
    the printed decimals separate the two sides (or, for the
    difference-type witnesses, the difference is beyond the printed gap).
    """
    if mpmath is None:
        raise PrecisionUnavailable("mpmath is required for the witnesses "
                                   + " and ".join(HIGH_PRECISION_WITNESSES))
    out = []
    for label, lhs, rhs, pair, claimed, anchors, digits in _WITNESSES:
        lv = high_precision_eval(lhs, pair, digits)
        rv = high_precision_eval(rhs, pair, digits)
        ctx = hp_context(digits)
        diff = ctx.mpf(lv) - ctx.mpf(rv)
        cert = certify(lhs, rhs, pair, digits)
        if len(anchors) == 2:
            lb, rb = (ctx.mpf(x) for x in anchors)
            if claimed == "lhs_greater":
                anchored = lv > lb > rb > rv
            else:
                anchored = lv < lb < rb < rv
        else:
            gap = ctx.mpf(anchors[0])
            anchored = diff < gap if claimed == "rhs_greater" else diff > gap
        ok = bool(anchored and cert is not None and cert.direction == claimed and cert.confirmed)
        out.append(Reproduction(label, lhs, rhs, pair, claimed, anchors, mpmath.nstr(lv, 15),
                                mpmath.nstr(rv, 15), mpmath.nstr(diff, 15), digits, cert, ok))
    return out


# ---------------------------------------------------------------- scans ---

@dataclass
class ScanResult:
    lhs: str
    rhs: str
    region: tuple
    direction: str
    certificates: list = field(default_factory=list)
    evaluations: int = 0
    candidates: dict = field(default_factory=dict)
    one_sided: list = field(default_factory=list)   # "both" scans that certified a single sign

    @property
    def found(self) -> bool:
        wanted = {"both": {"lhs_greater", "rhs_greater"}}.get(self.direction, {self.direction})
        return wanted <= {c.direction for c in self.certificates}

    def as_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "region": list(map(list, self.region)),
                "direction": self.direction, "found": self.found, "evaluations": self.evaluations,
                "certificates": [c.as_dict() for c in self.certificates],
                "one_sided": [c.as_dict() for c in self.one_sided]}

    def _settle(self):
        """Order certificates; a "both" scan with one sign only is no sign change."""
        pool = sorted(self.certificates + self.one_sided, key=lambda c: (c.direction, c.witness))
        if self.direction == "both" and len({c.direction for c in pool}) < 2:
            self.certificates, self.one_sided = [], pool
        else:
            self.certificates, self.one_sided = pool, []
        return self


_GOLD = (math.sqrt(5) - 1) / 2
_DIAG_OFFSETS = (1e-2, 1e-4, 1e-6)
_HP_OFFSETS = (1e-7,)


def _axis(lo, hi, n):
    if lo > 0 and hi / lo > 20:
        edges = np.geomspace(lo, hi, n + 1)
        return np.sqrt(edges[:-1] * edges[1:])
    return lo + (np.arange(n) + 0.5) * (hi - lo) / n


def _score(diff, a, b):
    # gaps vanish quadratically at the diagonal: normalise by (a-b)^2 / A
    with np.errstate(divide="ignore", invalid="ignore"):
        return diff / ((a - b) ** 2 / ((a + b) / 2))


def scan_counterexample(lhs, rhs, region, *, direction: str = "both", budget: int = 20_000,
                        prec: PrecisionConfig = PrecisionConfig(), max_certify: int = 8,
                        jobs: int = 1) -> ScanResult:
    """Search ``region = ((a_lo, a_hi), (b_lo, b_hi))`` for signs of ``lhs - rhs``.

    A cell-centred grid (log-spaced on wide ranges) is combined with lines
    just off the diagonal.  The lines at relative offset ``1e-7`` are
    evaluated directly at ``prec`` digits, since double precision cannot
    resolve differences there.  The best candidate of each wanted sign is
    refined by golden-section search along its diagonal-parallel line and
    then certified at ``prec`` digits (and confirmed at ``prec + 10``).
    ``direction`` is ``"lhs_greater"``, ``"rhs_greater"`` or ``"both"``;
    under ``"both"`` the scan succeeds only if both signs are certified.

    With ``jobs > 1`` the ``a``-range is cut into strips scanned in separate
    processes; per direction the certificate of the lowest strip is kept, so
    the merged result does not depend on scheduling.
    """
    if jobs > 1:
        return _scan_parallel(lhs, rhs, region, direction, budget, prec, max_certify, jobs)
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if direction not in ("both", "lhs_greater", "rhs_greater"):
        raise ValueError("direction must be 'both', 'lhs_greater' or 'rhs_greater'")
    le, re_ = get_expression(lhs), get_expression(rhs)
    (alo, ahi), (blo, bhi) = region
    if not (0 <= alo < ahi and 0 <= blo < bhi):
        raise ValueError("region must be a non-empty box in the closed positive quadrant")
    result = ScanResult(le.name, re_.name, ((alo, ahi), (blo, bhi)), direction)
    wanted = ["lhs_greater", "rhs_greater"] if direction == "both" else [direction]

    def diff(a, b):
        with np.errstate(all="ignore"):
            return np.asarray(le(a, b), dtype=float) - np.asarray(re_(a, b), dtype=float)

    grid_budget = max(1, int(0.6 * budget))
    n = max(1, int(math.isqrt(grid_budget)))
    xa, xb = _axis(alo, ahi, n), _axis(blo, bhi, n)
    A, B = (v.ravel() for v in np.meshgrid(xa, xb, indexing="ij"))
    pts_a, pts_b = [A], [B]
    # near-diagonal lines inside the region
    lo_c, hi_c = max(alo, blo), min(ahi, bhi)
    n_line = max(1, int(0.3 * budget) // (2 * len(_DIAG_OFFSETS))) if lo_c < hi_c else 0
    if n_line:
        base = _axis(lo_c, hi_c, n_line)
        for eps in _DIAG_OFFSETS:
            for sgn in (1, -1):
                pts_a.append(base)
                pts_b.append(base * (1 + sgn * eps))
    pa, pb = np.concatenate(pts_a), np.concatenate(pts_b)
    inside = (pa > alo) & (pa < ahi) & (pb > blo) & (pb < bhi) & (pa != pb)
    pa, pb = pa[inside], pb[inside]
    d = diff(pa, pb)
    result.evaluations += int(pa.size)
    near = np.abs(pa - pb) < 1e-6 * (pa + pb) / 2
    ok = np.isfinite(d)
    # scores are only trusted where double precision resolves the difference
    noise = 1e3 * np.finfo(float).eps * np.maximum(np.abs(np.asarray(le(pa, pb), dtype=float)), 1.0)
    reliable = ok & ~near & (np.abs(d) > noise)
    s = _score(d, pa, pb)
    candidates: dict[str, list] = {w: [] for w in wanted}
    for w in wanted:
        sign = 1 if w == "lhs_greater" else -1
        mask = reliable & (sign * d > 0)
        if mask.any():
            idx = np.flatnonzero(mask)
            order = idx[np.argsort(-(sign * s[idx]))][:max_certify]
            candidates[w] += [(float(pa[i]), float(pb[i])) for i in order]
    # high-precision near-diagonal lines
    hp_points = max(0, int(0.1 * budget) // 2)
    if hp_points and n_line:
        ctx = hp_context(prec.decimal_digits)
        base = _axis(lo_c, hi_c, min(hp_points, 64))
        hp_best = {w: (0, None) for w in wanted}
        for eps in _HP_OFFSETS:
            for x in base:
                y = x * (1 + eps)
                if not (blo < y < bhi):
                    continue
                xa_, ya_ = ctx.mpf(float(x)), ctx.mpf(float(y))
                dv = le(xa_, ya_, ctx) - re_(xa_, ya_, ctx)
                result.evaluations += 1
                sc = float(dv / ((xa_ - ya_) ** 2 / ((xa_ + ya_) / 2)))
                for w in wanted:
                    sign = 1 if w == "lhs_greater" else -1
                    if sign * sc > hp_best[w][0]:
                        hp_best[w] = (sign * sc, (float(x), float(y)))
        for w in wanted:
            if hp_best[w][1] is not None:
                candidates[w].append(hp_best[w][1])
    # refine and certify
    for w in wanted:
        sign = 1 if w == "lhs_greater" else -1
        for cand in candidates[w]:
            refined, used = _refine(diff, cand, sign, (alo, ahi, blo, bhi), budget // 50 + 10)
            result.evaluations += used
            for p in (refined, cand):
                cert = certify(le, re_, p, prec.decimal_digits)
                if cert is not None and cert.direction == w and cert.confirmed:
                    result.certificates.append(cert)
                    break
            else:
                continue
            break
        result.candidates[w] = candidates[w][:3]
    return result._settle()


def _scan_parallel(lhs, rhs, region, direction, budget, prec, max_certify, jobs):
    from concurrent.futures import ProcessPoolExecutor

    if not (isinstance(lhs, str) and isinstance(rhs, str)):
        raise TypeError("parallel scans take expression ids")
    get_expression(lhs), get_expression(rhs)
    (alo, ahi), b_rng = region
    edges = np.linspace(alo, ahi, jobs + 1)
    strips = [((float(edges[i]), float(edges[i + 1])), tuple(b_rng)) for i in range(jobs)]
    share = max(1, budget // jobs)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_scan_strip, [(lhs, rhs, st, direction, share, prec, max_certify)
                                            for st in strips]))
    merged = ScanResult(parts[0].lhs, parts[0].rhs, ((alo, ahi), tuple(b_rng)), direction)
    # strips are in a-order; per direction the first certificate wins
    for part in parts:
        merged.evaluations += part.evaluations
        for cert in part.certificates + part.one_sided:
            if cert.direction not in {c.direction for c in merged.certificates}:
                merged.certificates.append(cert)
    return merged._settle()


def _scan_strip(args):
    lhs, rhs, region, direction, budget, prec, max_certify = args
    return scan_counterexample(lhs, rhs, region, direction=direction, budget=budget,
                               prec=prec, max_certify=max_certify)


def _refine(diff, p, sign, box, evals):
    """Golden-section search of ``sign * score`` along ``(a + t, b + t)``."""
    a, b = p
    alo, ahi, blo, bhi = box
    t_lo = max(alo - a, blo - b)
    t_hi = min(ahi - a, bhi - b)
    width = (t_hi - t_lo) * (1 - 1e-9)
    if not width > 0 or evals < 4:
        return p, 0
    t_lo += (t_hi - t_lo) * 5e-10

    def f(t):
        x, y = a + t, b + t
        if not (x > 0 and y > 0):
            return -math.inf
        v = float(diff(np.array([x]), np.array([y]))[0])
        return sign * float(_score(v, x, y)) if math.isfinite(v) else -math.inf

    lo, hi = t_lo, t_lo + width
    c, e = hi - _GOLD * (hi - lo), lo + _GOLD * (hi - lo)
    fc, fe = f(c), f(e)
    used = 2
    while used < evals:
        if fc > fe:
            hi, e, fe = e, c, fc
            c = hi - _GOLD * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, e, fe
            e = lo + _GOLD * (hi - lo)
            fe = f(e)
        used += 1
    t = c if fc > fe else e
    best = max(fc, fe)
    if best <= 0 or not math.isfinite(best):
        return p, used
    return (a + t, b + t), used


# --------------------------------------------------------------- gamma ---

@dataclass(frozen=True)
class GammaSandwich:
    left: float
    middle: float
    right: float
    holds: bool
    gamma_34: str
    gamma_anchor_ok: bool
    route_values: tuple            # A(3,4), S_G(3,4), S_H(3,4)
    route_holds: bool
    route_margin: float            # A(3,4) - S_G(3,4)
    digits: int


def gamma_sandwich_check(prec: PrecisionConfig = PrecisionConfig()) -> GammaSandwich:
    """``7/12 > Gamma(3/4)^2 / sqrt(3 pi) > (140 - 48 ln 6)/125``, two ways."""
    digits = prec.decimal_digits
    ctx = hp_context(digits)
    g34, _ = gamma_stirling(ctx.mpf(3) / 4, ctx)
    left = ctx.mpf(7) / 12
    middle = g34 ** 2 / ctx.sqrt(3 * ctx.pi)
    right = (140 - 48 * ctx.log(6)) / 125
    anchor_ok = mpmath.nstr(g34, 10) == GAMMA_34_ANCHOR and abs(gamma_lanczos(0.75) - float(g34)) < 1e-14
    a, b = ctx.mpf(3), ctx.mpf(4)
    route = (ctx.mpf(7) / 2, tr.s_mean("G", (a, b), xp=ctx), tr.s_mean("H", (a, b), xp=ctx))
    return GammaSandwich(float(left), float(middle), float(right), bool(left > middle > right),
                         mpmath.nstr(g34, digits), bool(anchor_ok),
                         tuple(float(v) for v in route), bool(route[0] > route[1] > route[2]),
                         float(route[0] - route[1]), digits)


# -------------------------------------------------------------- chains ---

def _links_classical():
    return chain_links([_mean_expr(mm.MEANS[k]) for k in mm.CLASSICAL_ORDER])


def _links_s():
    names = ["SC", "SGrav", "A", "SG", "SH"]
    return chain_links([EXPRESSIONS[k] for k in names])


CHAINS = {
    "classical": _links_classical,
    "integral": im.integral_chain_links,
    "S": _links_s,
    "T": tr.t_chain_links,
}


def verify_chain(chain: str, sampler: mm.PairSampler | None = None, n: int = 10_000, *,
                 pairs=None) -> ChainReport:
    """Check a built-in chain on ``n`` sampled pairs (or on explicit ``pairs``)."""
    try:
        links = CHAINS[chain]()
    except KeyError:
        raise KeyError(f"unknown chain {chain!r}; built-in: {', '.join(CHAINS)}") from None
    if pairs is not None:
        a, b = (np.asarray(v, dtype=float) for v in pairs)
        seed = None
    else:
        if n < 1:
            raise ValueError("n must be at least 1")
        sampler = sampler or mm.PairSampler()
        a, b = sampler.pairs(n)
        seed = sampler.seed
    report = check_links(chain, links, a, b, seed=seed)
    if chain == "T":
        k = min(a.size, 200)
        report.identities = tr.t_identity_residuals(a[:k], b[:k])
        report.identity_tol = 1e-12
    return report


@dataclass(frozen=True)
class BoundCheck:
    name: str
    lower: float
    upper: float
    min_ratio: float
    max_ratio: float
    all_inside: bool
    samples: int


def verify_bounds(sampler: mm.PairSampler | None = None, n: int = 10_000) -> list[BoundCheck]:
    """All twelve ratio windows on ``n`` sampled off-diagonal pairs."""
    sampler = sampler or mm.PairSampler(min_rel_gap=1e-6)
    a, b = sampler.pairs(n)
    keep = a != b
    a, b = a[keep], b[keep]
    out = []
    for name, spec in im.BOUNDS.items():
        ratio, inside = im.bound_ratio(spec, (a, b))
        out.append(BoundCheck(name, float(spec.lower()), float(spec.upper()), float(np.min(ratio)),
                              float(np.max(ratio)), bool(np.all(inside)), int(a.size)))
    return out
