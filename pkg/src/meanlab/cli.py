"""``meanlab`` command line.

Commands: ``eval``, ``verify``, ``table`` and ``scan``.  Every command can
render as an aligned table, CSV (17 significant digits) or JSON.  JSON
output has the shape::

    {"meta": {"version", "command", "seed", "tolerances", "precision_digits"},
     "results": [...]}

and contains no timestamps, so identical invocations give identical bytes.

Option values come from the command line first, then from a ``--config``
file of ``key = value`` lines (keys are flag names without dashes), then
from the environment (``MEANLAB_DIGITS`` for the precision), then from the
built-in defaults.

Exit codes: 0 success, 1 scan found nothing, 2 usage, 3 capability
missing, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from dataclasses import asdict, is_dataclass

import numpy as np

from . import __version__
from . import integral_means as im
from . import lab
from . import means as mm
from . import transforms as tr
from ._backend import MAX_DIGITS, PrecisionUnavailable
from .quadrature import QuadratureError, Tolerance

EXIT_OK, EXIT_NOT_FOUND, EXIT_USAGE, EXIT_CAPABILITY, EXIT_IO = 0, 1, 2, 3, 4

DEFAULTS = {
    "format": "table", "output": None, "seed": 0, "samples": 10_000, "precision": 50,
    "atol": 1e-10, "rtol": 1e-10, "budget": 20_000, "direction": "both", "jobs": 1,
}
SUITES = ("classical", "integral", "bounds", "transforms", "incomparability", "gamma")
FAMILIES = {
    "classical": list(mm.CLASSICAL_ORDER),
    "I": [e.name for e in im.I_CHAIN],
    "J": [e.name for e in im.J_CHAIN],
    "S": ["SC", "SGrav", "A", "SG", "SH"],
}
_DECIMAL = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


class UsageError(Exception):
    pass


class OutputError(Exception):
    pass


# ------------------------------------------------------------- parsing ---

def parse_number(text: str) -> str:
    text = text.strip()
    if not _DECIMAL.match(text):
        raise UsageError(f"not a decimal literal: {text!r}")
    return text


def parse_pair(text: str) -> tuple[str, str]:
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError(f"--pair expects a,b; got {text!r}")
    a, b = (parse_number(t) for t in parts)
    if not (float(a) > 0 and float(b) > 0) or not all(math.isfinite(float(v)) for v in (a, b)):
        raise UsageError(f"pair coordinates must be finite and positive: {text!r}")
    return a, b


def parse_range(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise UsageError(f"range expects lo:hi; got {text!r}")
    lo, hi = (float(parse_number(t)) for t in parts)
    if not (0 <= lo < hi) or not math.isfinite(hi):
        raise UsageError(f"range needs 0 <= lo < hi: {text!r}")
    return lo, hi


def parse_region(text: str):
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError(f"--region expects alo:ahi,blo:bhi; got {text!r}")
    return tuple(parse_range(p) for p in parts)


def read_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise OutputError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _common(p: argparse.ArgumentParser):
    p.add_argument("--format", choices=("table", "csv", "json"), default=None)
    p.add_argument("--output", default=None, help="write to this file instead of stdout")
    p.add_argument("--config", default=None, help="key = value file mirroring the flags")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--precision", type=int, default=None, help="decimal digits for high precision")
    p.add_argument("--atol", type=float, default=None)
    p.add_argument("--rtol", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meanlab", description="Bivariate means, integral means "
                                     "and mean transforms, with an inequality laboratory.")
    parser.add_argument("--version", action="version", version=f"meanlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("eval", help="evaluate one mean at one pair")
    _common(ev)
    what = ev.add_mutually_exclusive_group(required=True)
    what.add_argument("--mean", help="classical mean, e.g. C")
    what.add_argument("--imean", help="integral mean I_M of a registered mean")
    what.add_argument("--jmean", help="J_M = 3 I_M - 2A")
    what.add_argument("--smean", help="trigonometric transform S_M")
    what.add_argument("--shat", help="the integral over (0, pi/2) of M(a sin t, b cos t)")
    what.add_argument("--tmean", help="T_{M1,M2} given as M1,M2")
    what.add_argument("--stransform", help="S transform of M with --phi/--psi")
    what.add_argument("--ptransform", help="P transform of M with --phi/--psi")
    what.add_argument("--expr", help="any registered expression id (N0, L0, JId, N0.5, ...)")
    ev.add_argument("--phi", default="Id")
    ev.add_argument("--psi", default="Id")
    ev.add_argument("--pair", required=True)

    ve = sub.add_parser("verify", help="run a verification suite")
    _common(ve)
    ve.add_argument("suite", choices=SUITES)
    ve.add_argument("--samples", type=int, default=None)
    ve.add_argument("--target", default=None, help="bound name for a tightness sweep, e.g. IG")
    ve.add_argument("--sweep", default=None, help="ratio range lo:hi for the sweep")

    ta = sub.add_parser("table", help="grid of values")
    _common(ta)
    ta.add_argument("--kinds", default=None,
                    help="comma list of expression ids or a family: classical, I, J, S")
    ta.add_argument("--values", default=None, help="comma list of coordinates; grid is its square")
    ta.add_argument("--region", default=None)
    ta.add_argument("--steps", type=int, default=5)
    ta.add_argument("--off-diagonal", action="store_true")

    sc = sub.add_parser("scan", help="search for sign changes of lhs - rhs")
    _common(sc)
    sc.add_argument("--lhs", required=True)
    sc.add_argument("--rhs", required=True)
    sc.add_argument("--region", required=True)
    sc.add_argument("--direction", choices=("both", "lhs_greater", "rhs_greater"), default=None)
    sc.add_argument("--budget", type=int, default=None)
    sc.add_argument("--jobs", type=int, default=None)
    return parser


def _settle(args) -> argparse.Namespace:
    """Fill unset options from config file, environment and defaults."""
    conf = read_config(args.config) if args.config else {}
    env_digits = os.environ.get("MEANLAB_DIGITS")
    for key, default in DEFAULTS.items():
        if not hasattr(args, key) or getattr(args, key) is not None:
            continue
        if key in conf:
            raw = conf[key]
            if isinstance(default, int):
                value = int(float(raw))
            elif default is None:
                value = raw
            else:
                value = type(default)(raw)
        elif key == "precision" and env_digits:
            value = int(env_digits)
        else:
            value = default
        setattr(args, key, value)
    for key, raw in conf.items():
        if key not in DEFAULTS and hasattr(args, key) and getattr(args, key) in (None, False):
            setattr(args, key, raw)
    if not 15 <= args.precision <= MAX_DIGITS:
        raise UsageError(f"precision must be in [15, {MAX_DIGITS}]")
    if getattr(args, "samples", 1) < 1:
        raise UsageError("samples must be at least 1")
    if args.format not in ("table", "csv", "json"):
        raise UsageError(f"unknown format {args.format!r}")
    return args


# ----------------------------------------------------------- rendering ---

def _plain(obj):
    if is_dataclass(obj):
        return _plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if hasattr(obj, "_mpf_"):
        return str(obj)
    return obj


def _cell(v, digits17: bool = True) -> str:
    if isinstance(v, float):
        return "%.17g" % v if digits17 else repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(_cell(x, digits17) for x in v)
    return "" if v is None else str(v)


def render(args, command: str, rows: list[dict], summary: list[str] | None = None) -> str:
    if args.format == "json":
        meta = {"version": __version__, "command": command, "seed": args.seed,
                "tolerances": {"abs": args.atol, "rel": args.rtol},
                "precision_digits": args.precision}
        return json.dumps({"meta": meta, "results": _plain(rows)}, indent=2, sort_keys=True) + "\n"
    flat = [{k: _cell(v, args.format == "csv") for k, v in _plain(r).items() if not isinstance(v, dict)}
            for r in rows]
    cols = list(dict.fromkeys(k for r in flat for k in r))
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(flat)
        return buf.getvalue()
    lines = list(summary or [])
    if flat:
        width = {c: max(len(c), *(len(r.get(c, "")) for r in flat)) for c in cols}
        lines.append("  ".join(c.ljust(width[c]) for c in cols))
        lines += ["  ".join(r.get(c, "").ljust(width[c]) for c in cols) for r in flat]
    return "\n".join(lines) + "\n"


def emit(args, text: str):
    if args.output:
        try:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise OutputError(f"cannot write {args.output}: {exc}") from exc
    else:
        sys.stdout.write(text)


# ------------------------------------------------------------ commands ---

def _tol(args) -> Tolerance:
    return Tolerance(args.atol, args.rtol)


def _lookup(kind: str, fn):
    try:
        return fn(kind)
    except KeyError as exc:
        raise UsageError(str(exc.args[0]) if exc.args else str(exc)) from None


def cmd_eval(args) -> int:
    a_txt, b_txt = parse_pair(args.pair)
    p = (float(a_txt), float(b_txt))
    tol = _tol(args)
    err = None
    if args.mean:
        m = _lookup(args.mean, mm.get_mean)
        name, value = m.name, m(*p)
    elif args.imean or args.jmean:
        m = _lookup(args.imean or args.jmean, mm.get_mean)
        res = im.integral_mean(m, p, tol, full_output=True)
        value, err = res.value, res.error_bound
        name = "I" + m.name
        if args.jmean:
            name, value, err = "J" + m.name, 3 * value - (p[0] + p[1]), 3 * err
    elif args.smean:
        m = _lookup(args.smean, mm.get_mean)
        name, value = "S" + m.name, tr.s_mean(m, p, tol)
    elif args.shat:
        m = _lookup(args.shat, mm.get_mean)
        name, value = "Shat_" + m.name, tr.s_hat(m, p, tol)
    elif args.tmean:
        names = args.tmean.split(",")
        if len(names) != 2:
            raise UsageError("--tmean expects M1,M2")
        m1, m2 = (_lookup(n, mm.get_mean) for n in names)
        name, value = f"T_{m1.name},{m2.name}", tr.t_mean(m1, m2, p, tol)
    elif args.stransform or args.ptransform:
        m = _lookup(args.stransform or args.ptransform, mm.get_mean)
        w = tr.WeightPair(_lookup(args.phi, tr.get_phi), _lookup(args.psi, tr.get_psi))
        f = tr.s_transform if args.stransform else tr.p_transform
        name = f"{'S' if args.stransform else 'P'}_{m.name}[{w.phi.name},{w.psi.name}]"
        value = f(m, w, p, tol)
    else:
        e = _lookup(args.expr, lab.get_expression)
        name, value = e.name, e(*p)
    row = {"name": name, "a": p[0], "b": p[1], "value": float(value)}
    if err is not None:
        row["error_bound"] = float(err)
    if args.expr:
        row["value_hp"] = str(lab.high_precision_eval(args.expr, (a_txt, b_txt), args.precision))
    emit(args, render(args, "eval", [row]))
    return EXIT_OK


def _sweep_ratios(text: str | None):
    lo, hi = parse_range(text or "10:1e6")
    if lo <= 1:
        raise UsageError("sweep ratios must exceed 1")
    decades = max(1, int(math.ceil(math.log10(hi / lo))))
    return [float(v) for v in np.geomspace(lo, hi, 2 * decades + 1)]


def cmd_verify(args) -> int:
    suite = args.suite
    rows: list[dict] = []
    summary: list[str] = []
    ok = True
    sampler = mm.PairSampler(seed=args.seed, min_rel_gap=1e-6)
    if suite in ("classical", "integral"):
        rep = lab.verify_chain(suite, sampler, args.samples)
        rows.append(rep.as_dict())
        ok = rep.ok
        summary.append(f"{suite}: {rep.samples_checked} pairs, {len(rep.violations)} violations")
    elif suite == "transforms":
        for chain in ("S", "T"):
            rep = lab.verify_chain(chain, sampler, args.samples)
            rows.append(rep.as_dict())
            ok &= rep.ok
            summary.append(f"{chain}: {rep.samples_checked} pairs, {len(rep.violations)} violations")
    elif suite == "bounds":
        targets = [args.target] if args.target else []
        for chk in lab.verify_bounds(sampler, args.samples):
            if args.target and chk.name != im.get_bound(args.target).name:
                continue
            rows.append({"kind": "window", **asdict(chk)})
            ok &= chk.all_inside
        for t in targets or ([] if args.sweep is None else list(im.BOUNDS)):
            spec = _lookup(t, im.get_bound)
            sw = im.bound_tightness_scan(spec, _sweep_ratios(args.sweep))
            rows.append({"kind": "sweep", **asdict(sw)})
            ok &= sw.all_inside
            summary.append(f"{sw.target}: ratio/A -> {sw.limit_constant:.12g} ({sw.limit_side}); "
                           f"distance {sw.distance_to_limit:.3g} at b/a = {max(sw.ratios):g}; "
                           f"{'monotone' if sw.monotone else 'not monotone'}")
        summary.append(f"bounds: {'all windows hold' if ok else 'violations found'}")
    elif suite == "incomparability":
        reps = lab.reproduce_incomparability()
        for r in reps:
            rows.append(asdict(r))
            ok &= r.reproduced
            summary.append(f"{r.label}: difference {r.difference} at {r.digits} digits, "
                           f"{'reproduced' if r.reproduced else 'NOT reproduced'}")
    else:
        g = lab.gamma_sandwich_check(lab.PrecisionConfig(args.precision))
        rows.append(asdict(g))
        ok = g.holds and g.route_holds and g.gamma_anchor_ok
        summary.append(f"{g.left:.12g} > {g.middle:.12g} > {g.right:.12g}: "
                       f"{'holds' if g.holds else 'fails'}")
    if args.format == "table" and not args.output:
        sys.stdout.write("\n".join(summary) + "\n")
    else:
        emit(args, render(args, f"verify {suite}", rows))
        if args.format == "table":
            sys.stdout.write("\n".join(summary) + "\n")
    return EXIT_OK if ok else EXIT_NOT_FOUND


def _table_kinds(text) -> list[str]:
    items = [k.strip() for k in (text or "").split(",") if k.strip()]
    if not items:
        raise UsageError("empty kind list")
    out = []
    for k in items:
        out += FAMILIES.get(k, [k])
    for k in out:
        _lookup(k, lab.get_expression)
    return out


def cmd_table(args) -> int:
    kinds = _table_kinds(args.kinds)
    if args.values:
        coords = sorted({float(parse_number(v)) for v in args.values.split(",")})
        if any(v <= 0 for v in coords):
            raise UsageError("coordinates must be positive")
        grid = [(x, y) for x in coords for y in coords]
    elif args.region:
        (alo, ahi), (blo, bhi) = parse_region(args.region)
        if alo <= 0 or blo <= 0:
            raise UsageError("table regions must be strictly positive")
        n = max(1, args.steps)
        grid = sorted((float(x), float(y)) for x in np.linspace(alo, ahi, n) for y in np.linspace(blo, bhi, n))
    else:
        raise UsageError("table needs --values or --region")
    if args.off_diagonal:
        grid = [q for q in grid if q[0] != q[1]]
    family = next((f for f in FAMILIES if FAMILIES[f] == kinds), None)
    a = np.array([q[0] for q in grid])
    b = np.array([q[1] for q in grid])
    cols = {k: np.broadcast_to(np.asarray(lab.get_expression(k)(a, b), dtype=float), a.shape) for k in kinds}
    rows = []
    for i, (x, y) in enumerate(grid):
        row = {"a": x, "b": y, **{k: float(cols[k][i]) for k in kinds}}
        if family:
            vals = [row[k] for k in kinds]
            if x == y:
                row["ordered"] = all(abs(v - x) <= 1e-12 * max(1.0, x) for v in vals)
            else:
                row["ordered"] = all(u > v for u, v in zip(vals, vals[1:]))
        rows.append(row)
    emit(args, render(args, "table", rows))
    return EXIT_OK


def cmd_scan(args) -> int:
    region = parse_region(args.region)
    for e in (args.lhs, args.rhs):
        _lookup(e, lab.get_expression)
    if args.budget < 1:
        raise UsageError("budget must be at least 1")
    res = lab.scan_counterexample(args.lhs, args.rhs, region, direction=args.direction,
                                  budget=args.budget, prec=lab.PrecisionConfig(args.precision),
                                  jobs=max(1, args.jobs))
    rows = [c.as_dict() for c in res.certificates] if res.found else []
    summary = [f"scan {res.lhs} vs {res.rhs} ({res.direction}): "
               + (f"{len(rows)} certificate(s)" if res.found else "none found within budget")
               + f", {res.evaluations} evaluations"]
    if args.format == "table" and not args.output:
        sys.stdout.write(render(args, "scan", rows, summary))
    else:
        emit(args, render(args, "scan", rows, summary))
    return EXIT_OK if res.found else EXIT_NOT_FOUND


COMMANDS = {"eval": cmd_eval, "verify": cmd_verify, "table": cmd_table, "scan": cmd_scan}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args = _settle(args)
        return COMMANDS[args.command](args)
    except (UsageError, ValueError) as exc:
        print(f"meanlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PrecisionUnavailable as exc:
        print(f"meanlab: capability missing: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except OutputError as exc:
        print(f"meanlab: {exc}", file=sys.stderr)
        return EXIT_IO
    except QuadratureError as exc:
        print(f"meanlab: quadrature failed: {exc}", file=sys.stderr)
        return EXIT_NOT_FOUND


if __name__ == "__main__":
    sys.exit(main())
