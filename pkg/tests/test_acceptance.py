"""Acceptance gate: one test per numbered criterion.

Each test carries ``@pytest.mark.criterion(n)``; the terminal summary
prints a PASS/FAIL line per criterion.
"""
import math
import subprocess
import sys
import time

import mpmath
import numpy as np
import pytest
from scipy import integrate as sp_integrate

from meanlab import integral_means as im
from meanlab import lab
from meanlab import means as mm
from meanlab import transforms as tr

SEED = 42
GRID = (0.1, 0.5, 1, 2, 5, 10)
OFF_DIAGONAL = [(a, b) for a in GRID for b in GRID if a != b]
LN2 = math.log(2)
SQ2L = math.sqrt(2) * math.log(1 + math.sqrt(2))

# limits as b/a -> infinity, written out independently of the library
LIMITS = {
    "IG": 8 / 9, "IH": 8 * (1 - LN2) / 3, "IC": 2 * (-1 + 4 * LN2) / 3,
    "IHn": 26 / 27, "IGrav": 4 * (1 + 2 * LN2) / 9, "IR": (2 + SQ2L) / 3,
    "JG": 2 / 3, "JH": 2 * (3 - 4 * LN2), "JC": 4 * (-1 + 2 * LN2),
    "JHn": 8 / 9, "JGrav": 2 * (-1 + 4 * LN2) / 3, "JR": SQ2L,
}


def sampled(n, seed, gap=1e-6):
    return mm.PairSampler(seed=seed, min_rel_gap=gap).pairs(n)


def betweenness_and_symmetry(run, a, b):
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    v, swapped = run(a, b), run(b, a)
    slack = 4e-16 * hi
    return bool(np.all((lo - slack <= v) & (v <= hi + slack)) and np.allclose(v, swapped, rtol=1e-12, atol=0))


@pytest.mark.criterion(1)
def test_classical_chain():
    start = time.perf_counter()
    rep = lab.verify_chain("classical", mm.PairSampler(seed=SEED, min_rel_gap=1e-6), 100_000)
    elapsed = time.perf_counter() - start
    assert rep.samples_checked == 100_000 and not rep.violations
    # second route: the textbook formulas, straight from numpy
    a, b = sampled(100_000, SEED)
    s = a + b
    vals = [np.maximum(a, b), (a * a + b * b) / s, np.sqrt((a * a + b * b) / 2),
            2 * (a * a + a * b + b * b) / (3 * s), s / 2, (s + np.sqrt(a * b)) / 3,
            np.sqrt(a * b), 2 * a * b / s, np.minimum(a, b)]
    assert all(np.all(hi > lo) for hi, lo in zip(vals, vals[1:]))
    assert elapsed < 5, elapsed


@pytest.mark.criterion(2)
def test_oracle_equivalence():
    start = time.perf_counter()
    undocumented = []
    for kind in im.KINDS:
        for c in im.oracle_check(kind, OFF_DIAGONAL, rel=1e-8):
            if not c.agrees and not c.documented:
                undocumented.append((kind, c.pair, c.closed, c.cubature))
    assert len(im.KINDS) == 8
    assert not undocumented
    assert time.perf_counter() - start < 60


@pytest.mark.criterion(3)
def test_integral_chains_and_relations():
    rep = lab.verify_chain("integral", mm.PairSampler(seed=SEED), 10_000)
    assert rep.samples_checked == 10_000 and not rep.violations
    names = {(c.lhs, c.rhs) for c in rep.comparisons}
    for link in [("IC", "IR"), ("IHn", "IG"), ("JC", "JR"), ("JG", "JH"), ("JR", "IC"), ("IC", "A"),
                 ("A", "IG"), ("IG", "JG"), ("IC+IG", "2A"), ("2A", "IR+IH"), ("JC+JG", "2A"), ("2A", "JR+JH")]:
        assert link in names, link


@pytest.mark.criterion(4)
def test_ratio_windows_and_tightness():
    checks = lab.verify_bounds(mm.PairSampler(seed=SEED, min_rel_gap=1e-6), 10_000)
    assert len(checks) == 12 and all(c.all_inside for c in checks)
    for name, limit in LIMITS.items():
        rep = im.bound_tightness_scan(name, [10, 1e2, 1e3, 1e4, 1e5, 1e6])
        assert rep.limit_constant == pytest.approx(limit, rel=1e-14), name
        assert rep.all_inside and rep.monotone, name
        assert abs(rep.values[-1] - limit) < 1e-3, name


@pytest.mark.criterion(5)
def test_window_for_every_registered_mean():
    a, b = sampled(10_000, SEED, gap=0)
    keep = a != b
    a, b = a[keep], b[keep]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    A = (a + b) / 2
    slack = 4e-16 * hi       # rounding granularity; Min and Max sit on the sharper edges
    for name in mm.MEANS:
        v = im.integral_mean(name, (a, b))
        assert np.all((2 * A / 3 < v) & (v < 4 * A / 3)), name
        assert np.all(((2 * lo + hi) / 3 - slack <= v) & (v <= (lo + 2 * hi) / 3 + slack)), name


@pytest.mark.criterion(6)
def test_transform_axioms():
    a, b = sampled(10_000, SEED)
    for phi in ("Id", "t2", 1.0):
        for psi in ("Id", "half_t_minus_sin", "log_t2p1"):
            w = tr.WeightPair(phi, psi)
            for m in ("G", "H", "C"):
                assert betweenness_and_symmetry(lambda x, y: tr.s_transform(m, w, (x, y)), a, b), (phi, psi, m)
                assert betweenness_and_symmetry(lambda x, y: tr.p_transform(m, w, (x, y)), a, b), (phi, psi, m)
                fast = tr.p_transform(m, w, (a, b))
                slow = tr.p_transform(m, w, (a, b), use_homogeneity=False)
                assert np.max(np.abs(fast - slow)) <= 1e-10, (phi, psi, m)
            s_a = tr.s_transform("A", w, (a, b))
            assert np.max(np.abs(s_a - (a + b) / 2) / ((a + b) / 2)) <= 1e-12, (phi, psi)
    for m in ("A", "G", "H", "Grav", "C"):
        assert betweenness_and_symmetry(lambda x, y: tr.s_mean(m, (x, y)), a, b), m
    for m1 in ("A", "G", "H", "R"):
        for m2 in ("A", "G", "H"):
            assert betweenness_and_symmetry(lambda x, y: tr.t_mean(m1, m2, (x, y)), a, b), (m1, m2)
    s = np.hypot(a, b)
    for name in mm.CLASSICAL_ORDER:
        v = tr.s_hat(name, (a, b))
        assert np.all((a + b - s <= v + 1e-14 * s) & (v <= s * (1 + 1e-14))), name


@pytest.mark.criterion(7)
def test_t_closed_forms_and_identities():
    worst = 0.0
    for m1 in ("A", "G", "H", "R"):
        f = mm.MEANS[m1]
        for m2 in ("A", "G", "H"):
            for a, b in OFF_DIAGONAL:
                M = float(mm.MEANS[m2](a, b))
                lo, hi = min(a, b), max(a, b)
                ref, _ = sp_integrate.quad(lambda x: float(f(M, x)), lo, hi, epsabs=1e-14, epsrel=1e-13,
                                           limit=200, points=[M] if lo < M < hi else None)
                ref /= hi - lo
                closed = tr.t_mean(m1, m2, (a, b))
                own = tr.t_mean(m1, m2, (a, b), method="quadrature")
                worst = max(worst, abs(closed - ref) / max(1, ref), abs(closed - own) / max(1, ref))
    assert worst <= 1e-9
    a, b = sampled(200, SEED, gap=1e-3)
    res = tr.t_identity_residuals(a, b)
    assert len(res) == 15 and max(res.values()) <= 1e-12


@pytest.mark.criterion(8)
def test_i_phi_above_g():
    a, b = sampled(1000, SEED, gap=1e-6)
    assert np.all(a != b)
    g = mm.G(a, b)
    for phi in ("Id", "t2", 1.0):
        assert np.all(tr.i_phi_mean(phi, (a, b)) > g), phi


@pytest.mark.criterion(9)
def test_incomparability_reproduction():
    start = time.perf_counter()
    reps = {r.label: r for r in lab.reproduce_incomparability()}
    elapsed = time.perf_counter() - start
    assert len(reps) == 6
    failures = []
    for label in ("JId<G", "JId>G", "L0>G", "N0>G"):
        r = reps[label]
        lv, rv = mpmath.mpf(r.lhs_value), mpmath.mpf(r.rhs_value)
        lb, rb = (mpmath.mpf(x) for x in r.anchors)
        anchored = lv > lb > rb > rv if r.claimed == "lhs_greater" else lv < lb < rb < rv
        if not (anchored and r.certificate and r.certificate.direction == r.claimed):
            failures.append(label)
    l_gap = reps["L0<H"]
    if not (l_gap.digits >= 30 and mpmath.mpf(l_gap.difference) < mpmath.mpf("-1e-9")):
        failures.append(f"L0-H = {l_gap.difference} at {l_gap.pair}")
    n_gap = reps["N0<H"]
    if not (n_gap.digits >= 40 and mpmath.mpf(n_gap.difference) < mpmath.mpf("-1e-19")):
        failures.append(f"N0-H = {n_gap.difference} at {n_gap.pair}")
    assert elapsed < 10, elapsed
    assert not failures, failures


@pytest.mark.criterion(10)
def test_gamma_sandwich():
    g = lab.gamma_sandwich_check()
    with mpmath.workdps(30):
        left = mpmath.mpf(7) / 12
        middle = mpmath.gamma(mpmath.mpf(3) / 4) ** 2 / mpmath.sqrt(3 * mpmath.pi)
        right = (140 - 48 * mpmath.log(6)) / 125
        g34 = mpmath.gamma(mpmath.mpf(3) / 4)
    for ours, ref in ((g.left, left), (g.middle, middle), (g.right, right)):
        assert mpmath.nstr(mpmath.mpf(ours), 12) == mpmath.nstr(ref, 12)
    assert g.holds and left > middle > right
    assert g.route_holds and g.route_values[0] > g.route_values[1] > g.route_values[2]
    assert g.gamma_34[:11] == "1.225416702" == mpmath.nstr(g34, 10)


@pytest.mark.criterion(11)
def test_elliptic_sandwich():
    a, b = sampled(100, SEED, gap=1e-6)
    lo, mid, hi = tr.elliptic_arc_sandwich((a, b))
    assert np.all((lo < mid) & (mid < hi))
    # the arc is hi * E(1 - (lo/hi)^2) with E the complete elliptic integral
    for i in range(0, 100, 10):
        lo_i, hi_i = sorted((mpmath.mpf(a[i]), mpmath.mpf(b[i])))
        ref = float(hi_i * mpmath.ellipe(1 - (lo_i / hi_i) ** 2))
        assert mid[i] == pytest.approx(ref, rel=1e-10)


@pytest.mark.criterion(12)
def test_verify_classical_is_deterministic():
    cmd = [sys.executable, "-m", "meanlab", "verify", "classical", "--seed", "42", "--format", "json"]
    one = subprocess.run(cmd, capture_output=True, check=True).stdout
    two = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert one and one == two
