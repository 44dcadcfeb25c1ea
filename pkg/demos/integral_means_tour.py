"""A short walk through integral means: closed forms, the cubature oracle,
the ordering they inherit, and how tight the ratio windows are."""
from meanlab import integral_means as im
from meanlab import means as mm

PAIR = (1.0, 4.0)

print("classical chain at", PAIR)
for name, value in mm.classical_chain(PAIR):
    print(f"  {name:>5}  {value:.12f}")

print("\nclosed form against adaptive cubature")
for kind in im.KINDS:
    check = im.oracle_check(kind, [PAIR])[0]
    print(f"  {kind:>8}  closed {check.closed:.15f}  cubature {check.cubature:.15f}  "
          f"err<= {check.error_bound:.1e}")

# near the diagonal the closed forms cancel badly; the series takes over
res = im.closed_form_integral_mean("IH", 3.0, 3.0 + 1e-9, full_output=True)
print(f"\nI_H(3, 3+1e-9) = {res.value!r} via {'series' if res.series else 'closed form'}")

print("\nratio I_G/A as b/a grows (limit 8/9)")
sweep = im.bound_tightness_scan("IG", [10, 1e2, 1e4, 1e6])
for t, v in zip(sweep.ratios, sweep.values):
    print(f"  b/a = {t:8.0e}  {v:.9f}")
print(f"  distance to the limit: {sweep.distance_to_limit:.2e}")
