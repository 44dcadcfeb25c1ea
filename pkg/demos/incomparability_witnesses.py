"""Incomparability witnesses, re-evaluated in arbitrary precision.

Four of them reproduce cleanly.  The two near-diagonal gaps against H come
out with the opposite sign at the printed pairs; a scan finds genuine
N0 < H pairs elsewhere.
"""
from meanlab import lab

for rep in lab.reproduce_incomparability():
    mark = "ok " if rep.reproduced else "NO "
    print(f"{mark} {rep.label:<6} at {rep.pair}: {rep.lhs} - {rep.rhs} = {rep.difference}  ({rep.digits} digits)")

print("\nscanning N0 against H on (2.5, 3.2)^2")
res = lab.scan_counterexample("N0", "H", ((2.5, 3.2), (2.5, 3.2)), direction="rhs_greater", budget=4000)
for cert in res.certificates:
    print(f"  N0 < H at {cert.witness}: difference {cert.difference:.3e} ({cert.precision_digits} digits)")
