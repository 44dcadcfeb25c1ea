"""Two sandwiches that fall out of the trigonometric transform S_M."""
import math

from meanlab import lab
from meanlab import transforms as tr

g = lab.gamma_sandwich_check()
print(f"7/12                   = {g.left:.12f}")
print(f"Gamma(3/4)^2/sqrt(3pi) = {g.middle:.12f}")
print(f"(140 - 48 ln 6)/125    = {g.right:.12f}")
print(f"holds: {g.holds}; Gamma(3/4) = {g.gamma_34[:14]}")
print("A, S_G, S_H at (3, 4):", ", ".join(f"{v:.10f}" for v in g.route_values))

print("\nquarter ellipse arc between the S_g and S_C brackets")
for p in ((3, 4), (1, 10), (5, 5.001)):
    lo, mid, hi = tr.elliptic_arc_sandwich(p)
    print(f"  {p}: {lo:.9f} < {mid:.9f} < {hi:.9f}")
print(f"  circle check: 5*pi/2 = {5 * math.pi / 2:.9f}")
