"""
Designing the weak-control bounds
=================================

The Youla filter Q = nF / sum(G_i) fixes the nominal loop. The bounds gamma_i
then cap how far each consumer may drift from its nominal share v/n so that
the output norm stays within epsilon of the nominal one.
"""
import numpy as np

from weakctl import (GammaBounds, TransferFunction, build_youla, design_gamma, expand,
                     first_order_plants, unity_plants)

F = TransferFunction([1.0], [1.5, 1.0])
plants = first_order_plants([0.05, 0.0875, 0.125, 0.1625, 0.2])
youla = build_youla(plants, F)
print("Q numerator  ", np.round(youla.q.num, 6))
print("Q denominator", np.round(youla.q.den, 6))

###############################################################################
# Bounds grow linearly with the slack epsilon and shrink as the disturbance
# norm grows.

for eps in (0.5, 1.0, 2.0):
    for d_l2 in (10.0, 100.0):
        g = design_gamma(plants, youla.q, d_l2, eps)
        print(f"eps={eps:3.1f} ||d||={d_l2:5.0f}  gamma_max={g.max_gain():.4g}")

###############################################################################
# Unity plants give the same budget to every consumer.

g = design_gamma(unity_plants(5), build_youla(unity_plants(5), F).q, 50.0, 2.0)
print("unity plants, per-consumer gamma:", np.round(g.upper, 6))

###############################################################################
# A request is the coupling target plus a box around the equal split.

req = expand(40.0, g, 5)
print("request for v=40:", req)
print("zero bounds:", expand(40.0, GammaBounds.zero(5), 5))
print("contains equal split:", req.contains(np.full(5, 8.0)))
