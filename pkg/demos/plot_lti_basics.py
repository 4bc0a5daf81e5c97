"""
Transfer functions and zero-order-hold discretization
=====================================================

Build the two low-pass filters used throughout, discretize them and compare
the sampled step response with the continuous one.
"""
import math

import numpy as np

from weakctl import SignalTrace, TransferFunction, dc_gain, discretize, hinf_norm, l2_norm

F = TransferFunction([1.0], [1.5, 1.0])
Fd = TransferFunction([1.0], [10.0, 1.0])

for name, tf in [("F", F), ("Fd", Fd)]:
    print(f"{name}: poles {tf.poles()}, dc gain {dc_gain(tf):g}, hinf {hinf_norm(tf):.9f}")

###############################################################################
# A held unit step is reproduced exactly at the sample instants.

sim = discretize(F, 0.01)
y = sim.simulate(np.ones(751))
for k in (150, 300, 750):
    t = k * 0.01
    print(f"t={t:4.1f}  sampled {y[k]:.12f}  exact {1 - math.exp(-t / 1.5):.12f}")

###############################################################################
# The sampled L2 norm of the step response error e = 1 - y approaches
# sqrt(tau / 2) as the horizon grows.

y = discretize(F, 0.01).simulate(np.ones(3001))
print("||1 - y||_2 =", l2_norm(SignalTrace(0.01, 1.0 - y)), "vs", math.sqrt(1.5 / 2))
