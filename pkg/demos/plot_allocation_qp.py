"""
Selfish allocation as a separable quadratic program
===================================================

Each consumer pays a u^2 + b u. Given a request with a coupling target and
per-consumer boxes, the cheapest admissible split solves a small QP whose
dual is a monotone scalar equation.
"""
import numpy as np

from weakctl import (EqualSplit, GammaBounds, Selfish, case_study_consumers, decide, expand,
                     kkt_residual, solve_qp, total_cost)

a = np.ones(5)
b = 6.0 * np.arange(1, 6)
lo, hi = np.zeros(5), np.full(5, np.inf)

u = solve_qp(a, b, lo, hi, 10.0)
print("optimal split:", u)
print("multiplier on active coordinates:", 2 * a[:3] * u[:3] + b[:3])
print("KKT residual:", kkt_residual(a, b, lo, hi, u, 10.0))

###############################################################################
# The breakpoint method and bisection agree.

rng = np.random.default_rng(0)
for _ in range(3):
    aa, bb = rng.uniform(0.5, 3, 4), rng.uniform(-5, 5, 4)
    ll = rng.uniform(-2, 0, 4)
    hh = ll + rng.uniform(0.5, 2, 4)
    t = rng.uniform(ll.sum(), hh.sum())
    d = solve_qp(aa, bb, ll, hh, t) - solve_qp(aa, bb, ll, hh, t, method="bisection")
    print("max method gap:", np.abs(d).max())

###############################################################################
# With a request from the controller, selfish consumers pay less than the
# equal split whenever the box leaves them room.

specs = case_study_consumers()
req = expand(40.0, GammaBounds.symmetric([0.5] * 5), 5)
for strat in (EqualSplit(), Selfish()):
    alloc = decide(specs, req, strat)
    print(f"{type(strat).__name__:11s} u={np.round(alloc.u, 3)} cost={total_cost(specs, alloc.u):.2f}")
