"""
Checking the disturbance-suppression bound
==========================================

With zero reference and adversarial consumers, the output norm must stay
below the nominal residual norm plus epsilon. Inflating the designed bounds
breaks the guarantee, which serves as a control run.
"""
from weakctl import bound_trials, bundled_config

cfg = bundled_config("surrogate")

for scale in (1.0, 100.0):
    rows = bound_trials(cfg, 2.0, range(5), gamma_scale=scale)
    print(f"gamma x{scale:g}")
    for r in rows:
        print(f"  seed {r['seed']}: ||y|| = {r['lhs']:.3f}  bound = {r['rhs']:.3f}  ok = {r['ok']}")
