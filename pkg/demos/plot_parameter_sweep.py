"""
Parameter sweeps
================

One run per value, summarized by the usual metrics. Scaling the bounds to zero
recovers case A; larger epsilon admits wider bounds.
"""
from weakctl import bundled_config, sweep

cfg = bundled_config("surrogate").replace(horizon=2000)

for param, values in [("gamma_scale", [0.0, 0.5, 1.0]), ("epsilon", [0.5, 1.0, 2.0]),
                      ("plant_tau", [0.05, 0.5, 2.0])]:
    print(param)
    for row in sweep(cfg, param, values):
        print("  ", {k: (round(v, 4) if isinstance(v, float) else v) for k, v in row.items()})
