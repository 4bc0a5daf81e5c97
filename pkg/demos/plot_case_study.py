"""
Equal split against weak control
================================

Five houses share one aggregate demand. Case A forces the equal split, case B
lets each house pick its cheapest admissible action. Tracking is the same in
both cases while case B costs less.
"""
from pathlib import Path

import numpy as np

from weakctl import bundled_config, case_study_demo
from weakctl.traceio import svg_line_chart, write_text

cfg = bundled_config("demo")
trace_a, trace_b, report = case_study_demo(cfg)
for line in report.lines():
    print(line)

print("max |yA - yB| =", np.max(np.abs(trace_a.y - trace_b.y)))
print("cost saving   =", f"{1 - report.cost_b_total / report.cost_a_total:.1%}")

###############################################################################
# Mean action per house: the cheap houses take a larger share in case B.

print("mean u, case A:", np.round(trace_a.u.mean(axis=0), 2))
print("mean u, case B:", np.round(trace_b.u.mean(axis=0), 2))

###############################################################################
# A self-contained chart of the cost per step.

out = Path("out")
write_text(out / "case_study_cost.svg",
           svg_line_chart(trace_a.times, {"case A": report.cost_a, "case B": report.cost_b},
                          title="cost per step"))
print("wrote", out / "case_study_cost.svg")
