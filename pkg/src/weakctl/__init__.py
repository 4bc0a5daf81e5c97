"""Weak control of a community of energy consumers.

An internal-model controller sends each consumer a set of admissible
power-saving actions instead of a single command; consumers pick freely
inside the set. The package covers the LTI numerics, the controller and
its bound design, the consumers' decision rules, a closed-loop simulator
and the ``weakctl`` command line.
"""
from .config import (RunConfig, bundled_config, dump_config, load_config,
                     parse_config)
from .consumers import (Adversarial, Allocation, ConsumerSpec, EqualSplit,
                        Selfish, case_study_consumers, decide, delta_gain,
                        kkt_residual, solve_qp, total_cost, water_fill)
from .errors import *  # noqa: F401,F403
from .imc import (GammaBounds, IMCController, InternalModel, Request,
                  YoulaFilter, build_youla, controller_step, design_gamma,
                  expand, gamma_budget, model_sum)
from .lti import (DiscreteSim, SignalTrace, SimBank, TransferFunction, dc_gain,
                  discretize, freq_response, hinf_norm, l2_norm, step_sim)
from .scenario import (BoundCheck, DisturbanceGen, Metrics, PlantSet, SimTrace,
                       bound_trial, bound_trials, case_study_demo,
                       check_disturbance_bound, compute_metrics,
                       first_order_plants, rms_tracking, run_closed_loop,
                       run_config, sweep, unity_plants)
from .traceio import read_trace_csv, write_trace_csv

__version__ = "0.1.0"
