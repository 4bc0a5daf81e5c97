"""Closed-loop simulation of plants, consumers and the weak controller.

One tick ``k`` of :func:`run_closed_loop`:

1. the controller reads ``r[k]``, the last output ``y[k-1]`` and the last
   actions ``u[k-1]`` and emits ``v[k]`` with its request set;
2. the consumers pick ``u[k]`` inside the request;
3. every plant advances with its ``u_i[k]`` and ``y[k] = sum(y_i[k]) + d[k]``.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .config import RunConfig, gamma_from_entry
from .consumers import (Adversarial, ConsumerSpec, DecisionStrategy, Selfish,
                        decide)
from .errors import ConfigMismatch, NonZeroReference
from .imc import (GammaBounds, IMCController, InternalModel, build_youla,
                  design_gamma)
from .lti import SignalTrace, SimBank, TransferFunction, dc_gain, discretize, l2_norm

__all__ = [
    "PlantSet", "DisturbanceGen", "SimTrace", "Metrics", "BoundCheck", "DemoReport",
    "unity_plants", "first_order_plants", "run_closed_loop",
    "check_disturbance_bound", "compute_metrics", "filtered", "case_study_demo",
    "run_config", "bound_trial", "bound_trials", "sweep", "SWEEP_PARAMS", "REFERENCE_RMS_TRACKING",
]

# tracking error the original demonstration reports for both cases; kept for
# reference only, its disturbance realization and reference are unpublished
REFERENCE_RMS_TRACKING = 36.723

SWEEP_PARAMS = ("epsilon", "gamma_scale", "plant_tau", "seed")


def unity_plants(n: int) -> list[TransferFunction]:
    return [TransferFunction([1.0], [1.0]) for _ in range(n)]


def first_order_plants(taus: Sequence[float]) -> list[TransferFunction]:
    return [TransferFunction([1.0], [tau, 1.0]) for tau in taus]


class PlantSet:
    """The consumers' plants, each driven by its own action."""

    def __init__(self, plants: Sequence[TransferFunction], step: float = 0.01,
                 dc_check: bool = True):
        if dc_check:
            for g in plants:
                if abs(dc_gain(g) - 1.0) > 1e-6:
                    raise ValueError(f"plant {g!r} must have unit DC gain")
        self.tfs = list(plants)
        self.dc_check = dc_check
        self.plants = [discretize(g, step) for g in self.tfs]
        self.bank = SimBank(self.plants)

    @property
    def n(self) -> int:
        return len(self.tfs)

    def reset(self) -> None:
        self.bank.reset()

    def step(self, u: np.ndarray) -> np.ndarray:
        return self.bank.step(u)


@dataclass
class DisturbanceGen:
    """Disturbance source.

    ``filtered_gaussian`` holds white Gaussian samples of the given variance
    for ``period`` time units each and shapes them with ``fd``.
    ``step_hold`` is ``level`` from ``start`` on; ``custom`` replays ``samples``.
    """

    mode: str = "filtered_gaussian"
    seed: int = 0
    variance: float = 10.0
    fd: TransferFunction = field(default_factory=lambda: TransferFunction([1.0], [10.0, 1.0]))
    period: float = 1.0
    level: float = 0.0
    start: float = 0.0
    samples: np.ndarray | None = None

    def generate(self, step: float, length: int) -> np.ndarray:
        if self.mode == "none":
            return np.zeros(length)
        if self.mode == "step_hold":
            t = step * np.arange(length)
            return np.where(t >= self.start - 1e-9 * step, self.level, 0.0)
        if self.mode == "custom":
            d = np.asarray(self.samples, dtype=float)
            if len(d) < length:
                raise ValueError(f"custom disturbance has {len(d)} samples, need {length}")
            return d[:length].copy()
        if self.mode != "filtered_gaussian":
            raise ValueError(f"unknown disturbance mode {self.mode!r}")
        rng = np.random.default_rng(self.seed)
        idx = np.floor(step * np.arange(length) / self.period + 1e-9).astype(int)
        white = rng.normal(0.0, math.sqrt(self.variance), idx[-1] + 1)
        return discretize(self.fd, step).simulate(white[idx])

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "DisturbanceGen":
        d = cfg.disturbance
        return cls(mode=d.mode, seed=d.seed, variance=d.variance, fd=cfg.filter_fd,
                   period=d.period, level=d.level, start=d.start)


@dataclass
class SimTrace:
    """Time-indexed record of one run; per-consumer arrays are (samples, n)."""

    step: float
    r: np.ndarray
    d: np.ndarray
    v: np.ndarray
    y: np.ndarray
    y_model: np.ndarray
    u: np.ndarray
    y_parts: np.ndarray
    cost: np.ndarray
    infeasible: list[int] = field(default_factory=list)
    gamma: GammaBounds | None = None

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n(self) -> int:
        return self.u.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(len(self))

    def signal(self, name: str, i: int | None = None) -> SignalTrace:
        x = getattr(self, name)
        return SignalTrace(self.step, x if i is None else x[:, i])


def run_closed_loop(plants: PlantSet, controller: IMCController,
                    specs: Sequence[ConsumerSpec], strategy: DecisionStrategy,
                    reference, disturbance, horizon: int) -> SimTrace:
    """Simulate ``horizon`` steps; returns ``horizon + 1`` samples from ``t = 0``.

    ``reference`` and ``disturbance`` are sample arrays (or a scalar reference,
    or a :class:`DisturbanceGen`). All simulation state is reset first.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    n = plants.n
    if controller.n != n or len(specs) != n:
        raise ConfigMismatch(f"{n} plants, {controller.n} models, {len(specs)} consumers")
    step = controller.model.step_size
    length = horizon + 1
    if isinstance(reference, SignalTrace):
        reference = reference.samples
    r = np.broadcast_to(np.asarray(reference, dtype=float), (length,)) if np.ndim(reference) == 0 \
        else np.asarray(reference, dtype=float)[:length]
    if isinstance(disturbance, DisturbanceGen):
        d = disturbance.generate(step, length)
    else:
        d = np.asarray(disturbance, dtype=float)[:length]
    if len(r) < length or len(d) < length:
        raise ValueError("reference and disturbance must cover the horizon")
    r_list, d_list = r.tolist(), d.tolist()

    plants.reset()
    controller.reset()
    strategy = strategy.fresh()
    a = np.array([s.a for s in specs])
    b = np.array([s.b for s in specs])

    v = [0.0] * length
    y = [0.0] * length
    y_model = [0.0] * length
    u = [None] * length
    y_parts = [None] * length
    infeasible = []
    y_prev = 0.0
    u_prev = np.zeros(n)
    for k in range(length):
        v[k], req = controller.step(r_list[k], y_prev, u_prev)
        if k:
            y_model[k - 1] = controller.last_model_output
        alloc = decide(specs, req, strategy)
        if not alloc.feasible:
            infeasible.append(k)
        uk = alloc.u
        yk = plants.step(uk)
        y_prev = y[k] = float(yk.sum()) + d_list[k]
        u[k] = uk
        y_parts[k] = yk
        u_prev = uk
    y_model[-1] = controller.model.peek(u_prev)
    u = np.array(u)
    cost = ((a * u + b) * u).sum(axis=1)
    return SimTrace(step=step, r=np.array(r), d=np.array(d), v=np.array(v), y=np.array(y),
                    y_model=np.array(y_model), u=u, y_parts=np.array(y_parts), cost=cost,
                    infeasible=infeasible, gamma=controller.gamma)


def filtered(f: TransferFunction, x: np.ndarray, step: float) -> np.ndarray:
    """Response of ``f`` to the samples ``x`` from rest."""
    return discretize(f, step).simulate(x)


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    ok: bool


def check_disturbance_bound(trace: SimTrace, f: TransferFunction, epsilon: float) -> BoundCheck:
    """Compare ``||y||`` against ``||d - F d|| + epsilon`` for a zero-reference run."""
    if np.any(trace.r != 0.0):
        raise NonZeroReference("the disturbance bound applies to r == 0 runs only")
    d_f = filtered(f, trace.d, trace.step)
    lhs = l2_norm(trace.signal("y"))
    rhs = l2_norm(SignalTrace(trace.step, trace.d - d_f)) + epsilon
    return BoundCheck(lhs, rhs, lhs <= rhs + 1e-6)


@dataclass(frozen=True)
class Metrics:
    rms_tracking: float
    l2_y: float
    l2_d_minus_df: float
    total_cost: float
    bound_ok: bool | None = None


def rms_tracking(trace: SimTrace, period: float = 1.0) -> float:
    """``sqrt(sum (y - r)**2)`` over the samples at ``t = period, 2*period, ...``."""
    stride = period / trace.step
    if abs(stride - round(stride)) > 1e-9 or round(stride) < 1:
        raise ValueError("period must be a multiple of the simulation step")
    stride = int(round(stride))
    e = (trace.y - trace.r)[stride::stride]
    return float(np.sqrt(np.sum(e * e)))


def compute_metrics(trace: SimTrace, f: TransferFunction, epsilon: float | None = None,
                    period: float = 1.0) -> Metrics:
    d_f = filtered(f, trace.d, trace.step)
    bound_ok = None
    if epsilon is not None and not np.any(trace.r != 0.0):
        bound_ok = check_disturbance_bound(trace, f, epsilon).ok
    return Metrics(
        rms_tracking=rms_tracking(trace, period),
        l2_y=l2_norm(trace.signal("y")),
        l2_d_minus_df=l2_norm(SignalTrace(trace.step, trace.d - d_f)),
        total_cost=float(np.sum(trace.cost)),
        bound_ok=bound_ok,
    )


# ---------------------------------------------------------------------------
# config-driven runs

def _resolve_gamma(cfg: RunConfig, plants, q, d: np.ndarray) -> GammaBounds:
    gamma = gamma_from_entry(cfg.gamma, cfg.n)
    if gamma is not None:
        return gamma
    g = cfg.gamma
    d_l2 = l2_norm(SignalTrace(cfg.step, d)) if g.d_l2 == "realized" else g.d_l2
    return design_gamma(plants, q, d_l2, g.epsilon, g.weights).scaled(g.scale)


def run_config(cfg: RunConfig, gamma: GammaBounds | None = None,
               strategy: DecisionStrategy | None = None,
               specs: Sequence[ConsumerSpec] | None = None,
               reference=None, disturbance=None) -> SimTrace:
    """Run the scenario a config describes; keyword arguments override parts of it.

    The internal model equals the plants.
    """
    tfs = cfg.plant_tfs()
    plants = PlantSet(tfs, cfg.step)
    model = InternalModel(tfs, cfg.step)
    youla = build_youla(tfs, cfg.filter_f, cfg.step)
    if disturbance is None:
        disturbance = DisturbanceGen.from_config(cfg)
    d = (disturbance.generate(cfg.step, cfg.horizon + 1)
         if isinstance(disturbance, DisturbanceGen) else np.asarray(disturbance, dtype=float))
    if gamma is None:
        gamma = _resolve_gamma(cfg, tfs, youla.q, d[:cfg.horizon + 1])
    controller = IMCController(model, youla, gamma)
    r = cfg.reference_samples() if reference is None else reference
    return run_closed_loop(plants, controller, specs if specs is not None else cfg.specs(),
                           strategy if strategy is not None else cfg.strategy.build(),
                           r, d, cfg.horizon)


@dataclass
class DemoReport:
    rms_a: float
    rms_b: float
    cost_a_total: float
    cost_b_total: float
    stacked_a: np.ndarray
    stacked_b: np.ndarray
    cost_a: np.ndarray
    cost_b: np.ndarray
    infeasible_a: int = 0
    infeasible_b: int = 0

    @property
    def cost_reduced(self) -> bool:
        return self.cost_b_total <= self.cost_a_total

    def lines(self) -> list[str]:
        return [
            f"rms_tracking_A: {self.rms_a:.15g}",
            f"rms_tracking_B: {self.rms_b:.15g}",
            f"rms_tracking_reference_value: {REFERENCE_RMS_TRACKING}",
            f"cost_A_total: {self.cost_a_total:.15g}",
            f"cost_B_total: {self.cost_b_total:.15g}",
            f"cost_reduced: {str(self.cost_reduced).lower()}",
            f"infeasible_steps_A: {self.infeasible_a}",
            f"infeasible_steps_B: {self.infeasible_b}",
            "final_cumulative_output_A: " + ", ".join(f"{x:.6g}" for x in self.stacked_a[-1]),
            "final_cumulative_output_B: " + ", ".join(f"{x:.6g}" for x in self.stacked_b[-1]),
        ]


def case_study_demo(cfg: RunConfig, seed: int | None = None, demo_mode: bool = True):
    """Case A (equal split) against case B (the config's request) on one disturbance.

    Returns ``(trace_a, trace_b, report)``.
    """
    if demo_mode and cfg.n != 5:
        raise ConfigMismatch(f"demo mode expects 5 consumers, config has {cfg.n}")
    if seed is not None:
        cfg = cfg.replace(disturbance=replace(cfg.disturbance, seed=seed))
    d = DisturbanceGen.from_config(cfg).generate(cfg.step, cfg.horizon + 1)
    trace_a = run_config(cfg, gamma=GammaBounds.zero(cfg.n), strategy=Selfish(), disturbance=d)
    trace_b = run_config(cfg, disturbance=d)
    report = DemoReport(
        rms_a=rms_tracking(trace_a), rms_b=rms_tracking(trace_b),
        cost_a_total=float(trace_a.cost.sum()), cost_b_total=float(trace_b.cost.sum()),
        stacked_a=np.cumsum(trace_a.y_parts, axis=1), stacked_b=np.cumsum(trace_b.y_parts, axis=1),
        cost_a=trace_a.cost, cost_b=trace_b.cost,
        infeasible_a=len(trace_a.infeasible), infeasible_b=len(trace_b.infeasible),
    )
    return trace_a, trace_b, report


def bound_trial(cfg: RunConfig, epsilon: float, seed: int, gamma_scale: float = 1.0):
    """One disturbance-suppression trial with an adversarial consumer set.

    The reference is zero, the bounds are designed from the realized
    disturbance norm and then multiplied by ``gamma_scale``. Physical action
    limits are dropped so every request is met exactly.
    Returns ``(BoundCheck, GammaBounds)``.
    """
    dist = DisturbanceGen.from_config(cfg)
    dist.mode = "filtered_gaussian" if dist.mode == "none" else dist.mode
    dist.seed = seed
    d = dist.generate(cfg.step, cfg.horizon + 1)
    tfs = cfg.plant_tfs()
    q = build_youla(tfs, cfg.filter_f, cfg.step).q
    d_l2 = l2_norm(SignalTrace(cfg.step, d))
    gamma = design_gamma(tfs, q, d_l2, epsilon, cfg.gamma.weights).scaled(gamma_scale)
    trace = run_config(cfg, gamma=gamma, strategy=Adversarial(seed),
                       specs=[s.uncapped() for s in cfg.specs()],
                       reference=np.zeros(cfg.horizon + 1), disturbance=d)
    return check_disturbance_bound(trace, cfg.filter_f, epsilon), gamma


def _bound_one(args) -> dict:
    cfg, epsilon, seed, gamma_scale = args
    check, gamma = bound_trial(cfg, epsilon, seed, gamma_scale)
    return {"seed": seed, "lhs": check.lhs, "rhs": check.rhs, "ok": check.ok,
            "gamma_max": gamma.max_gain()}


def bound_trials(cfg: RunConfig, epsilon: float, seeds: Sequence[int],
                 gamma_scale: float = 1.0, jobs: int = 1) -> list[dict]:
    """Run :func:`bound_trial` per seed; rows come back in seed order."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    tasks = [(cfg, float(epsilon), int(s), float(gamma_scale)) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_bound_one, tasks))
    return [_bound_one(t) for t in tasks]


def _sweep_one(args) -> dict:
    cfg, param, value = args
    if param == "epsilon":
        cfg = cfg.replace(gamma=replace(cfg.gamma, mode="design", epsilon=float(value),
                                        d_l2=cfg.gamma.d_l2 or "realized"))
    elif param == "gamma_scale":
        cfg = cfg.replace(gamma=replace(cfg.gamma, scale=cfg.gamma.scale * float(value)))
    elif param == "plant_tau":
        cfg = cfg.replace(plants=replace(cfg.plants, preset="first_order",
                                         taus=(float(value),) * cfg.n, systems=None))
    elif param == "seed":
        # consumer randomness only; the disturbance realization stays fixed
        cfg = cfg.replace(strategy=replace(cfg.strategy, seed=int(value)))
    trace = run_config(cfg)
    m = compute_metrics(trace, cfg.filter_f)
    row = {"param": param, "value": value, "rms_tracking": m.rms_tracking, "l2_y": m.l2_y,
           "l2_d_minus_df": m.l2_d_minus_df, "total_cost": m.total_cost,
           "infeasible_steps": len(trace.infeasible)}
    for i in range(cfg.n):
        row[f"gamma_{i + 1}"] = max(trace.gamma.lower[i], trace.gamma.upper[i])
    return row


def sweep(cfg: RunConfig, param: str, values: Sequence, jobs: int = 1) -> list[dict]:
    """One run per value; rows come back in input order."""
    if param not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {param!r}; choose from {SWEEP_PARAMS}")
    tasks = [(cfg, param, v) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_one, tasks))
    return [_sweep_one(t) for t in tasks]
