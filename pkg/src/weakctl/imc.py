"""Internal-model controller emitting set-valued requests.

The controller holds a model of every consumer's plant, a Youla filter
``Q`` and an expander that turns the filtered reference ``v`` into the
admissible set of actions: ``sum(u) == v`` with each ``u_i`` in an interval
around the equal share ``v / n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (DimensionMismatch, ImproperQ, InvalidWeights,
                     NonMinimumPhaseModel, UnstableSystem, ZeroBudget)
from .lti import (DiscreteSim, SimBank, TransferFunction, dc_gain, discretize,
                  hinf_norm)

__all__ = [
    "InternalModel", "YoulaFilter", "GammaBounds", "Request", "IMCController",
    "model_sum", "build_youla", "expand", "design_gamma", "gamma_budget",
    "controller_step",
]


class InternalModel:
    """Bank of plant models; its output is the sum of the per-consumer outputs."""

    def __init__(self, models: Sequence[TransferFunction], step: float = 0.01):
        if len(models) < 1:
            raise ValueError("internal model needs at least one consumer model")
        self.models = list(models)
        self.n = len(models)
        self.step_size = step
        self.sims = [discretize(m, step) for m in self.models]
        self.bank = SimBank(self.sims)

    def reset(self) -> None:
        self.bank.reset()

    def step(self, u: np.ndarray) -> float:
        return float(np.sum(self.bank.step(u)))

    def peek(self, u: np.ndarray) -> float:
        return float(np.sum(self.bank.peek(u)))


@dataclass
class YoulaFilter:
    q: TransferFunction
    sim: DiscreteSim

    def reset(self) -> None:
        self.sim.reset()


@dataclass(frozen=True)
class GammaBounds:
    """Per-consumer relative deviation bounds below/above the equal share.

    Infinite entries mean the deviation is unbounded, so only the coupling
    constraint ``sum(u) == v`` remains.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(x) for x in self.lower)
        upper = tuple(float(x) for x in self.upper)
        if len(lower) != len(upper):
            raise DimensionMismatch("lower and upper bounds differ in length")
        if any(not (x >= 0) for x in lower + upper):
            raise ValueError("gamma bounds must be nonnegative")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n(self) -> int:
        return len(self.lower)

    @classmethod
    def zero(cls, n: int) -> "GammaBounds":
        return cls((0.0,) * n, (0.0,) * n)

    @classmethod
    def unbounded(cls, n: int) -> "GammaBounds":
        return cls((math.inf,) * n, (math.inf,) * n)

    @classmethod
    def symmetric(cls, gamma: Sequence[float]) -> "GammaBounds":
        return cls(tuple(gamma), tuple(gamma))

    def scaled(self, factor: float) -> "GammaBounds":
        if factor == 0:
            return GammaBounds.zero(self.n)
        return GammaBounds(tuple(g * factor for g in self.lower),
                           tuple(g * factor for g in self.upper))

    def max_gain(self) -> float:
        return max(max(self.lower), max(self.upper))


@dataclass(frozen=True)
class Request:
    """Set-valued control signal: ``sum(u) == sum_target`` and ``lo <= u <= hi``."""

    center: float
    sum_target: float
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.lo)

    def contains(self, u: Sequence[float], tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=float)
        scale = max(1.0, abs(self.sum_target))
        return bool(abs(u.sum() - self.sum_target) <= tol * scale
                    and np.all(u >= np.asarray(self.lo) - tol * scale)
                    and np.all(u <= np.asarray(self.hi) + tol * scale))


def expand(v: float, gamma: GammaBounds, n: int) -> Request:
    """Build the request set around the equal share ``v / n``.

    Interval half-widths scale with ``|v|`` so the set stays well formed for
    negative ``v``. Zero bounds give the singleton equal split.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if gamma.n != n:
        raise DimensionMismatch(f"gamma has {gamma.n} entries, expected {n}")
    center = v / n
    half = abs(v) / n
    lo, hi = [], []
    for gl, gu in zip(gamma.lower, gamma.upper):
        # an unbounded side stays unbounded even at v == 0 (inf * 0 is nan)
        lo.append(-math.inf if gl == math.inf else center - gl * half)
        hi.append(math.inf if gu == math.inf else center + gu * half)
    return Request(center=center, sum_target=v, lo=tuple(lo), hi=tuple(hi))


def model_sum(models: Sequence[TransferFunction]) -> TransferFunction:
    total = models[0]
    for m in models[1:]:
        total = total + m
    return total.minreal()


def build_youla(models: Sequence[TransferFunction], f: TransferFunction,
                step: float = 0.01) -> YoulaFilter:
    """``Q = n F / sum(G_Mi)``; rejects models whose inverse is unstable or improper."""
    n = len(models)
    if n < 1:
        raise ValueError("need at least one model")
    if abs(dc_gain(f) - 1.0) > 1e-9:
        raise ValueError(f"filter must have unit DC gain, got {dc_gain(f)}")
    if not f.is_stable():
        raise UnstableSystem(f"filter {f!r} is not stable")
    total = model_sum(models)
    if not np.any(total.num):
        raise NonMinimumPhaseModel("sum of models is identically zero")
    rhp = [z for z in total.zeros() if z.real >= 0]
    if rhp:
        raise NonMinimumPhaseModel(
            f"sum of models has right half-plane zeros {np.round(rhp, 6).tolist()}")
    q = (f * total.inverse() * float(n)).minreal()
    if not q.is_proper():
        raise ImproperQ(f"Q = {q!r} is improper; the filter must roll off faster")
    if not q.is_stable():
        raise UnstableSystem(f"Q = {q!r} is not stable")
    return YoulaFilter(q=q, sim=discretize(q, step))


def gamma_budget(q: TransferFunction, d_l2: float, epsilon: float, n: int) -> float:
    """Right-hand side of the design inequality: ``eps * n / (||Q|| ||d||)``."""
    return epsilon * n / (hinf_norm(q) * d_l2)


def design_gamma(plants: Sequence[TransferFunction], q: TransferFunction,
                 d_l2: float, epsilon: float,
                 weights: Sequence[float] | None = None) -> GammaBounds:
    """Symmetric bounds spending the weighted budget on each consumer."""
    n = len(plants)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if d_l2 <= 0:
        raise ValueError("disturbance norm must be positive")
    if weights is None:
        weights = [1.0 / n] * n
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise InvalidWeights(f"expected {n} weights, got {w.size}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise InvalidWeights("weights must be nonnegative and sum to 1")
    budget = gamma_budget(q, d_l2, epsilon, n)
    if not budget > 0:
        raise ZeroBudget(f"budget underflowed: eps={epsilon}, ||d||={d_l2}")
    norms = np.array([hinf_norm(g) for g in plants])
    gamma = w * budget / norms
    return GammaBounds.symmetric(gamma.tolist())


class IMCController:
    """Stateful controller: internal model, Youla filter and expander."""

    def __init__(self, model: InternalModel, youla: YoulaFilter, gamma: GammaBounds):
        if gamma.n != model.n:
            raise DimensionMismatch(f"gamma has {gamma.n} entries, model has {model.n}")
        self.model = model
        self.youla = youla
        self.gamma = gamma
        self.last_model_output = 0.0

    @property
    def n(self) -> int:
        return self.model.n

    def reset(self) -> None:
        self.model.reset()
        self.youla.reset()
        self.last_model_output = 0.0

    def step(self, r: float, y: float, u_prev) -> tuple[float, Request]:
        """One controller tick from the current reference and last measurement.

        ``y`` and ``u_prev`` are the output and the actions of the previous
        tick. The Youla filter sees ``r - (y - y_M)``, which equals ``r - d``
        when the model is exact.
        """
        u_prev = np.asarray(u_prev, dtype=float)
        if u_prev.shape != (self.n,):
            raise DimensionMismatch(f"u_prev has shape {u_prev.shape}, expected ({self.n},)")
        y_model = self.model.step(u_prev)
        self.last_model_output = y_model
        v = self.youla.sim.step(r - (y - y_model))
        return v, expand(v, self.gamma, self.n)


def controller_step(model: InternalModel, q: YoulaFilter, r: float, y: float,
                    u_prev, gamma: GammaBounds | None = None) -> tuple[float, Request]:
    """Functional form of :meth:`IMCController.step`; default bounds are zero."""
    if gamma is None:
        gamma = GammaBounds.zero(model.n)
    return IMCController(model, q, gamma).step(r, y, u_prev)
