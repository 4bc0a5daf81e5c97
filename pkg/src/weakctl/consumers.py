"""Consumers answering set-valued requests with private decisions.

Every consumer owns a quadratic cost ``a*u**2 + b*u`` and a physical action
range ``[floor, cap]``. Given a request, the consumer set picks an action
vector satisfying ``sum(u) == v`` inside the intersection of the request
intervals and the physical ranges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .errors import DimensionMismatch, InfeasibleBox, InfeasibleRequest
from .imc import Request

__all__ = [
    "ConsumerSpec", "Selfish", "EqualSplit", "Adversarial", "DecisionStrategy",
    "Allocation", "solve_qp", "kkt_residual", "water_fill", "decide",
    "delta_gain", "case_study_consumers", "total_cost",
]


@dataclass(frozen=True)
class ConsumerSpec:
    a: float
    b: float
    cap: float = math.inf
    floor: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"quadratic coefficient must be positive, got {self.a}")
        if self.floor > self.cap:
            raise ValueError(f"floor {self.floor} exceeds cap {self.cap}")

    @classmethod
    def from_consumption(cls, a: float, b: float, m: float, share: float = 0.2):
        """Consumer whose saving is limited to ``share`` of its consumption ``m``."""
        return cls(a=a, b=b, cap=share * m, floor=0.0)

    def cost(self, u):
        return self.a * np.square(u) + self.b * np.asarray(u)

    def uncapped(self) -> "ConsumerSpec":
        return replace(self, cap=math.inf, floor=-math.inf)


def case_study_consumers(n: int = 5, m: Sequence[float] | float = 100.0) -> list[ConsumerSpec]:
    """Consumers with costs ``u**2 + 6*i*u`` and caps at 20% of ``m_i``."""
    ms = [m] * n if np.isscalar(m) else list(m)
    return [ConsumerSpec.from_consumption(1.0, 6.0 * (i + 1), ms[i]) for i in range(n)]


def total_cost(specs: Sequence[ConsumerSpec], u) -> float:
    return float(sum(s.a * x * x + s.b * x for s, x in zip(specs, u)))


# ---------------------------------------------------------------------------
# separable QP:  min sum(a u^2 + b u)  s.t.  sum(u) = target,  lo <= u <= hi

def _check_box(lo, hi, target):
    if np.any(lo > hi):
        raise InfeasibleBox("lower bound exceeds upper bound")
    slo, shi = lo.sum(), hi.sum()
    tol = 1e-12 * max(1.0, abs(target))
    if slo > target + tol or shi < target - tol:
        raise InfeasibleBox(f"target {target} outside [{slo}, {shi}]")


def _response(lam, a, b, lo, hi):
    return np.clip((lam - b) / (2.0 * a), lo, hi)


def water_fill(u, lo, hi, target, weights=None):
    """Move ``u`` inside ``[lo, hi]`` until ``sum(u) == target``.

    The residual is shared among coordinates with room left, in proportion
    to ``weights`` (equal by default), refilling as coordinates saturate.
    """
    # plain floats: n is small and this runs once per consumer decision
    u = [float(x) for x in u]
    lo = [float(x) for x in lo]
    hi = [float(x) for x in hi]
    n = len(u)
    w = [1.0] * n if weights is None else [float(x) for x in weights]
    for _ in range(n + 1):
        res = target - math.fsum(u)
        if res == 0.0:
            break
        if res > 0:
            room = [h - x for h, x in zip(hi, u)]
        else:
            room = [x - l for x, l in zip(u, lo)]
        open_ = [i for i in range(n) if room[i] > 0]
        if not open_:
            break
        wsum = sum(w[i] for i in open_)
        mag = abs(res)
        for i in open_:
            share = mag * (w[i] / wsum if wsum > 0 else 1.0 / len(open_))
            if share < room[i]:
                u[i] = u[i] + share if res > 0 else u[i] - share
            else:
                # saturate exactly; x + (h - x) can miss h by an ulp
                u[i] = hi[i] if res > 0 else lo[i]
    return np.array(u)


def _polish(u, a, lo, hi, target):
    # exact coupling: push the rounding residual onto interior coordinates
    if math.fsum(u) == target:
        return u
    scale = max(1.0, abs(target))
    free = (u > lo + 1e-12 * scale) & (u < hi - 1e-12 * scale)
    w = np.where(free, 1.0 / a, 0.0) if np.any(free) else None
    return water_fill(u, lo, hi, target, weights=w)


def _lambda_breakpoints(a, b, lo, hi, target):
    inv = 1.0 / (2.0 * a)
    bps = np.concatenate([(2.0 * a * lo + b)[np.isfinite(lo)],
                          (2.0 * a * hi + b)[np.isfinite(hi)]])
    if bps.size == 0:
        return (target + np.sum(b * inv)) / np.sum(inv)
    bps.sort()
    sums = np.clip((bps[:, None] - b) * inv, lo, hi).sum(axis=1)
    if target <= sums[0]:
        slope = inv[np.isneginf(lo)].sum()
        return bps[0] if slope == 0 else bps[0] - (sums[0] - target) / slope
    if target >= sums[-1]:
        slope = inv[np.isposinf(hi)].sum()
        return bps[-1] if slope == 0 else bps[-1] + (target - sums[-1]) / slope
    j = int(np.searchsorted(sums, target, side="right")) - 1
    j = min(max(j, 0), len(bps) - 2)
    ds = sums[j + 1] - sums[j]
    if ds == 0:
        return bps[j]
    return bps[j] + (target - sums[j]) * (bps[j + 1] - bps[j]) / ds


def _lambda_bisection(a, b, lo, hi, target, tol=1e-10, max_iter=200):
    g_lo = 2.0 * a * lo + b
    g_hi = 2.0 * a * hi + b
    finite = np.concatenate([g_lo[np.isfinite(g_lo)], g_hi[np.isfinite(g_hi)]])
    base = finite if finite.size else b
    left, right = float(base.min()) - 1.0, float(base.max()) + 1.0
    # infinite bounds: widen until the bracket straddles the target
    while _response(left, a, b, lo, hi).sum() > target:
        left -= 2.0 * (right - left)
    while _response(right, a, b, lo, hi).sum() < target:
        right += 2.0 * (right - left)
    lam = 0.5 * (left + right)
    for _ in range(max_iter):
        lam = 0.5 * (left + right)
        s = _response(lam, a, b, lo, hi).sum()
        if abs(s - target) <= tol:
            break
        if s < target:
            left = lam
        else:
            right = lam
    return lam


def solve_qp(a, b, lo, hi, target: float, method: str = "breakpoints") -> np.ndarray:
    """Minimize ``sum(a*u**2 + b*u)`` subject to ``sum(u) == target``, ``lo <= u <= hi``.

    Both methods work on the dual: ``u_i(lam) = clip((lam - b_i) / (2 a_i), lo_i, hi_i)``
    is nondecreasing in ``lam``. ``"breakpoints"`` locates the root exactly on
    the piecewise-linear dual curve; ``"bisection"`` halves a bracket.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if not (a.shape == b.shape == lo.shape == hi.shape):
        raise DimensionMismatch("a, b, lo, hi must share one shape")
    if np.any(a <= 0):
        raise ValueError("quadratic coefficients must be positive")
    _check_box(lo, hi, target)
    if method == "breakpoints":
        lam = _lambda_breakpoints(a, b, lo, hi, target)
    elif method == "bisection":
        lam = _lambda_bisection(a, b, lo, hi, target)
    else:
        raise ValueError(f"unknown method {method!r}")
    u = _response(lam, a, b, lo, hi)
    return _polish(u, a, lo, hi, target)


def kkt_residual(a, b, lo, hi, u, target: float) -> float:
    """Largest violation of the optimality conditions at ``u``.

    Covers primal feasibility, stationarity on interior coordinates and the
    multiplier sign at active bounds.
    """
    a, b, lo, hi, u = (np.asarray(x, dtype=float) for x in (a, b, lo, hi, u))
    g = 2.0 * a * u + b
    scale = max(1.0, abs(target))
    tol = 1e-9 * scale
    at_lo = u <= lo + tol
    at_hi = u >= hi - tol
    free = ~(at_lo | at_hi)
    prim = max(abs(u.sum() - target),
               float(np.max(np.maximum(lo - u, 0.0))),
               float(np.max(np.maximum(u - hi, 0.0))))
    fixed = at_lo & at_hi
    lower_only = at_lo & ~fixed
    upper_only = at_hi & ~fixed
    if np.any(free):
        lam = float(np.mean(g[free]))
        stat = float(np.max(np.abs(g[free] - lam)))
    else:
        # any lam between the active gradients certifies optimality
        lam_min = float(np.max(g[upper_only])) if np.any(upper_only) else -math.inf
        lam_max = float(np.min(g[lower_only])) if np.any(lower_only) else math.inf
        if lam_min <= lam_max:
            lam = lam_min if math.isfinite(lam_min) else (lam_max if math.isfinite(lam_max) else 0.0)
        else:
            lam = 0.5 * (lam_min + lam_max)
        stat = 0.0
    sign = 0.0
    if np.any(lower_only):
        sign = max(sign, float(np.max(np.maximum(lam - g[lower_only], 0.0))))
    if np.any(upper_only):
        sign = max(sign, float(np.max(np.maximum(g[upper_only] - lam, 0.0))))
    return max(prim, stat, sign)


# ---------------------------------------------------------------------------
# decision strategies

@dataclass
class Selfish:
    """Each run minimizes the total private cost inside the request."""

    def fresh(self) -> "Selfish":
        return self

    def choose(self, a, b, lo, hi, req: Request) -> np.ndarray:
        return solve_qp(a, b, lo, hi, req.sum_target)


@dataclass
class EqualSplit:
    """Take the center of the request, repaired into the boxes if needed."""

    def fresh(self) -> "EqualSplit":
        return self

    def choose(self, a, b, lo, hi, req: Request) -> np.ndarray:
        c = req.center
        if all(l <= c <= h for l, h in zip(lo, hi)):
            return np.full(len(lo), c)
        return water_fill(np.clip(c, lo, hi), lo, hi, req.sum_target)


@dataclass
class Adversarial:
    """Random vertex of the admissible box, water-filled back onto the coupling plane.

    ``redraw_every`` holds a vertex pattern for that many calls; after
    ``freeze_after`` calls the pattern is kept for good, so the actions settle
    once the request does.
    """

    seed: int = 0
    redraw_every: int = 1
    freeze_after: int | None = None
    rng: np.random.Generator = field(init=False, repr=False, compare=False)
    _calls: int = field(init=False, default=0, repr=False, compare=False)
    _pattern: list[bool] | None = field(init=False, default=None, repr=False, compare=False)

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)
        self._block = np.zeros((0, 0), dtype=bool)
        self._block_pos = 0

    def fresh(self) -> "Adversarial":
        return Adversarial(self.seed, self.redraw_every, self.freeze_after)

    def _coin(self, n: int) -> list[bool]:
        # patterns come from blocks drawn ahead; the sequence depends only on the seed
        if self._block_pos >= len(self._block) or self._block.shape[1] != n:
            self._block = self.rng.random((256, n)) < 0.5
            self._block_pos = 0
        row = self._block[self._block_pos].tolist()
        self._block_pos += 1
        return row

    def _draw(self, n: int) -> list[bool]:
        frozen = self.freeze_after is not None and self._calls >= self.freeze_after
        if self._pattern is None or len(self._pattern) != n or (
                not frozen and self._calls % self.redraw_every == 0):
            self._pattern = self._coin(n)
        self._calls += 1
        return self._pattern

    def choose(self, a, b, lo, hi, req: Request) -> np.ndarray:
        pick_hi = self._draw(len(lo))
        s = abs(req.sum_target)
        c = req.center
        u = []
        for l, h, up in zip(lo, hi, pick_hi):
            # unbounded sides get a finite stand-in of width |v|
            if up:
                u.append(h if math.isfinite(h) else max(l, c) + s)
            else:
                u.append(l if math.isfinite(l) else min(h, c) - s)
        return water_fill(u, lo, hi, req.sum_target)


DecisionStrategy = Union[Selfish, EqualSplit, Adversarial]


@dataclass
class Allocation:
    u: np.ndarray
    feasible: bool = True
    slack: float = 0.0


def _effective_box(specs, req):
    lo, hi = [], []
    empty = False
    for s, rl, rh in zip(specs, req.lo, req.hi):
        l = rl if rl > s.floor else s.floor
        h = rh if rh < s.cap else s.cap
        if l > h:
            # request interval misses the physical range: pin to the nearest physical point
            l = h = s.cap if rl > s.cap else s.floor
            empty = True
        lo.append(l)
        hi.append(h)
    return lo, hi, empty


def decide(specs: Sequence[ConsumerSpec], req: Request, strategy: DecisionStrategy,
           strict: bool = False) -> Allocation:
    """Actions of the consumer set for one request.

    When the physical ranges cannot meet the coupling sum, the allocation
    saturates at the binding side and is flagged infeasible with the signed
    shortfall ``target - sum(u)`` as slack; ``strict=True`` raises instead.
    """
    if len(specs) != req.n:
        raise DimensionMismatch(f"{len(specs)} consumers for a {req.n}-dimensional request")
    lo, hi, empty = _effective_box(specs, req)
    target = req.sum_target
    slo, shi = math.fsum(lo), math.fsum(hi)
    tol = 1e-12 * max(1.0, abs(target))
    if slo > target + tol or shi < target - tol:
        u = np.array(lo if slo > target else hi)
        slack = target - u.sum()
        if strict:
            raise InfeasibleRequest(f"consumer boxes miss the target by {slack}", slack)
        return Allocation(u=u, feasible=False, slack=slack)
    if empty and strict:
        raise InfeasibleRequest("request interval outside a consumer's range", 0.0)
    if lo == hi:
        # singleton request, nothing left to decide
        return Allocation(u=np.array(lo), feasible=not empty, slack=0.0)
    a = [s.a for s in specs]
    b = [s.b for s in specs]
    u = strategy.choose(a, b, lo, hi, req)
    return Allocation(u=u, feasible=not empty, slack=0.0)


def delta_gain(req: Request, u) -> float:
    """Largest relative deviation ``|u_i - v/n| / (|v|/n)`` from the equal share."""
    u = np.asarray(u, dtype=float)
    dev = float(np.max(np.abs(u - req.center)))
    half = abs(req.sum_target) / req.n
    if half == 0.0:
        return 0.0 if dev == 0.0 else math.inf
    return dev / half
