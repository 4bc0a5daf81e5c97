"""SISO LTI systems: transfer functions, ZOH discretization, norms.

Transfer-function coefficients are stored in descending powers of ``s``.
Discrete simulations follow the convention ``y[k] = C x[k] + D u[k]``
followed by ``x[k+1] = A x[k] + B u[k]``, so that a zero-order-hold
realization reproduces the continuous response exactly at ``t = k * step``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize_scalar

from .errors import DivisionAtZero, ImproperSystem, UnstableSystem

__all__ = [
    "TransferFunction", "DiscreteSim", "SimBank", "SignalTrace",
    "dc_gain", "freq_response", "hinf_norm", "discretize", "step_sim",
    "l2_norm", "DEFAULT_GRID",
]

# (lowest rad/s, highest rad/s, points) for the H-infinity sweep
DEFAULT_GRID = (1e-3, 1e4, 2000)


def _trim(coeffs: Iterable[float]) -> tuple[float, ...]:
    c = [float(x) for x in coeffs]
    while len(c) > 1 and c[0] == 0.0:
        c.pop(0)
    return tuple(c)


@dataclass(frozen=True)
class TransferFunction:
    """Rational SISO transfer function ``num(s) / den(s)``."""

    num: tuple[float, ...]
    den: tuple[float, ...]

    def __init__(self, num: Sequence[float] | float, den: Sequence[float] | float = (1.0,)):
        num = np.atleast_1d(np.asarray(num, dtype=float))
        den = np.atleast_1d(np.asarray(den, dtype=float))
        if den.size == 0:
            raise ValueError("denominator must be nonempty")
        if den[0] == 0.0:
            raise ValueError("leading denominator coefficient must be nonzero")
        if num.size == 0:
            num = np.zeros(1)
        if not (np.all(np.isfinite(num)) and np.all(np.isfinite(den))):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "num", _trim(num))
        object.__setattr__(self, "den", tuple(float(x) for x in den))

    @property
    def order(self) -> int:
        return len(self.den) - 1

    @property
    def relative_degree(self) -> int:
        return (len(self.den) - 1) - (len(self.num) - 1)

    def is_proper(self) -> bool:
        return self.relative_degree >= 0

    def poles(self) -> np.ndarray:
        return np.roots(self.den) if self.order > 0 else np.zeros(0, dtype=complex)

    def zeros(self) -> np.ndarray:
        if len(self.num) <= 1:
            return np.zeros(0, dtype=complex)
        return np.roots(self.num)

    def is_stable(self) -> bool:
        """True iff every pole lies strictly in the open left half-plane."""
        return bool(np.all(self.poles().real < 0.0))

    def __call__(self, s: complex) -> complex:
        den = np.polyval(self.den, s)
        if den == 0:
            raise DivisionAtZero(f"denominator vanishes at s={s}")
        return np.polyval(self.num, s) / den

    def __mul__(self, other: "TransferFunction | float") -> "TransferFunction":
        if not isinstance(other, TransferFunction):
            return TransferFunction(np.multiply(self.num, float(other)), self.den)
        return TransferFunction(np.polymul(self.num, other.num),
                                np.polymul(self.den, other.den))

    __rmul__ = __mul__

    def __add__(self, other: "TransferFunction") -> "TransferFunction":
        if self.den == other.den:
            return TransferFunction(np.polyadd(self.num, other.num), self.den)
        num = np.polyadd(np.polymul(self.num, other.den),
                         np.polymul(other.num, self.den))
        return TransferFunction(num, np.polymul(self.den, other.den))

    def inverse(self) -> "TransferFunction":
        if not np.any(self.num):
            raise DivisionAtZero("cannot invert the zero system")
        return TransferFunction(self.den, self.num)

    def normalized(self) -> "TransferFunction":
        """Same system with a monic denominator."""
        lead = self.den[0]
        return TransferFunction(np.divide(self.num, lead), np.divide(self.den, lead))

    def minreal(self, tol: float = 1e-8) -> "TransferFunction":
        """Cancel pole/zero pairs closer than ``tol`` (relative)."""
        zeros = list(self.zeros())
        poles = list(self.poles())
        if not zeros or not poles:
            return self.normalized()
        kept_z = []
        for z in zeros:
            match = None
            for j, p in enumerate(poles):
                if abs(z - p) <= tol * max(1.0, abs(p)):
                    match = j
                    break
            if match is None:
                kept_z.append(z)
            else:
                poles.pop(match)
        if len(kept_z) == len(zeros):
            return self.normalized()
        gain = self.num[0] / self.den[0]
        num = gain * np.real_if_close(np.poly(kept_z), tol=1e6) if kept_z else [gain]
        den = np.real_if_close(np.poly(poles), tol=1e6) if poles else [1.0]
        return TransferFunction(np.real(num), np.real(den))

    def to_dict(self) -> dict:
        return {"num": list(self.num), "den": list(self.den)}

    def __repr__(self) -> str:
        return f"TransferFunction(num={list(self.num)}, den={list(self.den)})"


def dc_gain(tf: TransferFunction) -> float:
    """Value of ``tf`` at ``s = 0``."""
    if tf.den[-1] == 0.0:
        raise DivisionAtZero(f"{tf!r} has a pole at s=0")
    return tf.num[-1] / tf.den[-1]


def freq_response(tf: TransferFunction, omega: float) -> complex:
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    return complex(tf(1j * omega))


def _grid(grid) -> np.ndarray:
    if grid is None:
        grid = DEFAULT_GRID
    if isinstance(grid, tuple) and len(grid) == 3:
        lo, hi, n = grid
        return np.logspace(np.log10(lo), np.log10(hi), int(n))
    return np.sort(np.asarray(grid, dtype=float))


def hinf_norm(tf: TransferFunction, grid=None) -> float:
    """Peak gain of a stable proper ``tf`` over frequency.

    A logarithmic sweep locates the peak, then a bounded scalar search in
    log-frequency refines it between the neighbouring grid points. DC and
    the high-frequency limit are always included.
    """
    if not tf.is_proper():
        raise ImproperSystem(f"{tf!r} is improper")
    if not tf.is_stable():
        raise UnstableSystem(f"{tf!r} is not stable; H-infinity norm undefined")
    w = _grid(grid)
    mags = np.abs(np.polyval(tf.num, 1j * w) / np.polyval(tf.den, 1j * w))
    best = max(float(np.max(mags)), abs(dc_gain(tf)))
    if tf.relative_degree == 0:
        best = max(best, abs(tf.num[0] / tf.den[0]))

    i = int(np.argmax(mags))
    lo = np.log10(w[max(i - 1, 0)])
    hi = np.log10(w[min(i + 1, len(w) - 1)])
    if hi > lo:
        res = minimize_scalar(lambda lw: -abs(tf(1j * 10.0 ** lw)),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10})
        best = max(best, -float(res.fun))
    return best


def _canonical(tf: TransferFunction):
    """Controllable canonical realization (A, B, C, D)."""
    if not tf.is_proper():
        raise ImproperSystem(f"{tf!r}: numerator degree exceeds denominator degree")
    den = np.asarray(tf.den) / tf.den[0]
    n = len(den) - 1
    num = np.zeros(n + 1)
    num[n + 1 - len(tf.num):] = np.asarray(tf.num) / tf.den[0]
    d = num[0]
    if n == 0:
        return np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), np.array([[d]])
    b = num[1:] - d * den[1:]
    A = np.zeros((n, n))
    A[0, :] = -den[1:]
    A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    C = b.reshape(1, n)
    return A, B, C, np.array([[d]])


class DiscreteSim:
    """Discrete-time state-space simulation with internal state."""

    def __init__(self, A, B, C, D, step: float):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        n = self.A.shape[0] if self.A.size else 0
        self.A = self.A.reshape(n, n)
        self.B = np.asarray(B, dtype=float).reshape(n, 1)
        self.C = np.asarray(C, dtype=float).reshape(1, n)
        self.D = np.asarray(D, dtype=float).reshape(1, 1)
        self.step_size = float(step)
        self.state = np.zeros(n)
        # scalar fast path; simulations of order <= 1 dominate the closed loop
        self._a = float(self.A[0, 0]) if n == 1 else 0.0
        self._b = float(self.B[0, 0]) if n == 1 else 0.0
        self._c = float(self.C[0, 0]) if n == 1 else 0.0
        self._d = float(self.D[0, 0])
        self._x = 0.0

    @property
    def order(self) -> int:
        return self.A.shape[0]

    def reset(self) -> None:
        self.state = np.zeros(self.order)
        self._x = 0.0

    def copy(self) -> "DiscreteSim":
        sim = DiscreteSim(self.A, self.B, self.C, self.D, self.step_size)
        sim.state = self.state.copy()
        sim._x = self._x
        return sim

    def peek(self, u: float) -> float:
        """Output for input ``u`` without advancing the state."""
        n = self.order
        if n == 0:
            return self._d * u
        if n == 1:
            return self._c * self._x + self._d * u
        return float(self.C[0] @ self.state) + self._d * u

    def step(self, u: float) -> float:
        n = self.order
        if n == 0:
            return self._d * u
        if n == 1:
            y = self._c * self._x + self._d * u
            self._x = self._a * self._x + self._b * u
            self.state[0] = self._x
            return y
        y = float(self.C[0] @ self.state) + self._d * u
        self.state = self.A @ self.state + self.B[:, 0] * u
        return y

    def simulate(self, inputs: Sequence[float]) -> np.ndarray:
        return np.array([self.step(float(u)) for u in inputs])

    def dc_gain(self) -> float:
        """Steady-state gain of the discrete map."""
        n = self.order
        if n == 0:
            return self._d
        M = np.eye(n) - self.A
        return float(self.C[0] @ np.linalg.solve(M, self.B[:, 0])) + self._d


class SimBank:
    """Parallel bank of independent SISO simulations, stepped as one vector map."""

    def __init__(self, sims: Sequence[DiscreteSim]):
        if not sims:
            raise ValueError("SimBank needs at least one simulation")
        self.sims = list(sims)
        self.size = len(sims)
        orders = [s.order for s in sims]
        total = sum(orders)
        self.A = np.zeros((total, total))
        self.B = np.zeros((total, self.size))
        self.C = np.zeros((self.size, total))
        self.D = np.array([s._d for s in sims])
        pos = 0
        for i, s in enumerate(sims):
            k = s.order
            self.A[pos:pos + k, pos:pos + k] = s.A
            self.B[pos:pos + k, i] = s.B[:, 0]
            self.C[i, pos:pos + k] = s.C[0]
            pos += k
        self.static = total == 0
        self.state = np.concatenate([s.state for s in sims]) if total else np.zeros(0)
        # every member of order one: the bank is elementwise
        self.diagonal = all(k == 1 for k in orders)
        if self.diagonal:
            self._a = np.diag(self.A).copy()
            self._b = self.B.sum(axis=0)
            self._c = self.C.sum(axis=1)

    def reset(self) -> None:
        self.state = np.zeros_like(self.state)

    def peek(self, u: np.ndarray) -> np.ndarray:
        if self.static:
            return self.D * u
        return self.C @ self.state + self.D * u

    def step(self, u: np.ndarray) -> np.ndarray:
        if self.static:
            return self.D * u
        if self.diagonal:
            y = self._c * self.state + self.D * u
            self.state = self._a * self.state + self._b * u
            return y
        y = self.C @ self.state + self.D * u
        self.state = self.A @ self.state + self.B @ u
        return y


@dataclass
class SignalTrace:
    """Uniformly sampled signal."""

    step: float
    samples: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(len(self.samples))


def discretize(tf: TransferFunction, step: float) -> DiscreteSim:
    """Zero-order-hold discretization of the controllable canonical form."""
    if step <= 0:
        raise ValueError("step must be positive")
    A, B, C, D = _canonical(tf)
    n = A.shape[0]
    if n == 0:
        return DiscreteSim(A, B, C, D, step)
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = A
    M[:n, n:] = B
    E = expm(M * step)
    return DiscreteSim(E[:n, :n], E[:n, n:], C, D, step)


def step_sim(sim: DiscreteSim, u: float) -> float:
    return sim.step(u)


def l2_norm(trace: SignalTrace) -> float:
    """Sampled L2 norm ``sqrt(step * sum(x**2))``."""
    x = trace.samples
    if x.size == 0:
        return 0.0
    # scale first so huge samples do not overflow when squared
    m = float(np.max(np.abs(x)))
    if m == 0.0:
        return 0.0
    return m * float(np.sqrt(trace.step * np.sum((x / m) ** 2)))
