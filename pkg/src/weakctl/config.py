"""Run configuration: a TOML document describing one closed-loop scenario.

Schema (all tables optional except ``[[consumers]]``)::

    run_id = "demo"          # prefix of every output file
    step = 0.01              # simulation step, time units
    horizon = 6000           # number of steps; traces hold horizon + 1 samples
    output_dir = "out"

    [[consumers]]            # one table per consumer, in order
    a = 1.0                  # cost a*u^2 + b*u
    b = 6.0
    m = 100.0                # initial consumption; action capped at 0.2*m (omit: no cap)
    floor = 0.0              # lowest admissible action (default 0)

    [plants]
    preset = "unity"         # "unity" | "first_order" | "explicit"
    taus = [0.05, 0.1]       # first_order: time constants, unit DC gain
    systems = [{num = [1.0], den = [0.1, 1.0]}]   # explicit

    [filter_f]               # tracking filter, unit DC gain
    num = [1.0]
    den = [1.5, 1.0]

    [filter_fd]              # disturbance shaping filter
    num = [1.0]
    den = [10.0, 1.0]

    [gamma]
    mode = "unbounded"       # "zero" | "unbounded" | "explicit" | "design"
    lower = [0.5, 0.5]       # explicit
    upper = [0.5, 0.5]
    epsilon = 2.0            # design
    d_l2 = "realized"        # design: number, or "realized" (norm of the run's disturbance)
    weights = [0.5, 0.5]     # design: budget split, default uniform
    scale = 1.0              # multiplies the resulting bounds

    [reference]
    segments = [[0.0, 30.0], [20.0, 60.0]]   # [start time, value], piecewise constant

    [disturbance]
    mode = "filtered_gaussian"   # "filtered_gaussian" | "step_hold" | "none"
    seed = 1
    variance = 10.0          # of the white samples, before the shaping filter
    period = 1.0             # hold time of each white sample
    level = 0.0              # step_hold amplitude
    start = 0.0              # step_hold onset

    [strategy]
    kind = "selfish"         # "selfish" | "equal_split" | "adversarial"
    seed = 0
    redraw_every = 1
    freeze_after = 3000      # optional

Bounds for negative ``v`` scale with ``|v|`` (see :func:`weakctl.imc.expand`).
"""
from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import tomli
import tomli_w

from .consumers import Adversarial, ConsumerSpec, EqualSplit, Selfish
from .errors import ConfigError, WeakControlError
from .imc import GammaBounds, build_youla
from .lti import TransferFunction, dc_gain

__all__ = [
    "RunConfig", "ConsumerEntry", "PlantsEntry", "GammaEntry",
    "DisturbanceEntry", "StrategyEntry", "load_config", "parse_config",
    "dump_config", "bundled_config",
]

PLANT_PRESETS = ("unity", "first_order", "explicit")
GAMMA_MODES = ("zero", "unbounded", "explicit", "design")
DISTURBANCE_MODES = ("filtered_gaussian", "step_hold", "none")
STRATEGIES = ("selfish", "equal_split", "adversarial")


@dataclass(frozen=True)
class ConsumerEntry:
    a: float
    b: float
    m: float | None = None
    floor: float = 0.0

    def spec(self) -> ConsumerSpec:
        cap = math.inf if self.m is None else 0.2 * self.m
        return ConsumerSpec(a=self.a, b=self.b, cap=cap, floor=self.floor)


@dataclass(frozen=True)
class PlantsEntry:
    preset: str = "unity"
    taus: tuple[float, ...] | None = None
    systems: tuple[TransferFunction, ...] | None = None

    def transfer_functions(self, n: int) -> list[TransferFunction]:
        if self.preset == "unity":
            return [TransferFunction([1.0], [1.0]) for _ in range(n)]
        if self.preset == "first_order":
            taus = self.taus if self.taus is not None else tuple(np.linspace(0.05, 0.2, n))
            return [TransferFunction([1.0], [t, 1.0]) for t in taus]
        return list(self.systems or ())


@dataclass(frozen=True)
class GammaEntry:
    mode: str = "unbounded"
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None
    epsilon: float | None = None
    d_l2: float | str | None = None
    weights: tuple[float, ...] | None = None
    scale: float = 1.0


@dataclass(frozen=True)
class DisturbanceEntry:
    mode: str = "filtered_gaussian"
    seed: int = 0
    variance: float = 10.0
    period: float = 1.0
    level: float = 0.0
    start: float = 0.0


@dataclass(frozen=True)
class StrategyEntry:
    kind: str = "selfish"
    seed: int = 0
    redraw_every: int = 1
    freeze_after: int | None = None

    def build(self):
        if self.kind == "selfish":
            return Selfish()
        if self.kind == "equal_split":
            return EqualSplit()
        return Adversarial(self.seed, self.redraw_every, self.freeze_after)


@dataclass(frozen=True)
class RunConfig:
    consumers: tuple[ConsumerEntry, ...]
    plants: PlantsEntry = PlantsEntry()
    filter_f: TransferFunction = TransferFunction([1.0], [1.5, 1.0])
    filter_fd: TransferFunction = TransferFunction([1.0], [10.0, 1.0])
    gamma: GammaEntry = GammaEntry()
    reference: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    disturbance: DisturbanceEntry = DisturbanceEntry()
    strategy: StrategyEntry = StrategyEntry()
    horizon: int = 6000
    step: float = 0.01
    output_dir: str = "out"
    run_id: str = "run"

    @property
    def n(self) -> int:
        return len(self.consumers)

    def specs(self) -> list[ConsumerSpec]:
        return [c.spec() for c in self.consumers]

    def plant_tfs(self) -> list[TransferFunction]:
        return self.plants.transfer_functions(self.n)

    def reference_samples(self) -> np.ndarray:
        t = self.step * np.arange(self.horizon + 1)
        r = np.zeros_like(t)
        for start, value in sorted(self.reference):
            r[t >= start - 1e-9 * self.step] = value
        return r

    def replace(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "run_id": self.run_id, "step": self.step, "horizon": self.horizon,
            "output_dir": self.output_dir,
        }
        out["consumers"] = [_drop_none(asdict(c)) for c in self.consumers]
        plants: dict[str, Any] = {"preset": self.plants.preset}
        if self.plants.taus is not None:
            plants["taus"] = list(self.plants.taus)
        if self.plants.systems is not None:
            plants["systems"] = [s.to_dict() for s in self.plants.systems]
        out["plants"] = plants
        out["filter_f"] = self.filter_f.to_dict()
        out["filter_fd"] = self.filter_fd.to_dict()
        out["gamma"] = _drop_none({k: (list(v) if isinstance(v, tuple) else v)
                                   for k, v in asdict(self.gamma).items()})
        out["reference"] = {"segments": [list(s) for s in self.reference]}
        out["disturbance"] = asdict(self.disturbance)
        out["strategy"] = _drop_none(asdict(self.strategy))
        return out


def _drop_none(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None}


def dump_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


# ---------------------------------------------------------------------------
# parsing and validation

class _Locator:
    """Maps a key path to the line of the TOML source that defines it."""

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def find(self, *path) -> int | None:
        table, rest = path[0], path[1:]
        index = None
        if rest and isinstance(rest[0], int):
            index, rest = rest[0], rest[1:]
        key = rest[0] if rest else None
        header = re.compile(r"^\s*\[\[?\s*" + re.escape(table) + r"\s*\]\]?\s*$")
        any_header = re.compile(r"^\s*\[")
        seen = -1
        start = None
        for i, line in enumerate(self.lines):
            if header.match(line):
                seen += 1
                if index is None or seen == index:
                    start = i
                    break
        if start is None:
            # top-level key or inline table
            pat = re.compile(r"^\s*" + re.escape(table) + r"\s*=")
            for i, line in enumerate(self.lines):
                if pat.match(line):
                    return i + 1
            return None
        if key is None:
            return start + 1
        pat = re.compile(r"^\s*" + re.escape(str(key)) + r"\s*=")
        for i in range(start + 1, len(self.lines)):
            if any_header.match(self.lines[i]):
                break
            if pat.match(self.lines[i]):
                return i + 1
        return start + 1


def _num(value, where, loc, positive=False, nonneg=False, allow_inf=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{'.'.join(map(str, where))}: expected a number, got {value!r}",
                          loc.find(*where))
    x = float(value)
    if math.isnan(x) or (math.isinf(x) and not allow_inf):
        raise ConfigError(f"{'.'.join(map(str, where))}: must be finite", loc.find(*where))
    if positive and not x > 0:
        raise ConfigError(f"{'.'.join(map(str, where))}: must be > 0", loc.find(*where))
    if nonneg and not x >= 0:
        raise ConfigError(f"{'.'.join(map(str, where))}: must be >= 0", loc.find(*where))
    return x


def _int(value, where, loc, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{'.'.join(map(str, where))}: expected an integer",
                          loc.find(*where))
    if minimum is not None and value < minimum:
        raise ConfigError(f"{'.'.join(map(str, where))}: must be >= {minimum}",
                          loc.find(*where))
    return value


def _choice(value, options, where, loc) -> str:
    if value not in options:
        raise ConfigError(f"{'.'.join(map(str, where))}: must be one of {list(options)}, "
                          f"got {value!r}", loc.find(*where))
    return value


def _vector(value, n, where, loc, **kw) -> tuple[float, ...]:
    if not isinstance(value, list):
        raise ConfigError(f"{'.'.join(map(str, where))}: expected a list", loc.find(*where))
    if n is not None and len(value) != n:
        raise ConfigError(f"{'.'.join(map(str, where))}: expected {n} entries, got {len(value)}",
                          loc.find(*where))
    return tuple(_num(v, where, loc, **kw) for v in value)


def _tf(value, where, loc, need_stable=True) -> TransferFunction:
    if not isinstance(value, dict) or "num" not in value or "den" not in value:
        raise ConfigError(f"{'.'.join(map(str, where))}: expected a table with num and den",
                          loc.find(*where))
    num = _vector(value["num"], None, where, loc)
    den = _vector(value["den"], None, where, loc)
    try:
        tf = TransferFunction(num, den)
    except ValueError as exc:
        raise ConfigError(f"{'.'.join(map(str, where))}: {exc}", loc.find(*where)) from None
    name = ".".join(map(str, where))
    if not tf.is_proper():
        raise ConfigError(f"{name}: improper, numerator {list(tf.num)} has higher degree "
                          f"than denominator {list(tf.den)}", loc.find(*where))
    if need_stable and not tf.is_stable():
        raise ConfigError(f"{name}: denominator polynomial {list(tf.den)} is not stable "
                          f"(poles {np.round(tf.poles(), 6).tolist()})", loc.find(*where))
    return tf


def _known(table: dict, keys, where, loc):
    for k in table:
        if k not in keys:
            raise ConfigError(f"{'.'.join(map(str, where))}: unknown key {k!r}",
                              loc.find(*where, k) if where else loc.find(k))


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML run configuration."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax: {exc}", int(m.group(1)) if m else None) from None
    loc = _Locator(text)
    _known(raw, {"run_id", "step", "horizon", "output_dir", "consumers", "plants",
                 "filter_f", "filter_fd", "gamma", "reference", "disturbance",
                 "strategy"}, (), loc)

    consumers_raw = raw.get("consumers", [])
    if not isinstance(consumers_raw, list) or len(consumers_raw) < 1:
        raise ConfigError("consumers: must be ≥ 1", loc.find("consumers") or 1)
    consumers = []
    for i, c in enumerate(consumers_raw):
        _known(c, {"a", "b", "m", "floor"}, ("consumers", i), loc)
        for key in ("a", "b"):
            if key not in c:
                raise ConfigError(f"consumers.{i}: missing {key!r}", loc.find("consumers", i))
        a = _num(c["a"], ("consumers", i, "a"), loc, positive=True)
        b = _num(c["b"], ("consumers", i, "b"), loc)
        m = _num(c["m"], ("consumers", i, "m"), loc, nonneg=True) if "m" in c else None
        floor = _num(c.get("floor", 0.0), ("consumers", i, "floor"), loc, allow_inf=True)
        if m is not None and floor > 0.2 * m:
            raise ConfigError(f"consumers.{i}: floor {floor} exceeds cap {0.2 * m}",
                              loc.find("consumers", i, "floor"))
        consumers.append(ConsumerEntry(a=a, b=b, m=m, floor=floor))
    n = len(consumers)

    step = _num(raw.get("step", 0.01), ("step",), loc, positive=True)
    horizon = _int(raw.get("horizon", 6000), ("horizon",), loc, minimum=1)

    p = raw.get("plants", {})
    _known(p, {"preset", "taus", "systems"}, ("plants",), loc)
    preset = _choice(p.get("preset", "unity"), PLANT_PRESETS, ("plants", "preset"), loc)
    taus = systems = None
    if preset == "first_order" and "taus" in p:
        taus = _vector(p["taus"], n, ("plants", "taus"), loc, positive=True)
    if preset == "explicit":
        raw_sys = p.get("systems")
        if not isinstance(raw_sys, list) or len(raw_sys) != n:
            raise ConfigError(f"plants.systems: expected {n} systems", loc.find("plants", "systems"))
        systems = tuple(_tf(s, ("plants", "systems"), loc) for s in raw_sys)
        for s in systems:
            if abs(dc_gain(s) - 1.0) > 1e-6:
                raise ConfigError(f"plants.systems: {s!r} must have unit DC gain",
                                  loc.find("plants", "systems"))
    plants = PlantsEntry(preset=preset, taus=taus, systems=systems)

    f = _tf(raw.get("filter_f", {"num": [1.0], "den": [1.5, 1.0]}), ("filter_f",), loc)
    if abs(dc_gain(f) - 1.0) > 1e-9:
        raise ConfigError(f"filter_f: DC gain must be 1, got {dc_gain(f)}", loc.find("filter_f"))
    fd = _tf(raw.get("filter_fd", {"num": [1.0], "den": [10.0, 1.0]}), ("filter_fd",), loc)

    g = raw.get("gamma", {})
    _known(g, {"mode", "lower", "upper", "epsilon", "d_l2", "weights", "scale"}, ("gamma",), loc)
    mode = _choice(g.get("mode", "unbounded"), GAMMA_MODES, ("gamma", "mode"), loc)
    gamma_kw: dict[str, Any] = {"mode": mode,
                                "scale": _num(g.get("scale", 1.0), ("gamma", "scale"), loc,
                                              nonneg=True)}
    if mode == "explicit":
        for key in ("lower", "upper"):
            if key not in g:
                raise ConfigError(f"gamma: explicit mode needs {key!r}", loc.find("gamma"))
            gamma_kw[key] = _vector(g[key], n, ("gamma", key), loc, nonneg=True, allow_inf=True)
    if mode == "design":
        if "epsilon" not in g:
            raise ConfigError("gamma: design mode needs 'epsilon'", loc.find("gamma"))
        gamma_kw["epsilon"] = _num(g["epsilon"], ("gamma", "epsilon"), loc, positive=True)
        d_l2 = g.get("d_l2", "realized")
        if d_l2 != "realized":
            d_l2 = _num(d_l2, ("gamma", "d_l2"), loc, positive=True)
        gamma_kw["d_l2"] = d_l2
        if "weights" in g:
            w = _vector(g["weights"], n, ("gamma", "weights"), loc, nonneg=True)
            if abs(sum(w) - 1.0) > 1e-9:
                raise ConfigError("gamma.weights: must sum to 1", loc.find("gamma", "weights"))
            gamma_kw["weights"] = w
    gamma = GammaEntry(**gamma_kw)

    ref = raw.get("reference", {"segments": [[0.0, 0.0]]})
    _known(ref, {"segments"}, ("reference",), loc)
    segs = ref.get("segments", [])
    if not isinstance(segs, list) or not segs:
        raise ConfigError("reference.segments: need at least one [start, value] pair",
                          loc.find("reference", "segments"))
    reference = []
    for s in segs:
        if not isinstance(s, list) or len(s) != 2:
            raise ConfigError("reference.segments: each segment is [start, value]",
                              loc.find("reference", "segments"))
        reference.append((_num(s[0], ("reference", "segments"), loc, nonneg=True),
                          _num(s[1], ("reference", "segments"), loc)))

    d = raw.get("disturbance", {})
    _known(d, {"mode", "seed", "variance", "period", "level", "start"}, ("disturbance",), loc)
    disturbance = DisturbanceEntry(
        mode=_choice(d.get("mode", "filtered_gaussian"), DISTURBANCE_MODES,
                     ("disturbance", "mode"), loc),
        seed=_int(d.get("seed", 0), ("disturbance", "seed"), loc, minimum=0),
        variance=_num(d.get("variance", 10.0), ("disturbance", "variance"), loc, nonneg=True),
        period=_num(d.get("period", 1.0), ("disturbance", "period"), loc, positive=True),
        level=_num(d.get("level", 0.0), ("disturbance", "level"), loc),
        start=_num(d.get("start", 0.0), ("disturbance", "start"), loc, nonneg=True),
    )

    s = raw.get("strategy", {})
    _known(s, {"kind", "seed", "redraw_every", "freeze_after"}, ("strategy",), loc)
    strategy = StrategyEntry(
        kind=_choice(s.get("kind", "selfish"), STRATEGIES, ("strategy", "kind"), loc),
        seed=_int(s.get("seed", 0), ("strategy", "seed"), loc, minimum=0),
        redraw_every=_int(s.get("redraw_every", 1), ("strategy", "redraw_every"), loc, minimum=1),
        freeze_after=(_int(s["freeze_after"], ("strategy", "freeze_after"), loc, minimum=0)
                      if "freeze_after" in s else None),
    )

    run_id = raw.get("run_id", "run")
    if not isinstance(run_id, str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", run_id):
        raise ConfigError("run_id: letters, digits, '_', '-', '.' only", loc.find("run_id"))
    output_dir = raw.get("output_dir", "out")
    if not isinstance(output_dir, str):
        raise ConfigError("output_dir: expected a string", loc.find("output_dir"))

    cfg = RunConfig(consumers=tuple(consumers), plants=plants, filter_f=f, filter_fd=fd,
                    gamma=gamma, reference=tuple(reference), disturbance=disturbance,
                    strategy=strategy, horizon=horizon, step=step,
                    output_dir=output_dir, run_id=run_id)
    # the controller must be constructible before anything runs
    try:
        build_youla(cfg.plant_tfs(), f, step)
    except WeakControlError as exc:
        raise ConfigError(f"filter_f: {exc}", loc.find("filter_f")) from None
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def bundled_config(name: str = "demo") -> RunConfig:
    """One of the configs shipped with the package (``demo`` or ``surrogate``)."""
    from importlib.resources import files
    return parse_config(files("weakctl.configs").joinpath(f"{name}.toml").read_text())


def gamma_from_entry(entry: GammaEntry, n: int) -> GammaBounds | None:
    """Bounds for the non-design modes; ``None`` means design at run time."""
    if entry.mode == "zero":
        return GammaBounds.zero(n)
    if entry.mode == "unbounded":
        return GammaBounds.unbounded(n).scaled(entry.scale)
    if entry.mode == "explicit":
        return GammaBounds(entry.lower, entry.upper).scaled(entry.scale)
    return None
