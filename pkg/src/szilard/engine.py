"""Two-level quantum-dot rate model and exact occupation propagation.

Conventions used throughout the package:

* energies are reduced, ``x = beta * eps``;
* times are reduced, ``s = Gamma_out * t``;
* the tunnelling ratio ``ratio = Gamma_in / Gamma_out`` (2 for a
  spin-degenerate level) enters the occupation equation

      dp/ds = ratio * f(x) - (ratio * f(x) + 1 - f(x)) * p

  which for ``ratio = 2`` is ``dp/ds = 2 f - (1 + f) p``.

A :class:`Protocol` is a sequence of zero-duration jumps and
piecewise-linear ramps of ``x``. For propagation it is lowered to a
:class:`SteppedControl`: ``x`` is frozen at the midpoint value of every
sub-interval, so propagation is exact step by step and second order in
the sub-interval width for smooth ramps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy import constants as sc

LN2 = math.log(2.0)
DEFAULT_RATIO = 2.0
# Sub-steps used when a protocol is evaluated or simulated.
DEFAULT_GRID = 4096

# Boundary-value tolerance for segment continuity and endpoint checks.
_ATOL = 1e-9


class ProtocolError(ValueError):
    """Raised for malformed protocols or protocol files."""


# ---------------------------------------------------------------------------
# Physical parameterization


@dataclass(frozen=True)
class PhysicalParams:
    """Bath temperature and bare tunnelling rates of the dot."""

    beta: float  # 1/J
    gamma_in_bare: float = 7.0  # Hz
    gamma_out_bare: float = 3.5  # Hz

    def __post_init__(self):
        for name in ("beta", "gamma_in_bare", "gamma_out_bare"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")

    @classmethod
    def from_temperature(cls, temperature_k: float, gamma_in_hz: float = 7.0,
                         gamma_out_hz: float = 3.5) -> "PhysicalParams":
        if not temperature_k > 0:
            raise ValueError("temperature must be positive")
        return cls(1.0 / (sc.k * temperature_k), gamma_in_hz, gamma_out_hz)

    @property
    def temperature(self) -> float:
        return 1.0 / (sc.k * self.beta)

    @property
    def e0(self) -> float:
        """Reference energy k_B T ln 2 in joules."""
        return LN2 / self.beta

    @property
    def ratio(self) -> float:
        return self.gamma_in_bare / self.gamma_out_bare

    @property
    def gamma(self) -> float:
        """Rate (Hz) that sets the reduced time unit."""
        return self.gamma_out_bare

    # Reduced <-> SI conversions (the CLI boundary uses these).
    def energy_to_si(self, reduced: float) -> float:
        return reduced / self.beta

    def energy_to_reduced(self, joules: float) -> float:
        return joules * self.beta

    def time_to_si(self, reduced: float) -> float:
        return reduced / self.gamma

    def time_to_reduced(self, seconds: float) -> float:
        return seconds * self.gamma

    def power_to_si(self, reduced: float) -> float:
        return reduced * self.gamma / self.beta


REFERENCE_DEVICE = PhysicalParams.from_temperature(0.180, 7.0, 3.5)


@dataclass(frozen=True)
class LeverArm:
    """Gate-voltage calibration: ``eps = alpha * e * (v - v_ref) + E0``."""

    alpha: float = 0.041
    v_ref: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("lever arm must be positive")


def voltage_to_energy(v: float, cal: LeverArm, params: PhysicalParams) -> float:
    """Reduced energy of the dot level at gate voltage ``v`` (volts)."""
    return params.beta * cal.alpha * sc.e * (v - cal.v_ref) + LN2


def energy_to_voltage(x: float, cal: LeverArm, params: PhysicalParams) -> float:
    return cal.v_ref + (x - LN2) / (params.beta * cal.alpha * sc.e)


# ---------------------------------------------------------------------------
# Rate model


def fermi(x):
    """Fermi function ``1/(1 + e^x)`` of the reduced energy, overflow safe."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("fermi: reduced energy must be finite")
    # exp of a non-positive argument only
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
    return out if out.ndim else float(out)


def rates(x, params: PhysicalParams = REFERENCE_DEVICE):
    """Tunnel-in and tunnel-out rates (Hz) at reduced energy ``x``."""
    f = fermi(x)
    return params.gamma_in_bare * f, params.gamma_out_bare * (1.0 - f)


def reduced_hazards(x, ratio: float = DEFAULT_RATIO):
    """Jump hazards in reduced time: (empty -> occupied, occupied -> empty)."""
    f = fermi(x)
    return ratio * f, 1.0 - f


def equilibrium_occupation(x, ratio: float = DEFAULT_RATIO):
    """Stationary occupation ``ratio f / (ratio f + 1 - f)``."""
    h_in, h_out = reduced_hazards(x, ratio)
    return h_in / (h_in + h_out)


def propagate_constant(p0, x, dt, ratio: float = DEFAULT_RATIO):
    """Exact occupation after reduced time ``dt`` at fixed energy ``x``."""
    dt = np.asarray(dt, dtype=float)
    if np.any(dt < 0):
        raise ValueError("propagate_constant: dt must be non-negative")
    h_in, h_out = reduced_hazards(x, ratio)
    total = h_in + h_out
    p_eq = h_in / total
    out = p_eq + (np.asarray(p0, dtype=float) - p_eq) * np.exp(-total * dt)
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Protocols


@dataclass(frozen=True)
class Jump:
    """Instantaneous change of the reduced energy."""

    start: float
    end: float

    duration = 0.0

    def to_json(self) -> dict:
        return {"kind": "jump", "from": self.start, "to": self.end}


@dataclass(frozen=True)
class Ramp:
    """Piecewise-linear ramp; ``times`` are offsets from the ramp start."""

    times: np.ndarray
    values: np.ndarray

    def __init__(self, times: Sequence[float], values: Sequence[float]):
        t = np.array(times, dtype=float)
        v = np.array(values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise ProtocolError("ramp needs matching 1-d time/value arrays with >= 2 samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ProtocolError("ramp samples must be finite")
        if abs(t[0]) > _ATOL:
            raise ProtocolError("ramp sample times must start at 0")
        if np.any(np.diff(t) <= 0):
            raise ProtocolError("ramp sample times must be strictly increasing")
        t[0] = 0.0
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def linear(cls, duration: float, start: float, end: float) -> "Ramp":
        return cls([0.0, duration], [start, end])

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def start(self) -> float:
        return float(self.values[0])

    @property
    def end(self) -> float:
        return float(self.values[-1])

    def __eq__(self, other):
        if not isinstance(other, Ramp):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.times.tobytes(), self.values.tobytes()))

    def to_json(self) -> dict:
        return {"kind": "ramp", "duration": self.duration,
                "samples": [[float(t), float(v)] for t, v in zip(self.times, self.values)]}


Segment = Union[Jump, Ramp]


@dataclass(frozen=True)
class Protocol:
    """Control schedule of the reduced energy for one measurement branch."""

    branch: int
    segments: tuple
    boundary: float | None = LN2  # required start/end value; None disables the check

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.branch not in (0, 1):
            raise ProtocolError(f"branch must be 0 or 1, got {self.branch!r}")
        if not self.segments:
            raise ProtocolError("protocol has no segments")
        for seg in self.segments:
            if not isinstance(seg, (Jump, Ramp)):
                raise ProtocolError(f"unknown segment {seg!r}")
            if isinstance(seg, Jump) and not (math.isfinite(seg.start) and math.isfinite(seg.end)):
                raise ProtocolError("jump values must be finite")
        for a, b in zip(self.segments, self.segments[1:]):
            if abs(a.end - b.start) > _ATOL:
                raise ProtocolError(f"discontinuous segments: {a.end!r} -> {b.start!r}")
        if self.boundary is not None:
            if abs(self.start - self.boundary) > _ATOL or abs(self.end - self.boundary) > _ATOL:
                raise ProtocolError(
                    f"protocol must start and end at {self.boundary!r}, "
                    f"got {self.start!r} ... {self.end!r}")

    @property
    def start(self) -> float:
        return self.segments[0].start

    @property
    def end(self) -> float:
        return self.segments[-1].end

    @property
    def gamma_tau(self) -> float:
        return float(sum(seg.duration for seg in self.segments))

    def value_at(self, s: float) -> float:
        """Energy at reduced time ``s``, taking jumps at ``s`` as already done."""
        t0 = 0.0
        value = self.start
        for seg in self.segments:
            if isinstance(seg, Jump):
                if s < t0:
                    break
                value = seg.end
                continue
            if s < t0:
                break
            if s < t0 + seg.duration:
                return float(np.interp(s - t0, seg.times, seg.values))
            value = seg.end
            t0 += seg.duration
        return value

    def shifted(self, delta: float, endpoints: bool = False) -> "Protocol":
        """Constant energy offset of the protocol.

        With ``endpoints=False`` only the driven part moves and the boundary
        jumps absorb the offset, so the cycle still starts and ends at the
        boundary value.
        """
        segs: list[Segment] = []
        for seg in self.segments:
            if isinstance(seg, Jump):
                segs.append(Jump(seg.start + delta, seg.end + delta))
            else:
                segs.append(Ramp(seg.times, seg.values + delta))
        if endpoints:
            boundary = None if self.boundary is None else self.boundary + delta
            return Protocol(self.branch, segs, boundary)
        if self.boundary is None:
            return Protocol(self.branch, segs, None)
        b = self.boundary
        first, last = segs[0], segs[-1]
        if isinstance(first, Jump):
            segs[0] = Jump(b, first.end)
        else:
            segs.insert(0, Jump(b, first.start))
        last = segs[-1]
        if isinstance(last, Jump) and len(segs) > 1:
            segs[-1] = Jump(last.start, b)
        else:
            segs.append(Jump(last.end, b))
        return Protocol(self.branch, segs, b)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        return {"branch": self.branch, "gamma_tau": self.gamma_tau,
                "segments": [seg.to_json() for seg in self.segments]}

    @classmethod
    def from_json(cls, data: dict, boundary: float | None = LN2) -> "Protocol":
        if not isinstance(data, dict):
            raise ProtocolError("protocol must be a JSON object")
        for key in ("branch", "gamma_tau", "segments"):
            if key not in data:
                raise ProtocolError(f"missing field '{key}'")
        segs: list[Segment] = []
        for i, item in enumerate(data["segments"]):
            where = f"segments[{i}]"
            kind = item.get("kind") if isinstance(item, dict) else None
            if kind == "jump":
                try:
                    segs.append(Jump(float(item["from"]), float(item["to"])))
                except (KeyError, TypeError, ValueError) as exc:
                    raise ProtocolError(f"{where}: bad jump ({exc})") from None
            elif kind == "ramp":
                try:
                    samples = np.asarray(item["samples"], dtype=float)
                    duration = float(item["duration"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise ProtocolError(f"{where}: bad ramp ({exc})") from None
                if samples.ndim != 2 or samples.shape[1] != 2:
                    raise ProtocolError(f"{where}.samples: expected [[t, beta_eps], ...]")
                try:
                    ramp = Ramp(samples[:, 0], samples[:, 1])
                except ProtocolError as exc:
                    raise ProtocolError(f"{where}.samples: {exc}") from None
                if abs(ramp.duration - duration) > _ATOL * max(1.0, duration):
                    raise ProtocolError(f"{where}.duration: {duration} != last sample time {ramp.duration}")
                segs.append(ramp)
            else:
                raise ProtocolError(f"{where}.kind: expected 'jump' or 'ramp', got {kind!r}")
        try:
            branch = int(data["branch"])
        except (TypeError, ValueError):
            raise ProtocolError("branch: expected 0 or 1") from None
        proto = cls(branch, segs, boundary)
        gt = float(data["gamma_tau"])
        if abs(proto.gamma_tau - gt) > _ATOL * max(1.0, gt):
            raise ProtocolError(f"gamma_tau: {gt} != total ramp duration {proto.gamma_tau}")
        return proto

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "Protocol":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"not valid JSON: {exc}") from None
        return cls.from_json(data)


def piecewise_constant_protocol(levels: Sequence[float], durations: Sequence[float] | float,
                                branch: int = 0, boundary: float = LN2) -> Protocol:
    """Protocol holding ``levels[i]`` for ``durations[i]``, jumping in between."""
    levels = np.asarray(levels, dtype=float)
    durations = np.broadcast_to(np.asarray(durations, dtype=float), levels.shape)
    segs: list[Segment] = []
    prev = boundary
    for lev, d in zip(levels, durations):
        segs.append(Jump(prev, float(lev)))
        segs.append(Ramp.linear(float(d), float(lev), float(lev)))
        prev = float(lev)
    segs.append(Jump(prev, boundary))
    return Protocol(branch, segs, boundary)


# ---------------------------------------------------------------------------
# Stepped (piecewise-constant) lowering


@dataclass(frozen=True)
class SteppedControl:
    """Piecewise-constant control: ``levels[k]`` holds on ``[times[k], times[k+1])``.

    Control increments happen at every entry of ``times``; ``increments[k]``
    is the energy change at ``times[k]`` (including the boundary jumps).
    """

    times: np.ndarray
    levels: np.ndarray
    start: float
    end: float
    increments: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.times.size != self.levels.size + 1:
            raise ValueError("need one more time than levels")
        if np.any(np.diff(self.times) < 0):
            raise ValueError("times must be non-decreasing")
        if self.levels.size:
            inc = np.diff(np.concatenate(([self.start], self.levels, [self.end])))
        else:
            inc = np.array([self.end - self.start])
        object.__setattr__(self, "increments", inc)

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def gamma_tau(self) -> float:
        return float(self.times[-1])

    def decay_exponents(self, ratio: float = DEFAULT_RATIO) -> np.ndarray:
        """Cumulative relaxation exponent at ``times`` (memory-loss integral)."""
        h_in, h_out = reduced_hazards(self.levels, ratio)
        return np.concatenate(([0.0], np.cumsum((h_in + h_out) * self.durations)))


def discretize(protocol: Protocol, grid_points: int = 2) -> SteppedControl:
    """Lower a protocol to midpoint-frozen steps.

    Every linear piece of every ramp is split into sub-intervals, at least
    one each and ``grid_points - 1`` in total proportionally to duration.
    All ramp samples and segment boundaries are grid times.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    total = protocol.gamma_tau
    times = [0.0]
    levels: list[np.ndarray] = []
    t0 = 0.0
    for seg in protocol.segments:
        if isinstance(seg, Jump) or seg.duration == 0.0:
            continue
        for a, b, va, vb in zip(seg.times[:-1], seg.times[1:], seg.values[:-1], seg.values[1:]):
            n = max(1, math.ceil((grid_points - 1) * (b - a) / total - 1e-9))
            u = (np.arange(n) + 0.5) / n
            levels.append(va + (vb - va) * u)
            times.extend((t0 + a + (b - a) * np.arange(1, n + 1) / n).tolist())
            times[-1] = t0 + b
        t0 += seg.duration
    lev = np.concatenate(levels) if levels else np.empty(0)
    return SteppedControl(np.asarray(times), lev, protocol.start, protocol.end)


def _as_control(protocol, grid_points: int) -> SteppedControl:
    if isinstance(protocol, SteppedControl):
        return protocol
    return discretize(protocol, grid_points)


def propagate_control(p0: float, control: SteppedControl, ratio: float = DEFAULT_RATIO) -> np.ndarray:
    """Occupation at every grid time of a stepped control."""
    h_in, h_out = reduced_hazards(control.levels, ratio)
    rate = h_in + h_out
    p_eq = h_in / rate
    decay = np.exp(-rate * control.durations)
    p = np.empty(control.times.size)
    p[0] = p0
    for k in range(control.levels.size):
        p[k + 1] = p_eq[k] + (p[k] - p_eq[k]) * decay[k]
    return np.clip(p, 0.0, 1.0)


def propagate_protocol(p0: float, protocol: Protocol, grid_points: int = 2,
                       ratio: float = DEFAULT_RATIO) -> tuple[np.ndarray, np.ndarray]:
    """Occupation along a protocol; returns ``(times, p)`` on the step grid."""
    if not 0.0 <= p0 <= 1.0:
        raise ValueError("p0 must be a probability")
    control = _as_control(protocol, grid_points)
    return control.times, propagate_control(p0, control, ratio)


def _propagate_between(p: float, control: SteppedControl, t_a: float, t_b: float,
                       ratio: float) -> float:
    times = control.times
    for k in range(control.levels.size):
        lo = max(t_a, times[k])
        hi = min(t_b, times[k + 1])
        if hi > lo:
            p = propagate_constant(p, control.levels[k], hi - lo, ratio)
    return p


def conditional_propagator(protocol, t_prime: float, t: float, grid_points: int = 2,
                           ratio: float = DEFAULT_RATIO) -> float:
    """Probability of occupation at ``t`` given occupation at ``t_prime``."""
    if t < t_prime:
        raise ValueError("conditional_propagator: need t >= t_prime")
    control = _as_control(protocol, grid_points)
    if t_prime < 0 or t > control.gamma_tau + _ATOL:
        raise ValueError("conditional_propagator: times outside the protocol")
    return float(_propagate_between(1.0, control, t_prime, t, ratio))

