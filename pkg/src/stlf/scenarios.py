"""Deterministic desk-scale driving simulators.

Two scenarios are provided:

* the longitudinal two-car scenario: an adversarial lead vehicle driven by
  acceleration input ``xi`` and drive mode ``mu``, followed by an ego car
  running a PD adaptive cruise controller;
* a perception-fault scenario: the ego drives straight while a pedestrian
  crosses its path, observed through per-sensor visibility, detection and
  localization-error channels into which faults are injected.

Both integrate with forward Euler at a fixed step and return a
:class:`~stlf.trace.Trace` whose last timestamp is exactly T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .trace import BOOLEAN, SignalSpace, Trace

DT = 0.05


class ScenarioError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Input signals


@dataclass(frozen=True)
class InputSignal:
    """Control points of one input channel.

    ``interpolation`` is "linear" (piecewise linear, held after the last
    point) or "hold" (zero-order hold).
    """

    times: tuple[float, ...]
    values: tuple[float, ...]
    interpolation: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.times) != len(self.values) or not self.times:
            raise ScenarioError("input signal needs matching, non-empty times and values")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ScenarioError("input timestamps must be strictly increasing")
        if self.interpolation not in ("linear", "hold"):
            raise ScenarioError(f"unknown interpolation {self.interpolation!r}")

    @classmethod
    def constant(cls, value: float, interpolation: str = "hold") -> "InputSignal":
        return cls((0.0,), (value,), interpolation)

    @classmethod
    def evenly_spaced(cls, values: Sequence[float], T: float, interpolation: str = "linear") -> "InputSignal":
        if len(values) == 1:
            return cls((0.0,), tuple(values), interpolation)
        return cls(tuple(np.linspace(0.0, T, len(values))), tuple(values), interpolation)


@dataclass(frozen=True)
class InputTrace:
    signals: Mapping[str, InputSignal]
    duration: float

    def __post_init__(self):
        object.__setattr__(self, "signals", dict(self.signals))
        for name, sig in self.signals.items():
            if sig.times[-1] > self.duration + 1e-12:
                raise ScenarioError(f"input {name!r} has timestamps beyond T={self.duration}")


def interpolate_input(u: InputTrace, t: float, channel: str) -> float:
    sig = u.signals[channel]
    if t < sig.times[0] - 1e-12 or t > u.duration + 1e-12:
        raise ScenarioError(f"time {t} outside input range [{sig.times[0]}, {u.duration}]")
    times = sig.times
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = max(k, 0)
    if sig.interpolation == "hold" or k >= len(times) - 1:
        return sig.values[k]
    t0, t1 = times[k], times[k + 1]
    v0, v1 = sig.values[k], sig.values[k + 1]
    return v0 + (v1 - v0) * (t - t0) / (t1 - t0)


def _time_grid(T: float, dt: float) -> np.ndarray:
    if not T > 0:
        raise ScenarioError(f"simulation time must be positive, got {T}")
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9:
        raise ScenarioError(f"T={T} is not a multiple of dt={dt}")
    times = np.round(np.arange(n + 1) * dt, 12)
    times[-1] = T
    return times


# ---------------------------------------------------------------------------
# Two-car ACC scenario

ACC_MIN, ACC_MAX = -6.0, 3.0


@dataclass(frozen=True)
class TwoCarState:
    z_ego: float
    v_ego: float
    z_agent: float
    v_agent: float


@dataclass(frozen=True)
class ACCGains:
    standstill_gap: float = 5.0
    headway: float = 1.2
    kp: float = 0.3
    kd: float = 0.8
    emergency_gap: float = 2.0


def ego_acc_controller(state: TwoCarState, gains: ACCGains = ACCGains()) -> float:
    """PD law on the gap error towards a constant-time-headway target gap."""
    gap = state.z_agent - state.z_ego
    if gap < gains.emergency_gap:
        return ACC_MIN
    desired = gains.standstill_gap + gains.headway * state.v_ego
    acc = gains.kp * (gap - desired) + gains.kd * (state.v_agent - state.v_ego)
    return min(max(acc, ACC_MIN), ACC_MAX)


TWO_CAR_SPACE = SignalSpace(
    outputs=("z_ego", "z_agent", "v_ego", "v_agent"), inputs=("xi", "mu")
)


def simulate_two_car(
    x0: TwoCarState, u: InputTrace, T: float = 10.0, dt: float = DT, gains: ACCGains = ACCGains()
) -> Trace:
    if not x0.z_agent > x0.z_ego:
        raise ScenarioError("agent must start ahead of the ego vehicle")
    if x0.v_agent < 0 or x0.v_ego < 0:
        raise ScenarioError("initial velocities must be non-negative")
    if abs(u.duration - T) > 1e-12:
        raise ScenarioError("input trace duration must equal T")
    times = _time_grid(T, dt)
    n = len(times)
    out = {name: np.empty(n) for name in TWO_CAR_SPACE.channels}
    ze, ve, za, va = x0.z_ego, x0.v_ego, x0.z_agent, x0.v_agent
    for k, t in enumerate(times):
        xi = min(max(interpolate_input(u, t, "xi"), -1.0), 1.0)
        mu = interpolate_input(u, t, "mu")
        out["z_ego"][k], out["z_agent"][k] = ze, za
        out["v_ego"][k], out["v_agent"][k] = ve, va
        out["xi"][k], out["mu"][k] = xi, mu
        if k == n - 1:
            break
        acc = ego_acc_controller(TwoCarState(ze, ve, za, va), gains)
        ze, ve = ze + ve * dt, max(ve + acc * dt, 0.0)
        za, va = za + mu * va * dt, max(va + xi * dt, 0.0)
    return Trace(TWO_CAR_SPACE, times, out, {}, T)


# ---------------------------------------------------------------------------
# CTRV prediction


@dataclass(frozen=True)
class CTRVState:
    x: float
    y: float
    heading: float
    speed: float
    yaw_rate: float = 0.0

    def __post_init__(self):
        if self.speed < 0:
            raise ScenarioError("CTRV speed must be non-negative")


def ctrv_predict(s: CTRVState, horizon: float, dt: float) -> np.ndarray:
    """Predicted (x, y, heading) rows at 0, dt, ..., horizon."""
    if not dt > 0 or horizon < 0:
        raise ScenarioError("need dt > 0 and horizon >= 0")
    steps = int(round(horizon / dt))
    out = np.empty((steps + 1, 3))
    x, y, th = s.x, s.y, s.heading
    v, w = s.speed, s.yaw_rate
    out[0] = x, y, th
    for k in range(1, steps + 1):
        if abs(w) > 1e-6:
            x += v / w * (math.sin(th + w * dt) - math.sin(th))
            y += v / w * (-math.cos(th + w * dt) + math.cos(th))
        else:
            x += v * dt * math.cos(th)
            y += v * dt * math.sin(th)
        th += w * dt
        out[k] = x, y, th
    return out


def ctrv_min_future_distance(ego: CTRVState, agent: CTRVState, horizon: float = 3.0, dt: float = 0.1) -> float:
    a = ctrv_predict(ego, horizon, dt)
    b = ctrv_predict(agent, horizon, dt)
    return float(np.min(np.hypot(a[:, 0] - b[:, 0], a[:, 1] - b[:, 1])))


# ---------------------------------------------------------------------------
# Perception-fault scenario

SENSORS = ("camera", "lidar", "radar")
BASELINE_ERROR = 0.1
MAX_DECEL = 8.0


@dataclass(frozen=True)
class Sensor:
    name: str
    range: float = 60.0
    half_angle: float = math.radians(60.0)


@dataclass(frozen=True)
class Fault:
    """Fault window on one sensor: optional dropout plus an error spike."""

    sensor: str
    start: float
    duration: float
    dropout: bool = True
    error: float = 0.0


@dataclass(frozen=True)
class PerceptionParams:
    ego_speed: float = 15.0
    crossing_x: float = 40.0  # where the pedestrian path crosses the ego lane
    ped_start_y: float = -4.0
    ped_speed: float = 1.5
    ego_radius: float = 1.0
    ped_radius: float = 0.3
    sensors: tuple[Sensor, ...] = tuple(Sensor(s) for s in SENSORS[:2])
    # ego brakes when the predicted clearance from perceived states drops below this
    brake_clearance: float = 2.5
    stop_margin: float = 2.0


def perception_space(object_id: str, sensors: Sequence[str]) -> SignalSpace:
    names = list(sensors) + ["combined"]
    outputs = ["x_ego", "v_ego", "x_" + object_id, "y_" + object_id, f"dist_{object_id}"]
    kinds = {}
    for s in names:
        w, d, e = f"W_{object_id}_{s}", f"D_{object_id}_{s}", f"E_{object_id}_{s}"
        outputs += [w, d, e]
        kinds[w] = kinds[d] = BOOLEAN
    outputs += ["br", "B", "dfmin", "FC"]
    kinds["B"] = kinds["FC"] = BOOLEAN
    return SignalSpace(tuple(outputs), (), (), kinds)


def _visible(sensor: Sensor, ego_xy, heading: float, obj_xy) -> bool:
    dx, dy = obj_xy[0] - ego_xy[0], obj_xy[1] - ego_xy[1]
    rng = math.hypot(dx, dy)
    if rng > sensor.range:
        return False
    bearing = math.atan2(dy, dx) - heading
    bearing = (bearing + math.pi) % (2 * math.pi) - math.pi
    return abs(bearing) <= sensor.half_angle


def simulate_perception_scenario(
    faults: Sequence[Fault], p: PerceptionParams = PerceptionParams(), T: float = 8.0, dt: float = DT,
    object_id: str = "ped",
) -> Trace:
    """Ego on the x axis heading +x, pedestrian crossing along +y at ``crossing_x``.

    The ego brakes only on fused (combined) detections: it predicts the
    closest approach with CTRV from the perceived pedestrian position, which
    is offset laterally by the fused localization error, and when that
    clearance is small it brakes hard enough to stop ``stop_margin`` short of
    the pedestrian path. ``B`` is br > 0.5; ``FC`` is the ground-truth CTRV
    minimum future distance below 0.5 m.
    """
    sensor_names = [s.name for s in p.sensors]
    for f in faults:
        if f.sensor not in sensor_names:
            raise ScenarioError(f"fault on unknown sensor {f.sensor!r}")
        if f.start < 0 or f.duration < 0 or f.start + f.duration > T + 1e-9:
            raise ScenarioError(f"fault window [{f.start}, {f.start + f.duration}] outside [0, {T}]")
    if math.hypot(p.crossing_x, p.ped_start_y) <= p.ego_radius + p.ped_radius:
        raise ScenarioError("ego and pedestrian footprints overlap initially")
    if p.ego_speed < 0 or p.ped_speed < 0:
        raise ScenarioError("speeds must be non-negative")

    space = perception_space(object_id, sensor_names)
    times = _time_grid(T, dt)
    n = len(times)
    out = {name: np.empty(n) for name in space.channels}
    x_e, v_e = 0.0, p.ego_speed
    x_p, y_p = p.crossing_x, p.ped_start_y
    radii = p.ego_radius + p.ped_radius
    sgn = lambda b: 1.0 if b else -1.0  # noqa: E731
    for k, t in enumerate(times):
        ego_xy, ped_xy = (x_e, 0.0), (x_p, y_p)
        any_det, fused_err = False, math.inf
        for s in p.sensors:
            vis = _visible(s, ego_xy, 0.0, ped_xy)
            det, err = vis, BASELINE_ERROR
            for f in faults:
                if f.sensor == s.name and f.start <= t < f.start + f.duration:
                    det = det and not f.dropout
                    err += f.error
            out[f"W_{object_id}_{s.name}"][k] = sgn(vis)
            out[f"D_{object_id}_{s.name}"][k] = sgn(det)
            out[f"E_{object_id}_{s.name}"][k] = err
            if det:
                any_det = True
                fused_err = min(fused_err, err)
        any_vis = any(out[f"W_{object_id}_{s}"][k] > 0 for s in sensor_names)
        out[f"W_{object_id}_combined"][k] = sgn(any_vis)
        out[f"D_{object_id}_combined"][k] = sgn(any_det)
        out[f"E_{object_id}_combined"][k] = fused_err if any_det else BASELINE_ERROR

        br = 0.0
        if any_det:
            # perceived pedestrian is displaced away from the lane by the error
            perceived_y = y_p - fused_err if y_p < 0 else y_p + fused_err
            clearance = ctrv_min_future_distance(
                CTRVState(x_e, 0.0, 0.0, v_e), CTRVState(x_p, perceived_y, math.pi / 2, p.ped_speed)
            )
            ahead = x_p - x_e - radii - p.stop_margin
            if clearance < p.brake_clearance + radii and x_p > x_e and v_e > 0:
                need = v_e**2 / (2.0 * max(ahead, 0.1))
                br = min(max(need / MAX_DECEL, 0.0), 1.0)
        dfmin = ctrv_min_future_distance(
            CTRVState(x_e, 0.0, 0.0, v_e), CTRVState(x_p, y_p, math.pi / 2, p.ped_speed)
        )
        out["x_ego"][k], out["v_ego"][k] = x_e, v_e
        out[f"x_{object_id}"][k], out[f"y_{object_id}"][k] = x_p, y_p
        out[f"dist_{object_id}"][k] = math.hypot(x_p - x_e, y_p) - radii
        out["br"][k] = br
        out["B"][k] = sgn(br > 0.5)
        out["dfmin"][k] = dfmin
        out["FC"][k] = sgn(dfmin < 0.5)
        if k == n - 1:
            break
        x_e += v_e * dt
        v_e = max(v_e - br * MAX_DECEL * dt, 0.0)
        y_p += p.ped_speed * dt
    return Trace(space, times, out, {}, T)
