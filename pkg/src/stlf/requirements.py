"""Builders for the five driving requirements R1-R5.

Channel naming follows the perception scenario: ``dist_<i>`` for the
footprint distance between object ``i`` and the ego, and ``W_<i>_<s>``,
``D_<i>_<s>``, ``E_<i>_<s>`` for visibility, detection and localization
error of object ``i`` by sensor ``s``. Boolean channels are encoded as +1/-1,
so robustness of purely Boolean subformulas has magnitude at most 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .stl import (
    Always,
    And,
    Eventually,
    Formula,
    Implies,
    Interval,
    Next,
    Not,
    Or,
    atom,
    boolean,
    conjunction,
)

SENSOR_TAGS = ("CCD", "camera", "lidar", "radar", "combined")


class RequirementError(ValueError):
    pass


@dataclass(frozen=True)
class RequirementParams:
    eps_dist: float = 0.0
    eps_err: float = 0.5
    t1: float = 0.6
    t2: float = 0.5
    object_ids: tuple[str, ...] = ("ped",)
    sensors: tuple[str, ...] = ("combined",)

    def __post_init__(self):
        object.__setattr__(self, "object_ids", tuple(self.object_ids))
        object.__setattr__(self, "sensors", tuple(self.sensors))
        if self.eps_dist < 0:
            raise RequirementError("eps_dist must be >= 0")
        if not self.eps_err > 0:
            raise RequirementError("eps_err must be > 0")
        if not (self.t1 > 0 and self.t2 > 0):
            raise RequirementError("t1 and t2 must be > 0")
        for s in self.sensors:
            _check_sensor(s)


def _check_sensor(s: str) -> None:
    if s not in SENSOR_TAGS:
        raise RequirementError(f"unknown sensor tag {s!r}; expected one of {SENSOR_TAGS}")


def dist_channel(i: str) -> str:
    return f"dist_{i}"


def channel(kind: str, i: str, s: str) -> str:
    return f"{kind}_{i}_{s}"


def collision(params: RequirementParams, i: str) -> Formula:
    return atom(dist_channel(i), "<", params.eps_dist)


def _poor_detection(params: RequirementParams, i: str, s: str) -> Formula:
    d = boolean(channel("D", i, s))
    return Or(Not(d), atom(channel("E", i, s), ">", params.eps_err))


def build_R1(params: RequirementParams) -> Formula:
    """No collision with any object."""
    if not params.object_ids:
        raise RequirementError("R1 needs at least one object id")
    return conjunction(Always(Interval(), Not(collision(params, i))) for i in params.object_ids)


def build_R2(params: RequirementParams, i: str, s: str) -> Formula:
    """A visible but undetected object is detected (or leaves view) within t1."""
    _check_sensor(s)
    w, d = boolean(channel("W", i, s)), boolean(channel("D", i, s))
    return Always(
        Interval(),
        Implies(And(w, Not(d)), Eventually(Interval(0.0, params.t1, True, True), Or(d, Not(w)))),
    )


def build_R3(params: RequirementParams, i: str, s: str) -> Formula:
    """Poor localization of a visible object does not last longer than t1."""
    _check_sensor(s)
    w, d = boolean(channel("W", i, s)), boolean(channel("D", i, s))
    good = And(d, atom(channel("E", i, s), "<", params.eps_err))
    return Always(
        Interval(),
        Implies(
            And(w, _poor_detection(params, i, s)),
            Eventually(Interval(0.0, params.t1, True, True), Or(Not(w), good)),
        ),
    )


def build_R4(params: RequirementParams, i: str, s: str) -> Formula:
    """A sensor fault of length t1 is not followed by a collision within (t1, t2]."""
    _check_sensor(s)
    if not params.t2 > params.t1:
        raise RequirementError(f"R4 needs t2 > t1, got t1={params.t1}, t2={params.t2}")
    coll = collision(params, i)
    w = boolean(channel("W", i, s))
    fault = Always(
        Interval(0.0, params.t1, True, True), And(And(Not(coll), w), _poor_detection(params, i, s))
    )
    crash = Eventually(Interval(params.t1, params.t2, False, True), coll)
    return Always(Interval(), Not(And(fault, crash)))


def brake_release() -> Formula:
    b = boolean("B")
    return And(b, Next(Not(b)))


def build_R5(params: RequirementParams = RequirementParams()) -> Formula:
    """No prolonged unnecessary braking and no three brake releases in quick succession."""
    b, fc = boolean("B"), boolean("FC")
    edge = brake_release()
    within = Interval(0.0, params.t2, False, True)
    prolonged = Always(Interval(0.0, params.t1, True, True), And(b, Not(fc)))
    chatter = And(edge, Eventually(within, And(edge, Eventually(within, edge))))
    return Always(Interval(), And(Not(prolonged), Not(chatter)))


def build_requirement(name: str, params: RequirementParams, objects: Sequence[str] = (), sensor: str | None = None) -> Formula:
    """Build a requirement by name; R2-R4 are conjoined over objects and sensors."""
    name = name.upper()
    if name == "R1":
        return build_R1(params)
    if name == "R5":
        return build_R5(params)
    builders = {"R2": build_R2, "R3": build_R3, "R4": build_R4}
    if name not in builders:
        raise RequirementError(f"unknown requirement {name!r}")
    objs = tuple(objects) or params.object_ids
    sensors = (sensor,) if sensor else params.sensors
    return conjunction(builders[name](params, i, s) for i in objs for s in sensors)
