"""JSON campaign configuration: scenario binding, requirement, search space, method.

A config is one JSON document::

    {
      "scenario": {"kind": "two_car", "T": 10, "x0": {...}, "inputs": {...}},
      "requirement": {"formula": "[](z_agent - z_ego > 0)"},
      "search": {"continuous": [...], "discrete": [...], "inputs": [...]},
      "method": {"name": "sa", "budget": 100},
      "heatmap": {"grid": [20, 20], "fixed": {"mu": 1}}
    }

Search points are applied to the scenario by name. For ``two_car``,
``z_ego``/``v_ego``/``z_agent``/``v_agent`` override the initial state,
``<channel>[k]`` sets control point k of an input spread evenly over [0, T],
and a bare input channel name sets that input to a constant. For
``perception``, names of :class:`PerceptionParams` fields override
parameters and ``fault.<k>.<field>`` overrides a field of the k-th fault.
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .covering import read_ca
from .optimize import (
    CampaignResult,
    InputVar,
    Objective,
    SAConfig,
    SearchError,
    SearchSpace,
    ca_then_falsify,
    falsify_sa,
    uniform_random_search,
)
from .requirements import RequirementParams, build_requirement
from .scenarios import (
    DT,
    ACCGains,
    Fault,
    InputSignal,
    InputTrace,
    PerceptionParams,
    ScenarioError,
    Sensor,
    TwoCarState,
    perception_space,
    simulate_perception_scenario,
    simulate_two_car,
)
from .stl import Formula, parse_formula
from .trace import Trace


class ConfigError(SearchError):
    """Malformed campaign configuration; always fatal."""


_INPUT_POINT = re.compile(r"^(?P<ch>[A-Za-z_]\w*)\[(?P<k>\d+)\]$")


@dataclass(frozen=True)
class Scenario:
    """A scenario configuration that maps search points to traces."""

    kind: str
    T: float
    dt: float = DT
    x0: Mapping[str, float] = field(default_factory=dict)
    inputs: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    gains: Mapping[str, float] = field(default_factory=dict)
    params: Mapping[str, Any] = field(default_factory=dict)
    faults: tuple[Mapping[str, Any], ...] = ()
    input_interp: Mapping[str, str] = field(default_factory=dict)

    @classmethod
    def from_json(cls, d: Mapping) -> "Scenario":
        kind = d.get("kind")
        if kind not in ("two_car", "perception"):
            raise ConfigError(f"scenario.kind must be 'two_car' or 'perception', got {kind!r}")
        return cls(
            kind=kind,
            T=float(d.get("T", 10.0 if kind == "two_car" else 8.0)),
            dt=float(d.get("dt", DT)),
            x0=dict(d.get("x0", {})),
            inputs={k: dict(v) for k, v in d.get("inputs", {}).items()},
            gains=dict(d.get("gains", {})),
            params=dict(d.get("params", {})),
            faults=tuple(dict(f) for f in d.get("faults", ())),
        )

    def signal_names(self) -> tuple[str, ...]:
        if self.kind == "two_car":
            return ("z_ego", "z_agent", "v_ego", "v_agent", "xi", "mu")
        sensors = [s["name"] if isinstance(s, dict) else s for s in self.params.get("sensors", ("camera", "lidar"))]
        return perception_space("ped", sensors).names()

    def __call__(self, point: Mapping[str, Any] | None = None) -> Trace:
        point = dict(point or {})
        if self.kind == "two_car":
            return self._two_car(point)
        return self._perception(point)

    def _two_car(self, point: dict) -> Trace:
        state = {"z_ego": 0.0, "v_ego": 20.0, "z_agent": 40.0, "v_agent": 20.0, **self.x0}
        signals = {
            "xi": InputSignal.constant(0.0, "linear"),
            "mu": InputSignal.constant(1.0, "hold"),
        }
        for ch, spec in self.inputs.items():
            signals[ch] = InputSignal(spec["times"], spec["values"], spec.get("interpolation", "linear"))
        ctrl: dict[str, dict[int, float]] = {}
        for name, value in point.items():
            m = _INPUT_POINT.match(name)
            if name in state:
                state[name] = float(value)
            elif m:
                ctrl.setdefault(m["ch"], {})[int(m["k"])] = float(value)
            elif name in ("xi", "mu"):
                signals[name] = InputSignal.constant(float(value), "hold")
            else:
                raise ConfigError(f"search variable {name!r} does not apply to scenario two_car")
        for ch, pts in ctrl.items():
            values = [pts[k] for k in sorted(pts)]
            interp = self.input_interp.get(ch, "hold" if ch == "mu" else "linear")
            signals[ch] = InputSignal.evenly_spaced(values, self.T, interp)
        return simulate_two_car(
            TwoCarState(**state), InputTrace(signals, self.T), self.T, self.dt, ACCGains(**self.gains)
        )

    def _perception(self, point: dict) -> Trace:
        params = dict(self.params)
        faults = [dict(f) for f in self.faults]
        for name, value in point.items():
            if name.startswith("fault."):
                try:
                    _, k, fld = name.split(".")
                    faults[int(k)][fld] = value
                except (ValueError, IndexError):
                    raise ConfigError(f"bad fault variable {name!r}") from None
            else:
                params[name] = value
        if "sensors" in params:
            params["sensors"] = tuple(
                Sensor(**s) if isinstance(s, dict) else Sensor(s) for s in params["sensors"]
            )
        try:
            p = PerceptionParams(**params)
            fl = [Fault(**f) for f in faults]
        except TypeError as exc:
            raise ConfigError(f"perception scenario: {exc}") from None
        return simulate_perception_scenario(fl, p, self.T, self.dt)


def load_requirement(d: Mapping, scenario: Scenario | None = None) -> Formula:
    if "formula" in d:
        space = scenario.signal_names() if scenario is not None else None
        return parse_formula(d["formula"], space)
    if "name" in d:
        params = RequirementParams(**d.get("params", {}))
        return build_requirement(d["name"], params, d.get("objects", ()), d.get("sensor"))
    raise ConfigError("requirement needs 'formula' or 'name'")


def load_search(d: Mapping) -> SearchSpace:
    try:
        return SearchSpace(
            continuous=tuple((v["name"], v["lo"], v["hi"]) for v in d.get("continuous", ())),
            discrete=tuple((v["name"], tuple(v["levels"])) for v in d.get("discrete", ())),
            inputs=tuple(
                InputVar(v["channel"], int(v["points"]), v["lo"], v["hi"], v.get("interpolation", "linear"))
                for v in d.get("inputs", ())
            ),
        )
    except KeyError as exc:
        raise ConfigError(f"search variable missing field {exc}") from None


def load_sa(d: Mapping, seed: int) -> SAConfig:
    allowed = {f.name for f in dataclasses.fields(SAConfig)}
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown SA settings {sorted(extra)}")
    return SAConfig(**{**d, "seed": seed})


@dataclass
class Campaign:
    scenario: Scenario
    requirement: Formula
    space: SearchSpace
    method: dict

    @classmethod
    def from_json(cls, cfg: Mapping) -> "Campaign":
        for section in ("scenario", "requirement", "search", "method"):
            if section not in cfg:
                raise ConfigError(f"config is missing section {section!r}")
        space = load_search(cfg["search"])
        scenario = dataclasses.replace(
            Scenario.from_json(cfg["scenario"]),
            input_interp={iv.channel: iv.interpolation for iv in space.inputs},
        )
        return cls(scenario, load_requirement(cfg["requirement"], scenario), space, dict(cfg["method"]))

    @classmethod
    def load(cls, path: Path | str) -> "Campaign":
        try:
            cfg = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_json(cfg)

    def objective(self) -> Objective:
        return Objective(self.scenario, self.requirement)

    def run(self, seed: int = 0, ca_file: str | Path | None = None, jobs: int = 1) -> CampaignResult:
        """Run the configured method. Failed simulations are kept as +inf evaluations."""
        name = self.method.get("name")
        budget = int(self.method.get("budget", 100))
        if budget < 1:
            raise ConfigError("empty budget: method.budget must be >= 1")
        objective = self.objective()
        if name == "random":
            return uniform_random_search(self.space, objective, budget, seed, record_errors=True)
        if name == "sa":
            cfg = load_sa({**self.method.get("sa", {}), "budget": budget}, seed)
            return falsify_sa(self.space, objective, cfg, record_errors=True)
        if name == "ca+sa":
            ca_path = ca_file or self.method.get("ca_file")
            if not ca_path:
                raise ConfigError("missing input: method 'ca+sa' needs a covering-array file")
            ca = read_ca(ca_path)
            per_seed = int(self.method.get("per_seed_budget", 50))
            cfg = load_sa(self.method.get("sa", {}), seed)
            extra = max(budget - len(ca), 0)
            extra = int(self.method.get("max_extra_budget", extra))
            return ca_then_falsify(
                ca, self.space, objective, per_seed, extra, seed, cfg, jobs, record_errors=True
            )
        raise ConfigError(f"method.name must be one of random, sa, ca+sa; got {name!r}")


__all__ = [
    "Campaign",
    "ConfigError",
    "Scenario",
    "ScenarioError",
    "SearchError",
    "load_requirement",
    "load_search",
]
