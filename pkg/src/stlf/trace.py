"""Simulation traces (outputs, inputs, constant parameters) and signed distance."""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .stl import Predicate, PredicateSet

REAL = "real"
BOOLEAN = "boolean"


class TraceError(ValueError):
    pass


class ChannelError(KeyError):
    """A channel referenced by a predicate or formula is not available."""


class TraceFormatError(TraceError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


@dataclass(frozen=True)
class SignalSpace:
    outputs: tuple[str, ...]
    inputs: tuple[str, ...] = ()
    params: tuple[str, ...] = ()
    kinds: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "kinds", dict(self.kinds))
        names = self.names()
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise TraceError(f"duplicate signal names: {dup}")
        for name, kind in self.kinds.items():
            if kind not in (REAL, BOOLEAN):
                raise TraceError(f"unknown channel kind {kind!r} for {name}")

    @property
    def channels(self) -> tuple[str, ...]:
        """Time-varying channels: outputs then inputs."""
        return self.outputs + self.inputs

    def names(self) -> tuple[str, ...]:
        return self.outputs + self.inputs + self.params

    def kind(self, name: str) -> str:
        return self.kinds.get(name, REAL)

    def to_json(self) -> dict:
        return {
            "outputs": list(self.outputs),
            "inputs": list(self.inputs),
            "params": list(self.params),
            "kinds": dict(self.kinds),
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "SignalSpace":
        return cls(
            tuple(d["outputs"]), tuple(d.get("inputs", ())), tuple(d.get("params", ())), d.get("kinds", {})
        )


@dataclass(frozen=True)
class Sample:
    time: float
    values: Mapping[str, float]


@dataclass(frozen=True, eq=False)
class Trace:
    """Sampled trace sigma = (y, u, p).

    ``values`` maps each output and input channel to an array aligned with
    ``times``. Arrays are frozen on construction.
    """

    space: SignalSpace
    times: np.ndarray
    values: Mapping[str, np.ndarray]
    params: Mapping[str, float] = field(default_factory=dict)
    duration: float | None = None

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        vals = {}
        for name, arr in self.values.items():
            a = np.array(arr, dtype=float)
            a.setflags(write=False)
            vals[name] = a
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "params", {k: float(v) for k, v in self.params.items()})
        if self.duration is None and len(times):
            object.__setattr__(self, "duration", float(times[-1]))
        elif self.duration is not None:
            object.__setattr__(self, "duration", float(self.duration))

    @classmethod
    def from_arrays(
        cls,
        times,
        outputs: Mapping[str, object],
        inputs: Mapping[str, object] | None = None,
        params: Mapping[str, float] | None = None,
        kinds: Mapping[str, str] | None = None,
        duration: float | None = None,
    ) -> "Trace":
        inputs = inputs or {}
        params = params or {}
        space = SignalSpace(tuple(outputs), tuple(inputs), tuple(params), kinds or {})
        return cls(space, times, {**outputs, **inputs}, params, duration)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def samples(self) -> Iterator[Sample]:
        for i, t in enumerate(self.times):
            yield Sample(float(t), {k: float(v[i]) for k, v in self.values.items()})

    def column(self, name: str) -> np.ndarray:
        """Values of a channel or (broadcast) parameter at every sample."""
        if name in self.values:
            return self.values[name]
        if name in self.params:
            return np.full(len(self.times), self.params[name])
        raise ChannelError(name)

    def point(self, i: int) -> dict[str, float]:
        """Combined sample point [y_i u_i p] as a name -> value map."""
        out = {k: float(v[i]) for k, v in self.values.items()}
        out.update(self.params)
        return out

    def available(self) -> set[str]:
        return set(self.values) | set(self.params)


def validate_trace(tr: Trace) -> list[str]:
    """List every violated trace invariant; empty means valid."""
    problems: list[str] = []
    t = tr.times
    if t.ndim != 1 or len(t) == 0:
        return ["trace has no samples"]
    if not np.all(np.isfinite(t)):
        problems.append("non-finite timestamp")
    for i in range(1, len(t)):
        if not t[i] > t[i - 1]:
            problems.append(f"monotonicity violation at index {i}")
    if tr.duration is not None and t[-1] != tr.duration:
        problems.append(f"duration mismatch: last timestamp {t[-1]!r} != T {tr.duration!r}")
    expected = set(tr.space.channels)
    present = set(tr.values)
    for name in sorted(expected - present):
        problems.append(f"missing channel {name}")
    for name in sorted(present - expected):
        problems.append(f"undeclared channel {name}")
    for name in sorted(expected & present):
        if len(tr.values[name]) != len(t):
            problems.append(f"channel {name} has {len(tr.values[name])} samples, expected {len(t)}")
    missing_params = set(tr.space.params) - set(tr.params)
    for name in sorted(missing_params):
        problems.append(f"missing parameter {name}")
    return problems


# ---------------------------------------------------------------------------
# Metric and signed distance


@dataclass(frozen=True)
class Metric:
    kind: str = "euclidean"

    def __call__(self, a, b) -> float:
        if self.kind != "euclidean":
            raise NotImplementedError(f"metric {self.kind!r}")
        return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


EUCLIDEAN = Metric()
_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class _Half:
    a: np.ndarray
    c: float
    strict: bool

    def trivial(self) -> bool | None:
        """Truth value if the normal vector is zero, else None."""
        if np.any(self.a != 0):
            return None
        return bool(0 > self.c) if self.strict else bool(0 >= self.c)

    def holds(self, x: np.ndarray) -> bool:
        v = float(self.a @ x)
        return v > self.c if self.strict else v >= self.c

    def complement(self) -> "_Half":
        return _Half(-self.a, -self.c, not self.strict)


def _halfspaces(pset: PredicateSet, names: list[str]) -> list[list[_Half]]:
    index = {n: k for k, n in enumerate(names)}
    out = []
    for clause in pset.clauses:
        hs = []
        for p in clause:
            a_map, c, strict = p.halfspace()
            a = np.zeros(len(names))
            for n, v in a_map.items():
                a[index[n]] = v
            hs.append(_Half(a, c, strict))
        out.append(hs)
    return out


def _polyhedron_distance(x: np.ndarray, halves: list[_Half]) -> float:
    """Euclidean distance from x to the closure of an intersection of halfspaces.

    Exact: the nearest point is the projection of x onto the affine hull of
    some set of at most dim linearly independent active constraints, so we
    enumerate those sets and keep the nearest feasible projection.
    """
    rows = []
    for h in halves:
        t = h.trivial()
        if t is None:
            rows.append(h)
        elif not t:
            return math.inf
    if not rows:
        return 0.0
    A = np.array([h.a for h in rows])
    c = np.array([h.c for h in rows])
    scale = 1.0 + float(np.max(np.abs(x))) if len(x) else 1.0
    tol = _FEAS_TOL * scale
    if np.all(A @ x >= c - tol):
        return 0.0
    best = math.inf
    dim = A.shape[1]
    for r in range(1, min(len(rows), dim) + 1):
        for subset in itertools.combinations(range(len(rows)), r):
            As = A[list(subset)]
            G = As @ As.T
            if np.linalg.matrix_rank(G) < r:
                continue
            lam = np.linalg.solve(G, As @ x - c[list(subset)])
            p = x - As.T @ lam
            if np.all(A @ p >= c - tol):
                best = min(best, float(np.linalg.norm(x - p)))
    return best


def _single_halfspace(pset: PredicateSet) -> Predicate | None:
    if len(pset.clauses) == 1 and len(pset.clauses[0]) == 1:
        p = pset.clauses[0][0]
        a, _, _ = p.halfspace()
        if any(v != 0 for v in a.values()):
            return p
    return None


def signed_distance(point: Mapping[str, float], pset: PredicateSet, metric: Metric = EUCLIDEAN) -> float:
    """Signed distance from a point to the set described by ``pset``.

    Positive inside (distance to the complement), negative outside, +inf for
    the whole space and -inf for the empty set.
    """
    if metric.kind != "euclidean":
        raise NotImplementedError(f"metric {metric.kind!r}")
    names = list(pset.channels())
    for n in names:
        if n not in point:
            raise ChannelError(n)
    single = _single_halfspace(pset)
    if single is not None:
        a_map, c, _ = single.halfspace()
        lhs = sum(v * point[n] for n, v in a_map.items())
        norm = math.sqrt(sum(v * v for v in a_map.values()))
        d = (lhs - c) / norm
        # boundary points of strict relations lie outside; the value is 0 either way
        return d + 0.0
    x = np.array([float(point[n]) for n in names])
    clauses = _halfspaces(pset, names)
    inside = any(all(h.holds(x) for h in clause) for clause in clauses)
    if not inside:
        if not clauses:
            return -math.inf
        return -min(_polyhedron_distance(x, clause) for clause in clauses)
    if len(clauses) == 1:
        faces = [h for h in clauses[0] if h.trivial() is None]
        if not faces:
            return math.inf
        return min(float(h.a @ x - h.c) / float(np.linalg.norm(h.a)) for h in faces)
    # Complement of the union is the intersection of per-clause complements;
    # distribute into a union of polyhedra, one face picked per clause.
    choices = []
    for clause in clauses:
        comp = []
        for h in clause:
            t = h.trivial()
            if t is None:
                comp.append(h.complement())
            elif t is False:
                comp = None  # clause is empty; its complement is everything
                break
        if comp is None:
            continue
        if not comp:
            return math.inf  # clause covers the whole space
        choices.append(comp)
    if not choices:
        return math.inf
    return min(_polyhedron_distance(x, list(pick)) for pick in itertools.product(*choices))


def complement(pset: PredicateSet) -> PredicateSet:
    """Set complement of a union of conjunctions, in disjunctive form."""
    negated = []
    for clause in pset.clauses:
        negated.append([_negate_predicate(p) for p in clause])
    if not negated:
        return PredicateSet(((),))
    clauses = tuple(tuple(pick) for pick in itertools.product(*negated))
    return PredicateSet(clauses)


def _negate_predicate(p: Predicate) -> Predicate:
    if p.is_boolean:
        return Predicate(((p.channel, 1.0),), "<", 0.0)
    flip = {">=": "<", ">": "<=", "<=": ">", "<": ">="}[p.relation]
    return Predicate(p.coeffs, flip, p.bound)


def signed_distance_series(tr: Trace, pset: PredicateSet, metric: Metric = EUCLIDEAN) -> np.ndarray:
    """Signed distance of every sample point of ``tr`` to ``pset``."""
    names = pset.channels()
    for n in names:
        if n not in tr.values and n not in tr.params:
            raise ChannelError(n)
    single = _single_halfspace(pset)
    if single is not None and metric.kind == "euclidean":
        a_map, c, _ = single.halfspace()
        lhs = np.zeros(len(tr.times))
        for n, v in a_map.items():
            lhs = lhs + v * tr.column(n)
        norm = math.sqrt(sum(v * v for v in a_map.values()))
        return (lhs - c) / norm + 0.0
    cols = {n: tr.column(n) for n in names}
    return np.array(
        [signed_distance({n: cols[n][i] for n in names}, pset, metric) for i in range(len(tr.times))]
    )


# ---------------------------------------------------------------------------
# CSV + JSON sidecar


def sidecar_path(path: Path | str) -> Path:
    return Path(path).with_suffix(".json")


def write_trace(tr: Trace, path: Path | str) -> None:
    path = Path(path)
    cols = list(tr.space.channels)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", *cols])
        for i, t in enumerate(tr.times):
            w.writerow([f"{t:.17g}", *(f"{tr.values[c][i]:.17g}" for c in cols)])
    meta = {
        "space": tr.space.to_json(),
        "params": {k: float(v) for k, v in tr.params.items()},
        "duration": tr.duration,
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_trace(path: Path | str) -> Trace:
    path = Path(path)
    meta_file = sidecar_path(path)
    try:
        meta = json.loads(meta_file.read_text()) if meta_file.exists() else None
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise TraceFormatError(str(exc)) from exc
    if not rows:
        raise TraceFormatError("empty trace file", 1)
    header = rows[0]
    if not header or header[0] != "time":
        raise TraceFormatError("first column must be 'time'", 1)
    cols = header[1:]
    data = []
    for r, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise TraceFormatError(f"expected {len(header)} fields, got {len(row)}", r)
        try:
            data.append([float(v) for v in row])
        except ValueError as exc:
            raise TraceFormatError(f"non-numeric value ({exc})", r) from None
    if not data:
        raise TraceFormatError("trace has no samples", 2)
    arr = np.array(data)
    if meta is not None:
        space = SignalSpace.from_json(meta["space"])
        if list(space.channels) != cols:
            raise TraceFormatError(f"header {cols} does not match sidecar channels {list(space.channels)}", 1)
        params = meta.get("params", {})
        duration = meta.get("duration")
    else:
        space = SignalSpace(tuple(cols))
        params, duration = {}, None
    values = {c: arr[:, k + 1] for k, c in enumerate(cols)}
    return Trace(space, arr[:, 0], values, params, duration)
