"""Mixed-strength covering arrays: tuple counting, greedy generation, verification."""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np


class CoverageError(ValueError):
    pass


@dataclass(frozen=True)
class ParameterDomain:
    """A parameter with a finite list of levels.

    Continuous parameters keep their original ``interval`` so downstream
    search can refine around the representative level values.
    """

    name: str
    values: tuple[Any, ...]
    interval: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if len(self.values) < 2:
            raise CoverageError(f"parameter {self.name!r} needs at least 2 levels")

    @classmethod
    def discrete(cls, name: str, values: Sequence[Any]) -> "ParameterDomain":
        return cls(name, tuple(values))

    @classmethod
    def continuous(cls, name: str, lo: float, hi: float, count: int) -> "ParameterDomain":
        if not lo < hi:
            raise CoverageError(f"parameter {name!r}: need lo < hi")
        if count < 2:
            raise CoverageError(f"parameter {name!r} needs at least 2 levels")
        return cls(name, tuple(float(v) for v in np.linspace(lo, hi, count)), (float(lo), float(hi)))

    @property
    def size(self) -> int:
        return len(self.values)

    def levels(self) -> tuple[Any, ...]:
        return self.values

    def to_json(self) -> dict:
        if self.interval is not None:
            return {"name": self.name, "range": list(self.interval), "count": self.size}
        return {"name": self.name, "levels": list(self.values)}

    @classmethod
    def from_json(cls, d: dict) -> "ParameterDomain":
        if "range" in d:
            lo, hi = d["range"]
            return cls.continuous(d["name"], lo, hi, int(d.get("count", 2)))
        return cls.discrete(d["name"], d["levels"])


@dataclass(frozen=True)
class MixedStrengthSpec:
    domains: tuple[ParameterDomain, ...]
    strength: int = 2
    groups: tuple[tuple[tuple[str, ...], int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "domains", tuple(self.domains))
        object.__setattr__(self, "groups", tuple((tuple(g), int(t)) for g, t in self.groups))
        names = [d.name for d in self.domains]
        if len(set(names)) != len(names):
            raise CoverageError("duplicate parameter names")
        k = len(names)
        if not 1 <= self.strength <= k:
            raise CoverageError(f"strength {self.strength} outside [1, {k}]")
        for members, t in self.groups:
            unknown = set(members) - set(names)
            if unknown:
                raise CoverageError(f"strength group references unknown parameters {sorted(unknown)}")
            if len(set(members)) != len(members):
                raise CoverageError("strength group has repeated parameters")
            if t <= self.strength:
                raise CoverageError(f"group strength {t} must exceed default strength {self.strength}")
            if len(members) < t:
                raise CoverageError(f"group of size {len(members)} cannot have strength {t}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.domains)

    def scopes(self) -> list[tuple[int, ...]]:
        """Every parameter-index subset whose level combinations must be covered."""
        k = len(self.domains)
        seen = dict.fromkeys(itertools.combinations(range(k), self.strength))
        index = {n: i for i, n in enumerate(self.names)}
        for members, t in self.groups:
            idx = sorted(index[m] for m in members)
            for sub in itertools.combinations(idx, t):
                seen.setdefault(sub)
        return list(seen)

    def to_json(self) -> dict:
        return {
            "parameters": [d.to_json() for d in self.domains],
            "strength": self.strength,
            "groups": [{"parameters": list(g), "strength": t} for g, t in self.groups],
        }

    @classmethod
    def from_json(cls, d: dict) -> "MixedStrengthSpec":
        return cls(
            tuple(ParameterDomain.from_json(p) for p in d["parameters"]),
            int(d.get("strength", 2)),
            tuple((tuple(g["parameters"]), int(g["strength"])) for g in d.get("groups", ())),
        )


@dataclass(frozen=True)
class CoveringArray:
    spec: MixedStrengthSpec
    rows: tuple[tuple[int, ...], ...]  # level indices, one per parameter

    def __len__(self) -> int:
        return len(self.rows)

    def assignments(self) -> list[dict[str, Any]]:
        return [
            {d.name: d.values[lv] for d, lv in zip(self.spec.domains, row)} for row in self.rows
        ]


def count_required_tuples(spec: MixedStrengthSpec) -> int:
    sizes = [d.size for d in spec.domains]
    return sum(math.prod(sizes[i] for i in scope) for scope in spec.scopes())


@dataclass
class CoverageReport:
    required: int
    covered: int
    per_scope: dict[str, tuple[int, int]] = field(default_factory=dict)
    missing: list[dict[str, Any]] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.covered == self.required

    @property
    def percent(self) -> float:
        return 100.0 * self.covered / self.required if self.required else 100.0

    def to_json(self) -> dict:
        return {
            "required": self.required,
            "covered": self.covered,
            "percent": self.percent,
            "per_strength": {k: {"covered": c, "required": r} for k, (c, r) in self.per_scope.items()},
            "missing": self.missing,
        }


def verify_coverage(ca: CoveringArray, max_missing: int = 100) -> CoverageReport:
    spec = ca.spec
    sizes = [d.size for d in spec.domains]
    for r, row in enumerate(ca.rows):
        if len(row) != len(sizes):
            raise CoverageError(f"row {r} has {len(row)} entries, expected {len(sizes)}")
        for k, lv in enumerate(row):
            if not (isinstance(lv, (int, np.integer)) and 0 <= lv < sizes[k]):
                raise CoverageError(f"row {r}: level {lv!r} not in domain of {spec.names[k]!r}")
    arr = np.array(ca.rows, dtype=int).reshape(len(ca.rows), len(sizes))
    report = CoverageReport(0, 0)
    by_t: dict[int, list[int]] = {}
    for scope in spec.scopes():
        dims = [sizes[i] for i in scope]
        hit = np.zeros(dims, dtype=bool)
        if len(arr):
            hit[tuple(arr[:, i] for i in scope)] = True
        req, cov = hit.size, int(hit.sum())
        report.required += req
        report.covered += cov
        acc = by_t.setdefault(len(scope), [0, 0])
        acc[0] += cov
        acc[1] += req
        if cov < req and len(report.missing) < max_missing:
            for combo in zip(*np.nonzero(~hit)):
                if len(report.missing) >= max_missing:
                    break
                report.missing.append(
                    {spec.names[i]: spec.domains[i].values[int(lv)] for i, lv in zip(scope, combo)}
                )
    report.per_scope = {f"{t}-way": (c, r) for t, (c, r) in sorted(by_t.items())}
    return report


def generate_ca(spec: MixedStrengthSpec, seed: int = 0, candidates: int = 50) -> CoveringArray:
    """Greedy one-row-at-a-time (AETG-style) covering array.

    Each row is the best of ``candidates`` greedy constructions. A candidate
    starts from one uncovered tuple, visits the remaining parameters in a
    random order and picks for each the level covering the most new tuples
    among scopes whose other members are already set (ties: lowest level).
    """
    rng = np.random.default_rng(seed)
    sizes = [d.size for d in spec.domains]
    k = len(sizes)
    scopes = spec.scopes()
    uncovered = {s: np.ones([sizes[i] for i in s], dtype=bool) for s in scopes}
    remaining = sum(u.size for u in uncovered.values())
    by_param: list[list[tuple[int, ...]]] = [[s for s in scopes if p in s] for p in range(k)]
    rows: list[tuple[int, ...]] = []

    def gain(row: list[int | None], p: int, lv: int) -> int:
        total = 0
        for s in by_param[p]:
            idx = []
            for q in s:
                v = lv if q == p else row[q]
                if v is None:
                    break
                idx.append(v)
            else:
                total += uncovered[s][tuple(idx)]
        return total

    while remaining:
        open_scopes = [s for s in scopes if uncovered[s].any()]
        best_row, best_score = None, -1
        for _ in range(candidates):
            s = open_scopes[rng.integers(len(open_scopes))]
            cells = np.argwhere(uncovered[s])
            seed_tuple = cells[rng.integers(len(cells))]
            row: list[int | None] = [None] * k
            for q, lv in zip(s, seed_tuple):
                row[q] = int(lv)
            for p in rng.permutation(k):
                if row[p] is not None:
                    continue
                scores = [gain(row, p, lv) for lv in range(sizes[p])]
                row[p] = int(np.argmax(scores))
            score = sum(int(uncovered[sc][tuple(row[i] for i in sc)]) for sc in scopes)
            if score > best_score:
                best_row, best_score = tuple(row), score
        for sc in scopes:
            key = tuple(best_row[i] for i in sc)
            if uncovered[sc][key]:
                uncovered[sc][key] = False
                remaining -= 1
        rows.append(best_row)
    ca = CoveringArray(spec, tuple(rows))
    report = verify_coverage(ca, max_missing=1)
    if not report.complete:
        raise CoverageError("internal error: generated array is not covering")
    return ca


def exhaustive_array(spec: MixedStrengthSpec) -> CoveringArray:
    rows = tuple(itertools.product(*(range(d.size) for d in spec.domains)))
    return CoveringArray(spec, rows)


def write_ca(ca: CoveringArray, path: Path | str) -> CoverageReport:
    """Write the array as CSV plus a JSON sidecar with spec and coverage."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ca.spec.names)
        for assignment in ca.assignments():
            w.writerow([_fmt(v) for v in assignment.values()])
    report = verify_coverage(ca)
    meta = {"spec": ca.spec.to_json(), "rows": len(ca), "coverage": report.to_json()}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")
    return report


def _fmt(v: Any) -> str:
    return f"{v:.17g}" if isinstance(v, float) else str(v)


def read_ca(path: Path | str) -> CoveringArray:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    spec = MixedStrengthSpec.from_json(meta["spec"])
    lookup = [{_fmt(v): i for i, v in enumerate(d.values)} for d in spec.domains]
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != spec.names:
            raise CoverageError(f"CSV header {header} does not match spec parameters")
        for r, row in enumerate(reader, start=2):
            try:
                rows.append(tuple(lookup[k][cell] for k, cell in enumerate(row)))
            except KeyError as exc:
                raise CoverageError(f"row {r}: level {exc.args[0]!r} not in domain") from None
    return CoveringArray(spec, tuple(rows))
