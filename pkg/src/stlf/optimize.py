"""Robustness-guided falsification: random search, simulated annealing, and the
covering-array-seeded pipeline.

All randomness comes from ``numpy.random.default_rng(seed)`` (PCG64), so a
campaign is reproducible from its configuration and one integer seed.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .covering import CoveringArray
from .monitor import robustness
from .stl import Formula
from .trace import Trace

log = logging.getLogger(__name__)

Point = dict[str, Any]


class SimulationError(RuntimeError):
    """Raised when the objective fails; carries the offending point."""

    def __init__(self, point: Point, cause: BaseException):
        super().__init__(f"simulation failed at {point}: {cause}")
        self.point = point


class SearchError(ValueError):
    pass


@dataclass(frozen=True)
class InputVar:
    channel: str
    points: int
    lo: float
    hi: float
    interpolation: str = "linear"

    def names(self) -> list[str]:
        return [f"{self.channel}[{k}]" for k in range(self.points)]


@dataclass(frozen=True)
class SearchSpace:
    continuous: tuple[tuple[str, float, float], ...] = ()
    discrete: tuple[tuple[str, tuple[Any, ...]], ...] = ()
    inputs: tuple[InputVar, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "continuous", tuple((n, float(lo), float(hi)) for n, lo, hi in self.continuous))
        object.__setattr__(self, "discrete", tuple((n, tuple(lv)) for n, lv in self.discrete))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        for name, lo, hi in self.continuous:
            if not lo < hi:
                raise SearchError(f"{name}: need lo < hi")
        for name, levels in self.discrete:
            if not levels:
                raise SearchError(f"{name}: needs at least one level")
        for iv in self.inputs:
            if iv.points < 1:
                raise SearchError(f"{iv.channel}: needs at least one control point")
            if not iv.lo < iv.hi:
                raise SearchError(f"{iv.channel}: need lo < hi")
        names = [b[0] for b in self.bounds()] + [n for n, _ in self.discrete]
        if len(set(names)) != len(names):
            raise SearchError("duplicate search variable names")

    def bounds(self) -> list[tuple[str, float, float]]:
        """All scalar continuous coordinates, input control points included."""
        out = list(self.continuous)
        for iv in self.inputs:
            out += [(n, iv.lo, iv.hi) for n in iv.names()]
        return out

    def sample(self, rng: np.random.Generator) -> Point:
        point: Point = {}
        for name, lo, hi in self.bounds():
            point[name] = float(rng.uniform(lo, hi))
        for name, levels in self.discrete:
            point[name] = levels[int(rng.integers(len(levels)))]
        return point

    def midpoint(self) -> Point:
        point: Point = {n: 0.5 * (lo + hi) for n, lo, hi in self.bounds()}
        for name, levels in self.discrete:
            point[name] = levels[0]
        return point


@dataclass
class Objective:
    """Robustness of ``requirement`` on the trace ``simulator(point)`` produces."""

    simulator: Callable[[Point], Trace]
    requirement: Formula

    def __call__(self, point: Point) -> float:
        return robustness(self.requirement, self.simulator(point))


@dataclass(frozen=True)
class SAConfig:
    budget: int = 100
    initial_temperature: float | None = None  # default: 0.1 * |first robustness|
    cooling_factor: float = 0.97
    proposal_scale: float = 0.1
    restart_patience: int = 30
    discrete_resample_prob: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.budget < 1:
            raise SearchError("budget must be >= 1")
        if not 0 < self.cooling_factor < 1:
            raise SearchError("cooling_factor must be in (0, 1)")
        if not 0 < self.proposal_scale <= 1:
            raise SearchError("proposal_scale must be in (0, 1]")


@dataclass
class Evaluation:
    point: Point
    robustness: float
    trace_id: int
    phase: str = ""
    error: str | None = None  # simulator failure; robustness is then +inf


@dataclass
class CampaignResult:
    evaluations: list[Evaluation] = field(default_factory=list)
    falsifying_count: int = 0

    @property
    def best(self) -> Evaluation | None:
        if not self.evaluations:
            return None
        return min(self.evaluations, key=lambda e: e.robustness)

    @property
    def min_envelope(self) -> list[float]:
        return list(np.minimum.accumulate([e.robustness for e in self.evaluations]))

    @property
    def falsified(self) -> bool:
        best = self.best
        return best is not None and best.robustness < 0

    def record(self, point: Point, rob: float, phase: str = "", error: str | None = None) -> Evaluation:
        ev = Evaluation(dict(point), float(rob), len(self.evaluations), phase, error)
        self.evaluations.append(ev)
        return ev

    def summary(self) -> dict:
        best = self.best
        return {
            "evaluations": len(self.evaluations),
            "falsified": self.falsified,
            "falsifying_count": self.falsifying_count,
            "failed_simulations": sum(1 for e in self.evaluations if e.error is not None),
            "best_point": None if best is None else best.point,
            "best_robustness": None if best is None else best.robustness,
        }


def _evaluate(objective: Callable[[Point], float], point: Point) -> float:
    try:
        return float(objective(point))
    except SearchError:
        raise
    except Exception as exc:  # any simulator failure, re-raised with context
        raise SimulationError(point, exc) from exc


def _attempt(
    objective: Callable[[Point], float], point: Point, record_errors: bool = True
) -> tuple[float, str | None]:
    """Robustness, or +inf plus the message when the simulation fails.

    With ``record_errors=False`` the :class:`SimulationError` propagates.
    Configuration problems (:class:`SearchError`) always propagate: they
    would fail every evaluation.
    """
    try:
        return _evaluate(objective, point), None
    except SimulationError as exc:
        if not record_errors:
            raise
        log.warning("%s", exc)
        return math.inf, str(exc.__cause__)


def evaluate_many(
    objective: Callable[[Point], float], points: Sequence[Point], jobs: int = 1, record_errors: bool = True
) -> list[tuple[float, str | None]]:
    """Evaluate points in order; ``jobs > 1`` uses worker processes."""
    if jobs <= 1 or len(points) < 2:
        return [_attempt(objective, p, record_errors) for p in points]
    n = len(points)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_attempt, [objective] * n, points, [record_errors] * n))


def uniform_random_search(
    space: SearchSpace,
    objective: Callable[[Point], float],
    budget: int,
    seed: int = 0,
    record_errors: bool = False,
) -> CampaignResult:
    """Independent uniform samples until ``budget`` or the first robustness < 0.

    Simulator failures raise :class:`SimulationError` unless
    ``record_errors`` is set, in which case they are logged as +inf.
    """
    if budget < 1:
        raise SearchError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    result = CampaignResult()
    for _ in range(budget):
        point = space.sample(rng)
        r, err = _attempt(objective, point, record_errors)
        result.record(point, r, "random", err)
        if r < 0:
            result.falsifying_count += 1
            break
    return result


def falsify_sa(
    space: SearchSpace,
    objective: Callable[[Point], float],
    cfg: SAConfig = SAConfig(),
    warm_start: Point | None = None,
    frozen: Mapping[str, Any] | None = None,
    result: CampaignResult | None = None,
    rng: np.random.Generator | None = None,
    warm_robustness: float | None = None,
    record_errors: bool = False,
) -> CampaignResult:
    """Simulated annealing on robustness with Metropolis acceptance.

    Continuous coordinates take Gaussian steps of ``proposal_scale`` times
    their range, clipped to bounds; with probability
    ``discrete_resample_prob`` one non-frozen discrete coordinate is
    resampled. The chain returns to the best point after
    ``restart_patience`` steps without improvement, and stops at the first
    negative robustness. Evaluations are appended to ``result`` if given.
    A ``warm_robustness`` already known for ``warm_start`` skips its
    re-evaluation. Failure handling follows :func:`uniform_random_search`.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    result = result if result is not None else CampaignResult()
    frozen = dict(frozen or {})
    bounds = space.bounds()
    free_discrete = [(n, lv) for n, lv in space.discrete if n not in frozen and len(lv) > 1]

    current = dict(warm_start) if warm_start is not None else space.sample(rng)
    current.update(frozen)
    if warm_start is not None and warm_robustness is not None:
        cur_r = float(warm_robustness)
        steps = cfg.budget
    else:
        cur_r, err = _attempt(objective, current, record_errors)
        result.record(current, cur_r, "sa", err)
        steps = cfg.budget - 1
        if cur_r < 0:
            result.falsifying_count += 1
            return result
    best, best_r = dict(current), cur_r
    temp = cfg.initial_temperature if cfg.initial_temperature is not None else 0.1 * abs(cur_r)
    temp = max(temp, 1e-12) if math.isfinite(temp) else 1.0
    stale = 0
    for _ in range(steps):
        cand = dict(current)
        for name, lo, hi in bounds:
            if name in frozen:
                continue
            step = rng.normal(0.0, cfg.proposal_scale * (hi - lo))
            cand[name] = float(min(max(cand[name] + step, lo), hi))
        if free_discrete and rng.random() < cfg.discrete_resample_prob:
            name, levels = free_discrete[int(rng.integers(len(free_discrete)))]
            cand[name] = levels[int(rng.integers(len(levels)))]
        r, err = _attempt(objective, cand, record_errors)
        result.record(cand, r, "sa", err)
        if r < 0:
            result.falsifying_count += 1
            return result
        delta = r - cur_r
        if delta <= 0 or rng.random() < math.exp(-delta / temp):
            current, cur_r = cand, r
            temp *= cfg.cooling_factor
        if r < best_r:
            best, best_r = dict(cand), r
            stale = 0
        else:
            stale += 1
            if stale >= cfg.restart_patience:
                current, cur_r = dict(best), best_r
                stale = 0
    return result


def ca_row_point(ca: CoveringArray, row: int, space: SearchSpace) -> Point:
    """Search point for one covering-array row; variables outside the array sit at midpoints."""
    point = space.midpoint()
    point.update(ca.assignments()[row])
    return point


def ca_then_falsify(
    ca: CoveringArray,
    space: SearchSpace,
    objective: Callable[[Point], float],
    per_seed_budget: int,
    max_extra_budget: int,
    seed: int = 0,
    sa: SAConfig | None = None,
    jobs: int = 1,
    record_errors: bool = False,
) -> CampaignResult:
    """Evaluate every array row, then anneal from the least-robust passing rows.

    Discrete variables stay frozen at their row values during annealing;
    continuous ones move within their full ranges.
    """
    known = {b[0] for b in space.bounds()} | {n for n, _ in space.discrete}
    unknown = set(ca.spec.names) - known
    if unknown:
        raise SearchError(f"covering-array parameters not in search space: {sorted(unknown)}")
    discrete_names = {n for n, _ in space.discrete}
    result = CampaignResult()
    points = [ca_row_point(ca, k, space) for k in range(len(ca))]
    for point, (r, err) in zip(points, evaluate_many(objective, points, jobs, record_errors)):
        result.record(point, r, "ca", err)
    ca_evals = list(result.evaluations)
    result.falsifying_count = sum(1 for e in ca_evals if e.robustness <= 0)
    seeds = sorted((e for e in ca_evals if 0 < e.robustness < math.inf), key=lambda e: (e.robustness, e.trace_id))
    base = sa or SAConfig()
    rng = np.random.default_rng(seed)
    spent = 0
    for ev in seeds:
        left = max_extra_budget - spent
        if left <= 0:
            break
        cfg = SAConfig(
            budget=min(per_seed_budget, left),
            initial_temperature=base.initial_temperature,
            cooling_factor=base.cooling_factor,
            proposal_scale=base.proposal_scale,
            restart_patience=base.restart_patience,
            discrete_resample_prob=base.discrete_resample_prob,
            seed=base.seed,
        )
        frozen = {n: ev.point[n] for n in discrete_names}
        before = len(result.evaluations)
        falsify_sa(
            space, objective, cfg, warm_start=ev.point, frozen=frozen, result=result, rng=rng,
            warm_robustness=ev.robustness, record_errors=record_errors,
        )
        spent += len(result.evaluations) - before
    return result


@dataclass
class Heatmap:
    x_name: str
    y_name: str
    x_values: np.ndarray
    y_values: np.ndarray
    values: np.ndarray  # shape (len(y_values), len(x_values)), NaN where invalid
    invalid: np.ndarray

    @property
    def counterexamples(self) -> np.ndarray:
        return np.where(self.invalid, False, np.nan_to_num(self.values, nan=0.0) < 0)


def _grid(lo: float, hi: float, n: int) -> np.ndarray:
    if n < 1:
        raise SearchError("grid dimensions must be >= 1")
    return np.array([0.5 * (lo + hi)]) if n == 1 else np.linspace(lo, hi, n)


def robustness_heatmap(
    space: SearchSpace,
    objective: Callable[[Point], float],
    shape: tuple[int, int],
    fixed: Mapping[str, Any] | None = None,
    jobs: int = 1,
) -> Heatmap:
    """Robustness on an n x m grid over the two free scalar variables.

    Rows follow the second variable, columns the first (row-major order).
    Failed simulations leave NaN and are flagged invalid.
    """
    fixed = dict(fixed or {})
    free = [b for b in space.bounds() if b[0] not in fixed]
    free_discrete = [n for n, _ in space.discrete if n not in fixed]
    if len(free) != 2 or free_discrete:
        raise SearchError(f"heatmap needs exactly two free continuous variables, got {[b[0] for b in free] + free_discrete}")
    (xn, xlo, xhi), (yn, ylo, yhi) = free
    xs, ys = _grid(xlo, xhi, shape[1]), _grid(ylo, yhi, shape[0])
    base = space.midpoint()
    base.update(fixed)
    points = []
    for y in ys:
        for x in xs:
            p = dict(base)
            p[xn], p[yn] = float(x), float(y)
            points.append(p)
    outcomes = evaluate_many(objective, points, jobs)
    invalid = np.array([err is not None for _, err in outcomes])
    values = np.array([np.nan if err is not None else r for r, err in outcomes])
    shape2 = (len(ys), len(xs))
    return Heatmap(xn, yn, xs, ys, values.reshape(shape2), invalid.reshape(shape2))
