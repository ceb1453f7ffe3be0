"""Discrete-time robust semantics of STL over sampled traces.

Three evaluators share nothing but the time-window helper:

* :func:`robustness` computes the real-valued semantics bottom-up, one array
  per formula node (numpy, O(|f| N^2) worst case).
* :func:`boolean_satisfaction` is a memoized Boolean-valued recursion over
  (node, index) using set membership. It serves as the oracle.
* :func:`worst_time` re-runs the robust recursion in plain Python while
  tracking which sample's predicate distance the min/max choices select.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .stl import (
    TIME_TOL,
    Always,
    And,
    Eventually,
    Formula,
    Implies,
    Interval,
    Next,
    Not,
    Or,
    Pred,
    Release,
    Top,
    Until,
    formula_horizon,
    free_channels,
    next_depth,
)
from .trace import EUCLIDEAN, ChannelError, Metric, Trace, TraceError, signed_distance_series, validate_trace

INF = math.inf


def _check(f: Formula, tr: Trace, i: int) -> None:
    problems = validate_trace(tr)
    if problems:
        raise TraceError("invalid trace: " + "; ".join(problems))
    missing = [c for c in free_channels(f) if c not in tr.values and c not in tr.params]
    if missing:
        raise ChannelError(f"formula references channels missing from trace: {missing}")
    if not 0 <= i < len(tr.times):
        raise IndexError(f"sample index {i} out of range for trace of {len(tr.times)} samples")


def window(times: np.ndarray, i: int, interval: Interval) -> range:
    """Indices j >= i with (t_j - t_i) in ``interval`` (contiguous)."""
    d = times[i:] - times[i]
    tol = TIME_TOL
    ok = d >= interval.lower - tol if interval.lower_closed else d > interval.lower + tol
    if math.isfinite(interval.upper):
        ok &= d <= interval.upper + tol if interval.upper_closed else d < interval.upper - tol
    idx = np.flatnonzero(ok)
    if not len(idx):
        return range(0)
    return range(i + int(idx[0]), i + int(idx[-1]) + 1)


# ---------------------------------------------------------------------------
# Robust semantics


class _Robust:
    def __init__(self, tr: Trace, metric: Metric):
        self.tr = tr
        self.metric = metric
        self.n = len(tr.times)
        self.memo: dict[int, np.ndarray] = {}
        self.windows: dict[Interval, list[range]] = {}

    def win(self, interval: Interval) -> list[range]:
        if interval not in self.windows:
            self.windows[interval] = [window(self.tr.times, i, interval) for i in range(self.n)]
        return self.windows[interval]

    def eval(self, f: Formula) -> np.ndarray:
        key = id(f)
        if key in self.memo:
            return self.memo[key]
        out = self._eval(f)
        self.memo[key] = out
        return out

    def _eval(self, f: Formula) -> np.ndarray:
        n = self.n
        if isinstance(f, Top):
            return np.full(n, INF)
        if isinstance(f, Pred):
            return signed_distance_series(self.tr, f.pset, self.metric)
        if isinstance(f, Not):
            return -self.eval(f.arg)
        if isinstance(f, And):
            return np.minimum(self.eval(f.left), self.eval(f.right))
        if isinstance(f, Or):
            return np.maximum(self.eval(f.left), self.eval(f.right))
        if isinstance(f, Implies):
            return np.maximum(-self.eval(f.left), self.eval(f.right))
        if isinstance(f, Next):
            r = self.eval(f.arg)
            out = np.full(n, -INF)
            out[:-1] = r[1:]
            return out
        if isinstance(f, Eventually):
            r = self.eval(f.arg)
            return np.array([r[w.start : w.stop].max() if len(w) else -INF for w in self.win(f.interval)])
        if isinstance(f, Always):
            r = self.eval(f.arg)
            return np.array([r[w.start : w.stop].min() if len(w) else INF for w in self.win(f.interval)])
        if isinstance(f, Until):
            return self._until(self.eval(f.left), self.eval(f.right), f.interval)
        if isinstance(f, Release):
            return self._release(self.eval(f.left), self.eval(f.right), f.interval)
        raise TypeError(f"not a formula: {f!r}")

    def _until(self, r1: np.ndarray, r2: np.ndarray, interval: Interval) -> np.ndarray:
        out = np.full(self.n, -INF)
        for i, w in enumerate(self.win(interval)):
            if not len(w):
                continue
            # held[j - i] = min(r1[i..j-1]); empty min is +inf
            held = np.empty(w.stop - i)
            held[0] = INF
            if w.stop - i > 1:
                held[1:] = np.minimum.accumulate(r1[i : w.stop - 1])
            cand = np.minimum(r2[w.start : w.stop], held[w.start - i :])
            out[i] = cand.max()
        return out

    def _release(self, r1: np.ndarray, r2: np.ndarray, interval: Interval) -> np.ndarray:
        out = np.full(self.n, INF)
        for i, w in enumerate(self.win(interval)):
            if not len(w):
                continue
            held = np.empty(w.stop - i)
            held[0] = -INF
            if w.stop - i > 1:
                held[1:] = np.maximum.accumulate(r1[i : w.stop - 1])
            cand = np.maximum(r2[w.start : w.stop], held[w.start - i :])
            out[i] = cand.min()
        return out


def robustness(f: Formula, tr: Trace, i: int = 0, metric: Metric = EUCLIDEAN) -> float:
    _check(f, tr, i)
    return float(_Robust(tr, metric).eval(f)[i])


def robustness_series(f: Formula, tr: Trace, metric: Metric = EUCLIDEAN) -> np.ndarray:
    """Robustness at every sample index."""
    _check(f, tr, 0)
    return _Robust(tr, metric).eval(f).copy()


# ---------------------------------------------------------------------------
# Boolean oracle


def boolean_satisfaction(f: Formula, tr: Trace, i: int = 0) -> bool:
    _check(f, tr, i)
    times = tr.times
    n = len(times)
    points = [tr.point(k) for k in range(n)]
    memo: dict[tuple[int, int], bool] = {}

    def sat(g: Formula, k: int) -> bool:
        key = (id(g), k)
        if key in memo:
            return memo[key]
        if isinstance(g, Top):
            v = True
        elif isinstance(g, Pred):
            v = g.pset.contains(points[k])
        elif isinstance(g, Not):
            v = not sat(g.arg, k)
        elif isinstance(g, And):
            v = sat(g.left, k) and sat(g.right, k)
        elif isinstance(g, Or):
            v = sat(g.left, k) or sat(g.right, k)
        elif isinstance(g, Implies):
            v = (not sat(g.left, k)) or sat(g.right, k)
        elif isinstance(g, Next):
            v = k + 1 < n and sat(g.arg, k + 1)
        else:
            iv = g.interval
            js = [j for j in range(k, n) if iv.contains(times[j] - times[k])]
            if isinstance(g, Eventually):
                v = any(sat(g.arg, j) for j in js)
            elif isinstance(g, Always):
                v = all(sat(g.arg, j) for j in js)
            elif isinstance(g, Until):
                v = any(sat(g.right, j) and all(sat(g.left, m) for m in range(k, j)) for j in js)
            elif isinstance(g, Release):
                v = all(sat(g.right, j) or any(sat(g.left, m) for m in range(k, j)) for j in js)
            else:
                raise TypeError(f"not a formula: {g!r}")
        memo[key] = v
        return v

    return sat(f, i)


# ---------------------------------------------------------------------------
# Witness tracking

# A witness is a sample index or None (no predicate involved, e.g. "true").
_NO = None


def _wkey(w):
    return math.inf if w is None else w


def _pick_min(a, b):
    if a[0] < b[0]:
        return a
    if b[0] < a[0]:
        return b
    return a if _wkey(a[1]) <= _wkey(b[1]) else b


def _pick_max(a, b):
    if a[0] > b[0]:
        return a
    if b[0] > a[0]:
        return b
    return a if _wkey(a[1]) <= _wkey(b[1]) else b


def _witness_eval(f: Formula, tr: Trace, metric: Metric):
    times = tr.times
    n = len(times)
    memo: dict[int, list] = {}
    windows: dict[Interval, list[range]] = {}

    def win(iv):
        if iv not in windows:
            windows[iv] = [window(times, i, iv) for i in range(n)]
        return windows[iv]

    def ev(g: Formula) -> list:
        key = id(g)
        if key in memo:
            return memo[key]
        if isinstance(g, Top):
            out = [(INF, _NO)] * n
        elif isinstance(g, Pred):
            d = signed_distance_series(tr, g.pset, metric)
            out = [(float(d[k]), k) for k in range(n)]
        elif isinstance(g, Not):
            out = [(-v, w) for v, w in ev(g.arg)]
        elif isinstance(g, (And, Or, Implies)):
            left = ev(g.left)
            if isinstance(g, Implies):
                left = [(-v, w) for v, w in left]
            pick = _pick_min if isinstance(g, And) else _pick_max
            out = [pick(a, b) for a, b in zip(left, ev(g.right))]
        elif isinstance(g, Next):
            r = ev(g.arg)
            out = [r[k + 1] if k + 1 < n else (-INF, k) for k in range(n)]
        elif isinstance(g, (Eventually, Always)):
            r = ev(g.arg)
            always = isinstance(g, Always)
            out = []
            for k, w in enumerate(win(g.interval)):
                if not len(w):
                    out.append((INF if always else -INF, k))
                    continue
                best = r[w.start]
                for j in w[1:]:
                    best = _pick_min(best, r[j]) if always else _pick_max(best, r[j])
                out.append(best)
        elif isinstance(g, (Until, Release)):
            r1, r2 = ev(g.left), ev(g.right)
            until = isinstance(g, Until)
            inner, outer = (_pick_min, _pick_max) if until else (_pick_max, _pick_min)
            out = []
            for k, w in enumerate(win(g.interval)):
                if not len(w):
                    out.append((-INF if until else INF, k))
                    continue
                held = (INF if until else -INF, _NO)
                best = None
                for j in range(k, w.stop):
                    if j >= w.start:
                        cand = inner(r2[j], held)
                        best = cand if best is None else outer(best, cand)
                    held = inner(held, r1[j])
                out.append(best)
        else:
            raise TypeError(f"not a formula: {g!r}")
        memo[key] = out
        return out

    return ev(f)


def worst_time(f: Formula, tr: Trace, i: int = 0, metric: Metric = EUCLIDEAN) -> float | None:
    """Timestamp of the sample whose predicate value determines the robustness.

    For violated formulas this is the time of the worst violation; for
    satisfied ones, the least-robust witness. Ties go to the earliest time.
    Returns None when no predicate decides the value (e.g. ``true``).
    """
    _check(f, tr, i)
    _, w = _witness_eval(f, tr, metric)[i]
    return None if w is None else float(tr.times[w])


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MonitorResult:
    robustness: float
    satisfied: bool
    worst_time: float | None
    inconclusive: bool
    # True when samples beyond the trace end could change the verdict.
    extension_sensitive: bool

    def to_json(self) -> dict:
        r = self.robustness
        return {
            "robustness": r if math.isfinite(r) else ("inf" if r > 0 else "-inf"),
            "satisfied": self.satisfied,
            "worst_time": self.worst_time,
            "inconclusive_flag": self.inconclusive,
            "extension_sensitive": self.extension_sensitive,
        }


def monitor(f: Formula, tr: Trace, i: int = 0, metric: Metric = EUCLIDEAN) -> MonitorResult:
    rob = robustness(f, tr, i, metric)
    sat = boolean_satisfaction(f, tr, i)
    wt = worst_time(f, tr, i, metric)
    remaining = float(tr.times[-1] - tr.times[i])
    steps_left = len(tr.times) - 1 - i
    sensitive = formula_horizon(f) > remaining or next_depth(f) > steps_left
    return MonitorResult(rob, sat, wt, rob == 0.0, sensitive)
