"""Synthetic objectives with known falsifying regions, for checking the search code."""

from __future__ import annotations

from dataclasses import dataclass

from .covering import MixedStrengthSpec, ParameterDomain
from .optimize import SearchSpace


@dataclass(frozen=True)
class Needle:
    """One discrete pair hides a narrow continuous basin of negative robustness.

    Discrete variables ``d0 .. d{n-1}`` each take ``levels`` values and
    ``x`` ranges over [0, 1]. Only when ``d0 == target[0]`` and
    ``d1 == target[1]`` can robustness drop below zero, inside
    ``|x - center| < width / 2``. Elsewhere it stays at least ``offset``
    above the needle's level, so the needle combination always ranks first.
    """

    levels: int = 4
    n_discrete: int = 3
    target: tuple[int, int] = (2, 1)
    center: float = 0.6
    width: float = 0.05
    offset: float = 1.0

    def __call__(self, point) -> float:
        base = abs(point["x"] - self.center) - self.width / 2
        if (point["d0"], point["d1"]) == self.target:
            return base
        return base + self.offset + 0.1 * abs(point["d0"] - self.target[0])

    def space(self) -> SearchSpace:
        return SearchSpace(
            continuous=(("x", 0.0, 1.0),),
            discrete=tuple((f"d{k}", tuple(range(self.levels))) for k in range(self.n_discrete)),
        )

    def ca_spec(self, x_levels: int = 4) -> MixedStrengthSpec:
        doms = [ParameterDomain.discrete(f"d{k}", range(self.levels)) for k in range(self.n_discrete)]
        doms.append(ParameterDomain.continuous("x", 0.0, 1.0, x_levels))
        return MixedStrengthSpec(tuple(doms), 2)

    def hit_probability(self) -> float:
        """Chance that one uniform sample lands in the falsifying region."""
        return self.width / self.levels**2

    def random_success_probability(self, budget: int) -> float:
        return 1.0 - (1.0 - self.hit_probability()) ** budget


@dataclass(frozen=True)
class Shifted:
    """|x - center| - half_width on x in [0, 1]."""

    center: float = 0.7
    half_width: float = 0.05

    def __call__(self, point) -> float:
        return abs(point["x"] - self.center) - self.half_width


@dataclass(frozen=True)
class Constant:
    value: float = 1.0

    def __call__(self, point) -> float:
        return self.value
