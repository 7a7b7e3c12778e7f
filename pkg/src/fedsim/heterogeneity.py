"""Per-client, per-round local step counts modelling computational heterogeneity."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .numeric import STREAM_STEPS, rng_stream


class StepMode(str, enum.Enum):
    FIXED = "fixed"    # drawn once (round 1) and reused
    RANDOM = "random"  # redrawn for every client each round


@dataclass(frozen=True)
class StepSchedule:
    mean: float
    variance: float = 0.0
    mode: StepMode = StepMode.FIXED
    overrides: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", StepMode(self.mode))
        if self.overrides is not None:
            ks = tuple(int(k) for k in self.overrides)
            if any(k < 1 for k in ks):
                raise ConfigurationError("explicit step counts must be >= 1")
            object.__setattr__(self, "overrides", ks)
        elif self.mean < 1:
            raise ConfigurationError("steps mean must be >= 1")
        if self.variance < 0:
            raise ConfigurationError("steps variance must be >= 0")


@dataclass(frozen=True)
class RoundPlan:
    round: int
    steps: tuple
    kbar: float

    @property
    def kmax(self) -> int:
        return max(self.steps)

    @property
    def kmin(self) -> int:
        return min(self.steps)

    @property
    def asynchronous(self) -> bool:
        return self.kmax != self.kmin


def weighted_mean_steps(weights: Sequence[float], steps: Sequence[int]) -> float:
    """``K_bar = sum_i w_i K_i``, accumulated in client order."""
    kbar = 0.0
    for w, k in zip(weights, steps):
        kbar += float(w) * int(k)
    return kbar


def draw_steps(schedule: StepSchedule, round: int, weights: Sequence[float], seed: int) -> RoundPlan:
    """Draw ``K_i = max(1, round(N(mean, variance)))`` for every client.

    Fixed mode always reads the round-1 stream, so every round sees the same
    counts without any cached state. Each round's draw comes from its own
    stream, independent of gradient noise.
    """
    if round < 1:
        raise ConfigurationError("rounds are numbered from 1")
    m = len(weights)
    if schedule.overrides is not None:
        if len(schedule.overrides) != m:
            raise ConfigurationError(f"{len(schedule.overrides)} explicit step counts for {m} clients")
        steps = schedule.overrides
    elif schedule.variance == 0:
        steps = (max(1, int(np.rint(schedule.mean))),) * m
    else:
        key_round = 1 if schedule.mode is StepMode.FIXED else round
        rng = rng_stream(seed, STREAM_STEPS, key_round)
        draws = rng.normal(schedule.mean, np.sqrt(schedule.variance), size=m)
        steps = tuple(max(1, int(k)) for k in np.rint(draws))
    return RoundPlan(round=round, steps=tuple(steps), kbar=weighted_mean_steps(weights, steps))
