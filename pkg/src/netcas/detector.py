"""Congestion severity score from backend throughput and latency deviations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .monitor import ThroughputSample

PERMIL_MAX = 1000


class UninitializedBaselineError(RuntimeError):
    pass


def round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


@dataclass
class DetectorState:
    """Throughput/latency baselines and the weights that combine their deviations.

    Baselines only move toward "better" (higher throughput, lower latency)
    unless ``decay`` is set, in which case they relax by that fraction per
    update before absorbing the new sample.
    """

    beta_b: float = 0.5
    beta_l: float = 0.5
    b_bar: Optional[float] = None
    l_bar: Optional[float] = None
    last_drop_permil: int = 0
    decay: float = 0.0

    def __post_init__(self) -> None:
        if self.beta_b < 0 or self.beta_l < 0 or not math.isclose(self.beta_b + self.beta_l, 1.0):
            raise ValueError("weights must be non-negative and sum to 1")
        if not 0 <= self.decay < 1:
            raise ValueError("decay must lie in [0, 1)")

    @property
    def initialized(self) -> bool:
        return self.b_bar is not None

    def update_baselines(self, sample: ThroughputSample) -> None:
        if sample.empty:
            raise ValueError("empty samples carry no baseline information")
        if self.b_bar is None:
            self.b_bar, self.l_bar = sample.b_t, sample.l_t
            return
        b_bar, l_bar = self.b_bar, self.l_bar
        if self.decay:
            b_bar *= 1.0 - self.decay
            l_bar *= 1.0 + self.decay
        self.b_bar = max(b_bar, sample.b_t)
        self.l_bar = min(l_bar, sample.l_t)

    def deviations(self, sample: ThroughputSample) -> tuple[float, float]:
        if self.b_bar is None or self.l_bar is None:
            raise UninitializedBaselineError("drop_permil needs at least one baseline sample")
        if not (self.b_bar > 0 and self.l_bar > 0):
            raise UninitializedBaselineError("baselines must be positive")
        return (self.b_bar - sample.b_t) / self.b_bar, (sample.l_t - self.l_bar) / self.l_bar

    def drop_permil(self, sample: ThroughputSample) -> int:
        delta_b, delta_l = self.deviations(sample)
        raw = PERMIL_MAX * (self.beta_b * delta_b + self.beta_l * delta_l)
        d = min(PERMIL_MAX, max(0, round_half_away(raw)))
        self.last_drop_permil = d
        return d


def update_baselines(state: DetectorState, sample: ThroughputSample) -> None:
    state.update_baselines(sample)


def drop_permil(state: DetectorState, sample: ThroughputSample) -> int:
    return state.drop_permil(sample)
