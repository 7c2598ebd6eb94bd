"""Split-ratio model and the NoTable/Warmup/Stable/Congestion mode machine."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional


def predict_completion(rho: float, i_cache: float, i_back: float) -> float:
    """Completion time of a unit batch when ``rho`` of it goes to the cache."""
    if not (i_cache > 0 and i_back > 0):
        raise ValueError("throughputs must be positive")
    return max(rho / i_cache, (1.0 - rho) / i_back)


def base_ratio(i_cache: float, i_back: float) -> float:
    if not (i_cache > 0 and i_back > 0):
        raise ValueError("throughputs must be positive")
    return i_cache / (i_cache + i_back)


def adjusted_ratio(i_cache: float, i_back: float, d: int) -> float:
    """Cache fraction once backend throughput is discounted by ``d`` per-mil."""
    if not 0 <= d <= 1000:
        raise ValueError(f"drop_permil out of range: {d}")
    if not (i_cache > 0 and i_back > 0):
        raise ValueError("throughputs must be positive")
    return i_cache / (i_cache + i_back * (1.0 - d / 1000.0))


class Mode(enum.Enum):
    NO_TABLE = "NoTable"
    WARMUP = "Warmup"
    STABLE = "Stable"
    CONGESTION = "Congestion"


@dataclass(frozen=True)
class ModeEvents:
    """What happened during one epoch.

    ``profile`` carries ``(i_cache, i_back)`` once a profile entry is usable.
    """

    profile: Optional[tuple[float, float]] = None
    window_filled: bool = False
    drop_permil: Optional[int] = None


class SplitterMode:
    """Mode state machine.

    ``max_rho`` keeps a trickle of backend traffic in Congestion so the
    detector keeps receiving samples and can see the link recover.
    """

    def __init__(
        self,
        congestion_enter_permil: int = 100,
        congestion_exit_permil: int = 50,
        recalc_every_epochs: int = 5,
        max_rho: float = 0.99,
    ) -> None:
        if not congestion_exit_permil < congestion_enter_permil:
            raise ValueError("exit threshold must be below the enter threshold")
        if recalc_every_epochs < 1:
            raise ValueError("recalc_every_epochs must be >= 1")
        if not 0 < max_rho <= 1:
            raise ValueError("max_rho must lie in (0, 1]")
        self.congestion_enter_permil = congestion_enter_permil
        self.congestion_exit_permil = congestion_exit_permil
        self.recalc_every_epochs = recalc_every_epochs
        self.max_rho = max_rho
        self.mode = Mode.NO_TABLE
        self.i_cache: Optional[float] = None
        self.i_back: Optional[float] = None
        self.rho_base: Optional[float] = None
        self.rho: float = 1.0
        self._since_recalc = 0
        self._calm = 0

    def _congested_ratio(self, d: int) -> float:
        return min(self.max_rho, adjusted_ratio(self.i_cache, self.i_back, d))

    def step(self, events: ModeEvents) -> tuple[Mode, Optional[float]]:
        """Advance one epoch; returns the mode and a new ratio when it changed."""
        d = events.drop_permil
        if self.mode is Mode.NO_TABLE:
            if events.profile is None:
                return self.mode, None
            self.i_cache, self.i_back = events.profile
            self.rho_base = base_ratio(self.i_cache, self.i_back)
            self.rho = self.rho_base
            self.mode = Mode.WARMUP
            return self.mode, self.rho

        if self.mode is Mode.WARMUP:
            if events.window_filled:
                self.mode = Mode.STABLE
            return self.mode, None

        if self.mode is Mode.STABLE:
            if d is not None and d >= self.congestion_enter_permil:
                self.mode = Mode.CONGESTION
                self._since_recalc = 0
                self._calm = 0
                self.rho = self._congested_ratio(d)
                return self.mode, self.rho
            return self.mode, None

        # Congestion
        if d is None:
            return self.mode, None
        self._calm = self._calm + 1 if d <= self.congestion_exit_permil else 0
        if self._calm >= self.recalc_every_epochs:
            self.mode = Mode.STABLE
            self.rho = self.rho_base
            return self.mode, self.rho
        self._since_recalc += 1
        if self._since_recalc >= self.recalc_every_epochs:
            self._since_recalc = 0
            new = self._congested_ratio(d)
            if new != self.rho:
                self.rho = new
                return self.mode, new
        return self.mode, None


def step_mode(state: SplitterMode, events: ModeEvents) -> tuple[Mode, Optional[float]]:
    return state.step(events)
