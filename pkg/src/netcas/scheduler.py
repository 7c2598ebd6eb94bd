"""Per-request device selection: Batched Weighted Round Robin and baselines."""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass
from typing import Callable, Optional

from .detector import round_half_away
from .models import Device

CACHE = Device.CACHE
BACKEND = Device.BACKEND


class Guard(str, enum.Enum):
    """Which pattern positions go to the backend.

    ``GE`` sends positions ``pos >= pattern_cache`` to the backend, so each
    pattern carries exactly ``pattern_cache`` cache requests. ``GT`` is the
    literal ``pos > pattern_cache`` test, one extra cache slot per pattern.
    """

    GE = "ge"
    GT = "gt"


class BwrrState:
    """Window/pattern/quota state of one dispatch queue.

    A new ratio passed to :meth:`set_ratio` takes effect when the current
    window of ``window_size`` requests is exhausted.
    """

    __slots__ = (
        "window_size", "batch_size", "guard", "rho", "pending_rho", "a", "b",
        "pattern_size", "pattern_cache", "pos", "req_count", "cache_quota",
        "backend_quota", "window_index", "_gt",
    )

    def __init__(self, rho: float, window_size: int = 100, batch_size: int = 64, guard: Guard = Guard.GE) -> None:
        if window_size < 1 or batch_size < 1:
            raise ValueError("window and batch sizes must be positive")
        _check_rho(rho)
        self.window_size = window_size
        self.batch_size = batch_size
        self.guard = Guard(guard)
        self._gt = self.guard is Guard.GT
        self.rho = rho
        self.pending_rho = rho
        self.a = self.b = 0
        self.pattern_size = 1
        self.pattern_cache = 0
        self.pos = 0
        self.cache_quota = self.backend_quota = 0
        self.window_index = -1
        # first dispatch opens the first window
        self.req_count = window_size

    def set_ratio(self, rho: float) -> None:
        _check_rho(rho)
        self.pending_rho = rho

    def begin_window(self, rho: Optional[float] = None) -> None:
        if rho is not None:
            _check_rho(rho)
            self.pending_rho = rho
        rho = self.rho = self.pending_rho
        w = self.window_size
        a = round_half_away(rho * w)
        b = w - a
        self.a, self.b = a, b
        if a > 0 and b > 0:
            self.pattern_size = min(w // math.gcd(a, b), self.batch_size)
            self.pattern_cache = (self.pattern_size * a) // w
        else:
            self.pattern_size = 1
            self.pattern_cache = 1 if b == 0 else 0
        self.pos = 0
        self.req_count = 0
        self.cache_quota = a
        self.backend_quota = b
        self.window_index += 1

    def dispatch(self, req_id: int = 0) -> Device:
        if self.req_count == self.window_size:
            self.begin_window()
        cq = self.cache_quota
        bq = self.backend_quota
        if cq > 0 and bq > 0:
            pos = self.pos
            to_back = pos > self.pattern_cache if self._gt else pos >= self.pattern_cache
            pos += 1
            self.pos = 0 if pos == self.pattern_size else pos
            if to_back:
                self.backend_quota = bq - 1
                dev = BACKEND
            else:
                self.cache_quota = cq - 1
                dev = CACHE
        elif cq == 0:
            self.backend_quota = bq - 1
            dev = BACKEND
        else:
            self.cache_quota = cq - 1
            dev = CACHE
        self.req_count += 1
        return dev


def bwrr_begin_window(state: BwrrState, rho: float) -> None:
    state.begin_window(rho)


def bwrr_dispatch(state: BwrrState, req_id: int = 0) -> Device:
    return state.dispatch(req_id)


def random_dispatch(rho: float, rng: random.Random) -> Device:
    return CACHE if rng.random() < rho else BACKEND


def _check_rho(rho: float) -> None:
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"split ratio must lie in [0, 1], got {rho}")


@dataclass(frozen=True)
class ControlStatus:
    """Snapshot of a dispatcher's control state for per-epoch reporting."""

    rho: float
    mode: str
    drop_permil: int = 0
    i_cache: float = math.nan
    i_back: float = math.nan


class Dispatcher:
    """Routes each ready request; ``on_epoch`` is the control-loop hook."""

    name = "dispatcher"

    def dispatch(self, req_id: int) -> Device:
        raise NotImplementedError

    def on_epoch(self, sample, now: float) -> None:
        pass

    def status(self) -> ControlStatus:
        return ControlStatus(rho=math.nan, mode="Static")


class CacheOnly(Dispatcher):
    name = "CacheOnly"

    def dispatch(self, req_id: int) -> Device:
        return CACHE

    def status(self) -> ControlStatus:
        return ControlStatus(rho=1.0, mode="Static")


class BackendOnly(Dispatcher):
    name = "BackendOnly"

    def dispatch(self, req_id: int) -> Device:
        return BACKEND

    def status(self) -> ControlStatus:
        return ControlStatus(rho=0.0, mode="Static")


class StaticSplit(Dispatcher):
    """BWRR with a frozen ratio and no detector."""

    name = "StaticSplit"

    def __init__(self, rho: float, window_size: int = 100, batch_size: int = 64, guard: Guard = Guard.GE) -> None:
        self.bwrr = BwrrState(rho, window_size, batch_size, guard)
        self.dispatch = self.bwrr.dispatch

    def status(self) -> ControlStatus:
        return ControlStatus(rho=self.bwrr.pending_rho, mode="Static")


class RandomSplit(Dispatcher):
    name = "RandomSplit"

    def __init__(self, rho: float, rng: random.Random) -> None:
        _check_rho(rho)
        self.rho = rho
        self._draw = rng.random

    def dispatch(self, req_id: int) -> Device:
        return CACHE if self._draw() < self.rho else BACKEND

    def status(self) -> ControlStatus:
        return ControlStatus(rho=self.rho, mode="Static")


class CallbackDispatcher(Dispatcher):
    """Adapts a bare ``req_id -> Device`` callable."""

    name = "Callback"

    def __init__(self, fn: Callable[[int], Device]) -> None:
        self.dispatch = fn


def static_policy(kind: str, rho: Optional[float] = None, **bwrr_kwargs) -> Dispatcher:
    """Build one of the non-adaptive dispatchers by name."""
    if kind == "CacheOnly":
        return CacheOnly()
    if kind == "BackendOnly":
        return BackendOnly()
    if kind == "StaticSplit":
        if rho is None:
            raise ValueError("StaticSplit needs a ratio")
        return StaticSplit(rho, **bwrr_kwargs)
    raise ValueError(f"unknown static policy {kind!r}")
