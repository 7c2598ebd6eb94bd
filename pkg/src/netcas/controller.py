"""NetCas dispatcher: monitor samples -> detector -> mode machine -> BWRR."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .detector import DetectorState
from .models import WorkloadKey
from .monitor import ThroughputSample
from .profile import PerfProfile, lookup_or_none
from .scheduler import BwrrState, ControlStatus, Dispatcher, Guard
from .splitter import Mode, ModeEvents, SplitterMode


@dataclass(frozen=True)
class NetCasSettings:
    window_len: int = 10
    congestion_enter_permil: int = 100
    congestion_exit_permil: int = 50
    recalc_every_epochs: int = 5
    window_size: int = 100
    batch_size: int = 64
    guard: Guard = Guard.GE
    beta_b: float = 0.5
    beta_l: float = 0.5
    baseline_decay: float = 0.0
    max_rho: float = 0.99
    normalize_share: bool = True


class NetCasPolicy(Dispatcher):
    """Adaptive splitter.

    With a usable profile the policy starts in Warmup at the base ratio.
    Without one it stays in NoTable, sending everything to the cache, until
    ``bootstrap`` delivers ``(i_cache, i_back)`` at simulated time
    ``bootstrap_ready_s``.

    Baselines are learned only from epochs dispatched at the base ratio.
    Away from it the backend throughput sample is rescaled by
    ``(1 - rho_base) / backend_share`` before scoring (``normalize_share``),
    where ``backend_share`` is the backend's fraction of the epoch's
    completions, so traffic the policy itself moved to the cache is not read
    as link loss.
    """

    name = "NetCas"

    def __init__(
        self,
        profile: Optional[PerfProfile],
        key: WorkloadKey,
        settings: NetCasSettings = NetCasSettings(),
        bootstrap: Optional[Callable[[], tuple[float, float]]] = None,
        bootstrap_ready_s: float = 0.0,
    ) -> None:
        self.key = key
        self.settings = settings
        self.detector = DetectorState(settings.beta_b, settings.beta_l, decay=settings.baseline_decay)
        self.machine = SplitterMode(
            settings.congestion_enter_permil,
            settings.congestion_exit_permil,
            settings.recalc_every_epochs,
            settings.max_rho,
        )
        self.bwrr = BwrrState(1.0, settings.window_size, settings.batch_size, settings.guard)
        self.dispatch = self.bwrr.dispatch
        self._bootstrap = bootstrap
        self._bootstrap_ready_s = bootstrap_ready_s
        self._warm_epochs = 0
        self.lookup_fallback = False
        self.last_drop_permil = 0
        hit = lookup_or_none(profile, key)
        if hit is not None:
            self.lookup_fallback = hit.fallback
            self._apply(ModeEvents(profile=(hit.i_cache, hit.i_back)))
        elif bootstrap is None:
            raise ValueError("NetCas needs a profile or a bootstrap builder")

    @property
    def mode(self) -> Mode:
        return self.machine.mode

    def _apply(self, events: ModeEvents) -> None:
        _, new_rho = self.machine.step(events)
        if new_rho is not None:
            self.bwrr.set_ratio(new_rho)

    def _scored_sample(self, sample: ThroughputSample) -> ThroughputSample:
        if not self.settings.normalize_share:
            return sample
        share = sample.n / (sample.n + sample.cache_n)
        scale = (1.0 - self.machine.rho_base) / share
        return ThroughputSample(sample.epoch_index, sample.b_t * scale, sample.l_t, sample.n)

    def on_epoch(self, sample: ThroughputSample, now: float) -> None:
        mode = self.machine.mode
        if mode is Mode.NO_TABLE:
            if now >= self._bootstrap_ready_s - 1e-12:
                self._apply(ModeEvents(profile=self._bootstrap()))
            return

        d = None
        if not sample.empty:
            at_base = mode is not Mode.CONGESTION and self.bwrr.rho == self.machine.rho_base
            if at_base:
                self.detector.update_baselines(sample)
            if self.detector.initialized:
                d = self.detector.drop_permil(sample if at_base else self._scored_sample(sample))
                self.last_drop_permil = d

        if mode is Mode.WARMUP:
            self._warm_epochs += 1
        filled = self._warm_epochs >= self.settings.window_len
        self._apply(ModeEvents(window_filled=filled, drop_permil=d))

    def status(self) -> ControlStatus:
        m = self.machine
        return ControlStatus(
            rho=self.bwrr.pending_rho,
            mode=m.mode.value,
            drop_permil=self.last_drop_permil,
            i_cache=m.i_cache if m.i_cache is not None else math.nan,
            i_back=m.i_back if m.i_back is not None else math.nan,
        )
