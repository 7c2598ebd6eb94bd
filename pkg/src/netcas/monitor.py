"""Per-epoch throughput/latency aggregation over completion records."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .models import CompletionRecord, Device


@dataclass(frozen=True)
class ThroughputSample:
    """One monitoring epoch.

    ``b_t``/``l_t``/``n`` describe the backend path only; the cache and
    end-to-end fields are for run reporting and never reach the detector.
    """

    epoch_index: int
    b_t: float
    l_t: float
    n: int
    cache_n: int = 0
    cache_bytes: int = 0
    mean_latency_s: float = math.nan

    @property
    def empty(self) -> bool:
        return self.n == 0


class _EpochAcc:
    __slots__ = ("b_bytes", "b_n", "b_lat", "c_bytes", "c_n", "e2e")

    def __init__(self) -> None:
        self.b_bytes = 0
        self.b_n = 0
        self.b_lat = 0.0
        self.c_bytes = 0
        self.c_n = 0
        self.e2e = 0.0


class SlidingWindow:
    """Fixed-length epoch window; epochs of ``epoch_s`` seconds, oldest evicted first."""

    def __init__(self, epoch_s: float = 0.1, window_len: int = 10) -> None:
        if not epoch_s > 0:
            raise ValueError("epoch_s must be positive")
        if window_len < 1:
            raise ValueError("window_len must be >= 1")
        self.epoch_s = epoch_s
        self.window_len = window_len
        self.samples: deque[ThroughputSample] = deque(maxlen=window_len)
        self.next_index = 0
        self._pending: dict[int, _EpochAcc] = {}

    def epoch_of(self, t: float) -> int:
        return int(t / self.epoch_s)

    @property
    def filled(self) -> bool:
        return len(self.samples) == self.window_len

    def ingest(self, record: CompletionRecord) -> None:
        """Accumulate ``record`` into the epoch containing its completion time."""
        idx = int(record.complete_time_s / self.epoch_s)
        if idx < self.next_index:
            raise ValueError(f"record completes in closed epoch {idx}")
        acc = self._pending.get(idx)
        if acc is None:
            acc = self._pending[idx] = _EpochAcc()
        acc.e2e += record.complete_time_s - record.issue_time_s
        if record.device is Device.BACKEND:
            acc.b_bytes += record.bytes
            acc.b_n += 1
            acc.b_lat += record.complete_time_s - record.submit_time_s
        else:
            acc.c_bytes += record.bytes
            acc.c_n += 1

    def epoch_close(self) -> ThroughputSample:
        idx = self.next_index
        acc = self._pending.pop(idx, None) or _EpochAcc()
        total = acc.b_n + acc.c_n
        sample = ThroughputSample(
            epoch_index=idx,
            b_t=acc.b_bytes / self.epoch_s,
            l_t=acc.b_lat / acc.b_n if acc.b_n else 0.0,
            n=acc.b_n,
            cache_n=acc.c_n,
            cache_bytes=acc.c_bytes,
            mean_latency_s=acc.e2e / total if total else math.nan,
        )
        self.samples.append(sample)
        self.next_index = idx + 1
        return sample


Monitor = SlidingWindow
