"""Deterministic closed-loop discrete-event simulation of cache + networked backend.

Each device is a single FIFO server whose service rate is its standalone
throughput for the configured workload (the backend's further capped by its
link share). ``threads * inflight`` slots each keep one request outstanding
and reissue the moment it completes.
"""

from __future__ import annotations

import bisect
import math
import random
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .models import (
    CompletionRecord,
    ConfigError,
    Device,
    DeviceModel,
    LinkModel,
    WorkloadKey,
    device_throughput,
    effective_backend_throughput,
)
from .monitor import SlidingWindow, ThroughputSample
from .scheduler import CallbackDispatcher, ControlStatus, Dispatcher

POLICY_KINDS = ("CacheOnly", "BackendOnly", "StaticSplit", "RandomSplit", "NetCas")
_POLICY_RE = re.compile(r"^(?P<kind>[A-Za-z]+)(?:\((?P<rho>[^)]*)\))?$")


@dataclass(frozen=True)
class PolicySpec:
    """Policy identifier; split policies without ``rho`` use the profile's base ratio."""

    kind: str
    rho: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"unknown policy {self.kind!r}; expected one of {POLICY_KINDS}")
        if self.rho is not None:
            if self.kind not in ("StaticSplit", "RandomSplit"):
                raise ConfigError(f"{self.kind} takes no ratio")
            if not 0.0 <= self.rho <= 1.0:
                raise ConfigError(f"split ratio must lie in [0, 1], got {self.rho}")

    @classmethod
    def parse(cls, text: str) -> "PolicySpec":
        m = _POLICY_RE.match(text.strip())
        if not m:
            raise ConfigError(f"cannot parse policy {text!r}")
        rho = m.group("rho")
        try:
            return cls(m.group("kind"), float(rho) if rho else None)
        except ValueError as exc:
            raise ConfigError(f"bad ratio in policy {text!r}") from exc

    def __str__(self) -> str:
        return self.kind if self.rho is None else f"{self.kind}({self.rho:g})"


@dataclass(frozen=True)
class SimConfig:
    workload: WorkloadKey
    duration_s: float
    policy: PolicySpec = PolicySpec("CacheOnly")
    rng_seed: int = 0
    epoch_s: float = 0.1

    def __post_init__(self) -> None:
        if not self.epoch_s > 0:
            raise ConfigError("epoch_s must be positive")
        if not self.duration_s > self.epoch_s:
            raise ConfigError("duration_s must exceed the warm-up epoch")
        if not -(2**63) <= self.rng_seed < 2**64:
            raise ConfigError("rng_seed must fit in 64 bits")
        n = round(self.duration_s / self.epoch_s)
        if not math.isclose(n * self.epoch_s, self.duration_s, rel_tol=1e-9):
            raise ConfigError("duration_s must be a whole number of epochs")

    @property
    def n_epochs(self) -> int:
        return round(self.duration_s / self.epoch_s)


@dataclass(frozen=True)
class EpochRow:
    """Per-epoch output: monitor sample plus the dispatcher's control snapshot."""

    sample: ThroughputSample
    t_s: float
    status: ControlStatus


@dataclass
class SimResult:
    config: SimConfig
    epochs: list[EpochRow]
    issued: int
    completed: int
    outstanding: int
    records: Optional[list[CompletionRecord]] = None
    last_completion_s: float = 0.0
    cache_rate: float = 0.0
    backend_rates: list[tuple[float, float]] = field(default_factory=list)

    def throughput(self, start_s: float = 0.0, end_s: Optional[float] = None) -> float:
        """Mean completions/s over epochs whose start lies in ``[start_s, end_s)``."""
        end_s = self.config.duration_s if end_s is None else end_s
        rows = [e for e in self.epochs if start_s - 1e-9 <= e.t_s < end_s - 1e-9]
        if not rows:
            raise ValueError("no epochs in the requested interval")
        n = sum(e.sample.n + e.sample.cache_n for e in rows)
        return n / (len(rows) * self.config.epoch_s)


def lognormal_params(cv: float) -> tuple[float, float]:
    """(mu, sigma) of a unit-mean lognormal with coefficient of variation ``cv``."""
    sigma2 = math.log1p(cv * cv)
    return -0.5 * sigma2, math.sqrt(sigma2)


def _jitter_fn(cv: float, rng: random.Random) -> Callable[[], float]:
    if cv == 0:
        return lambda: 1.0
    mu, sigma = lognormal_params(cv)
    draw = rng.lognormvariate
    return lambda: draw(mu, sigma)


def run_simulation(
    cfg: SimConfig,
    cache: DeviceModel,
    backend: DeviceModel,
    link: LinkModel,
    policy_impl: Union[Dispatcher, Callable[[int], Device]],
    *,
    window_len: int = 10,
    keep_records: bool = False,
    on_record: Optional[Callable[[CompletionRecord], None]] = None,
) -> SimResult:
    """Run one closed-loop simulation.

    Identical arguments produce identical output: all randomness comes from
    per-device streams seeded by ``cfg.rng_seed``.
    """
    if not isinstance(policy_impl, Dispatcher):
        policy_impl = CallbackDispatcher(policy_impl)
    key = cfg.workload
    bs = key.block_size_bytes
    n_epochs = cfg.n_epochs

    monitor = SlidingWindow(cfg.epoch_s, window_len)
    epoch_of = monitor.epoch_of
    ingest = monitor.ingest

    cache_rate = device_throughput(cache, key)
    change_times = link.breakpoints(cfg.duration_s)
    seg_starts = [0.0, *change_times]
    seg_rates = [effective_backend_throughput(backend, link, key, t) for t in seg_starts]
    if min(seg_rates) <= 0:
        raise ConfigError("backend has zero throughput on some link segment")
    single_segment = len(seg_starts) == 1
    backend_rate0 = seg_rates[0]

    jit_c = _jitter_fn(cache.service_jitter_cv, random.Random(f"{cfg.rng_seed}:cache"))
    jit_b = _jitter_fn(backend.service_jitter_cv, random.Random(f"{cfg.rng_seed}:backend"))
    dispatch = policy_impl.dispatch

    records: Optional[list[CompletionRecord]] = [] if keep_records else None
    rows: list[EpochRow] = []

    # queue entries: (req_id, issue_time, slot)
    q_c: deque = deque()
    q_b: deque = deque()
    cur_c = cur_b = None  # (req_id, issue_time, slot, start_time)
    done_c = done_b = math.inf
    inf = math.inf

    def close_epochs_through(idx: int) -> None:
        while monitor.next_index < idx:
            sample = monitor.epoch_close()
            t_end = (sample.epoch_index + 1) * cfg.epoch_s
            policy_impl.on_epoch(sample, t_end)
            rows.append(EpochRow(sample, sample.epoch_index * cfg.epoch_s, policy_impl.status()))

    def backend_rate(t: float) -> float:
        if single_segment:
            return backend_rate0
        return seg_rates[bisect.bisect_right(seg_starts, t) - 1]

    issued = 0
    n_slots = key.concurrency
    for slot in range(n_slots):
        dev = dispatch(issued)
        (q_c if dev is Device.CACHE else q_b).append((issued, 0.0, slot))
        issued += 1
    if q_c:
        rid, it, sl = q_c.popleft()
        cur_c = (rid, it, sl, 0.0)
        done_c = jit_c() / cache_rate
    if q_b:
        rid, it, sl = q_b.popleft()
        cur_b = (rid, it, sl, 0.0)
        done_b = jit_b() / backend_rate(0.0)

    completed = 0
    last = 0.0
    while True:
        if done_c <= done_b:
            now = done_c
            if epoch_of(now) >= n_epochs:
                break
            rid, it, sl, st = cur_c
            rec = CompletionRecord(rid, Device.CACHE, st, now, bs, it, sl)
            if q_c:
                nrid, nit, nsl = q_c.popleft()
                cur_c = (nrid, nit, nsl, now)
                done_c = now + jit_c() / cache_rate
            else:
                cur_c = None
                done_c = inf
        else:
            now = done_b
            if epoch_of(now) >= n_epochs:
                break
            rid, it, sl, st = cur_b
            rec = CompletionRecord(rid, Device.BACKEND, st, now, bs, it, sl)
            if q_b:
                nrid, nit, nsl = q_b.popleft()
                cur_b = (nrid, nit, nsl, now)
                done_b = now + jit_b() / backend_rate(now)
            else:
                cur_b = None
                done_b = inf

        if epoch_of(now) > monitor.next_index:
            close_epochs_through(epoch_of(now))
        ingest(rec)
        completed += 1
        last = now
        if records is not None:
            records.append(rec)
        if on_record is not None:
            on_record(rec)

        # closed loop: the slot reissues immediately
        dev = dispatch(issued)
        if dev is Device.CACHE:
            if cur_c is None:
                cur_c = (issued, now, sl, now)
                done_c = now + jit_c() / cache_rate
            else:
                q_c.append((issued, now, sl))
        else:
            if cur_b is None:
                cur_b = (issued, now, sl, now)
                done_b = now + jit_b() / backend_rate(now)
            else:
                q_b.append((issued, now, sl))
        issued += 1

    close_epochs_through(n_epochs)
    return SimResult(
        config=cfg,
        epochs=rows,
        issued=issued,
        completed=completed,
        outstanding=issued - completed,
        records=records,
        last_completion_s=last,
        cache_rate=cache_rate,
        backend_rates=list(zip(seg_starts, seg_rates)),
    )
