"""Workload keys and parametric device / link models."""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

KIB = 1024
MIN_BLOCK = 4 * KIB
MAX_BLOCK = 1024 * KIB


class ConfigError(ValueError):
    """Invalid model, workload or simulation configuration."""


class Device(enum.Enum):
    CACHE = "cache"
    BACKEND = "backend"


class CompletionRecord(NamedTuple):
    """One finished request.

    ``issue_time_s`` is when the slot issued it, ``submit_time_s`` when the
    device started serving it (after waiting in the host queue).
    """

    req_id: int
    device: Device
    submit_time_s: float
    complete_time_s: float
    bytes: int
    issue_time_s: float
    slot: int


@dataclass(frozen=True, order=True)
class WorkloadKey:
    """Index of the performance profile: (block size, inflight per thread, threads)."""

    block_size_bytes: int
    inflight: int
    threads: int

    def __post_init__(self) -> None:
        for name in ("block_size_bytes", "inflight", "threads"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        bs = self.block_size_bytes
        if bs & (bs - 1) or not MIN_BLOCK <= bs <= MAX_BLOCK:
            raise ConfigError(f"block_size_bytes must be a power of two in [4 KiB, 1 MiB], got {bs}")

    @property
    def concurrency(self) -> int:
        return self.threads * self.inflight

    @property
    def label(self) -> str:
        return f"bs{self.block_size_bytes // KIB}k_q{self.inflight}_t{self.threads}"


@dataclass(frozen=True)
class Curve:
    """Piecewise-linear curve with clamped ends.

    ``points`` are ``(x, y)`` pairs; x must be strictly increasing. Outside
    the covered range the curve holds its first/last value.
    """

    points: tuple[tuple[float, float], ...]
    _xs: tuple[float, ...] = field(init=False, repr=False, compare=False)
    _ys: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        pts = tuple((float(x), float(y)) for x, y in self.points)
        if not pts:
            raise ConfigError("curve needs at least one point")
        xs = tuple(p[0] for p in pts)
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ConfigError(f"curve x values must be strictly increasing: {xs}")
        if any(p[1] <= 0 for p in pts):
            raise ConfigError("curve multipliers must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_ys", tuple(p[1] for p in pts))

    @classmethod
    def constant(cls, value: float = 1.0) -> "Curve":
        return cls(((1.0, value),))

    def __call__(self, x: float) -> float:
        xs, ys = self._xs, self._ys
        if x <= xs[0]:
            return ys[0]
        if x >= xs[-1]:
            return ys[-1]
        i = bisect.bisect_right(xs, x)
        x0, x1 = xs[i - 1], xs[i]
        y0, y1 = ys[i - 1], ys[i]
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0)

    def to_json(self) -> list[list[float]]:
        return [[x, y] for x, y in self.points]

    @classmethod
    def from_json(cls, raw: Sequence[Sequence[float]]) -> "Curve":
        return cls(tuple((p[0], p[1]) for p in raw))


@dataclass(frozen=True)
class DeviceModel:
    """Closed-loop throughput model of one storage device.

    ``base_latency_s`` is descriptive: service times are derived from
    throughput alone so that measured closed-loop rates reproduce
    :func:`device_throughput`.
    """

    name: str
    base_iops: float
    scaling: Curve = field(default_factory=Curve.constant)
    block_scaling: Curve = field(default_factory=Curve.constant)
    base_latency_s: float = 1e-4
    service_jitter_cv: float = 0.1

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("device needs a name")
        if not self.base_iops > 0:
            raise ConfigError(f"{self.name}: base_iops must be positive")
        if not self.base_latency_s > 0:
            raise ConfigError(f"{self.name}: base_latency_s must be positive")
        if not 0 <= self.service_jitter_cv < 1:
            raise ConfigError(f"{self.name}: service_jitter_cv must lie in [0, 1)")


@dataclass(frozen=True)
class CompetingFlow:
    start_s: float
    end_s: float
    demand_bytes_per_s: float

    def __post_init__(self) -> None:
        if self.end_s <= self.start_s:
            raise ConfigError(f"competing flow ends before it starts: {self}")
        if self.demand_bytes_per_s < 0:
            raise ConfigError("competing flow demand must be non-negative")

    def active(self, t: float) -> bool:
        return self.start_s <= t < self.end_s


@dataclass(frozen=True)
class LinkModel:
    """Shared bottleneck link between host and backend target."""

    capacity_bytes_per_s: float
    competing_flows: tuple[CompetingFlow, ...] = ()
    base_rtt_s: float = 1e-5

    def __post_init__(self) -> None:
        if not self.capacity_bytes_per_s > 0:
            raise ConfigError("link capacity must be positive")
        if not self.base_rtt_s > 0:
            raise ConfigError("link base_rtt_s must be positive")
        object.__setattr__(self, "competing_flows", tuple(self.competing_flows))

    def with_flows(self, flows: Iterable[CompetingFlow]) -> "LinkModel":
        return LinkModel(self.capacity_bytes_per_s, self.competing_flows + tuple(flows), self.base_rtt_s)

    def active_demands(self, t: float) -> list[float]:
        return [f.demand_bytes_per_s for f in self.competing_flows if f.active(t)]

    def breakpoints(self, horizon_s: float) -> list[float]:
        """Times in (0, horizon) at which the set of active flows changes."""
        times = {t for f in self.competing_flows for t in (f.start_s, f.end_s) if 0 < t < horizon_s}
        return sorted(times)

    def storage_share(self, storage_demand: float, t: float) -> float:
        return max_min_share(self.capacity_bytes_per_s, [storage_demand, *self.active_demands(t)])[0]


def max_min_share(capacity: float, demands: Sequence[float]) -> list[float]:
    """Max-min fair allocation of ``capacity`` among ``demands`` (water filling)."""
    alloc = [0.0] * len(demands)
    remaining = float(capacity)
    pending = sorted(range(len(demands)), key=lambda i: (demands[i], i))
    while pending:
        fair = remaining / len(pending)
        i = pending[0]
        if demands[i] <= fair:
            alloc[i] = float(demands[i])
            remaining -= demands[i]
            pending.pop(0)
        else:
            for j in pending:
                alloc[j] = fair
            break
    return alloc


def device_throughput(model: DeviceModel, key: WorkloadKey) -> float:
    """Standalone requests/s of ``model`` under workload ``key``."""
    return model.base_iops * model.scaling(key.concurrency) * model.block_scaling(key.block_size_bytes)


def effective_backend_throughput(model: DeviceModel, link: LinkModel, key: WorkloadKey, t: float) -> float:
    """Backend requests/s at time ``t`` once the link's fair share is applied.

    The storage flow demands the device's full bandwidth; the result is the
    smaller of the device rate and the link share expressed in requests.
    """
    dev = device_throughput(model, key)
    share = link.storage_share(dev * key.block_size_bytes, t)
    return min(dev, share / key.block_size_bytes)
