"""Perf Profile: standalone device throughputs indexed by workload key."""

from __future__ import annotations

import itertools
import json
import os
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Optional, Union

from .models import DeviceModel, LinkModel, WorkloadKey
from .scheduler import BackendOnly, CacheOnly
from .sim import SimConfig, SimResult, run_simulation

PROFILE_FORMAT = "netcas-perf-profile"
PROFILE_VERSION = 1


class ProfileError(Exception):
    pass


class EmptyProfileError(ProfileError):
    """No entries to look up; the caller should stay in NoTable mode."""


class ProfileVersionError(ProfileError):
    pass


class MalformedProfileError(ProfileError):
    pass


@dataclass(frozen=True)
class ProfileGrid:
    block_sizes: tuple[int, ...]
    inflights: tuple[int, ...]
    threads: tuple[int, ...]

    def __post_init__(self) -> None:
        for name in ("block_sizes", "inflights", "threads"):
            vals = tuple(sorted(set(int(v) for v in getattr(self, name))))
            if not vals:
                raise ValueError(f"grid axis {name} is empty")
            object.__setattr__(self, name, vals)
        # validates every axis value
        for k in self.keys():
            pass

    @classmethod
    def single(cls, key: WorkloadKey) -> "ProfileGrid":
        return cls((key.block_size_bytes,), (key.inflight,), (key.threads,))

    def keys(self) -> Iterator[WorkloadKey]:
        for bs, q, t in itertools.product(self.block_sizes, self.inflights, self.threads):
            yield WorkloadKey(bs, q, t)

    def __len__(self) -> int:
        return len(self.block_sizes) * len(self.inflights) * len(self.threads)

    def __contains__(self, key: WorkloadKey) -> bool:
        return (
            key.block_size_bytes in self.block_sizes
            and key.inflight in self.inflights
            and key.threads in self.threads
        )

    def to_json(self) -> dict:
        return {"block_sizes": list(self.block_sizes), "inflights": list(self.inflights), "threads": list(self.threads)}


@dataclass(frozen=True)
class ProfileEntry:
    i_cache: float
    i_back: float
    measured_s: float

    def __post_init__(self) -> None:
        if not (self.i_cache > 0 and self.i_back > 0):
            raise ProfileError(f"profile throughputs must be positive: {self}")


@dataclass(frozen=True)
class LookupResult:
    i_cache: float
    i_back: float
    key: WorkloadKey
    fallback: bool


@dataclass
class PerfProfile:
    grid: ProfileGrid
    entries: dict[WorkloadKey, ProfileEntry] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for key in self.entries:
            if key not in self.grid:
                raise ProfileError(f"entry {key} lies off the declared grid")

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, key: WorkloadKey, entry: ProfileEntry) -> None:
        if key not in self.grid:
            raise ProfileError(f"entry {key} lies off the declared grid")
        self.entries[key] = entry

    def _distance(self, a: WorkloadKey, b: WorkloadKey) -> Fraction:
        g = self.grid

        def axis(x: int, y: int, vals: tuple[int, ...]) -> Fraction:
            span = (vals[-1] - vals[0]) or 1
            return Fraction(abs(x - y), span)

        lb = lambda v: v.bit_length() - 1  # noqa: E731  exact log2 of a power of two
        log_axis = tuple(lb(v) for v in g.block_sizes)
        return (
            axis(lb(a.block_size_bytes), lb(b.block_size_bytes), log_axis)
            + axis(a.inflight, b.inflight, g.inflights)
            + axis(a.threads, b.threads, g.threads)
        )

    def lookup(self, key: WorkloadKey) -> LookupResult:
        """Exact entry if stored, else the nearest stored neighbour.

        Distance is L1 over (log2 block size, inflight, threads), each axis
        divided by the grid's span; ties go to the smaller key.
        """
        if not self.entries:
            raise EmptyProfileError("profile has no entries")
        hit = self.entries.get(key)
        if hit is not None:
            return LookupResult(hit.i_cache, hit.i_back, key, False)
        best = min(self.entries, key=lambda k: (self._distance(key, k), k))
        e = self.entries[best]
        return LookupResult(e.i_cache, e.i_back, best, True)

    def build_cost_s(self) -> float:
        return build_cost_s(len(self.entries), self._per_point_s())

    def _per_point_s(self) -> float:
        durations = {e.measured_s for e in self.entries.values()}
        if len(durations) > 1:
            raise ProfileError("entries were measured with different durations")
        return durations.pop() if durations else 0.0

    def to_json(self) -> dict:
        return {
            "format": PROFILE_FORMAT,
            "version": PROFILE_VERSION,
            "grid": self.grid.to_json(),
            "entries": [
                {
                    "block_size": k.block_size_bytes,
                    "inflight": k.inflight,
                    "threads": k.threads,
                    "i_cache": e.i_cache,
                    "i_back": e.i_back,
                    "measured_s": e.measured_s,
                }
                for k, e in sorted(self.entries.items())
            ],
        }

    @classmethod
    def from_json(cls, doc: object) -> "PerfProfile":
        if not isinstance(doc, dict):
            raise MalformedProfileError("profile document must be an object")
        if doc.get("format", PROFILE_FORMAT) != PROFILE_FORMAT:
            raise MalformedProfileError(f"not a perf profile: format={doc.get('format')!r}")
        if doc.get("version") != PROFILE_VERSION:
            raise ProfileVersionError(f"unsupported profile version {doc.get('version')!r}")
        try:
            g = doc["grid"]
            grid = ProfileGrid(tuple(g["block_sizes"]), tuple(g["inflights"]), tuple(g["threads"]))
            entries = {
                WorkloadKey(int(r["block_size"]), int(r["inflight"]), int(r["threads"])): ProfileEntry(
                    float(r["i_cache"]), float(r["i_back"]), float(r["measured_s"])
                )
                for r in doc["entries"]
            }
            return cls(grid, entries)
        except ProfileError as exc:
            raise MalformedProfileError(str(exc)) from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedProfileError(f"malformed profile document: {exc}") from exc


def build_cost_s(n_points: int, per_point_s: float) -> float:
    """Wall time of a build: every point runs cache-only and backend-only."""
    return n_points * 2 * per_point_s


def measured_throughput(result: SimResult) -> float:
    """Completions divided by the time of the last completion."""
    if not result.completed:
        return 0.0
    return result.completed / result.last_completion_s


def measure_point(
    key: WorkloadKey,
    cache: DeviceModel,
    backend: DeviceModel,
    link: LinkModel,
    per_point_s: float,
    seed: int = 0,
) -> ProfileEntry:
    epoch_s = per_point_s / 10
    cfg = SimConfig(key, per_point_s, rng_seed=seed, epoch_s=epoch_s)
    rates = []
    for policy in (CacheOnly(), BackendOnly()):
        res = run_simulation(cfg, cache, backend, link, policy)
        rate = measured_throughput(res)
        if not rate > 0:
            raise ProfileError(f"{policy.name} measured zero throughput at {key}")
        rates.append(rate)
    return ProfileEntry(rates[0], rates[1], per_point_s)


def build_profile(
    grid: ProfileGrid,
    cache: DeviceModel,
    backend: DeviceModel,
    link: LinkModel,
    per_point_s: float,
    seed: int = 0,
) -> PerfProfile:
    """Measure every grid point on an uncongested link."""
    if link.competing_flows:
        raise ProfileError("profiling requires a link without competing flows")
    if not per_point_s > 0:
        raise ValueError("per_point_s must be positive")
    profile = PerfProfile(grid)
    for key in grid.keys():
        profile.add(key, measure_point(key, cache, backend, link, per_point_s, seed))
    return profile


def break_even_rows(profile: PerfProfile) -> list[dict]:
    """Cumulative build seconds after each point, in build order."""
    per = profile._per_point_s()
    rows = []
    for i, key in enumerate(sorted(profile.entries), start=1):
        e = profile.entries[key]
        rows.append(
            {
                "points": i,
                "block_size": key.block_size_bytes,
                "inflight": key.inflight,
                "threads": key.threads,
                "cumulative_build_s": build_cost_s(i, per),
                "i_cache": e.i_cache,
                "i_back": e.i_back,
            }
        )
    return rows


def save(profile: PerfProfile, path: Union[str, os.PathLike]) -> None:
    write_text_atomic(Path(path), json.dumps(profile.to_json(), indent=2) + "\n")


def load(path: Union[str, os.PathLike]) -> PerfProfile:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedProfileError(f"{path}: {exc}") from exc
    return PerfProfile.from_json(doc)


def write_text_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def lookup_or_none(profile: Optional[PerfProfile], key: WorkloadKey) -> Optional[LookupResult]:
    if profile is None:
        return None
    try:
        return profile.lookup(key)
    except EmptyProfileError:
        return None
