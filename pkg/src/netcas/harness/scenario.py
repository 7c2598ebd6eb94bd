"""Scenario documents: versioned JSON describing devices, link, workloads and policies."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from ..controller import NetCasSettings
from ..models import CompetingFlow, ConfigError, Curve, DeviceModel, LinkModel, WorkloadKey
from ..profile import ProfileGrid
from ..scheduler import Guard
from ..sim import PolicySpec

log = logging.getLogger(__name__)

SCHEMA_ID = "netcas-scenario/1"

_TOP_KEYS = {
    "schema", "name", "description", "devices", "link", "workloads", "policies",
    "congestion_schedule", "contention_levels", "duration_s", "seeds", "epoch_s",
    "profile", "netcas",
}
_DEVICE_KEYS = {"name", "base_iops", "scaling", "block_scaling", "base_latency_s", "service_jitter_cv"}
_LINK_KEYS = {"capacity_bytes_per_s", "base_rtt_s", "competing_flows"}
_FLOW_KEYS = {"start_s", "end_s", "demand_bytes_per_s", "count"}
_WORKLOAD_KEYS = {"block_size", "inflight", "threads"}
_PROFILE_KEYS = {"grid", "per_point_s", "seed"}
_GRID_KEYS = {"block_sizes", "inflights", "threads"}
_LEVEL_KEYS = {"flows", "start_s", "demand_bytes_per_s"}
_NETCAS_KEYS = set(NetCasSettings.__dataclass_fields__)


@dataclass(frozen=True)
class ContentionLevels:
    """Run every workload once per competing-flow count; flows start at ``start_s``
    and stay for the rest of the run. ``demand_bytes_per_s=None`` means uncapped."""

    flows: tuple[int, ...]
    start_s: float = 0.0
    demand_bytes_per_s: Optional[float] = None

    def link_for(self, link: LinkModel, n: int, duration_s: float) -> LinkModel:
        demand = self.demand_bytes_per_s or link.capacity_bytes_per_s
        end = duration_s + 1.0
        return link.with_flows(CompetingFlow(self.start_s, end, demand) for _ in range(n))


@dataclass(frozen=True)
class ProfileSettings:
    grid: ProfileGrid
    per_point_s: float = 2.0
    seed: int = 0


@dataclass(frozen=True)
class Scenario:
    name: str
    cache: DeviceModel
    backend: DeviceModel
    link: LinkModel
    workloads: tuple[WorkloadKey, ...]
    policies: tuple[PolicySpec, ...]
    congestion_schedule: tuple[CompetingFlow, ...] = ()
    duration_s: float = 10.0
    seeds: tuple[int, ...] = (0,)
    epoch_s: float = 0.1
    profile: Optional[ProfileSettings] = None
    netcas: NetCasSettings = field(default_factory=NetCasSettings)
    contention_levels: Optional[ContentionLevels] = None
    description: str = ""

    def __post_init__(self) -> None:
        if not self.workloads:
            raise ConfigError("scenario needs at least one workload")
        if not self.policies:
            raise ConfigError("scenario needs at least one policy")
        if not self.seeds:
            raise ConfigError("scenario needs at least one seed")

    @property
    def run_link(self) -> LinkModel:
        """The link with the congestion schedule applied."""
        return self.link.with_flows(self.congestion_schedule)

    @property
    def profile_settings(self) -> ProfileSettings:
        if self.profile is not None:
            return self.profile
        bs = sorted({k.block_size_bytes for k in self.workloads})
        q = sorted({k.inflight for k in self.workloads})
        t = sorted({k.threads for k in self.workloads})
        return ProfileSettings(ProfileGrid(tuple(bs), tuple(q), tuple(t)))


def _check_keys(raw: dict, allowed: set, where: str, strict: bool) -> None:
    unknown = set(raw) - allowed
    if unknown:
        msg = f"{where}: unknown field(s) {sorted(unknown)}"
        if strict:
            raise ConfigError(msg)
        log.warning("%s (ignored)", msg)


def _require(raw: dict, key: str, where: str) -> Any:
    if key not in raw:
        raise ConfigError(f"{where}: missing required field {key!r}")
    return raw[key]


def _device(raw: Any, where: str, strict: bool) -> DeviceModel:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: device config must be an object")
    _check_keys(raw, _DEVICE_KEYS, where, strict)
    kwargs: dict[str, Any] = {
        "name": _require(raw, "name", where),
        "base_iops": float(_require(raw, "base_iops", where)),
    }
    for k in ("scaling", "block_scaling"):
        if k in raw:
            kwargs[k] = Curve.from_json(raw[k])
    for k in ("base_latency_s", "service_jitter_cv"):
        if k in raw:
            kwargs[k] = float(raw[k])
    return DeviceModel(**kwargs)


def _flows(raw: Any, where: str, strict: bool) -> list[CompetingFlow]:
    out = []
    for i, f in enumerate(raw or []):
        w = f"{where}[{i}]"
        _check_keys(f, _FLOW_KEYS, w, strict)
        flow = CompetingFlow(
            float(_require(f, "start_s", w)), float(_require(f, "end_s", w)), float(_require(f, "demand_bytes_per_s", w))
        )
        out.extend([flow] * int(f.get("count", 1)))
    return out


def scenario_from_dict(doc: Any, strict: bool = False) -> Scenario:
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be a JSON object")
    if doc.get("schema") != SCHEMA_ID:
        raise ConfigError(f"unsupported scenario schema {doc.get('schema')!r}; expected {SCHEMA_ID!r}")
    _check_keys(doc, _TOP_KEYS, "scenario", strict)
    try:
        devices = _require(doc, "devices", "scenario")
        if not isinstance(devices, dict):
            raise ConfigError("scenario.devices must be an object")
        cache = _device(_require(devices, "cache", "devices"), "devices.cache", strict)
        backend = _device(_require(devices, "backend", "devices"), "devices.backend", strict)

        lraw = _require(doc, "link", "scenario")
        _check_keys(lraw, _LINK_KEYS, "link", strict)
        link = LinkModel(
            float(_require(lraw, "capacity_bytes_per_s", "link")),
            tuple(_flows(lraw.get("competing_flows"), "link.competing_flows", strict)),
            float(lraw.get("base_rtt_s", 1e-5)),
        )

        workloads = []
        for i, w in enumerate(_require(doc, "workloads", "scenario")):
            _check_keys(w, _WORKLOAD_KEYS, f"workloads[{i}]", strict)
            workloads.append(WorkloadKey(int(w["block_size"]), int(w["inflight"]), int(w["threads"])))

        policies = tuple(PolicySpec.parse(p) for p in _require(doc, "policies", "scenario"))

        profile = None
        if "profile" in doc:
            praw = doc["profile"]
            _check_keys(praw, _PROFILE_KEYS, "profile", strict)
            g = _require(praw, "grid", "profile")
            _check_keys(g, _GRID_KEYS, "profile.grid", strict)
            profile = ProfileSettings(
                ProfileGrid(tuple(g["block_sizes"]), tuple(g["inflights"]), tuple(g["threads"])),
                float(praw.get("per_point_s", 2.0)),
                int(praw.get("seed", 0)),
            )

        nraw = doc.get("netcas", {})
        _check_keys(nraw, _NETCAS_KEYS, "netcas", strict)
        nkw = {k: v for k, v in nraw.items() if k in _NETCAS_KEYS}
        if "guard" in nkw:
            nkw["guard"] = Guard(nkw["guard"])
        netcas = NetCasSettings(**nkw)

        levels = None
        if "contention_levels" in doc:
            craw = doc["contention_levels"]
            _check_keys(craw, _LEVEL_KEYS, "contention_levels", strict)
            demand = craw.get("demand_bytes_per_s")
            levels = ContentionLevels(
                tuple(int(n) for n in _require(craw, "flows", "contention_levels")),
                float(craw.get("start_s", 0.0)),
                None if demand is None else float(demand),
            )

        return Scenario(
            name=str(_require(doc, "name", "scenario")),
            cache=cache,
            backend=backend,
            link=link,
            workloads=tuple(workloads),
            policies=policies,
            congestion_schedule=tuple(_flows(doc.get("congestion_schedule"), "congestion_schedule", strict)),
            duration_s=float(doc.get("duration_s", 10.0)),
            seeds=tuple(int(s) for s in doc.get("seeds", [0])),
            epoch_s=float(doc.get("epoch_s", 0.1)),
            profile=profile,
            netcas=netcas,
            contention_levels=levels,
            description=str(doc.get("description", "")),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed scenario: {exc}") from exc


def builtin_names() -> list[str]:
    pkg = resources.files("netcas") / "scenarios"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".json"))


def load_scenario(path_or_name: str | Path, strict: bool = False) -> Scenario:
    """Load a scenario file, or a shipped scenario by name (e.g. ``fig7_congestion``)."""
    path = Path(path_or_name)
    if path.exists():
        text = path.read_text()
    elif str(path_or_name) in builtin_names():
        text = (resources.files("netcas") / "scenarios" / f"{path_or_name}.json").read_text()
    else:
        raise ConfigError(f"no scenario file or built-in scenario named {str(path_or_name)!r}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path_or_name}: invalid JSON: {exc}") from exc
    return scenario_from_dict(doc, strict)
