"""Network-aware splitting of block I/O between a local cache and a networked backend."""

from .controller import NetCasPolicy, NetCasSettings
from .detector import DetectorState, drop_permil, round_half_away, update_baselines
from .models import (
    CompetingFlow,
    CompletionRecord,
    ConfigError,
    Curve,
    Device,
    DeviceModel,
    LinkModel,
    WorkloadKey,
    device_throughput,
    effective_backend_throughput,
    max_min_share,
)
from .monitor import Monitor, SlidingWindow, ThroughputSample
from .profile import PerfProfile, ProfileGrid, build_profile
from .scheduler import (
    BwrrState,
    Guard,
    RandomSplit,
    StaticSplit,
    bwrr_begin_window,
    bwrr_dispatch,
    random_dispatch,
    static_policy,
)
from .sim import PolicySpec, SimConfig, SimResult, run_simulation
from .splitter import Mode, ModeEvents, SplitterMode, adjusted_ratio, base_ratio, predict_completion, step_mode

__version__ = "0.1.0"

__all__ = [
    "BwrrState",
    "CompetingFlow",
    "CompletionRecord",
    "ConfigError",
    "Curve",
    "DetectorState",
    "Device",
    "DeviceModel",
    "Guard",
    "LinkModel",
    "Mode",
    "ModeEvents",
    "Monitor",
    "NetCasPolicy",
    "NetCasSettings",
    "PerfProfile",
    "PolicySpec",
    "ProfileGrid",
    "RandomSplit",
    "SimConfig",
    "SimResult",
    "SlidingWindow",
    "SplitterMode",
    "StaticSplit",
    "ThroughputSample",
    "WorkloadKey",
    "adjusted_ratio",
    "base_ratio",
    "build_profile",
    "bwrr_begin_window",
    "bwrr_dispatch",
    "device_throughput",
    "drop_permil",
    "effective_backend_throughput",
    "max_min_share",
    "predict_completion",
    "random_dispatch",
    "round_half_away",
    "run_simulation",
    "static_policy",
    "step_mode",
    "update_baselines",
]
