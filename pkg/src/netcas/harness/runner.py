"""Subcommand implementations: profile, run, sweep-ratio, report.

Every output file is written atomically. Run outputs depend only on the
scenario, the profile and the seeds, so repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

from ..controller import NetCasPolicy
from ..models import ConfigError, WorkloadKey
from ..profile import (
    PerfProfile,
    ProfileEntry,
    break_even_rows,
    build_cost_s,
    build_profile,
    load,
    measure_point,
    save,
    write_text_atomic,
)
from ..scheduler import BackendOnly, CacheOnly, Dispatcher, Guard, RandomSplit, StaticSplit
from ..sim import PolicySpec, SimConfig, SimResult, run_simulation
from ..splitter import base_ratio
from .scenario import Scenario

log = logging.getLogger(__name__)

RUN_COLUMNS = ("t", "iops_total", "iops_cache", "iops_backend", "mean_latency_s", "rho", "mode", "drop_permil")
CONTROL_COLUMNS = (
    "epoch_index", "t", "b_t", "l_t", "n", "drop_permil", "mode", "rho", "i_cache_used", "i_back_used",
)
RECORD_COLUMNS = ("req_id", "device", "issue_time_s", "submit_time_s", "complete_time_s", "bytes", "slot")
SWEEP_COLUMNS = ("rho", "iops_total", "rho_base", "is_empirical_best")
SWEEP_SUMMARY_COLUMNS = (
    "workload", "block_size", "inflight", "threads", "concurrency", "rho_base", "empirical_best_rho", "deviation",
)
MANIFEST_FORMAT = "netcas-run-manifest"
SWEEP_MANIFEST_FORMAT = "netcas-sweep-manifest"
MANIFEST_NAME = "manifest.json"
SWEEP_MANIFEST_NAME = "sweep_manifest.json"
MIN_SWEEP_STEPS = 11


def csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    write_text_atomic(path, csv_text(columns, rows))
    return path


def write_json(path: Path, doc: dict) -> Path:
    write_text_atomic(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


# -- profiles ---------------------------------------------------------------


def cmd_profile(
    scenario: Scenario,
    out_path: Path,
    *,
    per_point_s: Optional[float] = None,
    seed: Optional[int] = None,
) -> tuple[PerfProfile, Path]:
    """Build the scenario's profile grid; writes the profile and a break-even CSV."""
    ps = scenario.profile_settings
    per = ps.per_point_s if per_point_s is None else per_point_s
    profile = build_profile(ps.grid, scenario.cache, scenario.backend, scenario.link, per, ps.seed if seed is None else seed)
    out_path = Path(out_path)
    save(profile, out_path)
    rows = break_even_rows(profile)
    be = write_csv(
        out_path.with_suffix(".breakeven.csv"),
        ("points", "block_size", "inflight", "threads", "cumulative_build_s", "i_cache", "i_back"),
        ([r[c] for c in ("points", "block_size", "inflight", "threads", "cumulative_build_s", "i_cache", "i_back")] for r in rows),
    )
    log.info("profile with %d entries -> %s (build cost %.1f s)", len(profile), out_path, profile.build_cost_s())
    return profile, be


def _job_profile_entry(scenario: Scenario, key: WorkloadKey) -> ProfileEntry:
    ps = scenario.profile_settings
    return measure_point(key, scenario.cache, scenario.backend, scenario.link, ps.per_point_s, ps.seed)


def _resolve_entry(
    scenario: Scenario, profile: Optional[PerfProfile], key: WorkloadKey, strict: bool
) -> tuple[float, float, bool]:
    """(i_cache, i_back, from_file) for ``key``."""
    if profile is not None and len(profile):
        if strict and key not in profile.entries:
            raise ConfigError(f"workload {key.label} has no exact profile entry (strict mode)")
        hit = profile.lookup(key)
        if hit.fallback:
            log.warning("workload %s not profiled; using nearest entry %s", key.label, hit.key.label)
        return hit.i_cache, hit.i_back, True
    e = _job_profile_entry(scenario, key)
    return e.i_cache, e.i_back, False


# -- runs -------------------------------------------------------------------


@dataclass(frozen=True)
class RunJob:
    policy: PolicySpec
    workload: WorkloadKey
    seed: int
    flows: Optional[int] = None

    @property
    def stem(self) -> str:
        pol = str(self.policy).replace("(", "-").replace(")", "")
        s = f"{pol}__{self.workload.label}__seed{self.seed}"
        if self.flows is not None:
            s += f"__flows{self.flows}"
        return s


def make_policy(
    scenario: Scenario,
    spec: PolicySpec,
    key: WorkloadKey,
    seed: int,
    profile: Optional[PerfProfile] = None,
    *,
    strict: bool = False,
    guard: Optional[Guard] = None,
) -> Dispatcher:
    settings = scenario.netcas if guard is None else replace(scenario.netcas, guard=Guard(guard))
    kind = spec.kind
    if kind == "CacheOnly":
        return CacheOnly()
    if kind == "BackendOnly":
        return BackendOnly()
    if kind in ("StaticSplit", "RandomSplit"):
        rho = spec.rho
        if rho is None:
            ic, ib, _ = _resolve_entry(scenario, profile, key, strict)
            rho = base_ratio(ic, ib)
        if kind == "RandomSplit":
            return RandomSplit(rho, random.Random(f"{seed}:dispatch"))
        return StaticSplit(rho, settings.window_size, settings.batch_size, settings.guard)
    # NetCas
    if profile is not None and len(profile):
        if strict and key not in profile.entries:
            raise ConfigError(f"workload {key.label} has no exact profile entry (strict mode)")
        return NetCasPolicy(profile, key, settings)
    # no profile: stay in NoTable while a job-specific profile point is measured
    ps = scenario.profile_settings
    entry = _job_profile_entry(scenario, key)
    return NetCasPolicy(
        None, key, settings,
        bootstrap=lambda: (entry.i_cache, entry.i_back),
        bootstrap_ready_s=build_cost_s(1, ps.per_point_s),
    )


def simulate_job(
    scenario: Scenario,
    job: RunJob,
    profile: Optional[PerfProfile] = None,
    *,
    strict: bool = False,
    guard: Optional[Guard] = None,
    keep_records: bool = False,
) -> SimResult:
    link = scenario.run_link
    if job.flows is not None:
        if scenario.contention_levels is None:
            raise ConfigError("scenario has no contention levels")
        link = scenario.contention_levels.link_for(link, job.flows, scenario.duration_s)
    cfg = SimConfig(job.workload, scenario.duration_s, job.policy, job.seed, scenario.epoch_s)
    policy = make_policy(scenario, job.policy, job.workload, job.seed, profile, strict=strict, guard=guard)
    return run_simulation(
        cfg, scenario.cache, scenario.backend, link, policy,
        window_len=scenario.netcas.window_len, keep_records=keep_records,
    )


def run_rows(result: SimResult) -> list[tuple]:
    """Per-epoch RunResult rows; ``iops_total`` is the sum of the two device columns."""
    e = result.config.epoch_s
    out = []
    for row in result.epochs:
        s = row.sample
        ic = s.cache_n / e
        ib = s.n / e
        st = row.status
        out.append((round(row.t_s, 9), ic + ib, ic, ib, s.mean_latency_s, st.rho, st.mode, st.drop_permil))
    return out


def control_rows(result: SimResult) -> list[tuple]:
    out = []
    for row in result.epochs:
        s, st = row.sample, row.status
        out.append(
            (s.epoch_index, round(row.t_s, 9), s.b_t, s.l_t, s.n, st.drop_permil, st.mode, st.rho, st.i_cache, st.i_back)
        )
    return out


def record_rows(result: SimResult) -> list[tuple]:
    return [
        (r.req_id, r.device.value, r.issue_time_s, r.submit_time_s, r.complete_time_s, r.bytes, r.slot)
        for r in result.records or ()
    ]


def _run_and_write(args: tuple) -> dict:
    scenario, job, profile, strict, guard, records, out_dir = args
    res = simulate_job(scenario, job, profile, strict=strict, guard=guard, keep_records=records)
    out_dir = Path(out_dir)
    entry = {
        "policy": str(job.policy),
        "workload": job.workload.label,
        "block_size": job.workload.block_size_bytes,
        "inflight": job.workload.inflight,
        "threads": job.workload.threads,
        "seed": job.seed,
        "flows": job.flows,
        "file": write_csv(out_dir / f"{job.stem}.csv", RUN_COLUMNS, run_rows(res)).name,
        "control": write_csv(out_dir / f"{job.stem}.control.csv", CONTROL_COLUMNS, control_rows(res)).name,
    }
    if records:
        entry["records"] = write_csv(out_dir / f"{job.stem}.records.csv", RECORD_COLUMNS, record_rows(res)).name
    return entry


def plan_jobs(scenario: Scenario, seeds: Optional[Sequence[int]] = None) -> list[RunJob]:
    seeds = scenario.seeds if seeds is None else tuple(seeds)
    levels: Sequence[Optional[int]] = (None,)
    if scenario.contention_levels is not None:
        levels = scenario.contention_levels.flows
    return [
        RunJob(p, w, s, n)
        for w in scenario.workloads
        for n in levels
        for p in scenario.policies
        for s in seeds
    ]


def cmd_run(
    scenario: Scenario,
    profile_path: Optional[Path],
    out_dir: Path,
    *,
    seed: Optional[int] = None,
    strict: bool = False,
    guard: Optional[Guard] = None,
    records: bool = False,
    jobs: int = 1,
) -> Path:
    """Run every (policy, workload, seed[, flow count]) combination; returns the manifest path."""
    profile = load(profile_path) if profile_path is not None else None
    if profile is None:
        needs = [p for p in scenario.policies if p.kind in ("StaticSplit", "RandomSplit") and p.rho is None]
        if needs:
            log.info("no profile given; measuring job-specific profile points for %s", ", ".join(map(str, needs)))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    plan = plan_jobs(scenario, None if seed is None else (seed,))
    if strict and profile is not None:
        for job in plan:
            if job.policy.kind == "NetCas" or (job.policy.kind in ("StaticSplit", "RandomSplit") and job.policy.rho is None):
                if job.workload not in profile.entries:
                    raise ConfigError(f"workload {job.workload.label} has no exact profile entry (strict mode)")
    tasks = [(scenario, j, profile, strict, guard, records, str(out_dir)) for j in plan]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            entries = list(ex.map(_run_and_write, tasks))
    else:
        entries = [_run_and_write(t) for t in tasks]
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": 1,
        "scenario": scenario.name,
        "duration_s": scenario.duration_s,
        "epoch_s": scenario.epoch_s,
        "congestion": _congestion_windows(scenario),
        "contention_start_s": scenario.contention_levels.start_s if scenario.contention_levels else None,
        "runs": entries,
    }
    return write_json(out_dir / MANIFEST_NAME, manifest)


def _congestion_windows(scenario: Scenario) -> list[list[float]]:
    return sorted({(f.start_s, f.end_s) for f in scenario.congestion_schedule})


# -- ratio sweep ------------------------------------------------------------


def sweep_throughput(result: SimResult, skip_s: float) -> float:
    return result.throughput(skip_s)


def cmd_sweep_ratio(
    scenario: Scenario,
    out_dir: Path,
    steps: int = 20,
    *,
    profile_path: Optional[Path] = None,
    seed: Optional[int] = None,
    strict: bool = False,
    guard: Optional[Guard] = None,
) -> Path:
    """StaticSplit at rho = 0, 1/steps, ..., 1 for every workload; returns the summary CSV path."""
    if steps < MIN_SWEEP_STEPS:
        raise ConfigError(f"sweep needs at least {MIN_SWEEP_STEPS} steps, got {steps}")
    profile = load(profile_path) if profile_path is not None else None
    settings = scenario.netcas if guard is None else replace(scenario.netcas, guard=Guard(guard))
    seed = scenario.seeds[0] if seed is None else seed
    out_dir = Path(out_dir)
    # skip roughly the first tenth of the run, on an epoch boundary
    skip_s = round(scenario.duration_s / 10 / scenario.epoch_s) * scenario.epoch_s
    summary = []
    files = []
    for key in scenario.workloads:
        ic, ib, _ = _resolve_entry(scenario, profile, key, strict)
        rho_base = base_ratio(ic, ib)
        points = []
        for i in range(steps + 1):
            rho = i / steps
            cfg = SimConfig(key, scenario.duration_s, PolicySpec("StaticSplit", rho), seed, scenario.epoch_s)
            pol = StaticSplit(rho, settings.window_size, settings.batch_size, settings.guard)
            res = run_simulation(cfg, scenario.cache, scenario.backend, scenario.run_link, pol)
            points.append((rho, sweep_throughput(res, skip_s)))
        best = max(points, key=lambda p: p[1])[0]
        rows = [(r, t, rho_base, int(r == best)) for r, t in points]
        path = write_csv(out_dir / f"sweep__{key.label}.csv", SWEEP_COLUMNS, rows)
        files.append({"workload": key.label, "concurrency": key.concurrency, "file": path.name})
        summary.append(
            (key.label, key.block_size_bytes, key.inflight, key.threads, key.concurrency, rho_base, best, abs(best - rho_base))
        )
        log.info("%s: rho_base=%.3f empirical best=%.3f", key.label, rho_base, best)
    spath = write_csv(out_dir / "sweep_summary.csv", SWEEP_SUMMARY_COLUMNS, summary)
    write_json(
        out_dir / SWEEP_MANIFEST_NAME,
        {"format": SWEEP_MANIFEST_FORMAT, "version": 1, "scenario": scenario.name, "steps": steps, "seed": seed,
         "summary": spath.name, "sweeps": files},
    )
    return spath


# -- reading results back ---------------------------------------------------


class ResultError(Exception):
    """Missing or malformed result files."""


def read_csv(path: Path, columns: Sequence[str]) -> list[dict]:
    if not path.is_file():
        raise ResultError(f"missing result file {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != tuple(columns):
            raise ResultError(f"{path}: unexpected header {header}")
        rows = []
        for n, raw in enumerate(reader, start=2):
            if len(raw) != len(columns):
                raise ResultError(f"{path}:{n}: expected {len(columns)} fields, got {len(raw)}")
            rows.append(dict(zip(columns, raw)))
    if not rows:
        raise ResultError(f"{path}: no data rows")
    return rows


def read_run(path: Path) -> dict[str, list]:
    """Column-oriented run CSV: numeric columns as floats, ``mode`` as strings."""
    rows = read_csv(path, RUN_COLUMNS)
    out: dict[str, list] = {c: [] for c in RUN_COLUMNS}
    try:
        for r in rows:
            for c in RUN_COLUMNS:
                out[c].append(r[c] if c == "mode" else float(r[c]))
    except ValueError as exc:
        raise ResultError(f"{path}: non-numeric value: {exc}") from exc
    return out


def read_manifest(run_dir: Path, name: str = MANIFEST_NAME, fmt: str = MANIFEST_FORMAT) -> Optional[dict]:
    path = Path(run_dir) / name
    if not path.is_file():
        return None
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ResultError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != fmt:
        raise ResultError(f"{path}: not a {fmt} document")
    return doc


def mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs) if xs else math.nan


def window_mean(data: dict[str, list], start: float, end: float) -> float:
    return mean([v for t, v in zip(data["t"], data["iops_total"]) if start - 1e-9 <= t < end - 1e-9])
