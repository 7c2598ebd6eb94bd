"""Summary table and figures rebuilt purely from a run directory's CSVs."""

from __future__ import annotations

import logging
from collections import defaultdict
from pathlib import Path
from typing import Optional

import numpy as np

from . import plotting
from .runner import (
    SWEEP_COLUMNS,
    SWEEP_MANIFEST_FORMAT,
    SWEEP_MANIFEST_NAME,
    ResultError,
    mean,
    read_csv,
    read_manifest,
    read_run,
    window_mean,
    write_csv,
)

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = (
    "policy", "workload", "seed", "flows", "mean_iops", "mean_rho",
    "pre_iops", "during_iops", "post_iops", "congestion_epochs",
)


def _summarize(run: dict, data: dict, congestion: list, duration: float, contention_start: Optional[float]) -> tuple:
    t_first = data["t"][0]
    if congestion:
        start, end = congestion[0]
        pre = window_mean(data, t_first, start)
        during = window_mean(data, start, end)
        post = window_mean(data, end, duration)
    elif contention_start is not None:
        pre = window_mean(data, t_first, contention_start)
        during = window_mean(data, contention_start, duration)
        post = float("nan")
    else:
        pre = during = post = float("nan")
    n_cong = sum(1 for m in data["mode"] if m == "Congestion")
    return (
        run["policy"], run["workload"], run["seed"], "" if run["flows"] is None else run["flows"],
        mean(data["iops_total"]), mean(data["rho"]), pre, during, post, n_cong,
    )


def _timeline(workload: str, flows, runs: list[tuple[dict, dict]], congestion: list, path: Path) -> Path:
    fig, (ax, axr) = plotting.figure(2, 1, sharex=True, gridspec_kw={"height_ratios": (3, 1)})
    for run, data in runs:
        c = plotting.policy_color(run["policy"])
        ax.plot(data["t"], data["iops_total"], color=c, label=run["policy"])
        axr.plot(data["t"], data["rho"], color=c)
    for s, e in congestion:
        for a in (ax, axr):
            a.axvspan(s, e, color="0.85", lw=0, zorder=0)
    title = workload if flows is None else f"{workload}, {flows} competing flows"
    ax.set_title(title)
    ax.set_ylabel("IOPS")
    axr.set_ylabel("rho")
    axr.set_xlabel("time (s)")
    axr.set_ylim(-0.05, 1.05)
    ax.legend(loc="lower left", ncol=3)
    return plotting.save_svg(fig, path)


def _bars(groups: dict, policies: list[str], path: Path) -> Path:
    labels = list(groups)
    x = np.arange(len(labels))
    width = 0.8 / max(len(policies), 1)
    fig, ax = plotting.figure(figsize=(max(5.0, 1.2 * len(labels) + 2), 3.6))
    for i, pol in enumerate(policies):
        vals = [groups[g].get(pol, np.nan) for g in labels]
        ax.bar(x + (i - (len(policies) - 1) / 2) * width, vals, width, label=pol, color=plotting.policy_color(pol))
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("mean IOPS")
    ax.legend(ncol=min(len(policies), 4))
    return plotting.save_svg(fig, path)


def _contention(by_policy: dict, path: Path) -> Path:
    fig, (ax, axr) = plotting.figure(1, 2)
    for pol, pts in by_policy.items():
        pts = sorted(pts)
        xs = [p[0] for p in pts]
        c = plotting.policy_color(pol)
        ax.plot(xs, [p[1] for p in pts], marker="o", color=c, label=pol)
        axr.plot(xs, [p[2] for p in pts], marker="o", color=c, label=pol)
    ax.set_xlabel("competing flows")
    ax.set_ylabel("IOPS under contention")
    axr.set_xlabel("competing flows")
    axr.set_ylabel("mean rho")
    ax.legend()
    return plotting.save_svg(fig, path)


def _sweep(run_dir: Path, out_dir: Path, doc: dict) -> list[Path]:
    fig, ax = plotting.figure()
    for s in doc["sweeps"]:
        rows = read_csv(run_dir / s["file"], SWEEP_COLUMNS)
        rho = [float(r["rho"]) for r in rows]
        iops = np.array([float(r["iops_total"]) for r in rows])
        (line,) = ax.plot(rho, iops / iops.max(), marker=".", label=s["workload"])
        ax.axvline(float(rows[0]["rho_base"]), color=line.get_color(), ls="--", lw=0.8)
    ax.set_xlabel("rho (cache fraction)")
    ax.set_ylabel("throughput / best")
    ax.legend()
    return [plotting.save_svg(fig, out_dir / "sweep.svg")]


def cmd_report(run_dir: Path, out_dir: Optional[Path] = None) -> list[Path]:
    """Render figures and ``summary.csv`` from the CSVs in ``run_dir``."""
    run_dir = Path(run_dir)
    out_dir = run_dir if out_dir is None else Path(out_dir)
    if not run_dir.is_dir():
        raise ResultError(f"{run_dir} is not a directory")
    manifest = read_manifest(run_dir)
    sweep_doc = read_manifest(run_dir, SWEEP_MANIFEST_NAME, SWEEP_MANIFEST_FORMAT)
    if manifest is None and sweep_doc is None:
        raise ResultError(f"{run_dir}: no run or sweep manifest found")
    written: list[Path] = []
    if sweep_doc is not None:
        written += _sweep(run_dir, out_dir, sweep_doc)
    if manifest is None:
        return written

    runs = manifest.get("runs") or []
    if not runs:
        raise ResultError(f"{run_dir}: manifest lists no runs")
    congestion = [tuple(w) for w in manifest.get("congestion", [])]
    duration = float(manifest["duration_s"])
    cstart = manifest.get("contention_start_s")

    loaded = [(r, read_run(run_dir / r["file"])) for r in runs]
    summary = [_summarize(r, d, congestion, duration, cstart) for r, d in loaded]
    written.append(write_csv(out_dir / "summary.csv", SUMMARY_COLUMNS, summary))

    policies = list(dict.fromkeys(r["policy"] for r, _ in loaded))
    first_seed = min(r["seed"] for r, _ in loaded)

    timelines = defaultdict(list)
    for r, d in loaded:
        if r["seed"] == first_seed:
            timelines[(r["workload"], r["flows"])].append((r, d))
    for (wl, flows), items in timelines.items():
        name = f"timeline__{wl}" + ("" if flows is None else f"__flows{flows}") + ".svg"
        written.append(_timeline(wl, flows, items, congestion, out_dir / name))

    groups: dict = defaultdict(lambda: defaultdict(list))
    for row in summary:
        pol, wl, _, flows, m = row[:5]
        g = wl if flows == "" else f"{wl} f{flows}"
        groups[g][pol].append(m)
    means = {g: {p: mean(v) for p, v in d.items()} for g, d in groups.items()}
    written.append(_bars(means, policies, out_dir / "bars.svg"))

    if any(r["flows"] is not None for r, _ in loaded):
        pts: dict = defaultdict(list)
        for (r, d), row in zip(loaded, summary):
            if r["seed"] == first_seed:
                pts[r["policy"]].append((r["flows"], row[7], row[5]))
        written.append(_contention(pts, out_dir / "contention.svg"))
    log.info("report: %d files in %s", len(written), out_dir)
    return written
