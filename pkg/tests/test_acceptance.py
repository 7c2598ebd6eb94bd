"""Acceptance criteria 1-11, each at its stated tolerance.

Every test records one PASS/FAIL line; conftest prints them at the end of
the session.
"""

import csv
import math
import random
import statistics
import time
import tracemalloc

import numpy as np
import pytest

from conftest import ACCEPTANCE
from netcas import _bwrr_kernel as kernel
from netcas.detector import DetectorState
from netcas.harness import runner
from netcas.harness.scenario import load_scenario
from netcas.models import effective_backend_throughput
from netcas.monitor import ThroughputSample
from netcas.profile import ProfileEntry, PerfProfile, build_profile, load, save
from netcas.scheduler import BwrrState, Device, Guard
from netcas.sim import PolicySpec
from netcas.splitter import base_ratio

pytestmark = pytest.mark.slow


def record(n, ok, detail):
    ACCEPTANCE.append((n, bool(ok), detail))
    assert ok, detail


# 1 -------------------------------------------------------------------------


def test_criterion_01_ratio_formula_optimality():
    rates = np.logspace(3, 6, 20)
    rho = np.round(np.arange(1001) / 1000, 3)
    worst = 0.0
    for ic in rates:
        for ib in rates:
            t = np.maximum(rho / ic, (1 - rho) / ib)
            worst = max(worst, abs(rho[np.argmin(t)] - base_ratio(ic, ib)))
    record(1, worst <= 0.001 + 1e-12, f"max |argmin - rho_base| over 400 pairs = {worst:.6f} (tol 0.001)")


# 2 -------------------------------------------------------------------------


def test_criterion_02_detector_algebra():
    d = DetectorState(b_bar=10.0, l_bar=0.010)
    zero = d.drop_permil(ThroughputSample(0, 10.0, 0.010, 1))
    half = d.drop_permil(ThroughputSample(0, 5.0, 0.015, 1))
    rng = random.Random(2024)
    bad = 0
    for _ in range(100_000):
        bb = rng.random()
        st = DetectorState(bb, 1 - bb, rng.uniform(1, 1e4), rng.uniform(1e-5, 1e-1))
        b1, b2 = sorted(rng.uniform(0, 2e4) for _ in range(2))
        l1, l2 = sorted(rng.uniform(1e-6, 0.5) for _ in range(2))
        s = lambda b, l: st.drop_permil(ThroughputSample(0, b, l, 1))  # noqa: E731
        vals = (s(b1, l1), s(b2, l1), s(b1, l2))
        if not all(0 <= v <= 1000 for v in vals) or vals[1] > vals[0] or vals[2] < vals[0]:
            bad += 1
    ok = zero == 0 and half == 500 and bad == 0
    record(2, ok, f"baseline->{zero}, half bw + 1.5x lat->{half}, violations in 1e5 samples={bad}")


# 3 -------------------------------------------------------------------------


def test_criterion_03_bwrr_exactness():
    rng = random.Random(7)
    window_errs = pattern_errs = 0
    for _ in range(1000):
        rho, w, batch = rng.random(), rng.randint(1, 1000), rng.randint(1, 256)
        s = BwrrState(rho, w, batch, Guard.GE)
        s.begin_window()
        out, both = [], 0
        for _ in range(w):
            if s.cache_quota > 0 and s.backend_quota > 0:
                both += 1
            out.append(s.dispatch())
        a = math.floor(rho * w + 0.5)
        if out.count(Device.CACHE) != a:
            window_errs += 1
        # second window too
        if [s.dispatch() for _ in range(w)].count(Device.CACHE) != a:
            window_errs += 1
        ps, pc = s.pattern_size, s.pattern_cache
        if 0 < s.a < w:
            for i in range(0, both - ps + 1, ps):
                if abs(out[i:i + ps].count(Device.CACHE) - pc) > 1:
                    pattern_errs += 1
    record(3, window_errs == 0 and pattern_errs == 0,
           f"1000 triples: window count errors={window_errs}, pattern stretch errors={pattern_errs}")


# 4 -------------------------------------------------------------------------


def test_criterion_04_bwrr_beats_random_under_shallow_queues():
    sc = load_scenario("fig5_bwrr", strict=True)
    assert all(k.inflight <= 4 for k in sc.workloads)
    wins = total = 0
    worst = []
    for key in sc.workloads:
        w = 0
        for seed in sc.seeds:
            tp = {}
            for spec in sc.policies:
                res = runner.simulate_job(sc, runner.RunJob(spec, key, seed))
                tp[spec.kind] = res.throughput()
            w += tp["StaticSplit"] >= tp["RandomSplit"]
        wins += w
        total += len(sc.seeds)
        worst.append(f"{key.label}:{w}/{len(sc.seeds)}")
    frac = wins / total
    record(4, frac >= 0.95, f"BWRR >= random in {wins}/{total} runs ({frac:.1%}, need 95%); " + " ".join(worst))


# 5 -------------------------------------------------------------------------


@pytest.fixture(scope="module")
def fig1_profile(tmp_path_factory):
    sc = load_scenario("fig1_split", strict=True)
    path = tmp_path_factory.mktemp("fig1") / "profile.json"
    runner.cmd_profile(sc, path)
    return sc, load(path)


def test_criterion_05_split_beats_standalone(fig1_profile):
    sc, profile = fig1_profile
    lines, ok = [], True
    for key in sc.workloads:
        if key.concurrency < 64:
            continue
        tp, rho = {}, {}
        for spec in sc.policies:
            res = runner.simulate_job(sc, runner.RunJob(spec, key, sc.seeds[0]), profile)
            tp[spec.kind] = res.throughput(1.0)
            rho[spec.kind] = statistics.mean(e.status.rho for e in res.epochs[10:])
        best_single = max(tp["CacheOnly"], tp["BackendOnly"])
        gain = min(tp["NetCas"], tp["StaticSplit"]) / best_single
        ok &= gain >= 1.2
        if key.concurrency == 64:
            ok &= abs(rho["NetCas"] - 0.75) <= 0.01 and abs(rho["StaticSplit"] - 0.75) <= 0.01
        lines.append(f"N={key.concurrency}: gain {gain:.2f}x rho {rho['NetCas']:.4f}")
    record(5, ok, "; ".join(lines) + " (need >=1.2x, rho 0.75+-0.01 at N=64)")


# 6 -------------------------------------------------------------------------


def _recovery_time(res, end_s, pre, window_epochs=5, limit_s=2.0):
    """Seconds after ``end_s`` until a rolling 0.5 s mean reaches 95% of ``pre``."""
    e = res.config.epoch_s
    tp = [(r.t_s, (r.sample.n + r.sample.cache_n) / e) for r in res.epochs]
    start = next(i for i, (t, _) in enumerate(tp) if t >= end_s - 1e-9)
    for i in range(start, len(tp) - window_epochs + 1):
        t_done = tp[i + window_epochs - 1][0] + e - end_s
        if t_done > limit_s + 1e-9:
            break
        if statistics.mean(v for _, v in tp[i:i + window_epochs]) >= 0.95 * pre:
            return t_done
    return math.inf


def test_criterion_06_congestion_robustness():
    sc = load_scenario("fig7_congestion", strict=True)
    profile = build_profile(sc.profile_settings.grid, sc.cache, sc.backend, sc.link, sc.profile_settings.per_point_s)
    (start, end), = {(f.start_s, f.end_s) for f in sc.congestion_schedule}
    lines, ok = [], True
    for key in sc.workloads:
        base_rate = effective_backend_throughput(sc.backend, sc.link, key, 0.0)
        cong_rate = effective_backend_throughput(sc.backend, sc.run_link, key, start)
        res = {
            p.kind: runner.simulate_job(sc, runner.RunJob(p, key, sc.seeds[0]), profile)
            for p in map(PolicySpec.parse, ("CacheOnly", "StaticSplit", "NetCas"))
        }
        during = {k: r.throughput(start + 2, end) for k, r in res.items()}
        pre = res["NetCas"].throughput(2.0, start)
        rec = _recovery_time(res["NetCas"], end, pre)
        vs_static = during["NetCas"] / during["StaticSplit"]
        good = vs_static >= 1.5 and during["NetCas"] >= during["CacheOnly"] and rec <= 2.0
        ok &= good
        lines.append(
            f"{key.label}: link share {cong_rate / base_rate:.0%}, NetCas/Static {vs_static:.2f}x, "
            f"NetCas {during['NetCas']:.0f} vs CacheOnly {during['CacheOnly']:.0f}, recovery {rec:.1f}s"
        )
    record(6, ok, "; ".join(lines))


# 7 -------------------------------------------------------------------------


def test_criterion_07_graceful_contention_scaling():
    sc = load_scenario("fig8_contention", strict=True)
    key = sc.workloads[0]
    ps = sc.profile_settings
    profile = build_profile(ps.grid, sc.cache, sc.backend, sc.link, ps.per_point_s, ps.seed)
    measure_from = sc.contention_levels.start_s + 3.0
    tps, rhos = [], []
    for n in sc.contention_levels.flows:
        res = runner.simulate_job(sc, runner.RunJob(PolicySpec("NetCas"), key, sc.seeds[0], n), profile)
        tps.append(res.throughput(measure_from))
        rhos.append(statistics.mean(e.status.rho for e in res.epochs if e.t_s >= measure_from - 1e-9))
    rho_ok = all(b >= a for a, b in zip(rhos, rhos[1:]))
    tp_ok = all(b <= a for a, b in zip(tps, tps[1:]))
    worst_step = max(1 - b / a for a, b in zip(tps, tps[1:]))
    detail = ", ".join(f"{n} flows: {t:.0f} IOPS rho {r:.3f}" for n, t, r in zip(sc.contention_levels.flows, tps, rhos))
    record(7, rho_ok and tp_ok and worst_step <= 0.40, f"{detail}; worst step loss {worst_step:.0%} (max 40%)")


# 8 -------------------------------------------------------------------------


def test_criterion_08_convergence_with_concurrency(tmp_path):
    sc = load_scenario("fig4_sweep", strict=True)
    summary = runner.cmd_sweep_ratio(sc, tmp_path, steps=20)
    rows = list(csv.DictReader(summary.open()))
    high = [r for r in rows if int(r["concurrency"]) >= 64]
    low = [r for r in rows if int(r["concurrency"]) == 1]
    high_dev = max(float(r["deviation"]) for r in high)
    low_dev = float(low[0]["deviation"])
    ok = bool(high) and high_dev <= 0.05 and low_dev > high_dev
    record(8, ok, f"deviation at N>=64: max {high_dev:.4f} (tol 0.05); at N=1: {low_dev:.4f} (reported)")


# 9 -------------------------------------------------------------------------


def test_criterion_09_profile_round_trip_and_break_even(tmp_path):
    sc = load_scenario("fig3_profile", strict=True)
    path = tmp_path / "profile.json"
    profile, be = runner.cmd_profile(sc, path)
    loaded = load(path)
    per = sc.profile_settings.per_point_s
    rows = list(csv.DictReader(be.open()))
    linear = all(float(r["cumulative_build_s"]) == int(r["points"]) * 2 * per for r in rows)
    cost = loaded.build_cost_s()
    # 30 s per point on the same grid
    slow = PerfProfile(loaded.grid, {k: ProfileEntry(e.i_cache, e.i_back, 30.0) for k, e in loaded.entries.items()})
    save(slow, tmp_path / "p30.json")
    ok = loaded == profile and len(loaded) == 50 and cost == 50 * 2 * per and linear
    ok &= load(tmp_path / "p30.json").build_cost_s() == 3000.0
    record(9, ok, f"50-entry round trip equal={loaded == profile}, build cost {cost} s = 50x2x{per}, 30 s/point -> 3000 s")


# 10 ------------------------------------------------------------------------


def test_criterion_10_dispatch_overhead():
    st = kernel.state_array(BwrrState(0.37, 100, 64))
    kernel.count_backend(st, 1000)  # compile / load cache
    n = 10_000_000
    best = math.inf
    for _ in range(5):
        t0 = time.perf_counter_ns()
        kernel.count_backend(st, n)
        best = min(best, (time.perf_counter_ns() - t0) / n)
    # cost per decision must not grow with the run length
    t0 = time.perf_counter_ns()
    kernel.count_backend(st, 10 * n)
    long_run = (time.perf_counter_ns() - t0) / (10 * n)

    tracemalloc.start()
    snap = tracemalloc.take_snapshot()
    kernel.count_backend(st, 1_000_000)
    grown = sum(s.size_diff for s in tracemalloc.take_snapshot().compare_to(snap, "filename") if s.size_diff > 0
                and "tracemalloc" not in str(s.traceback))
    tracemalloc.stop()

    ref = BwrrState(0.37, 100, 64)
    t0 = time.perf_counter_ns()
    for _ in range(200_000):
        ref.dispatch()
    py_ns = (time.perf_counter_ns() - t0) / 200_000

    ok = best < 100 and long_run < 100 and grown < 1024
    record(10, ok, f"compiled {best:.1f} ns/decision ({long_run:.1f} ns over 1e8), heap growth {grown} B; "
                   f"pure-Python reference {py_ns:.0f} ns")


# 11 ------------------------------------------------------------------------


def test_criterion_11_determinism(tmp_path):
    checked, mismatched = 0, []
    for name in ("fig1_split", "fig8_contention"):
        sc = load_scenario(name, strict=True)
        a, b = tmp_path / name / "a", tmp_path / name / "b"
        runner.cmd_run(sc, None, a)
        runner.cmd_run(sc, None, b)
        for f in sorted(a.iterdir()):
            checked += 1
            if f.read_bytes() != (b / f.name).read_bytes():
                mismatched.append(f"{name}/{f.name}")
    record(11, checked > 0 and not mismatched, f"{checked} files compared, mismatches: {mismatched or 'none'}")
