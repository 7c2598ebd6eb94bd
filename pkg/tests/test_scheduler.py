import random
import tracemalloc

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netcas import _bwrr_kernel as kernel
from netcas.models import Device
from netcas.scheduler import (
    BwrrState,
    CacheOnly,
    Guard,
    RandomSplit,
    StaticSplit,
    bwrr_begin_window,
    bwrr_dispatch,
    random_dispatch,
    static_policy,
)

C, B = Device.CACHE, Device.BACKEND


def seq(state, n):
    return [bwrr_dispatch(state) for _ in range(n)]


def test_window_arithmetic():
    s = BwrrState(0.75, 100, 64)
    bwrr_begin_window(s, 0.75)
    assert (s.a, s.b, s.pattern_size, s.pattern_cache) == (75, 25, 4, 3)
    s = BwrrState(0.5, 10, 64)
    s.begin_window()
    assert (s.a, s.b, s.pattern_size, s.pattern_cache) == (5, 5, 2, 1)


def test_three_to_one_sequence():
    assert seq(BwrrState(0.75, 100, 64), 8) == [C, C, C, B, C, C, C, B]


def test_alternation():
    assert seq(BwrrState(0.5, 10, 64), 10) == [C, B] * 5


def test_literal_gt_guard_loses_interleaving():
    assert seq(BwrrState(0.75, 100, 64, Guard.GT), 8) == [C] * 8


def test_degenerate_windows():
    assert set(seq(BwrrState(1.0, 16), 48)) == {C}
    assert set(seq(BwrrState(0.0, 7), 21)) == {B}


def test_ratio_change_waits_for_window_end():
    s = BwrrState(0.5, 10)
    first = seq(s, 4)
    s.set_ratio(1.0)
    first += seq(s, 6)
    assert first.count(C) == 5
    assert seq(s, 10) == [C] * 10


def test_random_dispatch():
    rng = random.Random(1)
    assert all(random_dispatch(1.0, rng) is C for _ in range(100))
    n = 1_000_000
    frac = sum(random_dispatch(0.5, rng) is C for _ in range(n)) / n
    assert abs(frac - 0.5) <= 0.002
    r1, r2 = random.Random(9), random.Random(9)
    assert [random_dispatch(0.3, r1) for _ in range(50)] == [random_dispatch(0.3, r2) for _ in range(50)]


def test_static_policies():
    assert all(CacheOnly().dispatch(i) is C for i in range(10))
    assert static_policy("BackendOnly").dispatch(0) is B
    p = static_policy("StaticSplit", 0.75)
    assert isinstance(p, StaticSplit)
    p.on_epoch(None, 1.0)
    assert p.status().rho == 0.75
    with pytest.raises(ValueError):
        static_policy("StaticSplit")
    assert RandomSplit(0.5, random.Random(0)).status().mode == "Static"


triples = st.tuples(st.floats(0, 1), st.integers(1, 1000), st.integers(1, 256))


@settings(max_examples=300, deadline=None)
@given(triples, st.sampled_from(list(Guard)))
def test_window_exactness(t, guard):
    rho, w, batch = t
    s = BwrrState(rho, w, batch, guard)
    out = seq(s, 2 * w)
    a = s.a
    assert out[:w].count(C) == a and out[w:].count(C) == a
    assert 0 <= s.cache_quota <= s.a and 0 <= s.backend_quota <= s.b
    assert s.cache_quota + s.backend_quota == w - s.req_count
    assert 0 <= s.pos < s.pattern_size


@settings(max_examples=300, deadline=None)
@given(triples)
def test_pattern_phase_smoothness(t):
    rho, w, batch = t
    s = BwrrState(rho, w, batch)
    s.begin_window()
    out, both = [], 0
    for _ in range(w):
        if s.cache_quota > 0 and s.backend_quota > 0:
            both += 1
        out.append(s.dispatch())
    ps, pc = s.pattern_size, s.pattern_cache
    if s.a == 0 or s.b == 0:
        return
    exact = (ps * s.a) % w == 0
    for i in range(0, both - ps + 1):
        c = out[i:i + ps].count(C)
        if exact:
            assert c == pc
        else:
            assert abs(c - pc) <= 1


@settings(max_examples=200, deadline=None)
@given(triples, st.sampled_from(list(Guard)), st.integers(1, 3000))
def test_kernel_matches_reference(t, guard, n):
    rho, w, batch = t
    ref = BwrrState(rho, w, batch, guard)
    st_arr = kernel.state_array(ref)
    out = np.empty(n, dtype=np.int64)
    kernel.dispatch_many(st_arr, out)
    expected = [0 if ref.dispatch() is C else 1 for _ in range(n)]
    assert out.tolist() == expected


def test_kernel_count_backend():
    st_arr = kernel.state_array(BwrrState(0.75, 100, 64))
    assert kernel.count_backend(st_arr, 1000) == 250


def test_kernel_dispatch_allocates_nothing():
    st_arr = kernel.state_array(BwrrState(0.37, 100, 64))
    kernel.count_backend(st_arr, 10)
    tracemalloc.start()
    before = tracemalloc.take_snapshot()
    kernel.count_backend(st_arr, 200_000)
    after = tracemalloc.take_snapshot()
    tracemalloc.stop()
    grown = sum(d.size_diff for d in after.compare_to(before, "filename") if d.size_diff > 0 and "tracemalloc" not in str(d.traceback))
    assert grown < 1024
