"""Compiled BWRR decision path.

The state lives in one int64 array so a decision touches no Python objects.
Layout matches :data:`FIELDS`; :func:`state_array` packs a ``BwrrState``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .scheduler import BwrrState, Guard

FIELDS = (
    "window_size", "batch_size", "gt", "a", "b", "pattern_size", "pattern_cache",
    "pos", "req_count", "cache_quota", "backend_quota",
)
W, BATCH, GT, A, B, PSIZE, PCACHE, POS, COUNT, CQ, BQ = range(len(FIELDS))


def state_array(state: BwrrState) -> np.ndarray:
    """Pack a BWRR state; the ratio is frozen to the state's current ``a``/``b``
    (or the pending ratio if no window has opened yet)."""
    if state.window_index < 0:
        probe = BwrrState(state.pending_rho, state.window_size, state.batch_size, state.guard)
        probe.begin_window()
        probe.req_count = probe.window_size
        state = probe
    vals = {
        "window_size": state.window_size, "batch_size": state.batch_size,
        "gt": int(state.guard is Guard.GT), "a": state.a, "b": state.b,
        "pattern_size": state.pattern_size, "pattern_cache": state.pattern_cache,
        "pos": state.pos, "req_count": state.req_count,
        "cache_quota": state.cache_quota, "backend_quota": state.backend_quota,
    }
    return np.array([vals[f] for f in FIELDS], dtype=np.int64)


@njit(cache=True, nogil=True)
def dispatch(st):
    """One decision; 0 = cache, 1 = backend."""
    if st[COUNT] == st[W]:
        st[POS] = 0
        st[COUNT] = 0
        st[CQ] = st[A]
        st[BQ] = st[B]
    cq = st[CQ]
    bq = st[BQ]
    if cq > 0 and bq > 0:
        pos = st[POS]
        if st[GT]:
            back = pos > st[PCACHE]
        else:
            back = pos >= st[PCACHE]
        pos += 1
        st[POS] = 0 if pos == st[PSIZE] else pos
        if back:
            st[BQ] = bq - 1
            r = 1
        else:
            st[CQ] = cq - 1
            r = 0
    elif cq == 0:
        st[BQ] = bq - 1
        r = 1
    else:
        st[CQ] = cq - 1
        r = 0
    st[COUNT] += 1
    return r


@njit(cache=True, nogil=True)
def dispatch_many(st, out):
    for i in range(out.shape[0]):
        out[i] = dispatch(st)


@njit(cache=True, nogil=True)
def count_backend(st, n):
    """Run ``n`` decisions without storing them; returns the backend count."""
    c = 0
    for _ in range(n):
        c += dispatch(st)
    return c
