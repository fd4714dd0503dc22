"""Hot Monte Carlo kernels: batched replica placement, peeling, age accounting.

Each kernel exists in two flavours built from the same source function: a
numba ``@njit`` compilation and the plain-Python original operating on numpy
arrays.  The active flavour is chosen at import time (numba is used when it
imports and the environment variable ``IRSA_AOI_NUMBA`` is not one of
``0/false/off/no``) and can be switched per call site with :func:`use`.
Because both flavours run identical code, results are bit-for-bit equal.

All randomness is drawn outside the kernels (vectorised, from counter-derived
substreams) and passed in as flat uniform arrays with a fixed consumption
order, so a kernel is a pure function of its inputs.
"""

import os
from contextlib import contextmanager
from typing import NamedTuple

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency normally
    njit = None
    _HAVE_NUMBA = False


def _irsa_plr_frames(m, tx_counts, deg_flat, place_u, occ, uid_sum, queue,
                     slots_flat, user_off, decoded):
    """Decode a batch of independent frames; return loss statistics.

    Per frame f, ``tx_counts[f]`` transmitters with degrees taken from
    ``deg_flat`` (running cursor) place replicas using Floyd subset sampling,
    consuming one uniform from ``place_u`` per replica.  Peeling runs on slot
    occupancy counters with a work queue; ``uid_sum[s]`` holds the sum of
    un-cancelled local user indices in slot s, so a singleton slot names its
    user directly.

    Returns (lost, transmitted, sum lost^2, sum lost*tx, sum tx^2) with the
    squared sums taken per frame, for the ratio-estimator standard error.
    """
    n_frames = tx_counts.shape[0]
    lost = 0
    transmitted = 0
    s_xx = 0
    s_xt = 0
    s_tt = 0
    di = 0
    pi = 0
    for f in range(n_frames):
        ntx = tx_counts[f]
        for s in range(m):
            occ[s] = 0
            uid_sum[s] = 0
        off = 0
        for uu in range(ntx):
            k = deg_flat[di + uu]
            user_off[uu] = off
            cnt = 0
            for t in range(m - k, m):
                r = int(place_u[pi] * (t + 1))
                pi += 1
                dup = False
                for c in range(cnt):
                    if slots_flat[off + c] == r:
                        dup = True
                        break
                slots_flat[off + cnt] = t if dup else r
                cnt += 1
            for c in range(k):
                s = slots_flat[off + c]
                occ[s] += 1
                uid_sum[s] += uu
            off += k
            decoded[uu] = False
        user_off[ntx] = off
        qn = 0
        for s in range(m):
            if occ[s] == 1:
                queue[qn] = s
                qn += 1
        n_dec = 0
        qi = 0
        while qi < qn:
            s = queue[qi]
            qi += 1
            if occ[s] != 1:
                continue
            uu = uid_sum[s]
            if decoded[uu]:
                continue
            decoded[uu] = True
            n_dec += 1
            for j in range(user_off[uu], user_off[uu + 1]):
                t = slots_flat[j]
                occ[t] -= 1
                uid_sum[t] -= uu
                if occ[t] == 1:
                    queue[qn] = t
                    qn += 1
        lf = ntx - n_dec
        lost += lf
        transmitted += ntx
        s_xx += lf * lf
        s_xt += lf * ntx
        s_tt += ntx * ntx
        di += ntx
    return lost, transmitted, s_xx, s_xt, s_tt


def _irsa_aoi_frames(m, n, first_frame, window_start, pending, new_ts,
                     deg_flat, place_u, y_ts, seg_start, area, ever,
                     occ, uid_sum, queue, slots_flat, user_off, decoded, tx_ids):
    """Advance the framed-access age simulation over one batch of frames.

    State arrays (mutated in place, one entry per node):
      pending    generation timestamp awaiting transmission this frame, -1 none
      y_ts       generation timestamp of the last delivered update
      seg_start  start of the age segment still to be integrated
      area       accumulated age integral inside the measurement window
      ever       whether the node has ever been delivered

    ``new_ts[f, i]`` is node i's last activation timestamp during the batch's
    f-th frame (-1 when it never activated); it becomes the pending update of
    the following frame.  Deliveries happen at frame ends; the age integral is
    the exact trapezoid between consecutive deliveries, accumulated only past
    ``window_start``.  Returns the number of deliveries inside the window.
    """
    n_frames = new_ts.shape[0]
    delivered = 0
    di = 0
    pi = 0
    for f in range(n_frames):
        t_del = (first_frame + f + 1) * m
        ntx = 0
        for i in range(n):
            if pending[i] >= 0:
                tx_ids[ntx] = i
                ntx += 1
        for s in range(m):
            occ[s] = 0
            uid_sum[s] = 0
        off = 0
        for uu in range(ntx):
            k = deg_flat[di + uu]
            user_off[uu] = off
            cnt = 0
            for t in range(m - k, m):
                r = int(place_u[pi] * (t + 1))
                pi += 1
                dup = False
                for c in range(cnt):
                    if slots_flat[off + c] == r:
                        dup = True
                        break
                slots_flat[off + cnt] = t if dup else r
                cnt += 1
            for c in range(k):
                s = slots_flat[off + c]
                occ[s] += 1
                uid_sum[s] += uu
            off += k
            decoded[uu] = False
        user_off[ntx] = off
        qn = 0
        for s in range(m):
            if occ[s] == 1:
                queue[qn] = s
                qn += 1
        qi = 0
        while qi < qn:
            s = queue[qi]
            qi += 1
            if occ[s] != 1:
                continue
            uu = uid_sum[s]
            if decoded[uu]:
                continue
            decoded[uu] = True
            i = tx_ids[uu]
            ever[i] = True
            if t_del > window_start:
                dt = float(t_del - seg_start[i])
                a0 = float(seg_start[i] - y_ts[i])
                area[i] += dt * a0 + 0.5 * dt * dt
                seg_start[i] = t_del
                delivered += 1
            y_ts[i] = pending[i]
            for j in range(user_off[uu], user_off[uu + 1]):
                t = slots_flat[j]
                occ[t] -= 1
                uid_sum[t] -= uu
                if occ[t] == 1:
                    queue[qn] = t
                    qn += 1
        di += ntx
        for i in range(n):
            pending[i] = new_ts[f, i]
    return delivered


def _sa_aoi_events(ev_slot, ev_node, window_start, y_ts, seg_start, area, ever):
    """Apply a batch of single-copy delivery events (ascending slot order).

    A success in slot t delivers the update generated at the slot start, so
    the age resets to exactly 1 at time t+1.  Same trapezoid accounting as the
    framed kernel.  Returns deliveries inside the measurement window.
    """
    delivered = 0
    for e in range(ev_slot.shape[0]):
        t = ev_slot[e]
        i = ev_node[e]
        t_del = t + 1
        ever[i] = True
        if t_del > window_start:
            dt = float(t_del - seg_start[i])
            a0 = float(seg_start[i] - y_ts[i])
            area[i] += dt * a0 + 0.5 * dt * dt
            seg_start[i] = t_del
            delivered += 1
        y_ts[i] = t
    return delivered


class KernelSet(NamedTuple):
    irsa_plr_frames: object
    irsa_aoi_frames: object
    sa_aoi_events: object
    jitted: bool


PY_KERNELS = KernelSet(_irsa_plr_frames, _irsa_aoi_frames, _sa_aoi_events, jitted=False)

if _HAVE_NUMBA:
    JIT_KERNELS = KernelSet(
        njit(cache=True)(_irsa_plr_frames),
        njit(cache=True)(_irsa_aoi_frames),
        njit(cache=True)(_sa_aoi_events),
        jitted=True,
    )
else:
    JIT_KERNELS = None

_env = os.environ.get("IRSA_AOI_NUMBA", "1").strip().lower()
NUMBA_ENABLED = _HAVE_NUMBA and _env not in ("0", "false", "off", "no")

ACTIVE = JIT_KERNELS if NUMBA_ENABLED else PY_KERNELS


def active() -> KernelSet:
    return ACTIVE


@contextmanager
def use(kernel_set: KernelSet):
    """Temporarily switch the active kernel set (benchmarks, path tests)."""
    global ACTIVE
    previous = ACTIVE
    ACTIVE = kernel_set
    try:
        yield
    finally:
        ACTIVE = previous


def scratch_arrays(m: int, n: int, max_degree: int):
    """Preallocated work arrays shared by the frame kernels."""
    return dict(
        occ=np.zeros(m, np.int64),
        uid_sum=np.zeros(m, np.int64),
        queue=np.zeros(2 * m + 2, np.int64),
        slots_flat=np.zeros(n * max_degree + 1, np.int64),
        user_off=np.zeros(n + 1, np.int64),
        decoded=np.zeros(n, np.bool_),
    )
