"""Monte Carlo engines: packet-loss estimation and time-domain age simulation.

Reproducibility contract
------------------------
A run is keyed by one 64-bit root seed.  Work is split into fixed-size batches
(:data:`FRAMES_PER_BATCH` frames for frame-level engines,
:data:`SLOTS_PER_BATCH` slots for the single-copy simulator).  Batch ``b`` of
an engine with purpose tag ``p`` draws from
``Philox(key=seed, counter=[0, b, p, 0])`` with a fixed intra-batch layout:

1. one activation uniform per (frame, node), node-major within a frame;
2. one degree uniform per transmitter, frames in order, nodes ascending;
3. one placement uniform per replica, same order.

Every result is therefore a pure function of (config, horizon, seed),
independent of execution order, worker count and kernel flavour.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .analysis import irsa_load, one_minus_pow1m
from .model import Protocol, SystemConfig, require_valid

__all__ = [
    "PlrEstimate",
    "AoiStats",
    "NodeAgeTracker",
    "estimate_plr",
    "simulate_aoi_irsa",
    "simulate_aoi_sa",
    "FRAMES_PER_BATCH",
    "SLOTS_PER_BATCH",
]

FRAMES_PER_BATCH = 4096
SLOTS_PER_BATCH = 65536

# purpose tags keeping the engines' substreams disjoint
_P_PLR = 1
_P_AOI_IRSA = 2
_P_AOI_SA = 3

_MASK64 = (1 << 64) - 1


def _batch_rng(seed: int, purpose: int, batch: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(key=int(seed) & _MASK64, counter=[0, batch, purpose, 0])
    )


@dataclass(frozen=True)
class PlrEstimate:
    """Monte Carlo packet-loss-rate estimate at one operating point."""

    load: float
    plr: float
    stderr: float
    packets_observed: int
    frames_simulated: int
    seed: int


@dataclass(frozen=True)
class AoiStats:
    """Time-averaged network age from one simulation run.

    ``network_aoi`` averages the per-node time averages over nodes that were
    delivered at least once; ``per_node_mean`` repeats that value (they are
    the same statistic) and ``per_node_stderr`` is the standard error of the
    cross-node spread.  Nodes never delivered during the whole run are
    excluded and counted in ``nodes_never_delivered``; when *no* node was
    delivered the reported value is the lower bound obtained from ages growing
    from the start of the run and ``diverged`` is set.
    """

    network_aoi: float
    per_node_mean: float
    per_node_stderr: float
    horizon_slots: int
    transient_discarded_slots: int
    throughput: float
    seed: int
    nodes_never_delivered: int = 0
    diverged: bool = False


@dataclass
class NodeAgeTracker:
    """Per-node age bookkeeping with exact piecewise-linear integration.

    Between deliveries the age grows with slope 1, so the integral over a
    segment is one trapezoid; ``deliver`` closes the running segment at the
    delivery instant and resets the age to ``t - gen_ts``.  Used by the
    object-level reference simulation in the test suite; the production
    engines run the same arithmetic vectorised in :mod:`irsa_aoi.kernels`.
    """

    last_delivered_timestamp: int = 0
    pending_update_timestamp: int | None = None
    area_accumulator: float = 0.0
    last_reset_time: int = 0

    def deliver(self, t: int, gen_ts: int) -> None:
        self.area_accumulator += self._segment(t)
        self.last_delivered_timestamp = gen_ts
        self.last_reset_time = t

    def flush(self, t: int) -> None:
        self.area_accumulator += self._segment(t)
        self.last_reset_time = t

    def _segment(self, t: int) -> float:
        dt = float(t - self.last_reset_time)
        age0 = float(self.last_reset_time - self.last_delivered_timestamp)
        return dt * age0 + 0.5 * dt * dt


def _deg_arrays(cfg: SystemConfig):
    degs, cdf = cfg.lam.sampling_arrays()
    return degs, cdf


def _sample_degrees(rng, count, degs, cdf):
    u = rng.random(count)
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(degs) - 1)
    return degs[idx]


def estimate_plr(cfg: SystemConfig, frames: int, seed: int,
                 fixed_degrees=None) -> PlrEstimate:
    """Estimate the packet loss rate over independent frames.

    Per frame each of the n users transmits with probability
    ``1 - (1-pa)**m`` (it activated at least once during the previous frame),
    draws its replica count from the degree distribution and places the
    replicas uniformly on distinct slots; the frame is then peeled.

    ``fixed_degrees`` replaces the stochastic transmitter model with a fixed
    transmitting set (one user per entry, with exactly those degrees) for
    comparison against :func:`irsa_aoi.decoder.enumerate_plr_exact`; in that
    mode only placement uniforms are consumed.

    The standard error treats frames as the independent units (packets within
    a frame are coupled by cancellation), via the ratio-estimator normal
    approximation on per-frame loss counts.
    """
    require_valid(cfg, Protocol.IRSA)
    if frames < 1:
        raise ValueError(f"frames must be positive, got {frames!r}")
    n, m = cfg.n, cfg.m
    degs, cdf = _deg_arrays(cfg)
    if fixed_degrees is not None:
        fixed = np.asarray(fixed_degrees, dtype=np.int64)
        if fixed.size < 1 or fixed.size > n:
            raise ValueError("fixed_degrees must list between 1 and n users")
        if fixed.min() < 1 or fixed.max() > m:
            raise ValueError("fixed degrees must lie in [1, m]")
        max_deg = int(fixed.max())
    else:
        fixed = None
        max_deg = cfg.lam.max_degree
    p_tx = one_minus_pow1m(cfg.pa, m)
    scratch = kernels.scratch_arrays(m, n, max_deg)
    kern = kernels.active().irsa_plr_frames

    lost = 0
    transmitted = 0
    s_xx = 0
    s_xt = 0
    s_tt = 0
    n_batches = (frames + FRAMES_PER_BATCH - 1) // FRAMES_PER_BATCH
    for b in range(n_batches):
        fcount = min(FRAMES_PER_BATCH, frames - b * FRAMES_PER_BATCH)
        rng = _batch_rng(seed, _P_PLR, b)
        if fixed is None:
            act_u = rng.random((fcount, n))
            tx_counts = (act_u < p_tx).sum(axis=1).astype(np.int64)
            deg_flat = _sample_degrees(rng, int(tx_counts.sum()), degs, cdf)
        else:
            tx_counts = np.full(fcount, fixed.size, dtype=np.int64)
            deg_flat = np.tile(fixed, fcount)
        place_u = rng.random(int(deg_flat.sum()))
        out = kern(m, tx_counts, deg_flat, place_u, scratch["occ"],
                   scratch["uid_sum"], scratch["queue"], scratch["slots_flat"],
                   scratch["user_off"], scratch["decoded"])
        lost += int(out[0])
        transmitted += int(out[1])
        s_xx += int(out[2])
        s_xt += int(out[3])
        s_tt += int(out[4])

    if transmitted > 0:
        plr = lost / transmitted
        var_num = s_xx - 2.0 * plr * s_xt + plr * plr * s_tt
        stderr = math.sqrt(max(var_num, 0.0)) / transmitted
    else:
        plr = 0.0
        stderr = 0.0
    return PlrEstimate(
        load=irsa_load(n, m, cfg.pa),
        plr=plr,
        stderr=stderr,
        packets_observed=transmitted,
        frames_simulated=frames,
        seed=seed,
    )


def _activation_timestamps(rng, fcount, n, first_frame, m, log1m_pa):
    """Last-activation timestamp per (frame, node), or -1 when idle.

    Only the freshest activation of a frame matters (older ones are preempted
    while waiting), so the per-slot Bernoulli pattern collapses to a truncated
    geometric draw for the number of slots X between the last activation and
    the frame end: one uniform per (frame, node).
    """
    act_u = rng.random((fcount, n))
    with np.errstate(divide="ignore"):
        ratio = np.log1p(-act_u) / log1m_pa
    kf = np.floor(ratio) + 1.0
    active = kf <= m
    kk = np.where(active, kf, 1.0).astype(np.int64)
    starts = (first_frame + np.arange(fcount, dtype=np.int64))[:, None] * m
    return np.where(active, starts + (m - kk), -1)


def simulate_aoi_irsa(cfg: SystemConfig, frames: int, seed: int,
                      transient_frames: int = 10) -> AoiStats:
    """Slot-exact framed-access age simulation.

    Nodes activate independently in every slot (also while transmitting); a
    node active at least once in frame k transmits its freshest update in
    frame k+1; if that frame's peeling recovers it, the node's age resets at
    the frame end to the frame length plus the pre-transmission wait.  The age
    integral is exact (piecewise linear); statistics exclude the first
    ``transient_frames`` frames.
    """
    require_valid(cfg, Protocol.IRSA)
    if frames < 1:
        raise ValueError(f"frames must be positive, got {frames!r}")
    if transient_frames < 0:
        raise ValueError(f"transient_frames must be nonnegative, got {transient_frames!r}")
    if frames <= transient_frames:
        raise ValueError(f"frames ({frames}) must exceed transient_frames ({transient_frames})")
    n, m = cfg.n, cfg.m
    degs, cdf = _deg_arrays(cfg)
    log1m_pa = float("-inf") if cfg.pa >= 1.0 else math.log1p(-cfg.pa)
    window_start = transient_frames * m
    horizon = frames * m

    pending = np.full(n, -1, dtype=np.int64)
    y_ts = np.zeros(n, dtype=np.int64)
    seg_start = np.full(n, window_start, dtype=np.int64)
    area = np.zeros(n, dtype=np.float64)
    ever = np.zeros(n, dtype=np.bool_)
    tx_ids = np.zeros(n, dtype=np.int64)
    scratch = kernels.scratch_arrays(m, n, cfg.lam.max_degree)
    kern = kernels.active().irsa_aoi_frames

    delivered = 0
    n_batches = (frames + FRAMES_PER_BATCH - 1) // FRAMES_PER_BATCH
    for b in range(n_batches):
        first_frame = b * FRAMES_PER_BATCH
        fcount = min(FRAMES_PER_BATCH, frames - first_frame)
        rng = _batch_rng(seed, _P_AOI_IRSA, b)
        new_ts = _activation_timestamps(rng, fcount, n, first_frame, m, log1m_pa)
        # transmitters per frame: carried pending for the first frame of the
        # batch, then the previous frame's activations
        tx_counts = np.empty(fcount, dtype=np.int64)
        tx_counts[0] = int((pending >= 0).sum())
        if fcount > 1:
            tx_counts[1:] = (new_ts[:-1] >= 0).sum(axis=1)
        deg_flat = _sample_degrees(rng, int(tx_counts.sum()), degs, cdf)
        place_u = rng.random(int(deg_flat.sum()))
        delivered += int(kern(
            m, n, first_frame, window_start, pending, new_ts, deg_flat,
            place_u, y_ts, seg_start, area, ever, scratch["occ"],
            scratch["uid_sum"], scratch["queue"], scratch["slots_flat"],
            scratch["user_off"], scratch["decoded"], tx_ids,
        ))

    return _finalize_aoi(area, y_ts, seg_start, ever, delivered,
                         horizon, window_start, n, seed)


def simulate_aoi_sa(cfg: SystemConfig, slots: int, seed: int,
                    transient_slots: int = 10) -> AoiStats:
    """Slot-exact single-copy age simulation.

    Per slot every node activates with probability pa and transmits
    immediately; the slot delivers iff exactly one node transmitted, resetting
    that node's age to 1 at the slot end.  Sampling uses the exact per-slot
    equivalent (binomial transmitter count, uniform winner on singletons).
    """
    require_valid(cfg, Protocol.SA)
    if slots < 1:
        raise ValueError(f"slots must be positive, got {slots!r}")
    if transient_slots < 0:
        raise ValueError(f"transient_slots must be nonnegative, got {transient_slots!r}")
    if slots <= transient_slots:
        raise ValueError(f"slots ({slots}) must exceed transient_slots ({transient_slots})")
    n = cfg.n
    window_start = transient_slots
    y_ts = np.zeros(n, dtype=np.int64)
    seg_start = np.full(n, window_start, dtype=np.int64)
    area = np.zeros(n, dtype=np.float64)
    ever = np.zeros(n, dtype=np.bool_)
    kern = kernels.active().sa_aoi_events

    delivered = 0
    n_batches = (slots + SLOTS_PER_BATCH - 1) // SLOTS_PER_BATCH
    for b in range(n_batches):
        first_slot = b * SLOTS_PER_BATCH
        scount = min(SLOTS_PER_BATCH, slots - first_slot)
        rng = _batch_rng(seed, _P_AOI_SA, b)
        counts = rng.binomial(n, cfg.pa, size=scount)
        singleton = np.nonzero(counts == 1)[0]
        winners = rng.integers(0, n, size=singleton.size, dtype=np.int64)
        ev_slot = (first_slot + singleton).astype(np.int64)
        delivered += int(kern(ev_slot, winners, window_start,
                              y_ts, seg_start, area, ever))

    return _finalize_aoi(area, y_ts, seg_start, ever, delivered,
                         slots, window_start, n, seed)


def _finalize_aoi(area, y_ts, seg_start, ever, delivered, horizon,
                  window_start, n, seed) -> AoiStats:
    # close the last age segment of every node at the horizon
    dt = (horizon - seg_start).astype(np.float64)
    age0 = (seg_start - y_ts).astype(np.float64)
    area = area + dt * age0 + 0.5 * dt * dt
    span = horizon - window_start
    means = area / span
    never = int(n - ever.sum())
    if never > 0:
        warnings.warn(
            f"{never} of {n} nodes were never delivered within the horizon; "
            "they are excluded from the network average",
            stacklevel=3,
        )
    if ever.any():
        included = means[ever]
        net = float(included.mean())
        if included.size > 1:
            stderr = float(included.std(ddof=1) / math.sqrt(included.size))
        else:
            stderr = 0.0
        diverged = False
    else:
        # no delivery at all: ages only grew from the start of the run, so
        # this average is a lower bound on the true (divergent) age
        net = float(means.mean())
        stderr = 0.0
        diverged = True
    return AoiStats(
        network_aoi=net,
        per_node_mean=net,
        per_node_stderr=stderr,
        horizon_slots=int(horizon),
        transient_discarded_slots=int(window_start),
        throughput=delivered / span,
        seed=seed,
        nodes_never_delivered=never,
        diverged=diverged,
    )
