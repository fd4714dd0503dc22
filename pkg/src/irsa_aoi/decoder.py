"""Per-frame replica placement and iterative interference-cancellation peeling.

The channel is a destructive collision channel: a slot holding exactly one
un-cancelled replica is always decoded, a slot holding two or more yields
nothing.  Decoding a user removes all of its replicas (the packet carries
pointers to its copies), which may expose new singleton slots; peeling repeats
until no singleton remains.

This module is the readable object-level implementation used for small
instances, tests and the exhaustive oracle; the Monte Carlo engines in
:mod:`irsa_aoi.sim` run the same peeling logic as flat array kernels.
"""

import math
from dataclasses import dataclass
from itertools import combinations, product
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "Frame",
    "DecodingResult",
    "build_frame",
    "decode_frame",
    "enumerate_plr_exact",
    "parse_frame_fixture",
    "format_frame_fixture",
]


@dataclass(frozen=True)
class Frame:
    """One frame's worth of replica placements.

    placements maps user id -> tuple of distinct slot indices in [0, m);
    timestamps maps user id -> generation time (global slot units) of the
    update the replicas carry.
    """

    m: int
    placements: Mapping[int, tuple[int, ...]]
    timestamps: Mapping[int, int]

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be positive, got {self.m!r}")
        for user, slots in self.placements.items():
            if len(slots) < 1:
                raise ValueError(f"user {user}: empty replica list")
            if len(set(slots)) != len(slots):
                raise ValueError(f"user {user}: duplicate slot in {slots!r}")
            for s in slots:
                if not 0 <= s < self.m:
                    raise ValueError(f"user {user}: slot {s} outside [0, {self.m})")
            if user not in self.timestamps:
                raise ValueError(f"user {user}: missing timestamp")


@dataclass(frozen=True)
class DecodingResult:
    decoded: frozenset
    order: tuple
    iterations: int


def build_frame(m, degrees: Mapping[int, int], rng: np.random.Generator,
                timestamps: Mapping[int, int] | None = None) -> Frame:
    """Place each user's replicas on distinct slots, uniformly over subsets.

    Users are processed in sorted id order and each degree-l placement
    consumes exactly l draws from ``rng`` (Floyd's subset sampling), so the
    result is a pure function of the generator state.
    """
    placements = {}
    for user in sorted(degrees):
        ell = degrees[user]
        if not 1 <= ell <= m:
            raise ValueError(f"user {user}: degree {ell} outside [1, {m}]")
        placements[user] = sample_slots(m, ell, rng.random(ell))
    ts = dict(timestamps) if timestamps is not None else {u: 0 for u in placements}
    return Frame(m=m, placements=placements, timestamps=ts)


def sample_slots(m: int, ell: int, uniforms: Sequence[float]) -> tuple[int, ...]:
    """Floyd's algorithm: a uniform ell-subset of [0, m) from ell uniforms."""
    chosen: list[int] = []
    for i, t in enumerate(range(m - ell, m)):
        r = int(uniforms[i] * (t + 1))
        chosen.append(t if r in chosen else r)
    return tuple(chosen)


def decode_frame(frame: Frame) -> DecodingResult:
    """Peel singleton slots to fixpoint.

    Runs in passes: every slot that is singleton at the start of a pass is
    processed (in slot order) before newly exposed singletons are considered.
    The decoded *set* does not depend on the order chosen within a pass:
    cancellations only ever remove interference, so peeling on this graph is
    confluent.  ``iterations`` counts passes that decoded at least one user.
    """
    slot_users: list[set] = [set() for _ in range(frame.m)]
    for user, slots in frame.placements.items():
        for s in slots:
            slot_users[s].add(user)
    decoded: set = set()
    order: list = []
    iterations = 0
    while True:
        frontier = [s for s in range(frame.m) if len(slot_users[s]) == 1]
        newly = []
        for s in frontier:
            if len(slot_users[s]) != 1:
                continue  # emptied earlier in this pass
            (user,) = slot_users[s]
            if user in decoded:
                continue
            newly.append(user)
            decoded.add(user)
            for t in frame.placements[user]:
                slot_users[t].discard(user)
        if not newly:
            break
        order.extend(newly)
        iterations += 1
    return DecodingResult(decoded=frozenset(decoded), order=tuple(order), iterations=iterations)


_ENUM_CAP = 1_000_000


def enumerate_plr_exact(m: int, degrees: Sequence[int]) -> float:
    """Exact packet loss rate for a fixed transmitting set, by enumeration.

    Iterates over every joint placement (each user independently uniform over
    its C(m, l) slot subsets), decodes each, and averages the fraction of
    users left undecoded.  Guarded to at most 10**6 joint placements.
    """
    if not degrees:
        raise ValueError("degrees must be non-empty")
    total = 1
    for ell in degrees:
        if not 1 <= ell <= m:
            raise ValueError(f"degree {ell} outside [1, {m}]")
        total *= math.comb(m, ell)
        if total > _ENUM_CAP:
            raise ValueError(
                f"joint placement count exceeds {_ENUM_CAP}; enumeration intractable"
            )
    users = list(range(len(degrees)))
    ts = {u: 0 for u in users}
    lost = 0
    for combo in product(*(combinations(range(m), ell) for ell in degrees)):
        frame = Frame(m=m, placements=dict(zip(users, combo)), timestamps=ts)
        lost += len(users) - len(decode_frame(frame).decoded)
    return lost / (len(users) * total)


# --- test-fixture text format ----------------------------------------------
#
#   user <id> slots <i,j,...> ts <t>
#
# one user per line; blank lines and '#' comments are ignored.

def parse_frame_fixture(text: str, m: int) -> Frame:
    placements = {}
    timestamps = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 6 or tokens[0] != "user" or tokens[2] != "slots" or tokens[4] != "ts":
            raise ValueError(f"line {lineno}: expected 'user <id> slots <i,...> ts <t>'")
        try:
            user = int(tokens[1])
            slots = tuple(int(s) for s in tokens[3].split(","))
            ts = int(tokens[5])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if user in placements:
            raise ValueError(f"line {lineno}: duplicate user {user}")
        placements[user] = slots
        timestamps[user] = ts
    return Frame(m=m, placements=placements, timestamps=timestamps)


def format_frame_fixture(frame: Frame) -> str:
    lines = []
    for user in sorted(frame.placements):
        slots = ",".join(str(s) for s in frame.placements[user])
        lines.append(f"user {user} slots {slots} ts {frame.timestamps[user]}")
    return "\n".join(lines) + "\n"
