"""Per-slot choice of the transmitted linear combination.

Three modules:

* random coding over every packet in the sender's queue,
* next-unseen coding, which mixes only the receivers' next unseen packets and
  lets every successful receiver see its next unseen packet,
* a GF(3) module for exactly three receivers that keeps mixing minimal so
  receivers decode (not just see) packets early.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from fbnc.queues import InvariantViolation

_EMPTY = np.zeros(0, dtype=np.int64)


@dataclass(frozen=True)
class TransmitDecision:
    """A combination ``sum coefs[i] * p_{ids[i]}`` (empty ids mean silence).

    ``ids`` are increasing packet ids and ``coefs`` their weights, both
    tuples of ints. Only random coding lists zero weights; it also keeps
    int64 array copies in ``arrays`` for the kernel.
    """

    ids: tuple
    coefs: tuple
    module: str
    case: int | None = None
    arrays: tuple | None = field(default=None, compare=False, repr=False)

    def packed(self):
        """``(ids, coefs)`` in the cheapest form for the elimination kernel."""
        return self.arrays if self.arrays is not None else (self.ids, self.coefs)

    @property
    def silent(self) -> bool:
        return len(self.ids) == 0

    @property
    def involved(self) -> frozenset[int]:
        return frozenset(int(i) for i, a in zip(self.ids, self.coefs) if a)

    def describe(self) -> str:
        """Human-readable form such as ``p1+2p3``; ``-`` for silence."""
        if self.silent:
            return "-"
        terms = []
        for i, a in zip(self.ids, self.coefs):
            if not a:
                continue
            terms.append(f"p{i}" if a == 1 else f"{a}p{i}")
        return "+".join(terms) or "0"


def silence(module: str, case: int | None = None) -> TransmitDecision:
    return TransmitDecision((), (), module, case)


def _decision(ids, coefs, module, case=None) -> TransmitDecision:
    pairs = sorted((int(i), int(a)) for i, a in zip(ids, coefs) if a)
    return TransmitDecision(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), module, case)


# -- random coding -----------------------------------------------------------
def random_combo(queue_ids, q: int, rng: np.random.Generator) -> TransmitDecision:
    """Independent uniform GF(q) coefficient on every queued packet.

    Zero coefficients are kept, so the decision lists the whole queue.
    """
    queue_ids = np.asarray(queue_ids, dtype=np.int64)
    if queue_ids.size == 0:
        return silence("random")
    coefs = rng.integers(0, q, size=queue_ids.size, dtype=np.int64)
    return TransmitDecision(
        tuple(queue_ids.tolist()), tuple(coefs.tolist()), "random", arrays=(queue_ids, coefs)
    )


# -- next-unseen coding ------------------------------------------------------
def next_unseen_combo(receivers, q: int) -> TransmitDecision:
    """Mix the distinct next unseen packets with collision-avoiding weights.

    Packets are taken in increasing index order. The first weight is 1; each
    later weight is the smallest field element that differs, for every
    receiver waiting on that packet, from the packet's coefficient in the sum
    of that receiver's already-chosen witnesses scaled by the earlier weights.
    """
    waiting: dict[int, list] = {}
    for rk in receivers:
        u = rk.next_unseen()
        if u is not None:
            if u in waiting:
                waiting[u].append(rk)
            else:
                waiting[u] = [rk]
    if not waiting:
        return silence("next_unseen")
    if len(waiting) == 1:
        return TransmitDecision(tuple(waiting), (1,), "next_unseen")
    targets = sorted(waiting)
    weights = [1]
    for j in range(1, len(targets)):
        u = targets[j]
        taken = set()
        for rk in waiting[u]:
            y = 0
            for i in range(j):
                y += weights[i] * rk.witness_entry(targets[i], u)
            taken.add(y % q)
        w = 0
        while w in taken:
            w += 1
        weights.append(w)
    if 0 in weights:
        return _decision(targets, weights, "next_unseen")
    return TransmitDecision(tuple(targets), tuple(weights), "next_unseen")


# -- three-receiver GF(3) module ---------------------------------------------
SET_NAMES = ("S1", "S2", "S3", "S4", "S5", "S6")

# set index (0 for S1 .. 5 for S6) keyed by dn + 2*dd + 4*hd, where dn/dd mark
# packets decoded by N/D and hd packets heard of by D (decoded implies heard)
_SET_OF_BITS = np.array([5, 2, 3, 0, 4, 1, 3, 0], dtype=np.int64)


@dataclass
class ThreeRxState:
    """Roles, max rank and the set family for the current slot.

    ``labels`` is ``(L, N, D)`` as 0-based receiver indices. The sets are
    arrays of packet ids inside ``lo..hi``; every packet below ``lo`` is
    decoded by both N and D and so belongs to S1 implicitly.
    """

    labels: tuple[int, int, int] = (0, 1, 2)
    m: int = 0
    stream_len: int = 0
    lo: int = 1
    hi: int = 0
    sets: dict = field(default_factory=dict)
    label: np.ndarray = field(default_factory=lambda: _EMPTY)

    @property
    def leader(self) -> int:
        return self.labels[0]

    def members(self, name: str) -> list[int]:
        """Full membership of a set, including the implicit S1 prefix."""
        own = [int(x) for x in self.sets.get(name, _EMPTY)]
        if name == "S1":
            return list(range(1, self.lo)) + own
        return own

    def which(self, k: int) -> str | None:
        """Name of the set holding packet ``k`` (None if outside the universe)."""
        if k > self.hi:
            return None
        if k < self.lo:
            return "S1"
        if len(self.label) == self.hi - self.lo + 1:
            return SET_NAMES[self.label[k - self.lo]]
        for name in SET_NAMES:
            s = self.sets.get(name, _EMPTY)
            i = np.searchsorted(s, k)
            if i < len(s) and s[i] == k:
                return name
        return None


def three_rx_sets(state: ThreeRxState, receivers, stream_len: int) -> ThreeRxState:
    """Recompute S1..S6 over the universe ``p_1..p_m`` (+ ``p_{m+1}`` if arrived)."""
    if len(receivers) != 3:
        raise ValueError("the three-receiver module needs exactly three receivers")
    _, n_idx, d_idx = state.labels
    rn, rd = receivers[n_idx], receivers[d_idx]
    hi = min(state.m + 1, stream_len)
    lo = min(rn.front, rd.front) + 1
    if hi >= lo:
        dn = rn.decoded_mask(lo, hi)
        dd = rd.decoded_mask(lo, hi)
        hd = rd.heard_mask(lo, hi)
        label = _SET_OF_BITS[dn + 2 * dd + 4 * hd]
        order = np.argsort(label, kind="stable") + lo
        ends = np.cumsum(np.bincount(label, minlength=6)).tolist()
        starts = [0] + ends[:-1]
        sets = {name: order[a:b] for name, a, b in zip(SET_NAMES, starts, ends)}
    else:
        lo = hi + 1
        label = _EMPTY
        sets = {name: _EMPTY for name in SET_NAMES}
    return replace(state, stream_len=stream_len, lo=lo, hi=hi, sets=sets, label=label)


def _oldest(state: ThreeRxState, name: str):
    s = state.sets.get(name, _EMPTY)
    return int(s[0]) if len(s) else None


def _first_of(state, names):
    for name in names:
        p = _oldest(state, name)
        if p is not None:
            return p, name
    return None, None


def _case1(state):
    s2, s3, s4 = (_oldest(state, x) for x in ("S2", "S3", "S4"))
    if s2 is not None and s4 is not None:
        return [s2, s4]
    if s3 is not None and s4 is not None:
        return [s3, s4]
    p, _ = _first_of(state, ("S5", "S6", "S2", "S3", "S4"))
    return [] if p is None else [p]


def three_rx_combo(state: ThreeRxState, receivers) -> TransmitDecision:
    """Case dispatch on where ``p_{m+1}`` falls in the set family."""
    mod = "three_rx"
    nxt = state.m + 1
    if nxt > state.stream_len:
        ids = _case1(state)
        return _decision(ids, [1] * len(ids), mod, 1) if ids else silence(mod, 1)
    where = state.which(nxt)
    if where == "S1":
        ids = _case1(state) + [nxt]
        return _decision(ids, [1] * len(ids), mod, 2)
    if where in ("S2", "S3"):
        case = 3 if where == "S2" else 4
        p, src = _first_of(state, ("S4", "S5", "S6"))
        if p is None:
            return _decision([nxt], [1], mod, case)
        coef = 1
        if case == 3 and src == "S5":
            rd = receivers[state.labels[2]]
            for coef in (1, 2):
                if not rd.contains([nxt, p], [1, coef]):
                    break
            else:
                raise InvariantViolation("deficit receiver already knows both pairings")
        return _decision([nxt, p], [1, coef], mod, case)
    if where == "S4":
        p, _ = _first_of(state, ("S2", "S3", "S6"))
        if p is None:
            return _decision([nxt], [1], mod, 5)
        return _decision([nxt, p], [1, 1], mod, 5)
    return _decision([nxt], [1], mod, 6)


def three_rx_relabel(state: ThreeRxState, receivers) -> ThreeRxState:
    """Post-feedback role assignment.

    The leader is the lowest-indexed receiver that has decoded every packet up
    to the new maximum rank. Of the other two, a receiver with unsolved
    packets becomes D; otherwise the lower index does.
    """
    m = max(rk.rank for rk in receivers)
    leaders = [i for i, rk in enumerate(receivers) if rk.front >= m]
    if not leaders:
        raise InvariantViolation(f"no receiver has decoded packets 1..{m}")
    lead = leaders[0]
    rest = [i for i in range(3) if i != lead]
    unsolved = [i for i in rest if receivers[i].has_unsolved]
    d = unsolved[0] if len(unsolved) == 1 else rest[0]
    n_ = rest[1] if d == rest[0] else rest[0]
    return ThreeRxState(labels=(lead, n_, d), m=m)
