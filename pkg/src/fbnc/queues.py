"""Sender-side physical queue management.

Three policies share a small interface used by the simulator:

* ``arrive(k)``: append ``k`` new packets (ids continue the stream).
* ``update(...)``: end-of-slot bookkeeping after feedback; returns the ids of
  original packets that left the queue this slot.
* ``size`` and ``entries``.

``DropWhenDecodedQueue`` keeps whole packets until every receiver has emptied
its virtual queue since the packet arrived. ``DropWhenSeenQueue`` drops a
packet once all receivers have seen it. ``DropCommonKnowledgeQueue`` stores
linear combinations and keeps only what is not yet common to all receivers.
"""

from __future__ import annotations

import numpy as np

from fbnc import ffla
from fbnc.kernel import make_rref


class InvariantViolation(AssertionError):
    """A property the algorithms guarantee failed to hold (indicates a bug)."""


def virtual_queues(sender_dim: int, receivers) -> list[int]:
    """Per-receiver backlog in degrees of freedom."""
    out = []
    for rk in receivers:
        d = sender_dim - rk.rank
        if d < 0:
            raise InvariantViolation("receiver knows more than the sender")
        out.append(d)
    return out


class DropWhenDecodedQueue:
    """Contiguous FIFO queue; drops happen only when virtual queues empty.

    A receiver whose virtual queue is empty at the end of a slot has decoded
    everything the sender holds, so all current entries are marked for it.
    Decoding that happens at other instants is ignored on purpose.
    """

    policy = "alg1"

    def __init__(self, n: int):
        self.n = n
        self.head = 1
        self.arrivals = 0
        self.marked = [0] * n

    @property
    def size(self) -> int:
        return self.arrivals - self.head + 1

    @property
    def entries(self) -> np.ndarray:
        return np.arange(self.head, self.arrivals + 1, dtype=np.int64)

    def arrive(self, k: int = 1) -> None:
        self.arrivals += k

    def update(self, vq) -> range:
        for j, v in enumerate(vq):
            if v == 0:
                self.marked[j] = self.arrivals
        new_head = min(self.marked) + 1
        dropped = range(self.head, new_head)
        self.head = max(self.head, new_head)
        return dropped


def alg1_update(queue: DropWhenDecodedQueue, vq) -> range:
    return queue.update(vq)


class DropWhenSeenQueue:
    """Keeps original packets until every receiver has seen them.

    The sender tracks each receiver's knowledge restricted to the packets
    still in the queue (one incremental RREF per receiver, columns = queue
    entries in index order).
    """

    policy = "alg2b"

    def __init__(self, n: int, q: int, backend=None):
        self.n = n
        self.q = q
        self.arrivals = 0
        self._ids: list[int] = []
        self.bases = [make_rref(q, backend) for _ in range(n)]

    @property
    def size(self) -> int:
        return len(self._ids)

    @property
    def entries(self) -> np.ndarray:
        return np.array(self._ids, dtype=np.int64)

    def arrive(self, k: int = 1) -> None:
        if k <= 0:
            return
        self._ids.extend(range(self.arrivals + 1, self.arrivals + k + 1))
        self.arrivals += k
        for b in self.bases:
            b.add_columns(k)

    def _contiguous(self) -> bool:
        ids = self._ids
        return not ids or ids[-1] - ids[0] + 1 == len(ids)

    def local(self, ids) -> np.ndarray:
        """Queue positions of the given packet ids."""
        ids = np.asarray(ids, dtype=np.int64)
        held = np.array(self._ids, dtype=np.int64)
        pos = np.searchsorted(held, ids)
        if ids.size and (pos.max() >= len(held) or (held[pos] != ids).any()):
            raise InvariantViolation("transmission involves a packet not in the queue")
        return pos

    def update(self, ids, coefs, received) -> list[int]:
        """Fold successful receptions into the bases and drop seen-by-all packets.

        A column can only become seen by everyone in a slot where some
        receiver newly sees it, so only this slot's new pivots are checked.
        """
        if not len(ids) or not any(received):
            return []
        held = self._ids
        if held[-1] - held[0] + 1 == len(held):
            head = held[0]
            if ids[0] < head or ids[-1] > self.arrivals:
                raise InvariantViolation("transmission involves a packet not in the queue")
            cols, offset = ids, head
        else:
            cols, offset = self.local(ids), 0
        bases = self.bases
        fresh = []
        for b, ok in zip(bases, received):
            if ok and b.incorporate(cols, coefs, offset) is not None:
                c = b.last_pivot
                if c not in fresh:
                    fresh.append(c)
        drop = [c for c in fresh if all(b.is_seen(c) for b in bases)]
        if not drop:
            return []
        drop.sort()
        for b in self.bases:
            b.drop_columns(drop)
        dropped = [self._ids[c] for c in drop]
        for c in reversed(drop):
            del self._ids[c]
        return dropped

    def local_ranks(self) -> list[int]:
        return [b.rank for b in self.bases]


def alg2b_update(queue: DropWhenSeenQueue, ids, coefs, received) -> list[int]:
    return queue.update(ids, coefs, received)


class DropCommonKnowledgeQueue:
    """Stores linear combinations; discards knowledge common to all receivers.

    ``contents`` holds the global coefficient vectors of the stored
    combinations over packet ids ``offset+1 .. arrivals``. ``bases[j]`` is the
    RREF of receiver ``j``'s incremental knowledge in queue coordinates (the
    sender's own basis is always the identity, so it is not stored).
    """

    policy = "alg2a"

    def __init__(self, n: int, q: int):
        if q <= n:
            raise ValueError(f"field size {q} must exceed the receiver count {n}")
        self.n = n
        self.q = q
        self.arrivals = 0
        self.offset = 0
        self.contents = np.zeros((0, 0), dtype=np.int64)
        self.bases = [np.zeros((0, 0), dtype=np.int64) for _ in range(n)]

    @property
    def size(self) -> int:
        return self.contents.shape[0]

    @property
    def entries(self) -> np.ndarray:
        return self.contents

    def arrive(self, k: int = 1) -> None:
        if k <= 0:
            return
        Q, W = self.contents.shape
        H = np.zeros((Q + k, W + k), dtype=np.int64)
        H[:Q, :W] = self.contents
        H[Q:, W:] = np.eye(k, dtype=np.int64)
        self.contents = H
        self.arrivals += k
        self.bases = [np.hstack([b, np.zeros((b.shape[0], k), dtype=np.int64)]) for b in self.bases]

    def _basis(self, j) -> ffla.RrefBasis:
        return ffla.rref(self.bases[j], self.q, ncols=self.size)

    def choose(self):
        """Local coefficient vector for this slot, or None when the queue is empty."""
        if self.size == 0:
            return None
        sender = ffla.rref(np.eye(self.size, dtype=np.int64), self.q)
        return ffla.find_innovative(sender, [self._basis(j) for j in range(self.n)])

    def to_global(self, g):
        """(ids, coefs) of the global combination for local vector ``g``."""
        vec = (np.asarray(g, dtype=np.int64) @ self.contents) % self.q
        nz = np.flatnonzero(vec)
        return nz + self.offset + 1, vec[nz]

    def update(self, g, received) -> list[int]:
        """Fold receptions in, then keep only what is not common knowledge.

        Returns the original packet ids that no longer appear in any stored
        combination.
        """
        q = self.q
        Q = self.size
        if g is not None:
            for j, ok in enumerate(received):
                if ok:
                    self.bases[j] = ffla.rref(np.vstack([self.bases[j], g]), q, ncols=Q).rows.copy()
        spans = [self._basis(j) for j in range(self.n)]
        common = ffla.intersect_all(spans) if spans else ffla.empty_basis(Q, q)
        identity = ffla.rref(np.eye(Q, dtype=np.int64), q)
        b2 = ffla.as_matrix(ffla.complete_basis(common, identity), q, Q)
        pivots = set(common.pivot_cols)
        nonpivots = [c for c in range(Q) if c not in pivots]
        new_bases = []
        for basis in spans:
            own = ffla.as_matrix(ffla.complete_basis(common, basis), q, Q)
            if own.shape[0]:
                x = own[:, nonpivots]
                # own rows must lie in span(b2) for the re-expression to be exact
                if ((x @ b2) % q != own).any():
                    raise InvariantViolation("constrained completion left span of the new queue basis")
            else:
                x = np.zeros((0, len(nonpivots)), dtype=np.int64)
            new_bases.append(np.ascontiguousarray(x))
        old_support = self._support()
        self.contents = (b2 @ self.contents) % q if b2.shape[0] else np.zeros((0, self.contents.shape[1]), dtype=np.int64)
        self.bases = new_bases
        self._trim()
        gone = old_support - self._support()
        return sorted(gone)

    def _support(self) -> set[int]:
        cols = np.flatnonzero(self.contents.any(axis=0)) if self.size else np.zeros(0, dtype=np.int64)
        return {int(c) + self.offset + 1 for c in cols}

    def _trim(self):
        """Drop leading all-zero columns of ``contents``."""
        if self.size == 0:
            self.offset = self.arrivals
            self.contents = np.zeros((0, 0), dtype=np.int64)
            return
        used = np.flatnonzero(self.contents.any(axis=0))
        lead = int(used[0])
        if lead:
            self.contents = self.contents[:, lead:].copy()
            self.offset += lead

    def global_rows(self, lo: int) -> np.ndarray:
        """Stored combinations as vectors over packet ids ``lo..arrivals``."""
        width = self.arrivals - lo + 1
        out = np.zeros((self.size, width), dtype=np.int64)
        start = self.offset + 1 - lo
        if start < 0:
            if self.contents[:, : -start].any():
                raise ValueError("window cuts through stored combinations")
            out[:, :] = self.contents[:, -start:]
        else:
            out[:, start:] = self.contents
        return out


def alg2a_step(queue: DropCommonKnowledgeQueue, arrivals: int, received):
    """One slot of the common-knowledge algorithm.

    ``received`` holds the per-receiver reception flags for this slot's
    transmission. Returns the local vector sent (None for silence) and the
    packet ids that left the queue.
    """
    queue.arrive(arrivals)
    g = queue.choose()
    return g, queue.update(g, received)
