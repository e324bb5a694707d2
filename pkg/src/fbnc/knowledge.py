"""Per-receiver knowledge spaces over the cumulative packet stream.

Packets are identified by 1-based ids in arrival order. A receiver's knowledge
is the row space of the coefficient vectors it has received, kept in RREF by
an :class:`~fbnc.kernel.IncrementalRref`. Columns below the in-order delivery
front are decoded, so the kernel only holds a window ``base+1 .. stream_len``;
the decoded prefix ``1..base`` is implicit.
"""

from __future__ import annotations

import numpy as np

from fbnc import ffla
from fbnc.kernel import make_rref

# decoded prefix longer than this is trimmed from the kernel
DEFAULT_SLACK = 64


def _check_ids(ids) -> None:
    if len(ids) and (ids.min() if isinstance(ids, np.ndarray) else min(ids)) < 1:
        raise IndexError("packet ids start at 1")


class ReceiverKnowledge:
    """Cumulative knowledge of one receiver.

    Invariants: seen packets are the pivot columns of the RREF basis,
    ``rank == len(seen)``, decoded is a subset of seen, and every packet up to
    ``front`` is decoded.
    """

    def __init__(self, q: int, stream_len: int = 0, slack: int = DEFAULT_SLACK, backend=None):
        self.q = int(q)
        self.base = 0
        self.stream_len = 0
        self.front = 0
        self.slack = slack
        self._k = make_rref(self.q, backend)
        if stream_len:
            self.extend(stream_len)

    # -- mutation --------------------------------------------------------
    def extend(self, k: int = 1) -> None:
        """The sender's stream grew by ``k`` packets."""
        self._k.add_columns(k)
        self.stream_len += k

    def incorporate(self, ids, coefs):
        """Receive the combination ``sum coefs[i] * p_{ids[i]}``.

        Returns ``None`` when the combination was not innovative, otherwise a
        sorted list of newly decoded packet ids (possibly empty).
        """
        _check_ids(ids)
        out = self._k.incorporate(ids, coefs, self.base + 1)
        if out is None:
            return None
        if out:
            out = [c + self.base + 1 for c in out]
            if out[0] == self.front + 1:
                self._advance_front()
        return out

    def _advance_front(self):
        col = self._k.first_undecoded(self.front - self.base)
        self.front = self.base + col
        if self.front - self.base > self.slack:
            self._k.drop_prefix(self.front - self.base)
            self.base = self.front

    # -- queries ---------------------------------------------------------
    @property
    def rank(self) -> int:
        return self.base + self._k.rank

    @property
    def deficit(self) -> int:
        """Virtual queue size: sender dimension minus own dimension."""
        return self.stream_len - self.rank

    @property
    def has_unsolved(self) -> bool:
        """Some packet is heard of but not decoded."""
        return self._k.residual_count() > 0

    def _col(self, k: int) -> int:
        if k < 1 or k > self.stream_len:
            raise IndexError(f"packet {k} outside stream 1..{self.stream_len}")
        return k - self.base - 1

    def contains(self, ids, coefs) -> bool:
        """True iff the combination is already known."""
        _check_ids(ids)
        return self._k.contains(ids, coefs, self.base + 1)

    def is_seen(self, k: int) -> bool:
        return k <= self.base or self._k.is_seen(self._col(k))

    def is_decoded(self, k: int) -> bool:
        return k <= self.base or self._k.is_decoded(self._col(k))

    def seen_packets(self) -> list[int]:
        piv = self._k.pivots()
        return list(range(1, self.base + 1)) + [int(c) + self.base + 1 for c in piv]

    def next_unseen(self):
        """Smallest arrived packet id not yet seen, or None."""
        c = self._k.first_free(self.front - self.base)
        return None if c < 0 else c + self.base + 1

    def witness_entry(self, k: int, j: int) -> int:
        """Coefficient of packet ``j`` in the witness for seen packet ``k``."""
        if k <= self.base:
            return int(k == j)
        if j <= self.base:
            return 0
        return int(self._k.entry(self._col(k), self._col(j)))

    def witness(self, k: int) -> np.ndarray:
        """The unique known combination ``p_k + (unseen later packets)``."""
        if not self.is_seen(k):
            raise ValueError(f"packet {k} has not been seen")
        out = np.zeros(self.stream_len, dtype=np.int64)
        if k <= self.base:
            out[k - 1] = 1
        else:
            out[self.base :] = self._k.row(self._col(k))
        return out

    def decoded_mask(self, lo: int, hi: int) -> np.ndarray:
        """0/1 array over packet ids ``lo..hi`` inclusive."""
        return self._mask(self._k.decoded_mask, lo, hi)

    def heard_mask(self, lo: int, hi: int) -> np.ndarray:
        return self._mask(self._k.heard_mask, lo, hi)

    def _mask(self, fn, lo, hi):
        hi = min(hi, self.stream_len)
        if hi < lo:
            return np.zeros(0, dtype=np.uint8)
        if lo > self.base:
            return np.asarray(fn(lo - self.base - 1, hi - self.base))
        out = np.ones(hi - lo + 1, dtype=np.uint8)
        start = max(lo, self.base + 1)
        if start <= hi:
            out[start - lo :] = fn(start - self.base - 1, hi - self.base)
        return out

    def decoded_and_heard(self) -> tuple[set[int], set[int]]:
        dec = self.decoded_mask(1, self.stream_len)
        heard = self.heard_mask(1, self.stream_len)
        return (
            {int(i) + 1 for i in np.flatnonzero(dec)},
            {int(i) + 1 for i in np.flatnonzero(heard)},
        )

    def basis(self) -> ffla.RrefBasis:
        """Full RREF basis over packets ``1..stream_len``."""
        rows = np.zeros((self.rank, self.stream_len), dtype=np.int64)
        rows[np.arange(self.base), np.arange(self.base)] = 1
        if self._k.rank:
            rows[self.base :, self.base :] = self._k.dense()
        return ffla.rref(rows, self.q, ncols=self.stream_len)

    def window_rows(self, lo: int) -> np.ndarray:
        """RREF rows restricted to packet ids ``lo..stream_len``.

        Requires every packet below ``lo`` to be decoded, so no information is
        lost by the restriction.
        """
        if lo - 1 > self.front:
            raise ValueError("window start is above the decoded prefix")
        width = self.stream_len - lo + 1
        dense = self._k.dense()
        piv = self._k.pivots()
        off = lo - self.base - 1
        if off >= 0:
            return dense[piv >= off][:, off:]
        # the window reaches into the trimmed prefix
        pre = np.zeros((-off, width), dtype=np.int64)
        pre[np.arange(-off), np.arange(-off)] = 1
        tail = np.zeros((len(piv), width), dtype=np.int64)
        tail[:, -off:] = dense
        return np.vstack([pre, tail])

    def equivalence_classes(self, universe: int | None = None) -> list[frozenset[int]]:
        """Partition of ``{0} | {1..universe}`` under "knows p_x + c p_y".

        Only meaningful over GF(3). The element 0 stands for the all-zero
        packet; its class is the decoded set.
        """
        if self.q != 3:
            raise ValueError("equivalence classes are defined over GF(3) only")
        universe = self.stream_len if universe is None else universe
        decoded, heard = self.decoded_and_heard()
        parent = {x: x for x in range(universe + 1)}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for x in decoded:
            if x <= universe:
                parent[find(x)] = find(0)
        unsolved = sorted(k for k in heard - decoded if k <= universe)
        for i, x in enumerate(unsolved):
            for y in unsolved[i + 1 :]:
                if find(x) == find(y):
                    continue
                if self.contains([x, y], [1, 1]) or self.contains([x, y], [1, 2]):
                    parent[find(x)] = find(y)
        classes: dict[int, set[int]] = {}
        for x in range(universe + 1):
            classes.setdefault(find(x), set()).add(x)
        return sorted((frozenset(c) for c in classes.values()), key=min)

    def copy(self) -> "ReceiverKnowledge":
        other = ReceiverKnowledge.__new__(ReceiverKnowledge)
        other.q = self.q
        other.base = self.base
        other.stream_len = self.stream_len
        other.front = self.front
        other.slack = self.slack
        other._k = self._k.copy()
        return other
