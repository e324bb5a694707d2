"""Prime-field arithmetic and small dense linear algebra over GF(q).

Everything here works on plain numpy ``int64`` arrays with entries in
``[0, q)``. These routines are the general-purpose (and slower) path used by
the drop-common-knowledge queue and by the verification checks; the per-slot
receiver updates go through :mod:`fbnc.kernel` instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterable, Sequence

import numpy as np


class FieldError(ArithmeticError):
    """Arithmetic outside the field's domain (e.g. inverting zero)."""


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q % 2 == 0:
        return q == 2
    f = 3
    while f * f <= q:
        if q % f == 0:
            return False
        f += 2
    return True


def next_prime(n: int) -> int:
    """Smallest prime >= n."""
    p = max(2, n)
    while not is_prime(p):
        p += 1
    return p


def _check_modulus(q: int) -> int:
    q = int(q)
    if not is_prime(q):
        raise ValueError(f"field modulus {q} is not prime")
    return q


@dataclass(frozen=True)
class FieldElement:
    value: int
    q: int

    def __post_init__(self):
        _check_modulus(self.q)
        object.__setattr__(self, "value", int(self.value) % self.q)

    def _other(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.q != self.q:
                raise ValueError(f"mismatched moduli {self.q} and {other.q}")
            return other.value
        if isinstance(other, (int, np.integer)):
            return int(other) % self.q
        return NotImplemented

    def __add__(self, other):
        b = self._other(other)
        if b is NotImplemented:
            return b
        return FieldElement((self.value + b) % self.q, self.q)

    __radd__ = __add__

    def __sub__(self, other):
        b = self._other(other)
        if b is NotImplemented:
            return b
        return FieldElement((self.value - b) % self.q, self.q)

    def __rsub__(self, other):
        b = self._other(other)
        if b is NotImplemented:
            return b
        return FieldElement((b - self.value) % self.q, self.q)

    def __mul__(self, other):
        b = self._other(other)
        if b is NotImplemented:
            return b
        return FieldElement((self.value * b) % self.q, self.q)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElement(-self.value % self.q, self.q)

    def inverse(self) -> "FieldElement":
        return FieldElement(inv(self.value, self.q), self.q)

    def __truediv__(self, other):
        b = self._other(other)
        if b is NotImplemented:
            return b
        return self * FieldElement(b, self.q).inverse()

    def __int__(self):
        return self.value

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return self.q == other.q and self.value == other.value
        if isinstance(other, (int, np.integer)):
            return self.value == int(other) % self.q
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.q))


def add(a: int, b: int, q: int) -> int:
    return (a + b) % q


def sub(a: int, b: int, q: int) -> int:
    return (a - b) % q


def mul(a: int, b: int, q: int) -> int:
    return (a * b) % q


def neg(a: int, q: int) -> int:
    return -a % q


def inv(a: int, q: int) -> int:
    a = int(a) % q
    if a == 0:
        raise FieldError("zero has no multiplicative inverse")
    return pow(a, q - 2, q)


# ---------------------------------------------------------------------------
# RREF bases


@dataclass(frozen=True, eq=False)
class RrefBasis:
    """Row space in reduced row echelon form.

    ``rows`` is a read-only ``(rank, ncols)`` array; ``pivot_cols`` is the
    strictly increasing tuple of pivot columns.
    """

    rows: np.ndarray
    ncols: int
    pivot_cols: tuple
    q: int

    @property
    def rank(self) -> int:
        return len(self.pivot_cols)

    def __len__(self):
        return self.rank

    def __eq__(self, other):
        if not isinstance(other, RrefBasis):
            return NotImplemented
        return (
            self.q == other.q
            and self.ncols == other.ncols
            and self.pivot_cols == other.pivot_cols
            and np.array_equal(self.rows, other.rows)
        )

    def __hash__(self):
        return hash((self.q, self.ncols, self.pivot_cols, self.rows.tobytes()))

    def __repr__(self):
        return f"RrefBasis(q={self.q}, ncols={self.ncols}, rows={self.rows.tolist()})"


def empty_basis(ncols: int, q: int) -> RrefBasis:
    return _freeze(np.zeros((0, ncols), dtype=np.int64), ncols, (), q)


def _freeze(rows, ncols, pivots, q) -> RrefBasis:
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    rows.setflags(write=False)
    return RrefBasis(rows, int(ncols), tuple(int(p) for p in pivots), int(q))


def as_matrix(rows, q: int, ncols: int | None = None) -> np.ndarray:
    if isinstance(rows, RrefBasis):
        return rows.rows.copy()
    m = np.array(rows, dtype=np.int64)
    if m.size == 0:
        n = 0 if ncols is None else ncols
        return np.zeros((0, n), dtype=np.int64)
    if m.ndim == 1:
        m = m[None, :]
    if ncols is not None and m.shape[1] != ncols:
        raise ValueError(f"rows have {m.shape[1]} columns, expected {ncols}")
    return m % q


def rref(rows, q: int, ncols: int | None = None) -> RrefBasis:
    """Gauss-Jordan elimination; zero/dependent rows are discarded."""
    q = _check_modulus(q)
    m = as_matrix(rows, q, ncols)
    nr, nc = m.shape
    pivots = []
    r = 0
    for c in range(nc):
        if r == nr:
            break
        nz = np.flatnonzero(m[r:, c])
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            m[[r, p]] = m[[p, r]]
        m[r] = (m[r] * inv(int(m[r, c]), q)) % q
        col = m[:, c].copy()
        col[r] = 0
        hit = np.flatnonzero(col)
        if hit.size:
            m[hit] = (m[hit] - np.outer(col[hit], m[r])) % q
        pivots.append(c)
        r += 1
    return _freeze(m[:r], nc, pivots, q)


def rank(rows, q: int) -> int:
    return rref(rows, q).rank


def reduce(basis: RrefBasis, v) -> np.ndarray:
    """Residual of ``v`` after eliminating every pivot column of ``basis``."""
    v = np.asarray(v, dtype=np.int64) % basis.q
    if v.shape != (basis.ncols,):
        raise ValueError(f"vector length {v.shape} does not match {basis.ncols} columns")
    if basis.rank == 0:
        return v.copy()
    coef = v[list(basis.pivot_cols)]
    return (v - coef @ basis.rows) % basis.q


def contains(basis: RrefBasis, v) -> bool:
    return not reduce(basis, v).any()


def is_subspace(inner: RrefBasis, outer: RrefBasis) -> bool:
    _same_shape(inner, outer)
    return all(contains(outer, row) for row in inner.rows)


def span_sum(a: RrefBasis, b: RrefBasis) -> RrefBasis:
    _same_shape(a, b)
    return rref(np.vstack([a.rows, b.rows]), a.q, a.ncols)


def _same_shape(a: RrefBasis, b: RrefBasis):
    if a.q != b.q:
        raise ValueError(f"mismatched moduli {a.q} and {b.q}")
    if a.ncols != b.ncols:
        raise ValueError(f"mismatched column counts {a.ncols} and {b.ncols}")


def left_nullspace(m: np.ndarray, q: int) -> np.ndarray:
    """Rows x with x @ m == 0, as a basis (RREF of the augmented identity)."""
    nr, nc = m.shape
    aug = np.hstack([m % q, np.eye(nr, dtype=np.int64)])
    red = rref(aug, q, nc + nr)
    keep = [i for i, p in enumerate(red.pivot_cols) if p >= nc]
    return red.rows[keep, nc:].copy()


def intersect(a: RrefBasis, b: RrefBasis) -> RrefBasis:
    """span(a) ∩ span(b) via the left null space of the stacked bases."""
    _same_shape(a, b)
    q = a.q
    if a.rank == 0 or b.rank == 0:
        return empty_basis(a.ncols, q)
    stacked = np.vstack([a.rows, b.rows])
    null = left_nullspace(stacked, q)
    if null.shape[0] == 0:
        return empty_basis(a.ncols, q)
    common = (null[:, : a.rank] @ a.rows) % q
    return rref(common, q, a.ncols)


def intersect_all(bases: Sequence[RrefBasis]) -> RrefBasis:
    if not bases:
        raise ValueError("need at least one basis")
    out = bases[0]
    for b in bases[1:]:
        out = intersect(out, b)
    return out


def is_independent(a: RrefBasis, b: RrefBasis) -> bool:
    """True iff span(a) ∩ span(b) = {0}."""
    _same_shape(a, b)
    return span_sum(a, b).rank == a.rank + b.rank


def complete_basis(inner: RrefBasis, outer: RrefBasis) -> list:
    """Vectors that extend ``inner`` to a basis of ``span(outer)``.

    Each returned vector is reduced modulo ``inner``, so it is zero on every
    pivot column of ``inner``; the returned set is in RREF among itself.
    """
    _same_shape(inner, outer)
    if not is_subspace(inner, outer):
        raise ValueError("inner space is not contained in outer space")
    if outer.rank == inner.rank:
        return []
    residuals = [reduce(inner, row) for row in outer.rows]
    ext = rref(residuals, inner.q, inner.ncols)
    return [row.copy() for row in ext.rows]


def project(v, along: RrefBasis, onto: Sequence) -> np.ndarray:
    """Component of ``v`` in span(onto) for the split span(along) ⊕ span(onto).

    ``v`` must lie in that direct sum.
    """
    q = along.q
    onto = as_matrix(onto, q, along.ncols)
    if onto.shape[0] == 0:
        if not contains(along, v):
            raise ValueError("vector is not in the given direct sum")
        return np.zeros(along.ncols, dtype=np.int64)
    basis = np.vstack([along.rows, onto])
    k = basis.shape[0]
    # solve x @ basis = v via the null space of [basis; v]
    null = left_nullspace(np.vstack([basis, np.asarray(v, dtype=np.int64)[None, :]]), q)
    sol = [row for row in null if row[k] % q]
    if not sol:
        raise ValueError("vector is not in the given direct sum")
    x = sol[0]
    x = (x * inv(int(q - x[k]), q)) % q  # scale so the v-coefficient is -1
    return (x[along.rank : k] @ onto) % q


def find_innovative(sender: RrefBasis, receivers: Sequence[RrefBasis]):
    """A vector of span(sender) outside every strict-subspace receiver span.

    Greedy construction from the standard existence argument: fix one
    receiver at a time, adding a multiple of a sender row the receiver lacks.
    Each earlier receiver rules out at most one multiplier, so ``q > n``
    always leaves a choice. Returns ``None`` when the sender span is empty.
    """
    q = sender.q
    n = len(receivers)
    if q <= n:
        raise ValueError(f"field size {q} must exceed the number of receivers {n}")
    if sender.rank == 0:
        return None
    targets = []
    for rb in receivers:
        _same_shape(sender, rb)
        if rb.rank < sender.rank:
            targets.append(rb)
    v = sender.rows[0].copy()
    done = []
    for rb in targets:
        if not contains(rb, v):
            done.append(rb)
            continue
        u = next(row for row in sender.rows if not contains(rb, row))
        for alpha in range(1, q):
            cand = (v + alpha * u) % q
            if not contains(rb, cand) and not any(contains(d, cand) for d in done):
                v = cand
                break
        else:  # pragma: no cover - excluded by q > n
            raise AssertionError("no valid multiplier; field too small")
        done.append(rb)
    return v


def enumerate_span(basis: RrefBasis) -> Iterable[np.ndarray]:
    """Every vector of the span (q**rank of them); for exhaustive checks."""
    q = basis.q
    for coeffs in product(range(q), repeat=basis.rank):
        if basis.rank == 0:
            yield np.zeros(basis.ncols, dtype=np.int64)
        else:
            yield (np.array(coeffs, dtype=np.int64) @ basis.rows) % q


@lru_cache(maxsize=None)
def unit(k: int, ncols: int) -> np.ndarray:
    e = np.zeros(ncols, dtype=np.int64)
    e[k] = 1
    e.setflags(write=False)
    return e
