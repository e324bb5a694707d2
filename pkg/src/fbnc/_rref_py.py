"""Pure-Python (numpy) incremental RREF over GF(q).

This is the fallback for :mod:`fbnc._rref_core`; both expose the same
``IncrementalRref`` class and must produce bit-identical state.

Storage model
-------------
The row space is kept in reduced row echelon form, split three ways:

* decoded columns: the unit vector ``e_c`` is in the span. In RREF such a
  column's pivot row is exactly ``e_c``, so it is stored as a flag only.
* pivot columns with a non-trivial pivot row ("residual" rows). Because an
  RREF row is zero on every other pivot column and on every decoded column,
  the row is fully described by its entries on the *free* columns.
* free columns: neither decoded nor a pivot column.

``F[r, j]`` holds the entry of residual row ``r`` at free column
``fcol[j]``. Rows and free positions are unordered (swap-remove).
"""

import numpy as np

DECODED = -2
FREE = -1


def _inverse_table(q):
    inv = np.zeros(q, dtype=np.int64)
    for a in range(1, q):
        inv[a] = pow(a, q - 2, q)
    return inv


class IncrementalRref:
    """Row space over GF(q) with O(rows * free) insertion."""

    def __init__(self, q):
        q = int(q)
        if q < 2:
            raise ValueError("field modulus must be >= 2")
        self.q = q
        self._inv = _inverse_table(q) if q <= 65536 else None
        self.ncols = 0
        self.ndecoded = 0
        self.last_pivot = -1
        self.kind = np.zeros(16, dtype=np.int64)
        self.fpos = np.zeros(16, dtype=np.int64)
        self.fcol = np.zeros(16, dtype=np.int64)
        self.nfree = 0
        self.rpiv = np.zeros(16, dtype=np.int64)
        self.nrows = 0
        self.F = np.zeros((16, 16), dtype=np.int64)

    # -- helpers ---------------------------------------------------------
    def _inverse(self, a):
        if self._inv is not None:
            return int(self._inv[a])
        return pow(int(a), self.q - 2, self.q)

    def _grow_cols(self, need):
        cap = len(self.kind)
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        for name in ("kind", "fpos"):
            old = getattr(self, name)
            new = np.zeros(cap, dtype=np.int64)
            new[: len(old)] = old
            setattr(self, name, new)

    def _grow_free(self, need):
        cap = len(self.fcol)
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        fcol = np.zeros(cap, dtype=np.int64)
        fcol[: self.nfree] = self.fcol[: self.nfree]
        self.fcol = fcol
        F = np.zeros((self.F.shape[0], cap), dtype=np.int64)
        F[: self.nrows, : self.nfree] = self.F[: self.nrows, : self.nfree]
        self.F = F

    def _grow_rows(self, need):
        cap = self.F.shape[0]
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        F = np.zeros((cap, self.F.shape[1]), dtype=np.int64)
        F[: self.nrows] = self.F[: self.nrows]
        self.F = F
        rpiv = np.zeros(cap, dtype=np.int64)
        rpiv[: self.nrows] = self.rpiv[: self.nrows]
        self.rpiv = rpiv

    def _remove_row(self, r):
        last = self.nrows - 1
        if r != last:
            self.F[r, : self.nfree] = self.F[last, : self.nfree]
            self.rpiv[r] = self.rpiv[last]
            self.kind[self.rpiv[r]] = r
        self.F[last, : self.nfree] = 0
        self.nrows = last

    def _remove_free(self, j):
        last = self.nfree - 1
        if j != last:
            self.F[: self.nrows, j] = self.F[: self.nrows, last]
            self.fcol[j] = self.fcol[last]
            self.fpos[self.fcol[j]] = j
        self.F[: self.nrows, last] = 0
        self.nfree = last

    # -- properties ------------------------------------------------------
    @property
    def rank(self):
        return self.ndecoded + self.nrows

    # -- mutation --------------------------------------------------------
    def add_columns(self, k):
        """Append ``k`` fresh (free, all-zero) columns on the right."""
        k = int(k)
        if k < 0:
            raise ValueError("cannot add a negative number of columns")
        if k == 0:
            return
        n0 = self.ncols
        self._grow_cols(n0 + k)
        self._grow_free(self.nfree + k)
        for c in range(n0, n0 + k):
            self.kind[c] = FREE
            self.fpos[c] = self.nfree
            self.fcol[self.nfree] = c
            self.nfree += 1
        self.ncols = n0 + k

    def _residual(self, cols, coefs, offset=0):
        """Free-column residual of sum(coefs[i] * e_{cols[i]}) modulo the span."""
        if len(cols) != len(coefs):
            raise ValueError("cols and coefs differ in length")
        q = self.q
        nf = self.nfree
        vf = np.zeros(nf, dtype=np.int64)
        for c, a in zip(cols, coefs):
            c = int(c) - offset
            if c < 0:
                continue
            if c >= self.ncols:
                raise IndexError(f"column {c} out of range [0, {self.ncols})")
            a = int(a) % q
            if a == 0:
                continue
            k = self.kind[c]
            if k == DECODED:
                continue
            if k == FREE:
                j = self.fpos[c]
                vf[j] = (vf[j] + a) % q
            else:
                vf = (vf - a * self.F[k, :nf]) % q
        return vf

    def _lead(self, vf):
        nz = np.flatnonzero(vf)
        if nz.size == 0:
            return -1
        return int(nz[np.argmin(self.fcol[nz])])

    def contains(self, cols, coefs, offset=0):
        """True iff the vector lies in the row space (no mutation).

        Columns are shifted by ``-offset``; entries landing below 0 are
        ignored (they address a decoded prefix the caller has trimmed).
        """
        return self._lead(self._residual(cols, coefs, offset)) < 0

    def incorporate(self, cols, coefs, offset=0):
        """Add a vector to the span.

        Returns ``None`` if the vector was already in the span, otherwise the
        (possibly empty) sorted list of columns that became decoded. The new
        pivot column is left in ``last_pivot``. ``offset`` works as in
        :meth:`contains`.
        """
        q = self.q
        vf = self._residual(cols, coefs, offset)
        j = self._lead(vf)
        if j < 0:
            return None
        self.last_pivot = int(self.fcol[j])
        nf = self.nfree
        vf = (vf * self._inverse(vf[j])) % q
        nr = self.nrows
        touched = []
        if nr:
            col = self.F[:nr, j].copy()
            hit = np.flatnonzero(col)
            if hit.size:
                self.F[hit, :nf] = (self.F[hit, :nf] - np.outer(col[hit], vf)) % q
                touched = hit.tolist()
        pc = int(self.fcol[j])
        # new row goes in slot nr; free position j is then retired
        self._grow_rows(nr + 1)
        self.F[nr, :nf] = vf
        self.rpiv[nr] = pc
        self.kind[pc] = nr
        self.nrows = nr + 1
        self._remove_free(j)
        touched.append(nr)
        decoded = []
        nf = self.nfree
        for r in sorted(touched, reverse=True):
            if not self.F[r, :nf].any():
                decoded.append(int(self.rpiv[r]))
        for c in decoded:
            r = self.kind[c]
            self._remove_row(r)
            self.kind[c] = DECODED
            self.ndecoded += 1
        decoded.sort()
        return decoded

    def drop_columns(self, cols):
        """Delete seen columns (decoded or pivot) together with their pivot rows."""
        cols = sorted(set(int(c) for c in cols))
        if not cols:
            return
        for c in cols:
            if c < 0 or c >= self.ncols:
                raise IndexError(f"column {c} out of range [0, {self.ncols})")
            if self.kind[c] == FREE:
                raise ValueError(f"column {c} is unseen and cannot be dropped")
        for c in cols:
            k = self.kind[c]
            if k == DECODED:
                self.ndecoded -= 1
            else:
                self._remove_row(k)
        n = self.ncols
        keep = np.ones(n, dtype=bool)
        keep[cols] = False
        newidx = np.cumsum(keep) - 1
        kind = self.kind[:n][keep].copy()
        fpos = self.fpos[:n][keep].copy()
        m = int(keep.sum())
        self.kind[:m] = kind
        self.fpos[:m] = fpos
        self.kind[m:n] = 0
        self.fpos[m:n] = 0
        self.ncols = m
        if self.nrows:
            self.rpiv[: self.nrows] = newidx[self.rpiv[: self.nrows]]
        if self.nfree:
            self.fcol[: self.nfree] = newidx[self.fcol[: self.nfree]]

    def drop_prefix(self, k):
        """Delete the first ``k`` columns; all of them must be decoded."""
        k = int(k)
        if k <= 0:
            return
        if k > self.ncols:
            raise IndexError("prefix longer than column count")
        if not (self.kind[:k] == DECODED).all():
            raise ValueError("prefix contains undecoded columns")
        n = self.ncols
        self.kind[: n - k] = self.kind[k:n].copy()
        self.fpos[: n - k] = self.fpos[k:n].copy()
        self.kind[n - k : n] = 0
        self.fpos[n - k : n] = 0
        self.ncols = n - k
        self.ndecoded -= k
        self.rpiv[: self.nrows] -= k
        self.fcol[: self.nfree] -= k

    def copy(self):
        other = IncrementalRref.__new__(IncrementalRref)
        other.q = self.q
        other._inv = self._inv
        other.ncols = self.ncols
        other.ndecoded = self.ndecoded
        other.last_pivot = self.last_pivot
        other.nfree = self.nfree
        other.nrows = self.nrows
        for name in ("kind", "fpos", "fcol", "rpiv", "F"):
            setattr(other, name, getattr(self, name).copy())
        return other

    # -- queries ---------------------------------------------------------
    def column_kind(self, c):
        """-2 decoded, -1 free (unseen), otherwise the residual row index."""
        return int(self.kind[c])

    def is_decoded(self, c):
        return self.kind[c] == DECODED

    def is_seen(self, c):
        return self.kind[c] != FREE

    def first_free(self, start=0):
        """Smallest free column >= start, or -1."""
        if self.nfree == 0:
            return -1
        f = self.fcol[: self.nfree]
        f = f[f >= start]
        return int(f.min()) if f.size else -1

    def first_undecoded(self, start=0):
        """Smallest column >= start that is not decoded (ncols if none)."""
        k = self.kind[start : self.ncols]
        nz = np.flatnonzero(k != DECODED)
        return int(start + nz[0]) if nz.size else self.ncols

    def decoded_mask(self, start=0, stop=None):
        stop = self.ncols if stop is None else stop
        return (self.kind[start:stop] == DECODED).astype(np.uint8)

    def seen_mask(self, start=0, stop=None):
        stop = self.ncols if stop is None else stop
        return (self.kind[start:stop] != FREE).astype(np.uint8)

    def heard_mask(self, start=0, stop=None):
        """Columns that are decoded or touched by some residual row."""
        stop = self.ncols if stop is None else stop
        out = np.zeros(self.ncols, dtype=np.uint8)
        out[self.kind[: self.ncols] != FREE] = 1
        if self.nrows and self.nfree:
            used = self.F[: self.nrows, : self.nfree].any(axis=0)
            out[self.fcol[: self.nfree][used]] = 1
        return out[start:stop]

    def entry(self, pc, c):
        """Entry at column ``c`` of the RREF row whose pivot is ``pc``."""
        k = self.kind[pc]
        if k == FREE:
            raise ValueError(f"column {pc} is not a pivot column")
        if c == pc:
            return 1
        if k == DECODED:
            return 0
        if self.kind[c] != FREE:
            return 0
        return int(self.F[k, self.fpos[c]])

    def row(self, pc):
        """Dense RREF row (length ncols) whose pivot is ``pc``."""
        k = self.kind[pc]
        if k == FREE:
            raise ValueError(f"column {pc} is not a pivot column")
        out = np.zeros(self.ncols, dtype=np.int64)
        out[pc] = 1
        if k != DECODED and self.nfree:
            out[self.fcol[: self.nfree]] = self.F[k, : self.nfree]
        return out

    def pivots(self):
        """Sorted pivot columns (decoded and residual)."""
        return np.flatnonzero(self.kind[: self.ncols] != FREE)

    def dense(self):
        """Full RREF matrix (rank x ncols), rows sorted by pivot."""
        piv = self.pivots()
        out = np.zeros((len(piv), self.ncols), dtype=np.int64)
        for i, c in enumerate(piv):
            out[i] = self.row(c)
        return out

    def residual_count(self):
        return self.nrows
