# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled incremental RREF over GF(q).

Same storage model and public surface as :mod:`fbnc._rref_py`; see that module
for the description of the decoded / residual-row / free-column split.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint32_t, uint64_t

cdef extern from *:
    """
    #include <stdint.h>
    /* Lemire's fastmod: exact a % d for 32-bit a and d */
    static inline uint64_t fbnc_fastmod_magic(uint32_t d) {
        return UINT64_C(0xFFFFFFFFFFFFFFFF) / d + 1;
    }
    static inline uint32_t fbnc_fastmod(uint32_t a, uint64_t m, uint32_t d) {
        uint64_t low = m * a;
        return (uint32_t)(((__uint128_t)low * d) >> 64);
    }
    """
    uint64_t fbnc_fastmod_magic(uint32_t d) nogil
    uint32_t fbnc_fastmod(uint32_t a, uint64_t m, uint32_t d) nogil

cnp.import_array()

cdef int64_t DECODED = -2
cdef int64_t FREE = -1


cdef inline int64_t _pow_mod(int64_t a, int64_t e, int64_t q):
    cdef int64_t r = 1
    a %= q
    while e > 0:
        if e & 1:
            r = (r * a) % q
        a = (a * a) % q
        e >>= 1
    return r


cdef class IncrementalRref:
    """Row space over GF(q) with O(rows * free) insertion."""

    cdef readonly int64_t q
    cdef readonly Py_ssize_t ncols
    cdef readonly Py_ssize_t ndecoded
    cdef readonly Py_ssize_t nfree
    cdef readonly Py_ssize_t nrows
    cdef object _kind, _fpos, _fcol, _rpiv, _F, _inv, _vf
    cdef int64_t[::1] kind
    cdef int64_t[::1] fpos
    cdef int64_t[::1] fcol
    cdef int64_t[::1] rpiv
    cdef int64_t[:, ::1] F
    cdef int64_t[::1] inv
    cdef int64_t[::1] vf
    cdef bint small
    # products a * b (a, b < q) that can be summed before an int64 overflow
    cdef int64_t lazy
    cdef uint64_t magic
    cdef readonly Py_ssize_t last_pivot
    cdef object _cbuf, _abuf

    def __cinit__(self, q):
        q = int(q)
        if q < 2:
            raise ValueError("field modulus must be >= 2")
        if q >= (1 << 31):
            raise ValueError("field modulus must be < 2**31")
        self.q = q
        self.small = q <= 65536
        self.magic = fbnc_fastmod_magic(<uint32_t>q) if q <= 65536 else 0
        self.lazy = ((1 << 62) // ((q - 1) * (q - 1))) if q > 2 else (1 << 62)
        if self.small:
            self._inv = np.zeros(q, dtype=np.int64)
            for a in range(1, q):
                self._inv[a] = pow(a, q - 2, q)
        else:
            self._inv = np.zeros(1, dtype=np.int64)
        self.inv = self._inv
        self.ncols = 0
        self.ndecoded = 0
        self.nfree = 0
        self.nrows = 0
        self.last_pivot = -1
        self._cbuf = np.zeros(16, dtype=np.int64)
        self._abuf = np.zeros(16, dtype=np.int64)
        self._set_cols(np.zeros(16, dtype=np.int64), np.zeros(16, dtype=np.int64))
        self._set_free(np.zeros(16, dtype=np.int64))
        self._set_rows(np.zeros(16, dtype=np.int64), np.zeros((16, 16), dtype=np.int64))

    cdef _set_cols(self, kind, fpos):
        self._kind = kind
        self._fpos = fpos
        self.kind = kind
        self.fpos = fpos

    cdef _set_free(self, fcol):
        self._fcol = fcol
        self.fcol = fcol
        self._vf = np.zeros(len(fcol), dtype=np.int64)
        self.vf = self._vf

    cdef _set_rows(self, rpiv, F):
        self._rpiv = rpiv
        self._F = F
        self.rpiv = rpiv
        self.F = F

    cdef inline int64_t _inverse(self, int64_t a):
        if self.small:
            return self.inv[a]
        return _pow_mod(a, self.q - 2, self.q)

    cdef _grow_cols(self, Py_ssize_t need):
        cdef Py_ssize_t cap = self.kind.shape[0]
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        kind = np.zeros(cap, dtype=np.int64)
        fpos = np.zeros(cap, dtype=np.int64)
        kind[: self.ncols] = self._kind[: self.ncols]
        fpos[: self.ncols] = self._fpos[: self.ncols]
        self._set_cols(kind, fpos)

    cdef _grow_free(self, Py_ssize_t need):
        cdef Py_ssize_t cap = self.fcol.shape[0]
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        fcol = np.zeros(cap, dtype=np.int64)
        fcol[: self.nfree] = self._fcol[: self.nfree]
        F = np.zeros((self.F.shape[0], cap), dtype=np.int64)
        F[: self.nrows, : self.nfree] = self._F[: self.nrows, : self.nfree]
        self._set_free(fcol)
        self._set_rows(self._rpiv, F)

    cdef _grow_rows(self, Py_ssize_t need):
        cdef Py_ssize_t cap = self.F.shape[0]
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        F = np.zeros((cap, self.F.shape[1]), dtype=np.int64)
        F[: self.nrows] = self._F[: self.nrows]
        rpiv = np.zeros(cap, dtype=np.int64)
        rpiv[: self.nrows] = self._rpiv[: self.nrows]
        self._set_rows(rpiv, F)

    cdef void _remove_row(self, Py_ssize_t r):
        cdef Py_ssize_t last = self.nrows - 1
        cdef Py_ssize_t j
        if r != last:
            for j in range(self.nfree):
                self.F[r, j] = self.F[last, j]
            self.rpiv[r] = self.rpiv[last]
            self.kind[self.rpiv[r]] = r
        for j in range(self.nfree):
            self.F[last, j] = 0
        self.nrows = last

    cdef void _remove_free(self, Py_ssize_t j):
        cdef Py_ssize_t last = self.nfree - 1
        cdef Py_ssize_t r
        if j != last:
            for r in range(self.nrows):
                self.F[r, j] = self.F[r, last]
            self.fcol[j] = self.fcol[last]
            self.fpos[self.fcol[j]] = j
        for r in range(self.nrows):
            self.F[r, last] = 0
        self.nfree = last

    cdef tuple _pack(self, cols, coefs, Py_ssize_t offset):
        """Shift columns by ``-offset`` and drop those that fall below 0."""
        cdef Py_ssize_t m = len(cols), i, k = 0
        cdef int64_t c
        if len(coefs) != m:
            raise ValueError("cols and coefs differ in length")
        if self._cbuf.shape[0] < m:
            self._cbuf = np.zeros(2 * m, dtype=np.int64)
            self._abuf = np.zeros(2 * m, dtype=np.int64)
        cdef int64_t[::1] cb = self._cbuf
        cdef int64_t[::1] ab = self._abuf
        cdef const int64_t[::1] cv
        cdef const int64_t[::1] av
        if (isinstance(cols, np.ndarray) and isinstance(coefs, np.ndarray)
                and cols.dtype == np.int64 and coefs.dtype == np.int64):
            cv = np.ascontiguousarray(cols)
            av = np.ascontiguousarray(coefs)
            for i in range(m):
                c = cv[i] - offset
                if c < 0:
                    continue
                cb[k] = c
                ab[k] = av[i]
                k += 1
            return cb[:k], ab[:k]
        for i in range(m):
            c = cols[i] - offset
            if c < 0:
                continue
            cb[k] = c
            ab[k] = coefs[i]
            k += 1
        return cb[:k], ab[:k]

    @property
    def rank(self):
        return self.ndecoded + self.nrows

    def add_columns(self, Py_ssize_t k):
        """Append ``k`` fresh (free, all-zero) columns on the right."""
        cdef Py_ssize_t c, n0 = self.ncols
        if k < 0:
            raise ValueError("cannot add a negative number of columns")
        if k == 0:
            return
        self._grow_cols(n0 + k)
        self._grow_free(self.nfree + k)
        for c in range(n0, n0 + k):
            self.kind[c] = FREE
            self.fpos[c] = self.nfree
            self.fcol[self.nfree] = c
            self.nfree += 1
        self.ncols = n0 + k

    cdef Py_ssize_t _residual(self, const int64_t[::1] cols, const int64_t[::1] coefs) except -2:
        """Fill self.vf[:nfree] with the free residual; return lead free position or -1."""
        cdef Py_ssize_t i, j, nf = self.nfree, lead = -1
        cdef int64_t c, a, k, q = self.q, best, pending
        cdef int64_t[::1] vf = self.vf
        cdef int64_t* vp = &vf[0]
        cdef int64_t* row
        if cols.shape[0] != coefs.shape[0]:
            raise ValueError("cols and coefs differ in length")
        for j in range(nf):
            vf[j] = 0
        pending = 0
        for i in range(cols.shape[0]):
            c = cols[i]
            if c < 0 or c >= self.ncols:
                raise IndexError(f"column {c} out of range [0, {self.ncols})")
            a = coefs[i] % q
            if a < 0:
                a += q
            if a == 0:
                continue
            k = self.kind[c]
            if k == DECODED:
                continue
            if pending >= self.lazy:
                for j in range(nf):
                    vp[j] %= q
                pending = 0
            pending += 1
            if k == FREE:
                j = self.fpos[c]
                vp[j] += a
            else:
                a = q - a
                row = &self.F[k, 0]
                for j in range(nf):
                    vp[j] += a * row[j]
        for j in range(nf):
            vp[j] %= q
        best = self.ncols
        for j in range(nf):
            if vf[j] != 0 and self.fcol[j] < best:
                best = self.fcol[j]
                lead = j
        return lead

    def contains(self, cols, coefs, Py_ssize_t offset=0):
        """True iff the vector lies in the row space (no mutation).

        Columns are shifted by ``-offset``; entries landing below 0 are
        ignored (they address a decoded prefix the caller has trimmed).
        """
        cv, av = self._pack(cols, coefs, offset)
        return self._residual(cv, av) < 0

    def incorporate(self, cols, coefs, Py_ssize_t offset=0):
        """Add a vector to the span.

        Returns ``None`` if the vector was already in the span, otherwise the
        (possibly empty) sorted list of columns that became decoded. The new
        pivot column is left in ``last_pivot``. ``offset`` works as in
        :meth:`contains`.
        """
        cv, av = self._pack(cols, coefs, offset)
        cdef Py_ssize_t lead = self._residual(cv, av)
        cdef Py_ssize_t j, r, nf, nr, pc
        cdef int64_t s, t, q = self.q
        cdef int64_t[::1] vf
        cdef int64_t* vp
        cdef int64_t* row
        cdef bint zero
        if lead < 0:
            return None
        self.last_pivot = self.fcol[lead]
        nf = self.nfree
        nr = self.nrows
        self._grow_rows(nr + 1)
        vf = self.vf
        s = self._inverse(vf[lead])
        for j in range(nf):
            vf[j] = (vf[j] * s) % q
        touched = []
        vp = &vf[0]
        for r in range(nr):
            row = &self.F[r, 0]
            t = row[lead]
            if t != 0:
                t = q - t
                if self.magic:
                    for j in range(nf):
                        row[j] = fbnc_fastmod(<uint32_t>(row[j] + t * vp[j]), self.magic, <uint32_t>q)
                else:
                    for j in range(nf):
                        row[j] = (row[j] + t * vp[j]) % q
                touched.append(r)
        pc = self.fcol[lead]
        for j in range(nf):
            self.F[nr, j] = vf[j]
        self.rpiv[nr] = pc
        self.kind[pc] = nr
        self.nrows = nr + 1
        self._remove_free(lead)
        touched.append(nr)
        nf = self.nfree
        decoded = []
        for r in reversed(touched):
            zero = True
            for j in range(nf):
                if self.F[r, j] != 0:
                    zero = False
                    break
            if zero:
                decoded.append(self.rpiv[r])
        for pc in decoded:
            self._remove_row(self.kind[pc])
            self.kind[pc] = DECODED
            self.ndecoded += 1
        decoded.sort()
        return decoded

    def drop_columns(self, cols):
        """Delete seen columns (decoded or pivot) together with their pivot rows."""
        cdef Py_ssize_t c, n, m, i
        cdef int64_t k
        cols = sorted(set(int(x) for x in cols))
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
        newidx = np.empty(n, dtype=np.int64)
        cdef int64_t[::1] nid = newidx
        cdef char[::1] drop = np.zeros(n, dtype=np.int8)
        for c in cols:
            drop[c] = 1
        m = 0
        for c in range(n):
            nid[c] = m
            if not drop[c]:
                self.kind[m] = self.kind[c]
                self.fpos[m] = self.fpos[c]
                m += 1
        for c in range(m, n):
            self.kind[c] = 0
            self.fpos[c] = 0
        self.ncols = m
        for i in range(self.nrows):
            self.rpiv[i] = nid[self.rpiv[i]]
        for i in range(self.nfree):
            self.fcol[i] = nid[self.fcol[i]]

    def drop_prefix(self, Py_ssize_t k):
        """Delete the first ``k`` columns; all of them must be decoded."""
        cdef Py_ssize_t c, n = self.ncols, i
        if k <= 0:
            return
        if k > n:
            raise IndexError("prefix longer than column count")
        for c in range(k):
            if self.kind[c] != DECODED:
                raise ValueError("prefix contains undecoded columns")
        for c in range(n - k):
            self.kind[c] = self.kind[c + k]
            self.fpos[c] = self.fpos[c + k]
        for c in range(n - k, n):
            self.kind[c] = 0
            self.fpos[c] = 0
        self.ncols = n - k
        self.ndecoded -= k
        for i in range(self.nrows):
            self.rpiv[i] -= k
        for i in range(self.nfree):
            self.fcol[i] -= k

    def copy(self):
        cdef IncrementalRref other = IncrementalRref(self.q)
        other.ncols = self.ncols
        other.ndecoded = self.ndecoded
        other.nfree = self.nfree
        other.nrows = self.nrows
        other.last_pivot = self.last_pivot
        other._set_cols(self._kind.copy(), self._fpos.copy())
        other._set_free(self._fcol.copy())
        other._set_rows(self._rpiv.copy(), self._F.copy())
        return other

    # -- queries ---------------------------------------------------------
    def column_kind(self, Py_ssize_t c):
        """-2 decoded, -1 free (unseen), otherwise the residual row index."""
        return self.kind[c]

    def is_decoded(self, Py_ssize_t c):
        return self.kind[c] == DECODED

    def is_seen(self, Py_ssize_t c):
        return self.kind[c] != FREE

    def first_free(self, Py_ssize_t start=0):
        """Smallest free column >= start, or -1."""
        cdef Py_ssize_t j
        cdef int64_t best = -1, c
        for j in range(self.nfree):
            c = self.fcol[j]
            if c >= start and (best < 0 or c < best):
                best = c
        return best

    def first_undecoded(self, Py_ssize_t start=0):
        """Smallest column >= start that is not decoded (ncols if none)."""
        cdef Py_ssize_t c
        for c in range(start, self.ncols):
            if self.kind[c] != DECODED:
                return c
        return self.ncols

    def decoded_mask(self, Py_ssize_t start=0, stop=None):
        cdef Py_ssize_t c, e = self.ncols if stop is None else stop
        out = np.zeros(max(e - start, 0), dtype=np.uint8)
        cdef unsigned char[::1] o = out
        for c in range(start, e):
            o[c - start] = self.kind[c] == DECODED
        return out

    def seen_mask(self, Py_ssize_t start=0, stop=None):
        cdef Py_ssize_t c, e = self.ncols if stop is None else stop
        out = np.zeros(max(e - start, 0), dtype=np.uint8)
        cdef unsigned char[::1] o = out
        for c in range(start, e):
            o[c - start] = self.kind[c] != FREE
        return out

    def heard_mask(self, Py_ssize_t start=0, stop=None):
        """Columns that are decoded or touched by some residual row."""
        cdef Py_ssize_t c, r, j, e = self.ncols if stop is None else stop
        out = np.zeros(max(e - start, 0), dtype=np.uint8)
        cdef unsigned char[::1] o = out
        for c in range(start, e):
            o[c - start] = self.kind[c] != FREE
        for j in range(self.nfree):
            c = self.fcol[j]
            if c < start or c >= e:
                continue
            for r in range(self.nrows):
                if self.F[r, j] != 0:
                    o[c - start] = 1
                    break
        return out

    def entry(self, Py_ssize_t pc, Py_ssize_t c):
        """Entry at column ``c`` of the RREF row whose pivot is ``pc``."""
        cdef int64_t k = self.kind[pc]
        if k == FREE:
            raise ValueError(f"column {pc} is not a pivot column")
        if c == pc:
            return 1
        if k == DECODED or self.kind[c] != FREE:
            return 0
        return self.F[k, self.fpos[c]]

    def row(self, Py_ssize_t pc):
        """Dense RREF row (length ncols) whose pivot is ``pc``."""
        cdef int64_t k = self.kind[pc]
        cdef Py_ssize_t j
        if k == FREE:
            raise ValueError(f"column {pc} is not a pivot column")
        out = np.zeros(self.ncols, dtype=np.int64)
        cdef int64_t[::1] o = out
        o[pc] = 1
        if k != DECODED:
            for j in range(self.nfree):
                o[self.fcol[j]] = self.F[k, j]
        return out

    def pivots(self):
        """Sorted pivot columns (decoded and residual)."""
        return np.flatnonzero(self._kind[: self.ncols] != FREE)

    def dense(self):
        """Full RREF matrix (rank x ncols), rows sorted by pivot."""
        piv = self.pivots()
        out = np.zeros((len(piv), self.ncols), dtype=np.int64)
        for i, c in enumerate(piv):
            out[i] = self.row(c)
        return out

    def residual_count(self):
        return self.nrows
