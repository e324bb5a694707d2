import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbnc import ffla, kernel
from fbnc.kernel import BACKENDS, make_rref


def reference(rows, q, n):
    return ffla.rref(np.array(rows, dtype=np.int64).reshape(len(rows), n), q, ncols=n)


@st.composite
def op_sequences(draw):
    q = draw(st.sampled_from([2, 3, 5, 257]))
    ops = draw(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 2**31)), min_size=1, max_size=40))
    return q, ops


def test_backend_selected_at_import():
    assert kernel.BACKEND in BACKENDS
    assert "python" in BACKENDS


@settings(max_examples=80, deadline=None)
@given(op_sequences())
def test_matches_gauss_jordan_oracle(backend, seq):
    q, ops = seq
    k = make_rref(q, backend)
    rows, n = [], 0
    for op, salt in ops:
        rng = np.random.default_rng(salt)
        if op == 0 or n == 0:
            a = int(rng.integers(1, 3))
            k.add_columns(a)
            rows = [r + [0] * a for r in rows]
            n += a
        elif op in (1, 2):
            m = int(rng.integers(1, min(n, 4) + 1))
            cols = rng.choice(n, m, replace=False)
            coefs = rng.integers(0, q, m)
            before = reference(rows, q, n)
            v = [0] * n
            for c, a in zip(cols, coefs):
                v[c] = (v[c] + int(a)) % q
            out = k.incorporate(cols.tolist(), coefs.tolist())
            assert (out is None) == ffla.contains(before, v)
            rows.append(v)
        else:
            seen = [c for c in range(n) if k.is_seen(c)]
            if not seen:
                continue
            drop = sorted(rng.choice(seen, int(rng.integers(1, len(seen) + 1)), replace=False).tolist())
            ref = reference(rows, q, n)
            keep = [c for c in range(n) if c not in drop]
            rows = [ref.rows[i][keep].tolist() for i, p in enumerate(ref.pivot_cols) if p not in drop]
            n = len(keep)
            k.drop_columns(drop)
        ref = reference(rows, q, n)
        assert np.array_equal(k.dense(), ref.rows)
        assert k.pivots().tolist() == list(ref.pivot_cols)


def test_decoded_reported_in_order(backend):
    k = make_rref(3, backend)
    k.add_columns(3)
    assert k.incorporate([0, 1], [1, 1]) == []
    assert k.incorporate([1, 2], [1, 2]) == []
    assert k.incorporate([2], [1]) == [0, 1, 2]
    assert k.is_decoded(0) and k.residual_count() == 0


def test_offset_skips_trimmed_columns(backend):
    k = make_rref(5, backend)
    k.add_columns(2)
    # global columns 10, 11 map to local 0, 1; column 9 lies below the window
    assert k.incorporate([9, 10, 11], [3, 1, 1], offset=10) == []
    assert k.dense().tolist() == [[1, 1]]
    assert k.contains([9, 10, 11], [1, 2, 2], offset=10)


def test_length_mismatch_rejected(backend):
    k = make_rref(3, backend)
    k.add_columns(2)
    with pytest.raises(ValueError):
        k.incorporate([0, 1], [1])


def test_column_out_of_range(backend):
    k = make_rref(3, backend)
    k.add_columns(2)
    with pytest.raises(IndexError):
        k.incorporate([5], [1])


def test_copy_is_independent(backend):
    k = make_rref(7, backend)
    k.add_columns(3)
    k.incorporate([0, 2], [1, 4])
    c = k.copy()
    c.incorporate([1], [1])
    assert k.rank == 1 and c.rank == 2


def test_drop_prefix_keeps_tail(backend):
    k = make_rref(2, backend)
    k.add_columns(4)
    k.incorporate([0], [1])
    k.incorporate([1], [1])
    k.incorporate([2, 3], [1, 1])
    k.drop_prefix(2)
    assert k.ncols == 2
    assert k.dense().tolist() == [[1, 1]]


def test_last_pivot_tracks_new_seen_column(backend):
    k = make_rref(3, backend)
    k.add_columns(3)
    k.incorporate([1, 2], [1, 1])
    assert k.last_pivot == 1
    k.incorporate([1, 2], [1, 2])
    assert k.last_pivot == 2


def test_masks_and_entries(backend):
    k = make_rref(3, backend)
    k.add_columns(3)
    k.incorporate([0, 1], [1, 2])
    k.incorporate([2], [1])
    assert k.decoded_mask(0, 3).tolist() == [0, 0, 1]
    assert k.heard_mask(0, 3).tolist() == [1, 1, 1]
    assert k.entry(0, 1) == 2
    assert k.first_free(0) == 1
    assert k.first_undecoded(0) == 0


def test_large_modulus_uses_exact_reduction(backend):
    q = 2_147_483_647
    k = make_rref(q, backend)
    k.add_columns(3)
    k.incorporate([0, 1, 2], [q - 1, q - 2, 5])
    k.incorporate([1, 2], [q - 3, 7])
    ref = ffla.rref([[q - 1, q - 2, 5], [0, q - 3, 7]], q)
    assert np.array_equal(k.dense(), ref.rows)
