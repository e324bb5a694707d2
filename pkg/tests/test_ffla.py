import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbnc import ffla
import exhaustive
from conftest import all_vectors, matrices, span_set


def is_rref(basis):
    m = basis.rows
    last = -1
    for i, p in enumerate(basis.pivot_cols):
        row = m[i]
        nz = np.flatnonzero(row)
        if nz.size == 0 or nz[0] != p or row[p] != 1:
            return False
        if p <= last:
            return False
        col = m[:, p].copy()
        col[i] = 0
        if col.any():
            return False
        last = p
    return m.shape[0] == len(basis.pivot_cols)


# -- field arithmetic --------------------------------------------------------
def test_gf3_add_wraps():
    assert ffla.add(2, 2, 3) == 1


def test_gf5_inverse_of_two():
    assert ffla.inv(2, 5) == 3


def test_gf3_mul():
    assert ffla.mul(2, 2, 3) == 1


def test_sub_and_neg_stay_in_range():
    assert ffla.sub(0, 1, 7) == 6
    assert ffla.neg(3, 7) == 4


def test_inverse_of_zero_rejected():
    with pytest.raises(ffla.FieldError):
        ffla.inv(0, 5)


def test_field_element_mismatched_moduli():
    with pytest.raises(ValueError):
        ffla.FieldElement(1, 3) + ffla.FieldElement(1, 5)


def test_field_element_arithmetic():
    a = ffla.FieldElement(2, 5)
    assert int(a * a) == 4
    assert int(a.inverse()) == 3
    assert a / a == ffla.FieldElement(1, 5)
    assert int(-a) == 3


def test_non_prime_modulus_rejected():
    with pytest.raises(ValueError):
        ffla.rref([[1, 0]], 4)


@pytest.mark.parametrize("q", [2, 3, 5, 7, 257])
def test_field_laws_exhaustive(q):
    vals = range(q) if q < 20 else range(0, q, 17)
    for a in vals:
        if a:
            assert ffla.mul(a, ffla.inv(a, q), q) == 1
        assert ffla.add(a, ffla.neg(a, q), q) == 0


def test_next_prime():
    assert [ffla.next_prime(n) for n in (1, 2, 3, 4, 8)] == [2, 2, 3, 5, 11]


# -- rref --------------------------------------------------------------------
def test_rref_full_rank_gf2():
    b = ffla.rref([[0, 1], [1, 1]], 2)
    assert b.rows.tolist() == [[1, 0], [0, 1]]
    assert b.pivot_cols == (0, 1)


def test_rref_gf3_hand_elimination():
    b = ffla.rref([[1, 1, 0], [0, 1, 1]], 3)
    assert b.rows.tolist() == [[1, 0, 2], [0, 1, 1]]
    assert b.pivot_cols == (0, 1)


def test_rref_zero_row_is_empty():
    b = ffla.rref([[0, 0, 0]], 5)
    assert b.rank == 0 and b.ncols == 3


def test_rref_empty_input():
    assert ffla.rref([], 3, ncols=4).rank == 0


@given(matrices())
def test_rref_satisfies_invariants(qm):
    q, m = qm
    b = ffla.rref(m, q, ncols=m.shape[1])
    assert is_rref(b)
    assert len(b.pivot_cols) == b.rows.shape[0] == b.rank


@settings(max_examples=60)
@given(matrices(max_rows=3, max_cols=3))
def test_rank_is_log_of_span_size(qm):
    q, m = qm
    size = len(span_set(m, q, m.shape[1]))
    assert q ** ffla.rank(m, q) == size if m.shape[0] else size == 1


@given(matrices())
def test_rref_idempotent(qm):
    q, m = qm
    b = ffla.rref(m, q, ncols=m.shape[1])
    assert ffla.rref(b.rows, q, ncols=m.shape[1]) == b


@settings(max_examples=60)
@given(matrices(max_rows=3, max_cols=3))
def test_rref_preserves_row_space(qm):
    q, m = qm
    n = m.shape[1]
    b = ffla.rref(m, q, ncols=n)
    assert span_set(b.rows, q, n) == span_set(m, q, n)


# -- membership ----------------------------------------------------------------
def test_contains_full_space():
    b = ffla.rref([[1, 0], [0, 1]], 3)
    assert ffla.contains(b, [2, 1])


def test_contains_empty_basis():
    assert not ffla.contains(ffla.empty_basis(2, 3), [1, 0])


def test_contains_gf2_line():
    assert not ffla.contains(ffla.rref([[1, 1]], 2), [1, 0])


def test_contains_length_mismatch():
    with pytest.raises(ValueError):
        ffla.contains(ffla.rref([[1, 1]], 2), [1, 0, 0])


@settings(max_examples=60)
@given(matrices(max_rows=3, max_cols=3))
def test_contains_matches_enumeration(qm):
    q, m = qm
    n = m.shape[1]
    b = ffla.rref(m, q, ncols=n)
    inside = span_set(m, q, n)
    for v in all_vectors(q, n):
        assert ffla.contains(b, v) == (v in inside)


# -- intersection ----------------------------------------------------------
def test_intersect_idempotent():
    a = ffla.rref([[1, 0]], 3)
    assert ffla.intersect(a, a) == a


def test_intersect_independent_lines():
    assert ffla.intersect(ffla.rref([[1, 0]], 3), ffla.rref([[0, 1]], 3)).rank == 0


def test_intersect_gf3_planes():
    a = ffla.rref([[1, 0, 0], [0, 1, 0]], 3)
    b = ffla.rref([[1, 1, 0], [0, 0, 1]], 3)
    assert ffla.intersect(a, b) == ffla.rref([[1, 1, 0]], 3)


@settings(max_examples=60)
@given(st.data())
def test_intersect_matches_enumeration(data):
    q = data.draw(st.sampled_from([2, 3]))
    n = data.draw(st.integers(1, 3))
    _, ma = data.draw(matrices(q=q, max_rows=3, max_cols=n, min_cols=n))
    _, mb = data.draw(matrices(q=q, max_rows=3, max_cols=n, min_cols=n))
    a, b = ffla.rref(ma, q, n), ffla.rref(mb, q, n)
    got = ffla.intersect(a, b)
    assert span_set(got.rows, q, n) == span_set(ma, q, n) & span_set(mb, q, n)
    assert got.rank == a.rank + b.rank - ffla.span_sum(a, b).rank


# -- basis completion ------------------------------------------------------
def test_complete_equal_spaces():
    a = ffla.rref([[1, 2, 0]], 3)
    assert ffla.complete_basis(a, a) == []


def test_complete_from_empty():
    outer = ffla.rref([[1, 0], [0, 1]], 5)
    ext = ffla.complete_basis(ffla.empty_basis(2, 5), outer)
    assert len(ext) == 2
    assert ffla.rref(ext, 5) == outer


def test_complete_line_to_gf3_cube():
    inner = ffla.rref([[1, 1, 0]], 3)
    outer = ffla.rref(np.eye(3, dtype=np.int64), 3)
    ext = ffla.complete_basis(inner, outer)
    assert len(ext) == 2
    assert ffla.rank(np.vstack([inner.rows, ext]), 3) == 3
    for v in ext:
        assert not ffla.contains(inner, v)


def test_complete_requires_containment():
    with pytest.raises(ValueError):
        ffla.complete_basis(ffla.rref([[1, 0]], 3), ffla.rref([[0, 1]], 3))


@given(st.data())
def test_complete_basis_spans_outer(data):
    q = data.draw(st.sampled_from([2, 3, 5]))
    n = data.draw(st.integers(1, 4))
    _, mo = data.draw(matrices(q=q, max_rows=4, max_cols=n, min_cols=n))
    outer = ffla.rref(mo, q, n)
    # inner = span of a random subset of combinations of outer's rows
    k = data.draw(st.integers(0, outer.rank))
    coeffs = np.array(
        data.draw(st.lists(st.lists(st.integers(0, q - 1), min_size=outer.rank, max_size=outer.rank),
                           min_size=k, max_size=k)),
        dtype=np.int64,
    ).reshape(k, outer.rank)
    inner = ffla.rref((coeffs @ outer.rows) % q if k and outer.rank else np.zeros((0, n)), q, n)
    ext = ffla.complete_basis(inner, outer)
    assert len(ext) == outer.rank - inner.rank
    union = ffla.rref(np.vstack([inner.rows] + [np.atleast_2d(v) for v in ext]), q, n)
    assert union == outer
    for v in ext:
        assert not v[list(inner.pivot_cols)].any()


# -- innovative vectors ------------------------------------------------------
def test_find_innovative_two_axes():
    sender = ffla.rref(np.eye(2, dtype=np.int64), 3)
    rx = [ffla.rref([[1, 0]], 3), ffla.rref([[0, 1]], 3)]
    v = ffla.find_innovative(sender, rx)
    # any valid vector is accepted; check against exhaustive membership
    assert ffla.contains(sender, v)
    assert all(not ffla.contains(r, v) for r in rx)


def test_find_innovative_equal_spaces():
    sender = ffla.rref([[1, 2, 0], [0, 0, 1]], 3)
    v = ffla.find_innovative(sender, [sender])
    assert v.any() and ffla.contains(sender, v)


def test_find_innovative_empty_sender():
    assert ffla.find_innovative(ffla.empty_basis(3, 5), [ffla.empty_basis(3, 5)]) is None


def test_find_innovative_small_field():
    sender = ffla.rref(np.eye(2, dtype=np.int64), 2)
    with pytest.raises(ValueError):
        ffla.find_innovative(sender, [ffla.empty_basis(2, 2)] * 2)


@given(st.data())
def test_find_innovative_property(data):
    q = data.draw(st.sampled_from([3, 5, 7]))
    n = data.draw(st.integers(1, 4))
    nrx = data.draw(st.integers(1, q - 1))
    sender = ffla.rref(np.eye(n, dtype=np.int64), q)
    rxs = []
    for _ in range(nrx):
        _, m = data.draw(matrices(q=q, max_rows=n, max_cols=n, min_cols=n))
        rxs.append(ffla.rref(m, q, n))
    v = ffla.find_innovative(sender, rxs)
    assert ffla.contains(sender, v)
    for r in rxs:
        if r.rank < n:
            assert not ffla.contains(r, v)


# -- independence ------------------------------------------------------------
def test_independent_axes():
    assert ffla.is_independent(ffla.rref([[1, 0]], 3), ffla.rref([[0, 1]], 3))


def test_same_line_not_independent():
    a = ffla.rref([[1, 0]], 3)
    assert not ffla.is_independent(a, a)


def test_line_inside_plane_not_independent():
    assert not ffla.is_independent(ffla.rref([[1, 1, 0]], 3), ffla.rref([[1, 0, 0], [0, 1, 0]], 3))


# -- direct-sum identities, exhaustive over small spaces ----------------------
def _subspaces(q, n):
    """Every subspace of GF(q)^n, once each, as RREF bases."""
    seen = set()
    vecs = list(itertools.product(range(q), repeat=n))
    for k in range(n + 1):
        for rows in itertools.combinations(vecs, k):
            b = ffla.rref(np.array(rows, dtype=np.int64).reshape(k, n), q, n)
            if b not in seen:
                seen.add(b)
                yield b


@pytest.mark.parametrize("q,n", [(2, 3), (3, 2)])
def test_intersection_dimension_bound_exhaustive(q, n):
    subs = list(_subspaces(q, n))
    for k in (1, 2, 3):
        for group in itertools.product(subs, repeat=k):
            meet = ffla.intersect_all(list(group))
            assert meet.rank >= sum(g.rank for g in group) - (k - 1) * n


def _sum_all(bases, q, n):
    rows = [b.rows for b in bases if b.rank]
    return ffla.rref(np.vstack(rows), q, n) if rows else ffla.empty_basis(n, q)


@pytest.mark.parametrize("q,n", [(2, 3), (3, 2)])
def test_common_part_distributes_over_intersection(q, n):
    subs = list(_subspaces(q, n))
    checked = 0
    for delta in subs:
        for u1, u2 in itertools.product(subs, repeat=2):
            if not ffla.is_independent(delta, _sum_all([u1, u2], q, n)):
                continue
            lhs = ffla.span_sum(delta, ffla.intersect(u1, u2))
            rhs = ffla.intersect(ffla.span_sum(delta, u1), ffla.span_sum(delta, u2))
            assert lhs == rhs
            checked += 1
    assert checked > 0


@pytest.mark.parametrize("q,n", [(2, 3), (3, 2)])
def test_direct_sum_associativity(q, n):
    subs = list(_subspaces(q, n))
    checked = 0
    for a, b, c in itertools.product(subs, repeat=3):
        if not ffla.is_independent(b, c):
            continue
        bc = ffla.span_sum(b, c)
        if not ffla.is_independent(a, bc):
            continue
        assert ffla.is_independent(a, b)
        ab = ffla.span_sum(a, b)
        assert ffla.is_independent(ab, c)
        assert ffla.span_sum(a, bc) == ffla.span_sum(ab, c)
        assert ffla.span_sum(ab, c).rank == a.rank + b.rank + c.rank
        checked += 1
    assert checked > 0


def test_project_splits_direct_sum():
    along = ffla.rref([[1, 0, 0]], 3)
    onto = [[0, 1, 1]]
    v = np.array([2, 2, 2])
    assert ffla.project(v, along, onto).tolist() == [0, 2, 2]


def test_intersect_all_matches_set_oracle_on_all_triples():
    sp = exhaustive.Space(3, 2)
    bases = [sp.basis(i) for i in range(sp.count)]
    for a, b, c in itertools.product(range(sp.count), repeat=3):
        meet = ffla.intersect_all([bases[a], bases[b], bases[c]])
        assert sp.members(meet) == sp.meet[sp.meet[a][b]][c]
