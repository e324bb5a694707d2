import sys
import itertools

import numpy as np
import pytest
from hypothesis import strategies as st

from fbnc.kernel import BACKENDS


@pytest.fixture(scope="module", params=sorted(BACKENDS))
def backend(request):
    return request.param


def span_set(rows, q, ncols):
    """Every vector in the span of ``rows``, by brute-force enumeration.

    Independent of the elimination code: combines the raw rows directly.
    """
    rows = [np.asarray(r, dtype=np.int64) % q for r in rows]
    out = set()
    for coeffs in itertools.product(range(q), repeat=len(rows)):
        v = np.zeros(ncols, dtype=np.int64)
        for c, r in zip(coeffs, rows):
            v = (v + c * r) % q
        out.add(tuple(int(x) for x in v))
    return out


def all_vectors(q, ncols):
    return {tuple(v) for v in itertools.product(range(q), repeat=ncols)}


@st.composite
def matrices(draw, q=None, max_rows=4, max_cols=4, min_cols=1):
    """(q, rows) with small dimensions over a small prime field."""
    q = draw(st.sampled_from([2, 3, 5])) if q is None else q
    ncols = draw(st.integers(min_cols, max_cols))
    nrows = draw(st.integers(0, max_rows))
    rows = draw(
        st.lists(
            st.lists(st.integers(0, q - 1), min_size=ncols, max_size=ncols),
            min_size=nrows,
            max_size=nrows,
        )
    )
    return q, np.array(rows, dtype=np.int64).reshape(nrows, ncols)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
