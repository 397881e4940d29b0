import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparsepce.multiindex import cardinality, total_degree_set


def test_benchmark_basis_sizes():
    assert cardinality(2, 20) == 231
    assert cardinality(20, 2) == 231
    assert total_degree_set(2, 20).K == 231


def test_one_dimensional_set():
    s = total_degree_set(1, 5)
    assert s.indices == [(0,), (1,), (2,), (3,), (4,), (5,)]
    assert s.K == 6


def test_graded_order_two_dimensions():
    assert total_degree_set(2, 2).indices == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


@pytest.mark.parametrize(("d", "k", "K"), [(3, 2, 10), (10, 3, 286), (6, 4, 210), (7, 0, 1)])
def test_cardinality_values(d, k, K):
    assert cardinality(d, k) == K == math.comb(d + k, d)


def test_cardinality_grid_matches_binomial():
    for d in range(1, 26):
        for k in range(26):
            assert cardinality(d, k) == math.comb(d + k, k)


@pytest.mark.parametrize(("d", "k"), [(0, 2), (-1, 1), (2, -1), (1.5, 2), (True, 2)])
def test_rejects_bad_arguments(d, k):
    with pytest.raises(ValueError):
        total_degree_set(d, k)


def test_rejects_overflow():
    with pytest.raises(OverflowError):
        cardinality(200, 200)


@given(st.integers(1, 6), st.integers(0, 6))
def test_set_properties(d, k):
    s = total_degree_set(d, k)
    arr = s.array
    assert s.K == cardinality(d, k)
    assert tuple(arr[0]) == (0,) * d
    assert (arr.sum(axis=1) <= k).all() and (arr >= 0).all()
    assert len(set(s.indices)) == s.K
    deg = s.total_degrees()
    assert (np.diff(deg) >= 0).all()
    for t in range(k + 1):
        block = [tuple(r) for r in arr[deg == t]]
        assert block == sorted(block, reverse=True)
    members = set(s.indices)
    for alpha in s.indices:
        for j, a in enumerate(alpha):
            if a:
                assert alpha[:j] + (a - 1,) + alpha[j + 1 :] in members


@given(st.integers(1, 5), st.integers(0, 5))
def test_deterministic(d, k):
    assert total_degree_set(d, k).indices == total_degree_set(d, k).indices


def test_position_and_csv(tmp_path):
    s = total_degree_set(3, 2)
    for i, alpha in enumerate(s.indices):
        assert s.position(alpha) == i
    with pytest.raises(KeyError):
        s.position((3, 0, 0))
    with pytest.raises(ValueError):
        s.position((1, 0))
    path = tmp_path / "idx.csv"
    s.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["alpha_1", "alpha_2", "alpha_3"]
    assert [tuple(int(v) for v in r) for r in rows[1:]] == s.indices


def test_array_is_read_only():
    s = total_degree_set(2, 2)
    with pytest.raises(ValueError):
        s.array[0, 0] = 5
