import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypmnnr.errors import InvalidArgumentError
from hypmnnr.marks import EmptyControl, FullControl, MaxRatio, MinProduct, UniformMarks, beta_from_mean_var
from hypmnnr.mnnr import ClusterPartition, mnnr_partition, nearest_neighbor, nearest_neighbors
from hypmnnr.pointprocess import MarkedPattern, PlanarMetric, Window, sample_ppp


def euclid_mnnr(xy, metric):
    """Planar mutual nearest neighbors, written independently of the package."""
    d = metric.distance(xy[:, None, :], xy[None, :, :])
    np.fill_diagonal(d, np.inf)
    nn = d.argmin(axis=1)
    return sorted((int(i), int(nn[i])) for i in range(len(xy)) if nn[nn[i]] == i and i < nn[i])


def test_small_examples():
    p = MarkedPattern([[0, 0], [1, 0], [5, 0]], [1, 1, 1])
    assert nearest_neighbor(p, 0) == 1
    p = MarkedPattern([[0, 0], [0, 0], [0.1, 0]], [1, 4, 1])
    assert nearest_neighbor(p, 0) == 2
    two = MarkedPattern([[0, 0], [3, 3]], [1, 2])
    assert mnnr_partition(two, FullControl()).pairs == [(0, 1)]
    line = MarkedPattern([[0, 0], [1, 0], [2.5, 0]], [1, 1, 1])
    part = mnnr_partition(line, FullControl())
    assert part.pairs == [(0, 1)] and part.singles == [2]
    with pytest.raises(InvalidArgumentError):
        nearest_neighbor(line, 3)


def test_tiny_patterns():
    assert mnnr_partition(MarkedPattern(np.zeros((0, 2)), []), FullControl()).n == 0
    one = mnnr_partition(MarkedPattern([[1, 1]], [1.0]), FullControl())
    assert one.singles == [0] and one.pair_fraction == 0.0


def test_ties_go_to_smaller_index():
    p = MarkedPattern([[0, 0], [1, 0], [-1, 0]], [1, 1, 1])
    assert nearest_neighbor(p, 0) == 1
    assert nearest_neighbors(p, method="brute")[0] == 1


def test_json_round_trip():
    part = ClusterPartition([(0, 2)], [1], 3)
    assert ClusterPartition.from_json(part.to_json()) == part


@pytest.mark.parametrize("boundary", ["torus", "open"])
@pytest.mark.parametrize("marks", [UniformMarks(1, 1.001), beta_from_mean_var(0.5, 0.2), UniformMarks(0.1, 10)])
def test_tree_matches_brute(boundary, marks):
    rng = np.random.default_rng(17)
    for _ in range(5):
        p = sample_ppp(1.0, Window(25, 20, boundary), marks, rng)
        m = p.metric()
        assert np.array_equal(nearest_neighbors(p, m, "tree"), nearest_neighbors(p, m, "brute"))


def _check_invariants(p, part, D):
    ids = sorted([i for pr in part.pairs for i in pr] + part.singles)
    assert ids == list(range(len(p)))
    for i, j in part.pairs:
        assert nearest_neighbor(p, i) == j and nearest_neighbor(p, j) == i
        assert D.contains(p.z[i], p.z[j])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.2, 3.0), st.sampled_from(["torus", "open"]))
def test_partition_invariants(seed, lam, boundary):
    rng = np.random.default_rng(seed)
    p = sample_ppp(lam, Window(8, 6, boundary), beta_from_mean_var(0.4, 0.05), rng)
    for D in (FullControl(), MinProduct(0.15), EmptyControl()):
        part = mnnr_partition(p, D)
        _check_invariants(p, part, D)
        if isinstance(D, EmptyControl):
            assert part.pairs == []


def test_control_subset_inclusion():
    rng = np.random.default_rng(8)
    for _ in range(20):
        p = sample_ppp(1.0, Window(20, 20), beta_from_mean_var(0.5, 0.05), rng)
        wide = set(mnnr_partition(p, MaxRatio(3.0)).pairs)
        narrow = set(mnnr_partition(p, MaxRatio(1.5)).pairs)
        assert narrow <= wide <= set(mnnr_partition(p, FullControl()).pairs)


@pytest.mark.parametrize("boundary", ["torus", "open"])
def test_equal_marks_match_euclidean(boundary):
    rng = np.random.default_rng(21)
    for _ in range(10):
        p = sample_ppp(1.0, Window(20, 15, boundary), UniformMarks(0.5, 1.0), rng)
        p = MarkedPattern(p.xy, np.full(len(p), 0.7), p.window)
        assert mnnr_partition(p, FullControl()).pairs == euclid_mnnr(p.xy, p.metric())
