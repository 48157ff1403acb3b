"""Mutually-nearest-neighbor pairing under the half-space metric."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidArgumentError
from .hypgeom import cosh_excess
from .marks import ControlSet
from .pointprocess import MarkedPattern, PlanarMetric

_BRUTE_BLOCK = 512
_TREE_K = 8


@dataclass
class ClusterPartition:
    pairs: list[tuple[int, int]]
    singles: list[int]
    n: int

    @property
    def pair_fraction(self) -> float:
        """Fraction of atoms that belong to a pair (0 for an empty pattern)."""
        return 2.0 * len(self.pairs) / self.n if self.n else 0.0

    def paired_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        if self.pairs:
            mask[np.asarray(self.pairs).ravel()] = True
        return mask

    def to_json(self) -> dict:
        return {"pairs": [[int(i), int(j)] for i, j in self.pairs],
                "singles": [int(k) for k in self.singles], "n": int(self.n)}

    @classmethod
    def from_json(cls, data: dict) -> "ClusterPartition":
        return cls([tuple(p) for p in data["pairs"]], list(data["singles"]), int(data["n"]))


def _excess_rows(pattern: MarkedPattern, metric: PlanarMetric, rows: np.ndarray, cols=None):
    xy, z = pattern.xy, pattern.z
    if cols is None:
        d2 = metric.distance2(xy[rows, None, :], xy[None, :, :])
        return cosh_excess(d2, z[rows, None], z[None, :])
    d2 = metric.distance2(xy[rows], xy[cols])
    return cosh_excess(d2, z[rows], z[cols])


def _scan_rows(pattern: MarkedPattern, metric: PlanarMetric, rows: np.ndarray, out: np.ndarray) -> None:
    """Exact neighbors of ``rows`` against every atom, in memory-bounded blocks."""
    for start in range(0, rows.size, _BRUTE_BLOCK):
        block = rows[start:start + _BRUTE_BLOCK]
        t = _excess_rows(pattern, metric, block)
        t[np.arange(block.size), block] = np.inf
        out[block] = np.argmin(t, axis=1)  # first minimum, i.e. smallest index on ties


def _nn_brute(pattern: MarkedPattern, metric: PlanarMetric) -> np.ndarray:
    out = np.empty(len(pattern), dtype=np.intp)
    _scan_rows(pattern, metric, np.arange(len(pattern)), out)
    return out


def _nn_tree(pattern: MarkedPattern, metric: PlanarMetric) -> np.ndarray:
    """Nearest neighbors with a k-d tree on the planar positions.

    A planar candidate set is scanned first. Atom ``j`` can only beat the
    best candidate's excess ``t`` if ``d_E**2 < 2 z z_j t - (z - z_j)**2``;
    over ``z_j`` that peaks at ``z**2 t (t + 2)`` (the planar radius of the
    hyperbolic ball), and at ``z_j = z_max`` when ``z_max < z (1 + t)``.
    Atoms whose radius reaches past the candidate set are scanned
    exhaustively (vectorized), which costs O(n) each.
    """
    xy, z = pattern.xy, pattern.z
    n = len(pattern)
    box = metric.boxsize
    pts = np.mod(xy, box) if box is not None else xy
    tree = cKDTree(pts, boxsize=box)
    k = min(n, _TREE_K + 1)
    dist, idx = tree.query(pts, k=k)
    rows = np.repeat(np.arange(n), k)
    t = _excess_rows(pattern, metric, rows, idx.ravel()).reshape(n, k)
    t = np.where(idx == np.arange(n)[:, None], np.inf, t)
    # smallest excess, ties to the smaller index
    best_t = t.min(axis=1)
    tied = t == best_t[:, None]
    best = np.where(tied, idx, np.iinfo(np.intp).max).min(axis=1)
    zmax = z.max()
    reach2 = np.where(zmax < z * (1.0 + best_t), 2.0 * z * zmax * best_t - (z - zmax) ** 2,
                      z * z * best_t * (best_t + 2.0))
    reach = np.sqrt(np.maximum(reach2, 0.0)) * (1.0 + 1e-9) + 1e-12
    incomplete = (dist[:, -1] <= reach) & (k < n)
    best = best.astype(np.intp)
    _scan_rows(pattern, metric, np.flatnonzero(incomplete), best)
    return best


def nearest_neighbors(pattern: MarkedPattern, metric: PlanarMetric | None = None,
                      method: str = "auto") -> np.ndarray:
    """Index of the hyperbolic nearest neighbor of every atom.

    ``method`` is ``"brute"`` (the O(n^2) reference), ``"tree"`` or
    ``"auto"`` (tree above a few hundred atoms).
    """
    metric = metric or pattern.metric()
    n = len(pattern)
    if n < 2:
        raise InvalidArgumentError("nearest neighbor needs at least two atoms")
    if method == "auto":
        method = "tree" if n > 256 else "brute"
    if method == "brute":
        return _nn_brute(pattern, metric)
    if method == "tree":
        return _nn_tree(pattern, metric)
    raise InvalidArgumentError(f"unknown neighbor search method {method!r}")


def nearest_neighbor(pattern: MarkedPattern, i: int, metric: PlanarMetric | None = None) -> int:
    metric = metric or pattern.metric()
    n = len(pattern)
    if n < 2:
        raise InvalidArgumentError("nearest neighbor needs at least two atoms")
    if not 0 <= i < n:
        raise InvalidArgumentError(f"atom index {i} out of range for {n} atoms")
    t = _excess_rows(pattern, metric, np.array([i]))[0]
    t[i] = np.inf
    return int(np.argmin(t))


def partition_from_neighbors(nn: np.ndarray, z: np.ndarray, control: ControlSet) -> ClusterPartition:
    n = nn.shape[0]
    ids = np.arange(n)
    mutual = (nn[nn] == ids) & (ids < nn)
    first = ids[mutual]
    second = nn[mutual]
    ok = np.asarray(control.contains(z[first], z[second]), dtype=bool)
    first, second = first[ok], second[ok]
    paired = np.zeros(n, dtype=bool)
    paired[first] = True
    paired[second] = True
    pairs = [(int(i), int(j)) for i, j in zip(first, second)]
    return ClusterPartition(pairs, [int(k) for k in ids[~paired]], n)


def mnnr_partition(pattern: MarkedPattern, control: ControlSet, metric: PlanarMetric | None = None,
                   method: str = "auto") -> ClusterPartition:
    """Split the pattern into cooperative pairs and singles."""
    n = len(pattern)
    if n < 2:
        return ClusterPartition([], list(range(n)), n)
    nn = nearest_neighbors(pattern, metric, method)
    return partition_from_neighbors(nn, pattern.z, control)
