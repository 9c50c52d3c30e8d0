"""Agglomerative binary dendrograms built with the Lance-Williams
distance-update recurrence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .dataset import Dataset

LINKAGE_NAMES = ("single", "complete", "average", "flexible")


@dataclass(frozen=True)
class LinkageParams:
    """Coefficients of the cluster-distance update recurrence.

    d(k, i+j) = alpha_i*d(k,i) + alpha_j*d(k,j) + beta*d(i,j)
                + gamma*|d(k,i) - d(k,j)|

    Named presets fix the coefficients; `average` derives the alphas from
    cluster sizes at update time.
    """

    name: str = "flexible"
    beta: float = -0.25

    def __post_init__(self):
        if self.name not in LINKAGE_NAMES:
            raise ValueError(f"unknown linkage {self.name!r}")
        if self.name == "flexible" and self.beta >= 1.0:
            raise ValueError("flexible linkage needs beta < 1")

    def coefficients(self, size_i: int, size_j: int):
        """(alpha_i, alpha_j, beta, gamma) for merging clusters i and j."""
        if self.name == "single":
            return 0.5, 0.5, 0.0, -0.5
        if self.name == "complete":
            return 0.5, 0.5, 0.0, 0.5
        if self.name == "average":
            total = size_i + size_j
            return size_i / total, size_j / total, 0.0, 0.0
        half = (1.0 - self.beta) / 2.0
        return half, half, self.beta, 0.0


def lance_williams_update(d_ki, d_kj, d_ij, size_i, size_j, size_k,
                          params: LinkageParams):
    """Distance from cluster k to the merge of clusters i and j.

    Accepts scalars or aligned arrays for the k-side distances; `size_k`
    is unused by the built-in presets but kept for generalised schemes.
    """
    ai, aj, b, g = params.coefficients(size_i, size_j)
    d_ki = np.asarray(d_ki, dtype=np.float64)
    d_kj = np.asarray(d_kj, dtype=np.float64)
    out = ai * d_ki + aj * d_kj + b * d_ij + g * np.abs(d_ki - d_kj)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DistanceMatrix:
    """Condensed upper-triangular pairwise distances over n points."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        expected = self.n * (self.n - 1) // 2
        if self.values.shape != (expected,):
            raise ValueError(
                f"condensed matrix for n={self.n} needs {expected} values"
            )
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("distances must be finite and non-negative")

    def get(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        if i > j:
            i, j = j, i
        idx = self.n * i - i * (i + 1) // 2 + (j - i - 1)
        return float(self.values[idx])

    def square(self) -> np.ndarray:
        return squareform(self.values)


def pairwise_distances(dataset: Dataset) -> DistanceMatrix:
    """Euclidean distances between every pair of dataset points."""
    if dataset.n < 2:
        raise ValueError("need at least two points")
    return DistanceMatrix(dataset.n, pdist(dataset.features, metric="euclidean"))


@dataclass
class Dendrogram:
    """Binary merge tree over n leaves.

    Nodes are integers: leaves are 0..n-1 (point ids); merge step m
    creates internal node n+m. Arrays `left`, `right`, `height`, `size`
    are indexed by merge step; `size` counts leaves under the new node.
    """

    n_leaves: int
    left: np.ndarray
    right: np.ndarray
    height: np.ndarray
    size: np.ndarray

    def __post_init__(self):
        m = self.n_leaves - 1
        for name in ("left", "right", "height", "size"):
            arr = getattr(self, name)
            if arr.shape != (m,):
                raise ValueError(f"{name} must have {m} entries")
        if np.any(self.height < 0):
            raise ValueError("heights must be non-negative")

    # -- navigation ----------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return 2 * self.n_leaves - 1

    @property
    def root(self) -> int:
        return self.n_nodes - 1

    def is_leaf(self, node: int) -> bool:
        self._check(node)
        return node < self.n_leaves

    def children(self, node: int):
        self._check(node)
        if node < self.n_leaves:
            return None
        m = node - self.n_leaves
        return int(self.left[m]), int(self.right[m])

    def node_height(self, node: int) -> float:
        self._check(node)
        if node < self.n_leaves:
            return 0.0
        return float(self.height[node - self.n_leaves])

    def node_size(self, node: int) -> int:
        self._check(node)
        if node < self.n_leaves:
            return 1
        return int(self.size[node - self.n_leaves])

    def n_internal(self, node: int) -> int:
        """Internal-node count of the subtree (= leaf count - 1)."""
        return self.node_size(node) - 1

    def leaf_ids(self, node: int) -> np.ndarray:
        """Sorted ids of the leaves under `node`."""
        out = []
        stack = [node]
        while stack:
            cur = stack.pop()
            if cur < self.n_leaves:
                out.append(cur)
            else:
                m = cur - self.n_leaves
                stack.extend((int(self.left[m]), int(self.right[m])))
        return np.array(sorted(out), dtype=np.int64)

    def internal_heights(self, node: int) -> np.ndarray:
        """Heights of the internal nodes in the subtree, unordered."""
        self._check(node)
        out = []
        stack = [node]
        while stack:
            cur = stack.pop()
            if cur >= self.n_leaves:
                m = cur - self.n_leaves
                out.append(self.height[m])
                stack.extend((int(self.left[m]), int(self.right[m])))
        return np.array(out, dtype=np.float64)

    def parents(self) -> np.ndarray:
        """Parent node id per node; the root maps to -1."""
        par = np.full(self.n_nodes, -1, dtype=np.int64)
        for m in range(self.n_leaves - 1):
            par[self.left[m]] = self.n_leaves + m
            par[self.right[m]] = self.n_leaves + m
        return par

    def _check(self, node: int) -> None:
        if not 0 <= node < self.n_nodes:
            raise ValueError(f"unknown node {node}")

    # -- serialization ---------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "n_leaves": int(self.n_leaves),
            "merges": [
                {
                    "left": int(self.left[m]),
                    "right": int(self.right[m]),
                    "height": float(self.height[m]),
                    "size": int(self.size[m]),
                }
                for m in range(self.n_leaves - 1)
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Dendrogram":
        merges = data["merges"]
        n = int(data["n_leaves"])
        return cls(
            n_leaves=n,
            left=np.array([m["left"] for m in merges], dtype=np.int64),
            right=np.array([m["right"] for m in merges], dtype=np.int64),
            height=np.array([m["height"] for m in merges], dtype=np.float64),
            size=np.array([m["size"] for m in merges], dtype=np.int64),
        )


def subtree_heights(dendrogram: Dendrogram, node: int) -> np.ndarray:
    """Ascending heights of the internal nodes under `node`; empty for a leaf."""
    return np.sort(dendrogram.internal_heights(node))


def build_dendrogram(dist: DistanceMatrix, params: LinkageParams) -> Dendrogram:
    """Sequential agglomeration: repeatedly merge the two closest active
    clusters, recording the merge distance as the node height and updating
    the remaining distances through the Lance-Williams recurrence.

    Ties on the minimum distance are broken toward the pair whose cluster
    creation indices are smallest in lexicographic order (leaves are
    created 0..n-1, internal clusters in merge order).
    """
    n = dist.n
    if n < 2:
        raise ValueError("need at least two points")

    # Slot-based working matrix: row s holds the cluster currently stored
    # in slot s; inactive rows/cols are pinned at +inf.
    d = dist.square().astype(np.float64)
    np.fill_diagonal(d, np.inf)
    active = np.ones(n, dtype=bool)
    cid = np.arange(n, dtype=np.int64)       # creation index per slot
    sizes = np.ones(n, dtype=np.int64)

    left = np.empty(n - 1, dtype=np.int64)
    right = np.empty(n - 1, dtype=np.int64)
    height = np.empty(n - 1, dtype=np.float64)
    size = np.empty(n - 1, dtype=np.int64)

    for step in range(n - 1):
        flat = np.argmin(d)
        best = d.flat[flat]
        ties = np.argwhere(d == best)
        # Lexicographically smallest (creation_i, creation_j) pair.
        pair_cids = np.sort(cid[ties], axis=1)
        pick = np.lexsort((pair_cids[:, 1], pair_cids[:, 0]))[0]
        a, b = ties[pick]
        if cid[a] > cid[b]:
            a, b = b, a

        left[step] = cid[a]
        right[step] = cid[b]
        height[step] = best
        size[step] = sizes[a] + sizes[b]

        ks = np.flatnonzero(active)
        ks = ks[(ks != a) & (ks != b)]
        if ks.size:
            d_new = lance_williams_update(
                d[a, ks], d[b, ks], best, int(sizes[a]), int(sizes[b]),
                sizes[ks], params,
            )
            d[a, ks] = d_new
            d[ks, a] = d_new
        d[a, b] = d[b, a] = np.inf
        d[b, :] = np.inf
        d[:, b] = np.inf
        active[b] = False
        cid[a] = n + step
        sizes[a] = size[step]

    return Dendrogram(n_leaves=n, left=left, right=right, height=height, size=size)
