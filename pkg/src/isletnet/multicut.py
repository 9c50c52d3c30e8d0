"""Multi-level dendrogram cutting: variation-coefficient cluster test,
gap-based horizontal cuts, recursive cut invalidation and the dichotomic
tolerance search."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hierarchy import Dendrogram, subtree_heights

DEFAULT_BINS = 10


@dataclass(frozen=True)
class HeightHistogram:
    """Equal-width histogram of a subtree's internal-node heights."""

    bins: int
    bar_counts: np.ndarray
    range: tuple[float, float]


@dataclass(frozen=True)
class CutConfig:
    """Knobs of the multi-level cut.

    alpha is the invalidation tolerance: a hypothesised cut survives only
    while every discovered subtree's variation coefficient stays within
    alpha times its validated father's. Larger alpha invalidates less and
    therefore yields more clusters.
    """

    alpha: float = 1.0
    bins: int = DEFAULT_BINS
    min_nodes: int = 2

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")
        if self.min_nodes < 2:
            raise ValueError("min_nodes must be >= 2")


@dataclass
class Clustering:
    """A partition of the leaves, each cluster tagged with the dendrogram
    node it was emitted from."""

    clusters: list[np.ndarray]
    provenance: list[int]

    def __post_init__(self):
        if len(self.clusters) != len(self.provenance):
            raise ValueError("provenance must align with clusters")

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def labels_for(self, n_points: int) -> np.ndarray:
        """Cluster index per point id; raises if not a partition."""
        out = np.full(n_points, -1, dtype=np.int64)
        total = 0
        for ci, members in enumerate(self.clusters):
            if np.any(out[members] != -1):
                raise ValueError("clusters overlap")
            out[members] = ci
            total += len(members)
        if total != n_points or np.any(out == -1):
            raise ValueError("clusters do not cover all points")
        return out

    def to_json_dict(self) -> dict:
        return {
            "clusters": [
                {"points": [int(p) for p in members], "provenance": int(node)}
                for members, node in zip(self.clusters, self.provenance)
            ]
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Clustering":
        clusters = [np.array(c["points"], dtype=np.int64) for c in data["clusters"]]
        provenance = [int(c["provenance"]) for c in data["clusters"]]
        return cls(clusters, provenance)


def height_histogram(dendrogram: Dendrogram, node: int, bins: int) -> HeightHistogram:
    """Histogram of the subtree's node heights over B equal-width bins
    spanning [min, max]; the maximum falls in the last bin."""
    heights = dendrogram.internal_heights(node)
    if heights.size == 0:
        raise ValueError("leaf nodes have no height histogram")
    lo, hi = float(heights.min()), float(heights.max())
    if hi == lo:
        counts = np.zeros(bins, dtype=np.int64)
        counts[0] = heights.size
    else:
        counts, _ = np.histogram(heights, bins=bins, range=(lo, hi))
    return HeightHistogram(bins=bins, bar_counts=counts, range=(lo, hi))


def variation_coefficient(dendrogram: Dendrogram, node: int,
                          bins: int = DEFAULT_BINS) -> float:
    """Spread-over-mean of the height-histogram bars under `node`.

    The ratio s/m (population standard deviation over mean of the bar
    counts) grows with the number of clusters represented by the subtree.
    Degenerate subtrees whose heights are all equal score 0 and should be
    treated as a single cluster.
    """
    if dendrogram.n_internal(node) < 2:
        raise ValueError("variation coefficient needs >= 2 internal nodes")
    hist = height_histogram(dendrogram, node, bins)
    lo, hi = hist.range
    if hi == lo:
        return 0.0
    bars = hist.bar_counts.astype(np.float64)
    return float(bars.std() / bars.mean())


def gap_cut(dendrogram: Dendrogram, node: int) -> list[int]:
    """Horizontal cut just below the largest jump between consecutive
    sorted node heights of the subtree.

    Returns the roots of the maximal subtrees lying strictly below the
    cut level (>= 2 of them). A single-merge subtree is forced: the cut
    removes its root and returns the two children.
    """
    m = dendrogram.n_internal(node)
    if m < 1:
        raise ValueError("gap cut needs an internal node")
    heights = subtree_heights(dendrogram, node)
    if m == 1:
        threshold = heights[0]
    else:
        gaps = np.diff(heights)
        # Ties go to the largest index: the higher, coarser cut.
        idx = len(gaps) - 1 - int(np.argmax(gaps[::-1]))
        threshold = heights[idx + 1]

    roots = []
    stack = [node]
    while stack:
        cur = stack.pop()
        if dendrogram.is_leaf(cur) or dendrogram.node_height(cur) < threshold:
            roots.append(cur)
        else:
            lc, rc = dendrogram.children(cur)
            stack.extend((rc, lc))
    return roots


def multilevel_cut(dendrogram: Dendrogram, config: CutConfig) -> Clustering:
    """Recursive multi-level cut of the dendrogram.

    Starting from the root, hypothesise a gap cut. Each discovered subtree
    is tested against its validated father: if its variation coefficient
    exceeds alpha times the father's, the father's cut is invalidated and
    the father's whole leaf set becomes one cluster. Otherwise exploration
    recurses with the subtree as the new father. Subtrees too small to
    measure become clusters as they stand.
    """
    if dendrogram.n_leaves < 2:
        raise ValueError("dendrogram needs at least two leaves")

    clusters: list[np.ndarray] = []
    provenance: list[int] = []

    def emit(node: int) -> None:
        clusters.append(dendrogram.leaf_ids(node))
        provenance.append(node)

    stack = [dendrogram.root]
    while stack:
        father = stack.pop()
        if dendrogram.n_internal(father) < config.min_nodes:
            emit(father)
            continue
        heights = dendrogram.internal_heights(father)
        if heights.max() == heights.min():
            # Degenerate subtree (duplicate points): a single cluster.
            emit(father)
            continue
        parts = gap_cut(dendrogram, father)
        vc_father = variation_coefficient(dendrogram, father, config.bins)
        invalidated = any(
            dendrogram.n_internal(part) >= config.min_nodes
            and variation_coefficient(dendrogram, part, config.bins)
            > config.alpha * vc_father
            for part in parts
        )
        if invalidated:
            emit(father)
        else:
            stack.extend(parts)

    order = np.argsort([int(c[0]) for c in clusters])
    return Clustering(
        clusters=[clusters[i] for i in order],
        provenance=[provenance[i] for i in order],
    )


def single_cut_baseline(dendrogram: Dendrogram, k: int) -> Clustering:
    """Classical horizontal cut: remove the k-1 highest nodes, leaving
    exactly k clusters."""
    n = dendrogram.n_leaves
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}]")
    merges = np.arange(n - 1)
    # Highest first; ties resolved toward later (higher) merges so the
    # removed set stays upward-closed on monotone dendrograms.
    order = sorted(merges, key=lambda m: (dendrogram.height[m], m), reverse=True)
    removed = {n + m for m in order[: k - 1]}

    clusters = []
    provenance = []
    stack = [dendrogram.root]
    while stack:
        cur = stack.pop()
        if cur in removed:
            lc, rc = dendrogram.children(cur)
            stack.extend((rc, lc))
        else:
            clusters.append(dendrogram.leaf_ids(cur))
            provenance.append(cur)

    order2 = np.argsort([int(c[0]) for c in clusters])
    return Clustering(
        clusters=[clusters[i] for i in order2],
        provenance=[provenance[i] for i in order2],
    )


def make_coverage_quality(min_size: int):
    """Clustering quality = fraction of points sitting in pure clusters of
    at least `min_size` members; the default objective for the alpha search."""

    def quality(clustering: Clustering, labels: np.ndarray) -> float:
        labels = np.asarray(labels)
        covered = 0
        for members in clustering.clusters:
            if len(members) >= min_size and np.unique(labels[members]).size == 1:
                covered += len(members)
        return covered / labels.size

    return quality


def search_alpha(dendrogram: Dendrogram, labels, quality_fn=None,
                 alpha_hi: float = 10.0, iterations: int = 12,
                 bins: int = DEFAULT_BINS, min_nodes: int = 2,
                 min_size: int = 15) -> float:
    """Dichotomic search over (0, alpha_hi] for the tolerance maximising
    `quality_fn(multilevel_cut(dendrogram, alpha), labels)`.

    Each step evaluates the midpoint of the current interval and keeps the
    half containing the best candidate seen so far. Deterministic; returns
    the best alpha found.
    """
    if alpha_hi <= 0:
        raise ValueError("alpha_hi must be positive")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    labels = np.asarray(labels)
    if labels.size != dendrogram.n_leaves:
        raise ValueError("labels must cover all leaves")
    if quality_fn is None:
        quality_fn = make_coverage_quality(min_size)

    lo, hi = 0.0, float(alpha_hi)
    best_alpha = None
    best_q = -np.inf
    for _ in range(iterations):
        mid = (lo + hi) / 2.0
        cut = multilevel_cut(dendrogram, CutConfig(alpha=mid, bins=bins,
                                                   min_nodes=min_nodes))
        q = quality_fn(cut, labels)
        if best_alpha is None or q > best_q:
            best_alpha, best_q = mid, q
        if best_alpha <= mid:
            hi = mid
        else:
            lo = mid
    return float(best_alpha)
