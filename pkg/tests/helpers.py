"""Shared test utilities: brute-force oracles and small builders."""

from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from isletnet.dataset import Dataset, pyramid_features
from isletnet.hierarchy import Dendrogram


def cluster_distance(points, members_a, members_b, linkage):
    """Inter-cluster distance recomputed from raw points."""
    pa = points[members_a]
    pb = points[members_b]
    cross = np.sqrt(((pa[:, None, :] - pb[None, :, :]) ** 2).sum(axis=2))
    if linkage == "single":
        return float(cross.min())
    if linkage == "complete":
        return float(cross.max())
    if linkage == "average":
        return float(cross.mean())
    raise ValueError(linkage)


def naive_agglomerate(points, linkage):
    """O(n^3) reference agglomeration that recomputes every cluster
    distance from the raw points at each step. Ties on the minimum
    distance go to the lexicographically smallest creation-index pair.

    Returns a list of (left, right, height, size) merge records.
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    members = {i: [i] for i in range(n)}
    active = sorted(members)
    merges = []
    for step in range(n - 1):
        best = None
        for i in range(len(active)):
            for j in range(i + 1, len(active)):
                ci, cj = active[i], active[j]
                d = cluster_distance(points, members[ci], members[cj], linkage)
                key = (d, ci, cj)
                if best is None or key < best:
                    best = key
        d, ci, cj = best
        new_id = n + step
        members[new_id] = members[ci] + members[cj]
        merges.append((ci, cj, d, len(members[new_id])))
        active.remove(ci)
        active.remove(cj)
        active.append(new_id)
        active.sort()
    return merges


def label_agreement(clustering, labels):
    """Fraction of points covered by the best bipartite matching between
    found clusters and true labels."""
    labels = np.asarray(labels)
    classes = np.unique(labels)
    cont = np.zeros((clustering.n_clusters, classes.size))
    for ci, cluster_members in enumerate(clustering.clusters):
        for li, lab in enumerate(classes):
            cont[ci, li] = np.sum(labels[cluster_members] == lab)
    rows, cols = linear_sum_assignment(-cont)
    return float(cont[rows, cols].sum() / labels.size)


def chain_dendrogram(heights):
    """Left-deep chain dendrogram whose merge heights are `heights`
    (ascending keeps it monotone); n_leaves = len(heights) + 1."""
    heights = np.asarray(heights, dtype=np.float64)
    m = heights.size
    n = m + 1
    left = np.empty(m, dtype=np.int64)
    right = np.empty(m, dtype=np.int64)
    size = np.empty(m, dtype=np.int64)
    for i in range(m):
        left[i] = 0 if i == 0 else n + i - 1
        right[i] = i + 1
        size[i] = i + 2
    return Dendrogram(n_leaves=n, left=left, right=right,
                      height=heights.copy(), size=size)


@lru_cache(maxsize=1)
def digits_dataset() -> Dataset:
    """The public 8x8 digit set as 85-dim pyramid features (cached)."""
    from sklearn.datasets import load_digits

    digits = load_digits()
    images = digits.images / 16.0
    features = np.stack([pyramid_features(img) for img in images])
    return Dataset(features, digits.target.astype(np.int64),
                   tuple(str(i) for i in range(10)))


def gaussian_blobs(centers, sigma, count, seed, labels=None):
    """Quick labeled Gaussian mixture for unit tests."""
    rng = np.random.default_rng(seed)
    feats, labs = [], []
    for idx, center in enumerate(centers):
        center = np.asarray(center, dtype=np.float64)
        feats.append(rng.normal(center, sigma, size=(count, center.size)))
        labs.extend([idx if labels is None else labels[idx]] * count)
    return Dataset(np.vstack(feats), np.array(labs))
