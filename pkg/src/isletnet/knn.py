"""Exact k-nearest-neighbour queries with the unanimity reject rule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import Dataset


@dataclass
class ReferenceSet:
    """Immutable labeled points searched by linear scan.

    `ids` are the stable indices the points carry in their source dataset;
    distance ties are broken toward the smaller id.
    """

    features: np.ndarray
    labels: np.ndarray
    ids: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise ValueError("reference set must be a non-empty 2-D array")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must align with reference points")
        if self.ids is None:
            self.ids = np.arange(self.features.shape[0], dtype=np.int64)
        else:
            self.ids = np.asarray(self.ids, dtype=np.int64)
            if self.ids.shape != (self.features.shape[0],):
                raise ValueError("ids must align with reference points")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @classmethod
    def from_dataset(cls, dataset: Dataset, ids=None) -> "ReferenceSet":
        if ids is None:
            return cls(dataset.features, dataset.labels)
        ids = np.asarray(ids, dtype=np.int64)
        return cls(dataset.features[ids], dataset.labels[ids], ids)


class Neighbor(NamedTuple):
    id: int
    distance: float
    label: int


@dataclass(frozen=True)
class Decision:
    """Accept with a label and its source (network index or "knn"), or
    reject with both fields unset."""

    label: int | None = None
    source: int | str | None = None

    @property
    def accepted(self) -> bool:
        return self.label is not None


REJECT = Decision()


def _neighbor_order(refset: ReferenceSet, query):
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (refset.features.shape[1],):
        raise ValueError("query dimension does not match the reference set")
    d = np.sqrt(np.sum((refset.features - q) ** 2, axis=1))
    return np.lexsort((refset.ids, d)), d


def nearest(refset: ReferenceSet, query, k: int):
    """The k reference points closest to `query`, ascending by Euclidean
    distance with id as the tie-break."""
    if not 1 <= k <= refset.n:
        raise ValueError(f"k must be in [1, {refset.n}]")
    order, d = _neighbor_order(refset, query)
    return [
        Neighbor(int(refset.ids[i]), float(d[i]), int(refset.labels[i]))
        for i in order[:k]
    ]


def knn_decide(refset: ReferenceSet, query, k: int,
               mode: str = "unanimity") -> Decision:
    """Classify by the k nearest neighbours.

    unanimity: accept only when all k neighbours share one label.
    majority: accept the most frequent label, rejecting exact ties.
    """
    neighbours = nearest(refset, query, k)
    labels = np.array([nb.label for nb in neighbours])
    if mode == "unanimity":
        if np.all(labels == labels[0]):
            return Decision(int(labels[0]), "knn")
        return REJECT
    if mode == "majority":
        values, counts = np.unique(labels, return_counts=True)
        top = counts.max()
        winners = values[counts == top]
        if winners.size == 1:
            return Decision(int(winners[0]), "knn")
        return REJECT
    raise ValueError(f"unknown mode {mode!r}")


def neighbor_label_table(refset: ReferenceSet, queries, kmax: int) -> np.ndarray:
    """Labels of the kmax nearest references per query row, shape
    (n_queries, kmax), ordered by (distance, id). Batch backbone for the
    curve sweeps; row i column j equals nearest(refset, queries[i], kmax)[j].
    """
    if not 1 <= kmax <= refset.n:
        raise ValueError(f"kmax must be in [1, {refset.n}]")
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    d = cdist(Q, refset.features, metric="euclidean")
    # lexsort per row: primary distance, secondary reference id.
    order = np.lexsort((np.broadcast_to(refset.ids, d.shape), d), axis=1)
    return refset.labels[order[:, :kmax]]


def unanimity_labels(label_table: np.ndarray, k: int) -> np.ndarray:
    """Per-query unanimity decision from a neighbour-label table: the
    agreed label, or -1 for reject."""
    block = label_table[:, :k]
    agreed = np.all(block == block[:, :1], axis=1)
    return np.where(agreed, block[:, 0], -1)
