"""Islet extraction: pure clusters of at least P same-class points, plus
the residual set left for the nearest-neighbour fallback."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hierarchy import Dendrogram
from .multicut import Clustering


@dataclass(frozen=True)
class IsletConfig:
    """min_size is P, the smallest member count an islet may have."""

    min_size: int = 15

    def __post_init__(self):
        if self.min_size < 1:
            raise ValueError("min_size must be >= 1")


@dataclass(frozen=True)
class Islet:
    """A pure cluster: every member carries the same label."""

    members: np.ndarray
    label: int
    provenance: int


@dataclass
class IsletPartition:
    """Disjoint islets plus the residual ids; together they cover the
    training set."""

    islets: list[Islet]
    residual: np.ndarray
    n_points: int

    def to_json_dict(self) -> dict:
        return {
            "n_points": int(self.n_points),
            "islets": [
                {
                    "members": [int(p) for p in isl.members],
                    "label": int(isl.label),
                    "provenance": int(isl.provenance),
                }
                for isl in self.islets
            ],
            "residual": [int(p) for p in self.residual],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "IsletPartition":
        islets = [
            Islet(np.array(d["members"], dtype=np.int64), int(d["label"]),
                  int(d["provenance"]))
            for d in data["islets"]
        ]
        return cls(islets, np.array(data["residual"], dtype=np.int64),
                   int(data["n_points"]))


def detect_islets(dendrogram: Dendrogram, clustering: Clustering, labels,
                  config: IsletConfig = IsletConfig()) -> IsletPartition:
    """Cross unsupervised clusters with supervised labels.

    A pure cluster of at least P members becomes an islet directly. An
    impure cluster is re-explored inside its own subtree, emitting every
    maximal pure subtree of at least P leaves; everything else joins the
    residual.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size != dendrogram.n_leaves:
        raise ValueError("labels must cover all leaves")
    clustering.labels_for(dendrogram.n_leaves)  # validates the partition

    islets: list[Islet] = []
    residual: list[np.ndarray] = []

    for members, node in zip(clustering.clusters, clustering.provenance):
        if not np.array_equal(dendrogram.leaf_ids(node), members):
            raise ValueError(
                f"cluster members do not match provenance node {node}"
            )
        stack = [node]
        while stack:
            cur = stack.pop()
            cur_members = dendrogram.leaf_ids(cur)
            cur_labels = np.unique(labels[cur_members])
            if cur_labels.size == 1:
                if cur_members.size >= config.min_size:
                    islets.append(Islet(cur_members, int(cur_labels[0]), cur))
                else:
                    residual.append(cur_members)
            else:
                lc, rc = dendrogram.children(cur)
                stack.extend((rc, lc))

    residual_ids = (
        np.sort(np.concatenate(residual)) if residual
        else np.array([], dtype=np.int64)
    )
    return IsletPartition(islets=islets, residual=residual_ids,
                          n_points=dendrogram.n_leaves)


def islet_coverage(partition: IsletPartition) -> float:
    """Fraction of the training points assigned to some islet."""
    covered = sum(isl.members.size for isl in partition.islets)
    return covered / partition.n_points
