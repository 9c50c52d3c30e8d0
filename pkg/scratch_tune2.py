"""Scratch: measure exact-6 and agreement>=95% rates across presets."""
import numpy as np
from scipy.optimize import linear_sum_assignment

import isletnet as isl
from isletnet.hierarchy import LinkageParams
from isletnet.multicut import CutConfig, multilevel_cut, single_cut_baseline


def agreement(clustering, labels):
    classes = np.unique(labels)
    cont = np.zeros((clustering.n_clusters, classes.size))
    for ci, members in enumerate(clustering.clusters):
        for li, lab in enumerate(classes):
            cont[ci, li] = np.sum(labels[members] == lab)
    r, c = linear_sum_assignment(-cont)
    return cont[r, c].sum() / labels.size


def make_spec(d, sep, sigma, n_sparse, dense_scale, n_dense, blob_factor=1.5):
    rng = np.random.default_rng(99)

    def place(scale, origin):
        # equilateral-ish simplex corners in the first two coords
        h = scale * np.sqrt(3) / 2
        pts = [np.zeros(d), np.zeros(d), np.zeros(d)]
        pts[1] = np.zeros(d); pts[1][0] = scale
        pts[2] = np.zeros(d); pts[2][0] = scale / 2; pts[2][1] = h
        return [origin + p for p in pts]

    origin_sparse = np.zeros(d)
    origin_dense = np.zeros(d)
    origin_dense[0] = sep * blob_factor
    origin_dense[1] = sep * blob_factor * 0.65
    sparse_centers = place(sep, origin_sparse)
    dense_centers = place(sep * dense_scale, origin_dense)
    spec = tuple((tuple(c), sigma, n_sparse) for c in sparse_centers)
    spec += tuple((tuple(c), sigma * dense_scale, n_dense) for c in dense_centers)
    return spec


def run(tag, spec, linkage, alpha=1.0, seeds=range(10)):
    counts, agrees, singles = [], [], []
    for seed in seeds:
        ds = isl.synth_density_variation(spec, seed=seed)
        dnd = isl.build_dendrogram(isl.pairwise_distances(ds), linkage)
        cut = multilevel_cut(dnd, CutConfig(alpha=alpha))
        counts.append(cut.n_clusters)
        agrees.append(agreement(cut, ds.labels))
        singles.append(agreement(single_cut_baseline(dnd, 6), ds.labels))
    exact6 = sum(1 for c in counts if c == 6)
    agree95 = sum(1 for a in agrees if a >= 0.95)
    both = sum(1 for c, a in zip(counts, agrees) if c == 6 and a >= 0.95)
    sc_ok = sum(1 for a in singles if a < 0.95)
    print(f"{tag:34s} counts={counts} exact6={exact6} agree95={agree95} "
          f"both={both} single<95={sc_ok} seed0=({counts[0]},{agrees[0]:.2f})")


flex = LinkageParams(beta=-0.25)
for d in (2, 3, 4):
    for n in (8, 10, 12):
        spec = make_spec(d, 6.0, 1.0, n, 0.08, n)
        run(f"d={d} n={n}", spec, flex)
    print()
