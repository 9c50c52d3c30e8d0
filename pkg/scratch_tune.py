"""Scratch: tune FIG2 geometry so multilevel_cut(alpha=1) finds 6 clusters."""
import numpy as np
from scipy.optimize import linear_sum_assignment

import isletnet as isl
from isletnet.hierarchy import LinkageParams
from isletnet.multicut import CutConfig, multilevel_cut, single_cut_baseline


def agreement(clustering, labels):
    n = labels.size
    classes = np.unique(labels)
    cont = np.zeros((clustering.n_clusters, classes.size))
    for ci, members in enumerate(clustering.clusters):
        for li, lab in enumerate(classes):
            cont[ci, li] = np.sum(labels[members] == lab)
    r, c = linear_sum_assignment(-cont)
    return cont[r, c].sum() / n


def make_spec(sep, sigma, n_sparse, dense_scale, n_dense, blob_factor=1.5):
    h = sep * np.sqrt(3) / 2
    bx, by = sep * blob_factor, h * blob_factor * 0.75
    dsep = sep * dense_scale
    dh = dsep * np.sqrt(3) / 2
    dsig = sigma * dense_scale
    return (
        ((0.0, 0.0), sigma, n_sparse),
        ((sep, 0.0), sigma, n_sparse),
        ((sep / 2, h), sigma, n_sparse),
        ((bx, by), dsig, n_dense),
        ((bx + dsep, by), dsig, n_dense),
        ((bx + dsep / 2, by + dh), dsig, n_dense),
    )


def run(tag, spec, linkage, alpha=1.0, seeds=range(10)):
    counts, agrees, single_agrees = [], [], []
    for seed in seeds:
        ds = isl.synth_density_variation(spec, seed=seed)
        dnd = isl.build_dendrogram(isl.pairwise_distances(ds), linkage)
        cut = multilevel_cut(dnd, CutConfig(alpha=alpha))
        counts.append(cut.n_clusters)
        agrees.append(agreement(cut, ds.labels))
        single_agrees.append(agreement(single_cut_baseline(dnd, 6), ds.labels))
    ok = sum(1 for c, a in zip(counts, agrees) if c == 6 and a >= 0.95)
    sc_ok = sum(1 for a in single_agrees if a < 0.95)
    print(f"{tag:42s} counts={counts} multi_ok={ok}/10 single_below95={sc_ok}/10")
    return ok


flex = LinkageParams(beta=-0.25)
for sep in (6.0, 8.0, 10.0):
    for n_sp, n_de in ((12, 12), (15, 15), (18, 15), (20, 18)):
        spec = make_spec(sep, 1.0, n_sp, 0.08, n_de)
        run(f"flex-.25 sep={sep} n=({n_sp},{n_de})", spec, flex)
    print()
