"""The distributed classifier: per-islet networks cooperating with a
k-NN fallback, and the error/recognition/rejection curve protocols."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import Dataset
from .hierarchy import LinkageParams, build_dendrogram, pairwise_distances
from .islets import IsletConfig, detect_islets, islet_coverage
from .knn import (Decision, REJECT, ReferenceSet, knn_decide,
                  neighbor_label_table, unanimity_labels)
from .mlp import (DEFAULT_LADDER, Layout, Network, TrainParams, batch_forward,
                  escalate_architecture, forward, init_network,
                  train_multiclass)
from .multicut import CutConfig, make_coverage_quality, multilevel_cut, search_alpha

CURVE_HEADER = "theta_or_k,recognition,error,rejection"


@dataclass(frozen=True)
class PipelineConfig:
    """Everything `build` needs to go from a labeled dataset to a
    ready-to-query modular classifier."""

    linkage: LinkageParams = LinkageParams()
    cut: CutConfig = CutConfig()
    islet: IsletConfig = IsletConfig()
    train: TrainParams = TrainParams()
    ladder: tuple[tuple[int, ...], ...] = DEFAULT_LADDER
    neg_ratio: float | None = None
    refset_kind: str = "full"
    knn_k: int = 3
    theta: float = 0.9
    alpha_search: bool = False
    alpha_hi: float = 10.0
    alpha_iterations: int = 12
    alpha_holdout: float = 0.25

    def __post_init__(self):
        if self.refset_kind not in ("full", "residual"):
            raise ValueError("refset_kind must be 'full' or 'residual'")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.knn_k < 1:
            raise ValueError("knn_k must be >= 1")
        if self.neg_ratio is not None and self.neg_ratio <= 0:
            raise ValueError("neg_ratio must be positive when set")


@dataclass
class IsletExpert:
    """One trained two-class network and the islet class it recognises."""

    network: Network
    label: int
    converged: bool
    rung: int
    epochs: int
    size: int


@dataclass
class BuildInfo:
    alpha: float
    n_clusters: int
    n_islets: int
    coverage: float


@dataclass
class ModularClassifier:
    """N islet networks plus the k-NN reference set and cooperation knobs.

    With zero experts the classifier degrades to pure unanimity k-NN and
    `degraded` is set.
    """

    experts: list[IsletExpert]
    refset: ReferenceSet
    refset_kind: str
    k: int
    theta: float
    label_names: tuple[str, ...] = ()
    degraded: bool = False
    info: BuildInfo | None = None

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if not 1 <= self.k <= self.refset.n:
            raise ValueError("k must be in [1, reference-set size]")

    @property
    def expert_labels(self) -> np.ndarray:
        return np.array([e.label for e in self.experts], dtype=np.int64)


@dataclass(frozen=True)
class CurvePoint:
    """One operating point; the three percentages add up to 100."""

    theta_or_k: float
    recognition: float
    error: float
    rejection: float

    def __post_init__(self):
        for name in ("recognition", "error", "rejection"):
            v = getattr(self, name)
            if not -1e-9 <= v <= 100 + 1e-9:
                raise ValueError(f"{name}={v} outside [0, 100]")
        total = self.recognition + self.error + self.rejection
        if abs(total - 100.0) > 1e-9:
            raise ValueError(f"percentages sum to {total}, not 100")


@dataclass(frozen=True)
class EvalResult:
    recognition: float
    error: float
    rejection: float
    network_share: float
    n: int

    def curve_point(self, theta_or_k: float) -> CurvePoint:
        return CurvePoint(float(theta_or_k), self.recognition, self.error,
                          self.rejection)


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def build(train: Dataset, config: PipelineConfig = PipelineConfig()) -> ModularClassifier:
    """Run the full construction pipeline on a training set.

    Distances -> dendrogram -> multi-level cut (alpha fixed or found by
    the dichotomic search on a held-out fraction) -> islet detection ->
    one escalated two-class network per islet. Deterministic in
    (train, config).
    """
    if train.n < 2 or train.classes.size < 2:
        raise ValueError("training set needs >= 2 points and >= 2 classes")

    dnd = build_dendrogram(pairwise_distances(train), config.linkage)

    if config.alpha_search:
        rng = np.random.default_rng([config.train.seed, 101])
        n_sub = max(4, int(round(config.alpha_holdout * train.n)))
        sample = np.sort(rng.choice(train.n, size=min(n_sub, train.n),
                                    replace=False))
        sub = train.subset(sample)
        sub_dnd = build_dendrogram(pairwise_distances(sub), config.linkage)
        alpha = search_alpha(
            sub_dnd, sub.labels,
            quality_fn=make_coverage_quality(config.islet.min_size),
            alpha_hi=config.alpha_hi, iterations=config.alpha_iterations,
            bins=config.cut.bins, min_nodes=config.cut.min_nodes,
        )
    else:
        alpha = config.cut.alpha

    cut_cfg = CutConfig(alpha=alpha, bins=config.cut.bins,
                        min_nodes=config.cut.min_nodes)
    clustering = multilevel_cut(dnd, cut_cfg)
    partition = detect_islets(dnd, clustering, train.labels, config.islet)

    experts: list[IsletExpert] = []
    all_ids = np.arange(train.n)
    for idx, islet in enumerate(partition.islets):
        positives = train.features[islet.members]
        neg_ids = np.setdiff1d(all_ids, islet.members, assume_unique=True)
        if config.neg_ratio is not None:
            cap = int(np.ceil(config.neg_ratio * islet.members.size))
            if cap < neg_ids.size:
                rng = np.random.default_rng([config.train.seed, 7, idx])
                neg_ids = np.sort(rng.choice(neg_ids, size=cap, replace=False))
        negatives = train.features[neg_ids]
        params = replace(config.train, seed=_derived_seed(config.train.seed, idx))
        result = escalate_architecture(positives, negatives,
                                       ladder=config.ladder, params=params)
        experts.append(IsletExpert(result.network, islet.label,
                                   result.converged, result.rung,
                                   result.epochs, int(islet.members.size)))

    if config.refset_kind == "residual" and partition.residual.size:
        refset = ReferenceSet.from_dataset(train, partition.residual)
    else:
        refset = ReferenceSet.from_dataset(train)

    info = BuildInfo(alpha=float(alpha), n_clusters=clustering.n_clusters,
                     n_islets=len(partition.islets),
                     coverage=islet_coverage(partition))
    return ModularClassifier(
        experts=experts, refset=refset, refset_kind=config.refset_kind,
        k=min(config.knn_k, refset.n), theta=config.theta,
        label_names=train.label_names, degraded=not experts, info=info,
    )


def decide_from_outputs(outputs: np.ndarray, expert_labels: np.ndarray,
                        theta: float, knn_labels: np.ndarray):
    """The cooperation rule as a pure function of the network outputs.

    `outputs` is (n_experts, n_queries); a network recognises a query when
    its output reaches theta. Exactly one recogniser takes the decision;
    zero or several defer to the k-NN column. Returns (labels, sources)
    where labels use -1 for reject and sources hold the deciding network
    index or -1 for the k-NN path.
    """
    outputs = np.atleast_2d(outputs)
    m = outputs.shape[1] if outputs.size else len(knn_labels)
    labels = np.asarray(knn_labels, dtype=np.int64).copy()
    sources = np.full(m, -1, dtype=np.int64)
    if outputs.shape[0]:
        fired = outputs >= theta
        counts = fired.sum(axis=0)
        sole = counts == 1
        if np.any(sole):
            winner = fired.argmax(axis=0)
            labels[sole] = expert_labels[winner[sole]]
            sources[sole] = winner[sole]
    return labels, sources


def _network_outputs(clf: ModularClassifier, X: np.ndarray) -> np.ndarray:
    if not clf.experts:
        return np.empty((0, X.shape[0]))
    return np.stack([batch_forward(e.network, X)[:, 0] for e in clf.experts])


def classify(clf: ModularClassifier, x) -> Decision:
    """Decide one query: the sole recognising network wins, anything else
    goes to the unanimity k-NN."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (clf.refset.features.shape[1],):
        raise ValueError("query dimension does not match the classifier")
    fired = [i for i, e in enumerate(clf.experts)
             if forward(e.network, x)[0] >= clf.theta]
    if len(fired) == 1:
        return Decision(clf.experts[fired[0]].label, fired[0])
    return knn_decide(clf.refset, x, clf.k, mode="unanimity")


def _metrics(decided: np.ndarray, sources: np.ndarray,
             truth: np.ndarray) -> EvalResult:
    n = truth.size
    accepted = decided >= 0
    correct = accepted & (decided == truth)
    wrong = accepted & ~correct
    n_acc = int(accepted.sum())
    share = float((sources[accepted] >= 0).sum() / n_acc) if n_acc else 0.0
    return EvalResult(
        recognition=float(100.0 * correct.sum() / n),
        error=float(100.0 * wrong.sum() / n),
        rejection=float(100.0 * (n - n_acc) / n),
        network_share=share,
        n=n,
    )


def evaluate(clf: ModularClassifier, test: Dataset,
             theta: float | None = None) -> EvalResult:
    """Recognition / error / rejection percentages over a test set."""
    if test.n == 0:
        raise ValueError("empty test set")
    if test.dim != clf.refset.features.shape[1]:
        raise ValueError("test dimension does not match the classifier")
    theta = clf.theta if theta is None else theta
    outputs = _network_outputs(clf, test.features)
    knn_lab = unanimity_labels(
        neighbor_label_table(clf.refset, test.features, clf.k), clf.k)
    decided, sources = decide_from_outputs(outputs, clf.expert_labels,
                                           theta, knn_lab)
    return _metrics(decided, sources, test.labels)


def default_theta_grid(count: int = 50, start: float = 0.5,
                       end: float = 0.999) -> np.ndarray:
    """Ascending thresholds spaced geometrically in distance from 1."""
    if not 0 <= start < end < 1:
        raise ValueError("need 0 <= start < end < 1")
    steps = np.geomspace(1.0 - start, 1.0 - end, count)
    return 1.0 - steps


def sweep_network_curve(clf: ModularClassifier, test: Dataset,
                        thetas) -> list[CurvePoint]:
    """Evaluate the distributed classifier across an ascending threshold
    grid with the fallback k held fixed."""
    thetas = np.asarray(thetas, dtype=np.float64)
    if np.any(thetas < 0) or np.any(thetas > 1):
        raise ValueError("thetas must lie in [0, 1]")
    if np.any(np.diff(thetas) < 0):
        raise ValueError("thetas must be ascending")
    outputs = _network_outputs(clf, test.features)
    knn_lab = unanimity_labels(
        neighbor_label_table(clf.refset, test.features, clf.k), clf.k)
    curve = []
    for theta in thetas:
        decided, sources = decide_from_outputs(outputs, clf.expert_labels,
                                               float(theta), knn_lab)
        curve.append(_metrics(decided, sources, test.labels)
                     .curve_point(float(theta)))
    return curve


def sweep_knn_curve(refset: ReferenceSet, test: Dataset, ks) -> list[CurvePoint]:
    """Unanimity k-NN operating points, one per k (given descending:
    recognition rises as k falls, peaking at k = 1)."""
    ks = [int(k) for k in ks]
    if any(k < 1 for k in ks):
        raise ValueError("ks must be >= 1")
    if any(k > refset.n for k in ks):
        raise ValueError("ks cannot exceed the reference-set size")
    table = neighbor_label_table(refset, test.features, max(ks))
    curve = []
    for k in ks:
        decided = unanimity_labels(table, k)
        sources = np.full(test.n, -1, dtype=np.int64)
        curve.append(_metrics(decided, sources, test.labels).curve_point(k))
    return curve


def sweep_single_mlp_curve(network: Network, test: Dataset,
                           thetas) -> list[CurvePoint]:
    """Reference one-network classifier: accept the argmax class when the
    maximum output reaches theta, otherwise reject."""
    thetas = np.asarray(thetas, dtype=np.float64)
    outs = batch_forward(network, test.features)
    maxv = outs.max(axis=1)
    pred = outs.argmax(axis=1).astype(np.int64)
    curve = []
    for theta in thetas:
        decided = np.where(maxv >= theta, pred, -1)
        sources = np.zeros(test.n, dtype=np.int64)
        curve.append(_metrics(decided, sources, test.labels)
                     .curve_point(float(theta)))
    return curve


def train_baseline(train: Dataset, hidden: tuple[int, ...] = (50, 20),
                   params: TrainParams = TrainParams(max_epochs=200)) -> Network:
    """The non-modular reference network: one output unit per class,
    trained on the whole set."""
    n_out = int(train.labels.max()) + 1
    layout = Layout(inputs=train.dim, hidden=tuple(hidden), outputs=n_out)
    net = init_network(layout, seed=[params.seed, 999])
    train_multiclass(net, train.features, train.labels, params)
    return net


# -- persistence ---------------------------------------------------------

def classifier_to_dict(clf: ModularClassifier) -> dict:
    return {
        "experts": [
            {
                "label": int(e.label),
                "converged": bool(e.converged),
                "rung": int(e.rung),
                "epochs": int(e.epochs),
                "size": int(e.size),
                "network": e.network.to_json_dict(),
            }
            for e in clf.experts
        ],
        "refset_kind": clf.refset_kind,
        "refset_ids": [int(i) for i in clf.refset.ids],
        "k": int(clf.k),
        "theta": float(clf.theta),
        "label_names": list(clf.label_names),
        "degraded": bool(clf.degraded),
        "info": None if clf.info is None else {
            "alpha": clf.info.alpha,
            "n_clusters": clf.info.n_clusters,
            "n_islets": clf.info.n_islets,
            "coverage": clf.info.coverage,
        },
    }


def classifier_from_dict(data: dict, train: Dataset) -> ModularClassifier:
    """Rebuild a classifier bundle; the reference set is reconstructed
    from the training dataset via the stored point ids."""
    experts = [
        IsletExpert(
            network=Network.from_json_dict(e["network"]),
            label=int(e["label"]),
            converged=bool(e["converged"]),
            rung=int(e["rung"]),
            epochs=int(e["epochs"]),
            size=int(e["size"]),
        )
        for e in data["experts"]
    ]
    refset = ReferenceSet.from_dataset(train, np.array(data["refset_ids"]))
    info = data.get("info")
    return ModularClassifier(
        experts=experts,
        refset=refset,
        refset_kind=data["refset_kind"],
        k=int(data["k"]),
        theta=float(data["theta"]),
        label_names=tuple(data.get("label_names", ())),
        degraded=bool(data.get("degraded", False)),
        info=None if info is None else BuildInfo(**info),
    )


def curve_to_csv_rows(curve: list[CurvePoint]) -> list[str]:
    rows = [CURVE_HEADER]
    for p in curve:
        g = float(p.theta_or_k)
        g_txt = str(int(g)) if g.is_integer() else repr(g)
        rows.append(f"{g_txt},{float(p.recognition)!r},{float(p.error)!r},"
                    f"{float(p.rejection)!r}")
    return rows


def curve_from_csv_rows(rows: list[str]) -> list[CurvePoint]:
    body = [r for r in rows if r and not r.startswith("#")]
    if not body or body[0] != CURVE_HEADER:
        raise ValueError("curve CSV must start with the standard header")
    curve = []
    for row in body[1:]:
        g, rec, err, rej = row.split(",")
        curve.append(CurvePoint(float(g), float(rec), float(err), float(rej)))
    return curve


# -- cross-validation ------------------------------------------------------

@dataclass
class FoldResult:
    fold: int
    distributed: list[CurvePoint]
    knn: list[CurvePoint]
    single_mlp: list[CurvePoint]
    classifier: ModularClassifier

    def curves(self) -> dict[str, list[CurvePoint]]:
        return {"distributed": self.distributed, "knn": self.knn,
                "single_mlp": self.single_mlp}


@dataclass
class CrossvalResult:
    folds: list[FoldResult]
    averaged: dict[str, list[CurvePoint]]


def average_curves(curves: list[list[CurvePoint]]) -> list[CurvePoint]:
    """Pointwise mean of matching curves (same grid at every index)."""
    length = {len(c) for c in curves}
    if len(length) != 1:
        raise ValueError("curves must share one grid")
    out = []
    for i in range(length.pop()):
        grid = {c[i].theta_or_k for c in curves}
        if len(grid) != 1:
            raise ValueError("curves must share one grid")
        out.append(CurvePoint(
            theta_or_k=grid.pop(),
            recognition=float(np.mean([c[i].recognition for c in curves])),
            error=float(np.mean([c[i].error for c in curves])),
            rejection=float(np.mean([c[i].rejection for c in curves])),
        ))
    return out


def run_crossval(dataset: Dataset, folds: int, config: PipelineConfig,
                 thetas=None, ks=None,
                 baseline_hidden: tuple[int, ...] = (50, 20),
                 baseline_params: TrainParams | None = None) -> CrossvalResult:
    """The cross-validation curve protocol: per fold, build the modular
    classifier and the two reference classifiers on the training part and
    sweep all three curves on the held-out part."""
    from .dataset import kfold_split

    if thetas is None:
        thetas = default_theta_grid()
    if ks is None:
        ks = list(range(10, 0, -1))
    if baseline_params is None:
        baseline_params = replace(config.train, max_epochs=200)

    results = []
    for fold, (train_ds, test_ds) in enumerate(
            kfold_split(dataset, folds, seed=config.train.seed)):
        clf = build(train_ds, config)
        baseline = train_baseline(train_ds, baseline_hidden, baseline_params)
        # The reference k-NN always searches the whole training fold, even
        # when the distributed classifier falls back to the residual only.
        knn_ref = ReferenceSet.from_dataset(train_ds)
        ks_fold = [k for k in ks if k <= knn_ref.n]
        results.append(FoldResult(
            fold=fold,
            distributed=sweep_network_curve(clf, test_ds, thetas),
            knn=sweep_knn_curve(knn_ref, test_ds, ks_fold),
            single_mlp=sweep_single_mlp_curve(baseline, test_ds, thetas),
            classifier=clf,
        ))
    averaged = {
        name: average_curves([f.curves()[name] for f in results])
        for name in ("distributed", "knn", "single_mlp")
    }
    return CrossvalResult(folds=results, averaged=averaged)
