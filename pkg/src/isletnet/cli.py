"""Pipeline driver: every stage as a subcommand, emitting seeded,
hash-stamped CSV/JSON artifacts.

Exit codes: 0 success, 2 config error, 3 data error, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
import tempfile

import numpy as np

from . import ensemble
from .config import ConfigError, RunConfig, config_hash, load_run_config
from .dataset import (DataError, Dataset, load_csv_dataset, save_csv_dataset,
                      synth_density_variation)
from .hierarchy import Dendrogram, build_dendrogram, pairwise_distances
from .islets import detect_islets, islet_coverage
from .knn import ReferenceSet
from .mlp import Network
from .multicut import Clustering, multilevel_cut

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-artifact-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: str, payload: dict, cfg: RunConfig) -> None:
    doc = {
        "meta": {
            "config_hash": config_hash(cfg),
            "seed": cfg.seed,
            # Excluded from reproducibility comparisons.
            "created_at": datetime.datetime.now(datetime.timezone.utc)
            .isoformat(timespec="seconds"),
        },
        **payload,
    }
    _atomic_write(path, json.dumps(doc, sort_keys=True,
                                   separators=(",", ":")) + "\n")


def _read_json(path: str, *required: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None
    for key in required:
        if key not in doc:
            raise DataError(f"{path}: missing {key!r} section")
    return doc


def _write_curve(path: str, curve, cfg: RunConfig) -> None:
    lines = [f"# config_hash={config_hash(cfg)} seed={cfg.seed}"]
    lines.extend(ensemble.curve_to_csv_rows(curve))
    _atomic_write(path, "\n".join(lines) + "\n")


def _load_data(path: str, cfg: RunConfig) -> Dataset:
    return load_csv_dataset(path, skip_header=cfg.csv_header)


def _load_queries(path: str, cfg: RunConfig) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if cfg.csv_header and lines:
        lines = lines[1:]
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            rows.append([float(p) for p in line.split(",")])
        except ValueError as exc:
            raise DataError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no query rows")
    if len({len(r) for r in rows}) != 1:
        raise DataError(f"{path}: inconsistent query dimensions")
    return np.array(rows, dtype=np.float64)


# -- commands ------------------------------------------------------------

def cmd_synth(args, cfg: RunConfig) -> int:
    seed = cfg.seed if args.seed is None else args.seed
    if args.preset != "fig2":
        raise ConfigError(f"unknown preset {args.preset!r}")
    ds = synth_density_variation(seed=seed)
    header = f"# config_hash={config_hash(cfg)} seed={seed}\n"
    rows = []
    for i in range(ds.n):
        feats = ",".join(repr(float(v)) for v in ds.features[i])
        rows.append(f"{feats},{ds.class_name(int(ds.labels[i]))}")
    _atomic_write(args.out, header + "\n".join(rows) + "\n")
    print(f"synth: wrote {ds.n} points, {ds.classes.size} clusters -> {args.out}")
    return EXIT_OK


def cmd_cluster(args, cfg: RunConfig) -> int:
    ds = _load_data(args.data, cfg)
    pipeline = cfg.pipeline()
    dnd = build_dendrogram(pairwise_distances(ds), pipeline.linkage)
    _write_json(args.out, {"dendrogram": dnd.to_json_dict()}, cfg)
    print(f"cluster: {ds.n} points -> dendrogram with {ds.n - 1} merges "
          f"-> {args.out}")
    return EXIT_OK


def cmd_cut(args, cfg: RunConfig) -> int:
    doc = _read_json(args.dendrogram, "dendrogram")
    dnd = Dendrogram.from_json_dict(doc["dendrogram"])
    pipeline = cfg.pipeline()
    cut_cfg = pipeline.cut
    if args.alpha is not None:
        from .multicut import CutConfig
        cut_cfg = CutConfig(alpha=args.alpha, bins=cut_cfg.bins,
                            min_nodes=cut_cfg.min_nodes)
    clustering = multilevel_cut(dnd, cut_cfg)
    _write_json(args.out, {"clustering": clustering.to_json_dict(),
                           "alpha": cut_cfg.alpha}, cfg)
    print(f"cut: alpha={cut_cfg.alpha} -> {clustering.n_clusters} clusters "
          f"-> {args.out}")
    return EXIT_OK


def cmd_islets(args, cfg: RunConfig) -> int:
    dnd = Dendrogram.from_json_dict(_read_json(args.dendrogram, "dendrogram")["dendrogram"])
    clustering = Clustering.from_json_dict(_read_json(args.clustering, "clustering")["clustering"])
    ds = _load_data(args.data, cfg)
    if ds.n != dnd.n_leaves:
        raise DataError(
            f"dataset has {ds.n} points but dendrogram has {dnd.n_leaves} leaves")
    pipeline = cfg.pipeline()
    partition = detect_islets(dnd, clustering, ds.labels, pipeline.islet)
    coverage = islet_coverage(partition)
    _write_json(args.out, {"partition": partition.to_json_dict(),
                           "coverage": coverage}, cfg)
    print(f"islets: {len(partition.islets)} islets (P={pipeline.islet.min_size}), "
          f"coverage {coverage:.1%} -> {args.out}")
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    ds = _load_data(args.data, cfg)
    pipeline = cfg.pipeline()
    clf = ensemble.build(ds, pipeline)
    payload = {"classifier": ensemble.classifier_to_dict(clf), "baseline": None}
    if not args.no_baseline:
        from .mlp import TrainParams
        baseline = ensemble.train_baseline(
            ds, cfg.baseline_hidden,
            TrainParams(eta=cfg.eta, momentum=cfg.momentum,
                        max_epochs=cfg.baseline_epochs, seed=cfg.seed))
        payload["baseline"] = baseline.to_json_dict()
    _write_json(args.out, payload, cfg)
    info = clf.info
    extra = " (degraded to pure k-NN)" if clf.degraded else ""
    print(f"train: {info.n_islets} islets, coverage {info.coverage:.1%}, "
          f"{len(clf.experts)} networks{extra} -> {args.out}")
    return EXIT_OK


def _load_bundle(bundle_path: str, train_path: str, cfg: RunConfig):
    doc = _read_json(bundle_path, "classifier")
    train_ds = _load_data(train_path, cfg)
    try:
        clf = ensemble.classifier_from_dict(doc["classifier"], train_ds)
    except (KeyError, IndexError, ValueError) as exc:
        raise DataError(f"{bundle_path}: malformed bundle: {exc}") from None
    baseline = None
    if doc.get("baseline"):
        baseline = Network.from_json_dict(doc["baseline"])
    return clf, baseline, train_ds


def cmd_classify(args, cfg: RunConfig) -> int:
    clf, _, _ = _load_bundle(args.bundle, args.train, cfg)
    queries = _load_queries(args.queries, cfg)
    if queries.shape[1] != clf.refset.features.shape[1]:
        raise DataError(
            f"queries have dimension {queries.shape[1]}, classifier expects "
            f"{clf.refset.features.shape[1]}")
    names = clf.label_names
    lines = [f"# config_hash={config_hash(cfg)} seed={cfg.seed}",
             "query,label,source"]
    n_accept = 0
    for i, q in enumerate(queries):
        decision = ensemble.classify(clf, q)
        if decision.accepted:
            n_accept += 1
            name = (names[decision.label] if decision.label < len(names)
                    else str(decision.label))
            source = ("knn" if decision.source == "knn"
                      else f"network{decision.source}")
            lines.append(f"{i},{name},{source}")
        else:
            lines.append(f"{i},REJECT,")
    _atomic_write(args.out, "\n".join(lines) + "\n")
    print(f"classify: {n_accept}/{len(queries)} accepted -> {args.out}")
    return EXIT_OK


def cmd_curve(args, cfg: RunConfig) -> int:
    clf, baseline, train_ds = _load_bundle(args.bundle, args.train, cfg)
    if baseline is None:
        raise DataError("bundle has no baseline network; rerun train without "
                        "--no-baseline to produce the single-MLP curve")
    test_ds = _load_data(args.test, cfg)
    thetas = cfg.theta_grid()
    ks = [k for k in cfg.knn_grid() if k <= train_ds.n]
    knn_ref = ReferenceSet.from_dataset(train_ds)
    os.makedirs(args.out_dir, exist_ok=True)
    curves = {
        "distributed": ensemble.sweep_network_curve(clf, test_ds, thetas),
        "knn": ensemble.sweep_knn_curve(knn_ref, test_ds, ks),
        "single_mlp": ensemble.sweep_single_mlp_curve(baseline, test_ds, thetas),
    }
    for name, curve in curves.items():
        _write_curve(os.path.join(args.out_dir, f"{name}.csv"), curve, cfg)
    print(f"curve: wrote {', '.join(curves)} -> {args.out_dir}")
    return EXIT_OK


def cmd_crossval(args, cfg: RunConfig) -> int:
    ds = _load_data(args.data, cfg)
    folds = cfg.folds if args.folds is None else args.folds
    if folds < 2:
        raise ConfigError("folds must be >= 2")
    pipeline = cfg.pipeline()
    from .mlp import TrainParams
    baseline_params = TrainParams(eta=cfg.eta, momentum=cfg.momentum,
                                  max_epochs=cfg.baseline_epochs, seed=cfg.seed)
    result = ensemble.run_crossval(
        ds, folds, pipeline, thetas=cfg.theta_grid(), ks=cfg.knn_grid(),
        baseline_hidden=cfg.baseline_hidden, baseline_params=baseline_params)
    os.makedirs(args.out_dir, exist_ok=True)
    for fold_result in result.folds:
        for name, curve in fold_result.curves().items():
            path = os.path.join(args.out_dir,
                                f"fold{fold_result.fold}_{name}.csv")
            _write_curve(path, curve, cfg)
    for name, curve in result.averaged.items():
        _write_curve(os.path.join(args.out_dir, f"avg_{name}.csv"), curve, cfg)
    for fold_result in result.folds:
        info = fold_result.classifier.info
        print(f"crossval: fold {fold_result.fold}: {info.n_islets} islets, "
              f"coverage {info.coverage:.1%}")
    print(f"crossval: wrote {3 * (len(result.folds) + 1)} curve files "
          f"-> {args.out_dir}")
    return EXIT_OK


# -- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isletnet",
        description="Multi-level hierarchical clustering and the modular "
                    "islet-network classifier, one subcommand per stage.")
    parser.add_argument("--config", help="key = value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    p.add_argument("--preset", default="fig2")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("cluster", help="build the dendrogram")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("cut", help="multi-level cut of a dendrogram")
    p.add_argument("--dendrogram", required=True)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cut)

    p = sub.add_parser("islets", help="extract pure clusters and residual")
    p.add_argument("--dendrogram", required=True)
    p.add_argument("--clustering", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_islets)

    p = sub.add_parser("train", help="build the full classifier bundle")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-baseline", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="label a CSV of query vectors")
    p.add_argument("--bundle", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("curve", help="error/recognition/rejection curves")
    p.add_argument("--bundle", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("crossval", help="k-fold curve protocol")
    p.add_argument("--data", required=True)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_crossval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = load_run_config(args.config)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # invariant violations and bugs
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def console_main() -> None:
    raise SystemExit(main())
