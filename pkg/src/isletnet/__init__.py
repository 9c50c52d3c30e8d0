"""Density-tolerant multi-level hierarchical clustering and a modular
classifier of cooperating islet networks with a k-NN fallback."""

from .dataset import (DataError, Dataset, LabeledPoint, kfold_split,
                      load_csv_dataset, load_dataset, load_idx_dataset,
                      pyramid_features, synth_density_variation)
from .hierarchy import (Dendrogram, DistanceMatrix, LinkageParams,
                        build_dendrogram, lance_williams_update,
                        pairwise_distances, subtree_heights)
from .multicut import (Clustering, CutConfig, gap_cut, multilevel_cut,
                       search_alpha, single_cut_baseline,
                       variation_coefficient)
from .islets import (Islet, IsletConfig, IsletPartition, detect_islets,
                     islet_coverage)
from .mlp import (DEFAULT_LADDER, Layout, Network, TrainParams,
                  escalate_architecture, forward, init_network, train)
from .knn import Decision, ReferenceSet, knn_decide, nearest
from .ensemble import (CurvePoint, ModularClassifier, PipelineConfig, build,
                       classify, evaluate, run_crossval, sweep_knn_curve,
                       sweep_network_curve, sweep_single_mlp_curve)
from .config import ConfigError, RunConfig, config_hash, load_run_config

__version__ = "0.1.0"
