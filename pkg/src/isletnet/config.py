"""Run configuration: a flat key=value file mirrored into the per-module
parameter objects, hashed for artifact provenance."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace

from .ensemble import PipelineConfig
from .hierarchy import LinkageParams
from .islets import IsletConfig
from .mlp import TrainParams
from .multicut import CutConfig


class ConfigError(ValueError):
    """A config file or value violates the schema."""


@dataclass(frozen=True)
class RunConfig:
    """Flat view of every tunable the pipeline commands accept."""

    seed: int = 0
    linkage: str = "flexible"
    linkage_beta: float = -0.25
    alpha: float = 1.0
    alpha_search: bool = False
    alpha_hi: float = 10.0
    alpha_iterations: int = 12
    alpha_holdout: float = 0.25
    bins: int = 10
    min_nodes: int = 2
    min_islet_size: int = 15
    eta: float = 0.1
    momentum: float = 0.9
    max_epochs: int = 500
    neg_ratio: float | None = None
    refset: str = "full"
    knn_k: int = 3
    theta: float = 0.9
    theta_count: int = 50
    theta_start: float = 0.5
    theta_end: float = 0.999
    knn_kmax: int = 10
    folds: int = 5
    baseline_hidden: tuple[int, ...] = (50, 20)
    baseline_epochs: int = 200
    csv_header: bool = False

    def pipeline(self) -> PipelineConfig:
        """Typed per-module parameter objects; raises ConfigError when a
        value violates a module invariant."""
        try:
            return PipelineConfig(
                linkage=LinkageParams(name=self.linkage, beta=self.linkage_beta),
                cut=CutConfig(alpha=self.alpha, bins=self.bins,
                              min_nodes=self.min_nodes),
                islet=IsletConfig(min_size=self.min_islet_size),
                train=TrainParams(eta=self.eta, momentum=self.momentum,
                                  max_epochs=self.max_epochs, seed=self.seed),
                neg_ratio=self.neg_ratio,
                refset_kind=self.refset,
                knn_k=self.knn_k,
                theta=self.theta,
                alpha_search=self.alpha_search,
                alpha_hi=self.alpha_hi,
                alpha_iterations=self.alpha_iterations,
                alpha_holdout=self.alpha_holdout,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def theta_grid(self):
        from .ensemble import default_theta_grid
        return default_theta_grid(self.theta_count, self.theta_start,
                                  self.theta_end)

    def knn_grid(self) -> list[int]:
        return list(range(self.knn_kmax, 0, -1))


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key: str, text: str):
    ftype = _FIELD_TYPES[key]
    text = text.strip()
    if key == "neg_ratio":
        if text.lower() in ("none", ""):
            return None
        return float(text)
    if key == "baseline_hidden":
        try:
            sizes = tuple(int(p) for p in text.split(",") if p.strip())
        except ValueError:
            raise ConfigError(f"{key}: expected comma-separated ints, got {text!r}")
        if not sizes:
            raise ConfigError(f"{key}: needs at least one layer size")
        return sizes
    if ftype == "bool":
        if text.lower() in ("true", "yes", "1"):
            return True
        if text.lower() in ("false", "no", "0"):
            return False
        raise ConfigError(f"{key}: expected true/false, got {text!r}")
    try:
        if ftype == "int":
            return int(text)
        if ftype == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected {ftype}, got {text!r}") from None
    return text


def parse_config_text(text: str) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw)
    cfg = RunConfig(**values)
    cfg.pipeline()  # validate module-level invariants eagerly
    return cfg


def load_run_config(path=None) -> RunConfig:
    """Read a config file, or return the defaults when no path is given."""
    if path is None:
        return RunConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text)


def config_lines(cfg: RunConfig) -> list[str]:
    """Canonical key = value rendering, sorted by key."""
    out = []
    for f in sorted(fields(RunConfig), key=lambda f: f.name):
        v = getattr(cfg, f.name)
        if f.name == "baseline_hidden":
            v = ",".join(str(s) for s in v)
        elif v is None:
            v = "none"
        elif isinstance(v, bool):
            v = "true" if v else "false"
        out.append(f"{f.name} = {v}")
    return out


def config_hash(cfg: RunConfig) -> str:
    """Short stable digest of the canonical config rendering."""
    blob = "\n".join(config_lines(cfg)).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]
