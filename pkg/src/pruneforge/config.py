"""Declarative run configuration.

Flat, line-oriented text: one `section.key = value` per line, `#` comments,
blank lines ignored. No nesting, no quoting, no type sniffing beyond the
declared key table, so a config diff is always a plain line diff.

Unknown keys are rejected by name (a typo never silently becomes a
default), and every default the validator fills in is echoed back so a run
log records the complete effective configuration. Relative paths resolve
against the config file's own directory, which keeps a config valid when
invoked from anywhere and lets an emitted run-metadata file replay.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .baselines import BASELINE_STRATEGIES
from .cluster import ClusterConfig
from .entropy import EntropyConfig
from ._util import atomic_write_text, derive_seed

STRATEGIES = ("primary",) + BASELINE_STRATEGIES

# full key -> caster; the single source of truth for what may appear
_KEY_TYPES = {
    "paths.manifest": str,
    "paths.embeddings": str,
    "paths.reference_embeddings": str,
    "paths.out_dir": str,
    "entropy.mode": str,
    "entropy.tau": float,
    "entropy.keep_fraction": float,
    "entropy.levels": int,
    "entropy.grayscale_policy": str,
    "cluster.k": int,
    "cluster.max_iters": int,
    "cluster.tol": float,
    "cluster.init": str,
    "sampling.pruning_ratio": float,
    "sampling.budget": int,
    "run.strategy": str,
    "run.seed": int,
    "run.workers": int,
}

_DEFAULTS = {
    "entropy.levels": 256,
    "entropy.grayscale_policy": "luma_601",
    "cluster.k": 200,
    "cluster.max_iters": 100,
    "cluster.tol": 1e-4,
    "cluster.init": "kmeans_pp",
    "run.strategy": "primary",
    "run.seed": 0,
    "run.workers": 1,
}


@dataclass
class PipelineConfig:
    """Fully resolved run settings; see validate_config for the file form."""

    manifest_path: str
    out_dir: str
    embeddings_path: str | None = None
    reference_embeddings_path: str | None = None
    entropy: EntropyConfig | None = None
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    pruning_ratio: float | None = None
    budget: int | None = None
    strategy: str = "primary"
    seed: int = 0
    workers: int = 1
    # defaults the validator applied, e.g. "cluster.k = 200"; informational
    applied_defaults: list[str] = field(default_factory=list, repr=False)


def parse_config_text(text: str, path: str = "<config>") -> dict[str, str]:
    """Raw `full.key -> string value` map; malformed or duplicate lines fail."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected `section.key = value`")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEY_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown config key `{key}`")
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate config key `{key}`")
        if not value:
            raise ConfigError(f"{path}:{lineno}: empty value for `{key}`")
        raw[key] = value
    return raw


def _cast(raw: dict[str, str], path: str) -> dict[str, object]:
    values: dict[str, object] = {}
    for key, text in raw.items():
        caster = _KEY_TYPES[key]
        try:
            values[key] = caster(text)
        except ValueError:
            raise ConfigError(
                f"{path}: `{key}` expects {caster.__name__}, got {text!r}"
            ) from None
    return values


def check_pipeline_config(cfg: PipelineConfig) -> list[str]:
    """All constraint violations, itemized; empty means valid.

    Path-existence checks run here too: a config is only valid at a moment
    when its referenced inputs are actually present.
    """
    problems: list[str] = []
    if cfg.strategy not in STRATEGIES:
        problems.append(f"run.strategy must be one of {STRATEGIES}, got {cfg.strategy!r}")
    if (cfg.pruning_ratio is None) == (cfg.budget is None):
        problems.append("exactly one of sampling.pruning_ratio and sampling.budget is required")
    if cfg.pruning_ratio is not None and not (0.0 < cfg.pruning_ratio < 1.0):
        problems.append("sampling.pruning_ratio must be in (0, 1)")
    if cfg.budget is not None and cfg.budget < 1:
        problems.append("sampling.budget must be >= 1")
    if cfg.seed < 0:
        problems.append("run.seed must be >= 0")
    if cfg.workers < 1:
        problems.append("run.workers must be >= 1")
    # all stage randomness flows from run.seed, so the emitted run-metadata
    # file (which records only run.seed) always replays the run exactly
    if cfg.strategy != "random" and cfg.cluster.seed != derive_seed(cfg.seed, "cluster"):
        problems.append(
            'cluster.seed must equal derive_seed(run.seed, "cluster"); '
            "change run.seed rather than the cluster seed"
        )

    if not cfg.manifest_path:
        problems.append("paths.manifest is required")
    elif not os.path.isfile(cfg.manifest_path):
        problems.append(f"paths.manifest does not exist: {cfg.manifest_path}")
    if not cfg.out_dir:
        problems.append("paths.out_dir is required")

    needs_embeddings = cfg.strategy in ("primary", "moderate_ds", "cluster_nearest")
    if needs_embeddings:
        if cfg.embeddings_path is None:
            problems.append(f"strategy={cfg.strategy} requires paths.embeddings")
        elif not os.path.isfile(cfg.embeddings_path):
            problems.append(f"paths.embeddings does not exist: {cfg.embeddings_path}")

    if cfg.strategy == "primary":
        if cfg.reference_embeddings_path is None:
            problems.append("strategy=primary requires paths.reference_embeddings")
        elif not os.path.isfile(cfg.reference_embeddings_path):
            problems.append(
                f"paths.reference_embeddings does not exist: {cfg.reference_embeddings_path}"
            )
        if cfg.entropy is None:
            problems.append("strategy=primary requires entropy.mode")
        else:
            try:
                cfg.entropy.validate()
            except ConfigError as exc:
                problems.append(str(exc))
    else:
        if cfg.reference_embeddings_path is not None:
            problems.append("paths.reference_embeddings is only used by strategy=primary")
        if cfg.entropy is not None:
            problems.append("entropy settings are only used by strategy=primary")

    try:
        cfg.cluster.validate()
    except ConfigError as exc:
        problems.append(str(exc))
    return problems


def _resolve(base_dir: str, value: str | None) -> str | None:
    if value is None:
        return None
    return os.path.abspath(os.path.join(base_dir, value))


def validate_config(path: str | os.PathLike) -> PipelineConfig:
    """Load, type-check, default-fill, and constraint-check a config file.

    The returned config is fully resolved: absolute paths, every default
    materialized (and echoed in .applied_defaults), and the cluster seed
    derived from the run seed.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise ConfigError(f"config file does not exist: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        raw = parse_config_text(fh.read(), path)
    values = _cast(raw, path)

    applied: list[str] = []
    entropy_requested = any(key.startswith("entropy.") for key in values)

    def fill(key: str):
        if key in values:
            return values[key]
        default = _DEFAULTS[key]
        applied.append(f"{key} = {default}")
        return default

    entropy = None
    if entropy_requested:
        if "entropy.mode" not in values:
            raise ConfigError(f"{path}: entropy settings given without entropy.mode")
        entropy = EntropyConfig(
            mode=values["entropy.mode"],
            tau=values.get("entropy.tau"),
            keep_fraction=values.get("entropy.keep_fraction"),
            levels=fill("entropy.levels"),
            grayscale_policy=fill("entropy.grayscale_policy"),
        )

    explicit_cluster = [key for key in values if key.startswith("cluster.")]
    strategy = fill("run.strategy")
    if strategy == "random" and explicit_cluster:
        raise ConfigError(
            f"{path}: cluster settings are unused by strategy=random: "
            + ", ".join(sorted(explicit_cluster))
        )

    seed = fill("run.seed")
    cluster = ClusterConfig(
        k=fill("cluster.k"),
        seed=derive_seed(seed, "cluster"),
        max_iters=fill("cluster.max_iters"),
        tol=fill("cluster.tol"),
        init=fill("cluster.init"),
    )

    base_dir = os.path.dirname(os.path.abspath(path))
    manifest_raw = values.get("paths.manifest")
    out_dir_raw = values.get("paths.out_dir")
    cfg = PipelineConfig(
        manifest_path=_resolve(base_dir, manifest_raw) if manifest_raw else "",
        out_dir=_resolve(base_dir, out_dir_raw) if out_dir_raw else "",
        embeddings_path=_resolve(base_dir, values.get("paths.embeddings")),
        reference_embeddings_path=_resolve(base_dir, values.get("paths.reference_embeddings")),
        entropy=entropy,
        cluster=cluster,
        pruning_ratio=values.get("sampling.pruning_ratio"),
        budget=values.get("sampling.budget"),
        strategy=strategy,
        seed=seed,
        workers=fill("run.workers"),
        applied_defaults=applied,
    )

    problems = check_pipeline_config(cfg)
    if problems:
        raise ConfigError(f"{path}: " + "; ".join(problems))
    return cfg


def render_config(cfg: PipelineConfig) -> str:
    """The fully resolved config as config-file text (fixed key order)."""
    lines = [
        f"paths.manifest = {cfg.manifest_path}\n",
        f"paths.out_dir = {cfg.out_dir}\n",
    ]
    if cfg.embeddings_path is not None:
        lines.append(f"paths.embeddings = {cfg.embeddings_path}\n")
    if cfg.reference_embeddings_path is not None:
        lines.append(f"paths.reference_embeddings = {cfg.reference_embeddings_path}\n")
    if cfg.entropy is not None:
        lines.append(f"entropy.mode = {cfg.entropy.mode}\n")
        if cfg.entropy.tau is not None:
            lines.append(f"entropy.tau = {cfg.entropy.tau!r}\n")
        if cfg.entropy.keep_fraction is not None:
            lines.append(f"entropy.keep_fraction = {cfg.entropy.keep_fraction!r}\n")
        lines.append(f"entropy.levels = {cfg.entropy.levels}\n")
        lines.append(f"entropy.grayscale_policy = {cfg.entropy.grayscale_policy}\n")
    if cfg.strategy != "random":
        lines.append(f"cluster.k = {cfg.cluster.k}\n")
        lines.append(f"cluster.max_iters = {cfg.cluster.max_iters}\n")
        lines.append(f"cluster.tol = {cfg.cluster.tol!r}\n")
        lines.append(f"cluster.init = {cfg.cluster.init}\n")
    if cfg.pruning_ratio is not None:
        lines.append(f"sampling.pruning_ratio = {cfg.pruning_ratio!r}\n")
    if cfg.budget is not None:
        lines.append(f"sampling.budget = {cfg.budget}\n")
    lines.append(f"run.strategy = {cfg.strategy}\n")
    lines.append(f"run.seed = {cfg.seed}\n")
    lines.append(f"run.workers = {cfg.workers}\n")
    return "".join(lines)


def write_config(path: str | os.PathLike, cfg: PipelineConfig) -> None:
    atomic_write_text(path, render_config(cfg))
