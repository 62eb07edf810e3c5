"""Command-line interface.

One subcommand per stage plus `pipeline` (config-driven end-to-end run),
`baseline`, `bench`, and `validate`. Exit codes: 0 success, 2 config
error, 3 data/format error, 4 infeasible budget.
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import ConfigError, DataError, InfeasibleBudgetError, PruneforgeError
from .assign import assign_nearest, pool_by_cluster, read_assignment, write_assignment
from .baselines import (
    BASELINE_STRATEGIES,
    cluster_nearest_select,
    moderate_ds_select,
    random_select,
)
from .bench import (
    SyntheticSpec,
    compare_strategies,
    draw_component_means,
    generate_synthetic,
    reference_vs_full_study,
    run_scaling_study,
    write_report,
)
from .cluster import ClusterConfig, load_centroids, save_centroids, spherical_kmeans
from .config import render_config, validate_config
from .embedding import l2_normalize, read_embeddings
from .entropy import (
    ENTROPY_MODES,
    GRAYSCALE_POLICIES,
    EntropyConfig,
    entropy_filter,
    read_scores,
    write_rejects,
    write_scores,
)
from .manifest import load_manifest, write_manifest, write_selection
from .pipeline import (
    ASSIGNMENTS_FILE,
    CENTROIDS_FILE,
    REJECTS_FILE,
    SCORES_FILE,
    SELECTION_FILE,
    STAGE1_MANIFEST,
    STATS_FILE,
    _subset_embeddings,
    run_pipeline,
)
from .sample import (
    SamplingConfig,
    compute_budget,
    stratified_select,
    write_selection_stats,
)
from ._util import derive_seed

BENCH_REPORT_FILE = "bench_report.tsv"
BENCH_ROWS_FILE = "bench_rows.csv"


def _out_dir(args) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return args.out_dir


def _resolve_budget_args(args, n_after: int, n_original: int) -> int:
    if (args.budget is None) == (args.pruning_ratio is None):
        raise ConfigError("exactly one of --budget and --pruning-ratio is required")
    if args.budget is not None:
        if args.budget < 1:
            raise ConfigError("--budget must be >= 1")
        if args.budget > n_after:
            raise InfeasibleBudgetError(
                f"budget {args.budget} exceeds the {n_after} available samples"
            )
        return args.budget
    return compute_budget(n_after, args.pruning_ratio, n_original)


def _cmd_entropy(args) -> int:
    manifest = load_manifest(args.manifest)
    cfg = EntropyConfig(
        mode=args.mode,
        tau=args.tau,
        keep_fraction=args.keep_fraction,
        levels=args.levels,
        grayscale_policy=args.grayscale_policy,
    )
    kept, scores, rejects = entropy_filter(manifest, cfg, workers=args.workers)
    out = _out_dir(args)
    write_manifest(os.path.join(out, STAGE1_MANIFEST), kept)
    write_scores(os.path.join(out, SCORES_FILE), scores)
    write_rejects(os.path.join(out, REJECTS_FILE), rejects)
    print(f"kept {len(kept)} of {len(manifest)} records ({len(rejects)} rejects)")
    print(f"wrote {os.path.join(out, STAGE1_MANIFEST)}")
    return 0


def _cmd_cluster(args) -> int:
    reference = l2_normalize(read_embeddings(args.embeddings))
    cfg = ClusterConfig(
        k=args.k,
        seed=derive_seed(args.seed, "cluster"),
        max_iters=args.max_iters,
        tol=args.tol,
        init=args.init,
    )
    centroids = spherical_kmeans(reference, cfg, workers=args.workers)
    out = _out_dir(args)
    save_centroids(centroids, os.path.join(out, CENTROIDS_FILE))
    meta = centroids.meta
    print(
        f"{cfg.k} centroids from {reference.n} rows; "
        f"objective {meta.objective:.6f} after {meta.iterations} iterations"
    )
    print(f"wrote {os.path.join(out, CENTROIDS_FILE)}")
    return 0


def _cmd_assign(args) -> int:
    corpus = read_embeddings(args.embeddings)
    if args.manifest is not None:
        survivors = load_manifest(args.manifest)
        corpus = _subset_embeddings(corpus, survivors.ids())
    corpus = l2_normalize(corpus)
    centroids = load_centroids(args.centroids)
    table = assign_nearest(corpus, centroids, workers=args.workers)
    out = _out_dir(args)
    write_assignment(os.path.join(out, ASSIGNMENTS_FILE), table)
    print(f"assigned {table.n} rows to {table.k} clusters")
    print(f"wrote {os.path.join(out, ASSIGNMENTS_FILE)}")
    return 0


def _cmd_sample(args) -> int:
    table = read_assignment(args.assignments)
    n_original = args.n_original if args.n_original is not None else table.n
    budget = _resolve_budget_args(args, n_after=table.n, n_original=n_original)
    pools = pool_by_cluster(table)
    result = stratified_select(pools, SamplingConfig(budget=budget))
    if args.scores is not None:
        scores = read_scores(args.scores)
        for entry in result.entries:
            entry.entropy_bits = scores.get(entry.id)
    out = _out_dir(args)
    write_selection(os.path.join(out, SELECTION_FILE), result.entries)
    write_selection_stats(os.path.join(out, STATS_FILE), result)
    print(f"selected {len(result.entries)} ({result.reallocated_count} reallocated)")
    print(f"wrote {os.path.join(out, SELECTION_FILE)}")
    return 0


def _cmd_baseline(args) -> int:
    manifest = load_manifest(args.manifest)
    budget = _resolve_budget_args(args, n_after=len(manifest), n_original=len(manifest))
    if args.strategy == "random":
        result = random_select(manifest, budget, seed=derive_seed(args.seed, "baseline"))
    else:
        if args.embeddings is None:
            raise ConfigError(f"strategy={args.strategy} requires --embeddings")
        corpus = read_embeddings(args.embeddings)
        rows = l2_normalize(_subset_embeddings(corpus, manifest.ids()))
        cluster_seed = derive_seed(args.seed, "cluster")
        cfg = ClusterConfig(k=args.k, seed=cluster_seed)
        if args.strategy == "moderate_ds":
            centroids = spherical_kmeans(rows, cfg, workers=args.workers)
            table = assign_nearest(rows, centroids, workers=args.workers)
            result = moderate_ds_select(rows, table, budget)
        else:
            result = cluster_nearest_select(
                rows, k=args.k, budget=budget, seed=cluster_seed,
                workers=args.workers, cluster_config=cfg,
            )
    out = _out_dir(args)
    write_selection(os.path.join(out, SELECTION_FILE), result.entries)
    write_selection_stats(os.path.join(out, STATS_FILE), result)
    print(f"{args.strategy}: selected {len(result.entries)} of {len(manifest)}")
    print(f"wrote {os.path.join(out, SELECTION_FILE)}")
    return 0


def _csv_ints(text: str, what: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"{what} expects comma-separated integers, got {text!r}") from None


def _cmd_bench(args) -> int:
    if args.study == "scaling":
        report = run_scaling_study(
            _csv_ints(args.sizes, "--sizes"),
            k=args.k,
            f_d=args.f_d,
            seed=args.seed,
            repeats=args.repeats,
            workers=args.workers,
        )
    elif args.study == "strategies":
        means = draw_component_means(args.k_true, args.f_d, args.seed)
        corpus, labels = generate_synthetic(
            SyntheticSpec(
                n=args.n, f_d=args.f_d, k_true=args.k_true,
                imbalance=args.imbalance, noise_fraction=args.noise_fraction,
                seed=args.seed,
            ),
            means=means,
        )
        reference, _ = generate_synthetic(
            SyntheticSpec(n=args.ref_n, f_d=args.f_d, k_true=args.k_true, seed=args.seed + 1),
            means=means,
        )
        report = compare_strategies(
            corpus, labels, reference,
            budgets=_csv_ints(args.budgets, "--budgets"),
            k=args.k, seed=args.seed, workers=args.workers,
        )
    else:
        means = draw_component_means(args.k_true, args.f_d, args.seed)
        corpus, _ = generate_synthetic(
            SyntheticSpec(n=args.n, f_d=args.f_d, k_true=args.k_true, seed=args.seed),
            means=means,
        )
        reference, _ = generate_synthetic(
            SyntheticSpec(n=args.ref_n, f_d=args.f_d, k_true=args.k_true, seed=args.seed + 1),
            means=means,
        )
        report = reference_vs_full_study(
            corpus, reference, k=args.k, max_iters=args.max_iters,
            budget=args.budget, seed=args.seed, workers=args.workers,
        )
    out = _out_dir(args)
    write_report(
        os.path.join(out, BENCH_REPORT_FILE),
        report,
        csv_path=os.path.join(out, BENCH_ROWS_FILE),
    )
    for key, value in report.values.items():
        print(f"{key}\t{value:.6f}" if isinstance(value, float) else f"{key}\t{value}")
    print(f"wrote {os.path.join(out, BENCH_REPORT_FILE)}")
    return 0


def _cmd_pipeline(args) -> int:
    cfg = validate_config(args.config)
    if args.out_dir is not None:
        cfg.out_dir = os.path.abspath(args.out_dir)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.cluster.seed = derive_seed(args.seed, "cluster")
    if args.workers is not None:
        cfg.workers = args.workers
    result = run_pipeline(cfg, log=print)
    print(f"selection: {os.path.join(cfg.out_dir, SELECTION_FILE)} ({len(result.entries)} entries)")
    return 0


def _cmd_validate(args) -> int:
    cfg = validate_config(args.config)
    sys.stdout.write(render_config(cfg))
    for line in cfg.applied_defaults:
        print(f"# applied default: {line}")
    print("# config ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pruneforge",
        description="entropy filtering plus reference-guided cluster sampling for image corpora",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default="pruneforge_out", help="directory for outputs")
    common.add_argument("--seed", type=int, default=0, help="top-level random seed")
    common.add_argument("--workers", type=int, default=1, help="parallel workers (outputs are invariant to this)")

    p = sub.add_parser("entropy", parents=[common], help="score rasters, apply the stage-I cut")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", required=True, choices=ENTROPY_MODES)
    p.add_argument("--tau", type=float, help="bits threshold (threshold mode)")
    p.add_argument("--keep-fraction", type=float, help="fraction kept (top_fraction mode)")
    p.add_argument("--levels", type=int, default=256)
    p.add_argument("--grayscale-policy", default="luma_601", choices=GRAYSCALE_POLICIES)
    p.set_defaults(func=_cmd_entropy)

    p = sub.add_parser("cluster", parents=[common], help="spherical k-means over reference embeddings")
    p.add_argument("--embeddings", required=True, help="reference embedding file")
    p.add_argument("--k", type=int, default=200)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--init", default="kmeans_pp", choices=("kmeans_pp", "random_rows"))
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("assign", parents=[common], help="nearest-centroid assignment")
    p.add_argument("--embeddings", required=True, help="corpus embedding file")
    p.add_argument("--centroids", required=True, help="centroid file from `cluster`")
    p.add_argument("--manifest", help="optional manifest restricting which rows are assigned")
    p.set_defaults(func=_cmd_assign)

    p = sub.add_parser("sample", parents=[common], help="quota-balanced selection from assignments")
    p.add_argument("--assignments", required=True)
    p.add_argument("--budget", type=int)
    p.add_argument("--pruning-ratio", type=float)
    p.add_argument("--n-original", type=int, help="corpus size the pruning ratio refers to")
    p.add_argument("--scores", help="optional entropy score sidecar to annotate entries")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("baseline", parents=[common], help="comparison selection strategies")
    p.add_argument("--strategy", required=True, choices=BASELINE_STRATEGIES)
    p.add_argument("--manifest", required=True)
    p.add_argument("--embeddings", help="corpus embeddings (moderate_ds, cluster_nearest)")
    p.add_argument("--k", type=int, default=200)
    p.add_argument("--budget", type=int)
    p.add_argument("--pruning-ratio", type=float)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("bench", parents=[common], help="synthetic studies: timing and strategy quality")
    p.add_argument("--study", required=True, choices=("scaling", "strategies", "reference"))
    p.add_argument("--sizes", default="100000,200000,400000", help="scaling study corpus sizes")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--n", type=int, default=20000, help="corpus rows (strategies/reference)")
    p.add_argument("--ref-n", type=int, default=2000, help="reference rows (strategies/reference)")
    p.add_argument("--k", type=int, default=200)
    p.add_argument("--f-d", type=int, default=128)
    p.add_argument("--k-true", type=int, default=25)
    p.add_argument("--imbalance", type=float, default=1.5)
    p.add_argument("--noise-fraction", type=float, default=0.05)
    p.add_argument("--budgets", default="3000", help="strategy-comparison budgets")
    p.add_argument("--budget", type=int, default=3000, help="reference study budget")
    p.add_argument("--max-iters", type=int, default=40)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("pipeline", help="run the configured pipeline end to end")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", help="override paths.out_dir")
    p.add_argument("--seed", type=int, help="override run.seed")
    p.add_argument("--workers", type=int, help="override run.workers")
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("validate", help="check a config file, echo the resolved settings")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InfeasibleBudgetError as exc:
        print(f"infeasible budget: {exc}", file=sys.stderr)
        return 4
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except PruneforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
