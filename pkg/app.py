"""Command-line entry point for the CStree tools.

Commands:
  learn       -- learn a CStree from a CSV (BHC-CS, fixed or all orderings)
  score       -- BIC of a tree on a CSV
  equiv       -- statistical equivalence of two trees
  class       -- every tree equivalent to a tree, over all orderings
  contexts    -- minimal contexts and context graphs of a tree
  intervene   -- best interventional targets for observational + interventional CSVs
  bootstrap   -- bootstrap BIC of candidate interventional trees
  sample      -- forward-sample a tree with random stage parameters
  simulate    -- run the learner simulation protocol, metrics to CSV
  count       -- exact counts (CStrees, staged trees, Bell, cubical Bell, DAGs)
  export-dot  -- context graphs (or the tree) as Graphviz DOT
  discretize  -- quantile-discretise numeric CSV columns

Usage:
  uv run python app.py learn --data coronary.csv --order auto --seed 0 --out tree.json
  uv run python app.py simulate --p 6 --merge-prob 0.4 --n 100000 --trials 10 --metrics out.csv
  uv run python app.py count --what cstrees --p 4

Exit codes: 0 success, 1 invalid input (CStreeError), 2 internal error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import lib.config as config
from lib.csi import context_graphs, cstree_equivalent, equivalence_class
from lib.dataset import discretize_csv, ingest_csv, rows_frame, write_dataset
from lib.dot_export import context_graphs_dot, contexts_report, tree_dot
from lib.enumeration import COUNT_KINDS, count
from lib.errors import CStreeError, InvalidStagingError
from lib.estimation import bic, random_parameters
from lib.file_lock import write_json, write_text
from lib.interventions import bootstrap_bic, search_targets_over_class
from lib.learning import LearnConfig, learn, sample_rows
from lib.serialization import (
    itree_from_dict,
    load_document,
    load_tree,
    save_tree,
    search_result_to_dict,
    tree_to_dict,
)
from lib.simulation import compare_learners, run_trials, summarize, write_metrics

log = logging.getLogger(__name__)


# ──────────────────────────────────────────────
# Helpers
# ──────────────────────────────────────────────

def _order(names: str | None, variables) -> tuple[int, ...] | None:
    """None for `auto` (every ordering), else the named ordering."""
    if not names or names.strip().lower() == "auto":
        return None
    index = {v.name: i for i, v in enumerate(variables)}
    order = []
    for name in names.split(","):
        name = name.strip()
        if name not in index:
            raise InvalidStagingError(f"unknown variable {name!r} in --order", variable=name)
        order.append(index[name])
    return tuple(order)


def _paths(value: str) -> list[Path]:
    return [Path(p.strip()) for p in value.split(",") if p.strip()]


def _emit(args, data: dict, text: str):
    if args.json:
        print(json.dumps(data, indent=2))
    else:
        print(text)


# ──────────────────────────────────────────────
# Commands
# ──────────────────────────────────────────────

def cmd_learn(args):
    table = ingest_csv(args.data).table()
    order = _order(args.order, table.variables)
    log.debug(f"learn: order={args.order} seed={args.seed}")
    result = learn(table, order, LearnConfig(ordering="all" if order is None else "fixed"))
    if args.out:
        save_tree(result.tree, args.out)
    data = {"tree": tree_to_dict(result.tree), "score": result.score.to_dict(), "seed": args.seed}
    _emit(args, data, f"Learned order {[table.variables[v].name for v in result.tree.order]}: "
                      f"{result.tree.total_stages()} stages, BIC {result.score.bic:.4f}")


def cmd_score(args):
    tree = load_tree(args.tree)
    table = ingest_csv(args.data, tree.variables).table()
    score = bic(tree, table, on_undefined=args.undefined)
    _emit(args, score.to_dict(), f"loglik={score.loglik:.4f} params={score.free_params} bic={score.bic:.4f}")


def cmd_equiv(args):
    equivalent = cstree_equivalent(load_tree(args.a), load_tree(args.b))
    _emit(args, {"equivalent": equivalent}, "equivalent" if equivalent else "not equivalent")


def cmd_class(args):
    tree = load_tree(args.tree)
    members = equivalence_class(tree)
    names = [[tree.variables[v].name for v in t.order] for t in members]
    _emit(args, {"size": len(members), "trees": [tree_to_dict(t) for t in members]},
          f"{len(members)} equivalent trees:\n" + "\n".join("  " + " < ".join(n) for n in names))


def cmd_contexts(args):
    tree = load_tree(args.tree)
    _emit(args, context_graphs(tree).to_dict(), contexts_report(tree).rstrip())


def cmd_intervene(args):
    tree = load_tree(args.tree)
    tables = [ingest_csv(args.obs, tree.variables).table()]
    tables += [ingest_csv(p, tree.variables).table() for p in _paths(args.int)]
    trees = equivalence_class(tree) if args.over_class else [tree]
    result = search_targets_over_class(trees, tables, args.budget)
    data = search_result_to_dict(result)
    if args.out:
        write_json(args.out, data)
    _emit(args, data, f"Best interventional BIC {result.score.bic:.4f} over {result.evaluated} candidates; "
                      f"{len(result.ties)} ties in {len(result.classes)} classes\n  {result.best.format()}")


def cmd_bootstrap(args):
    itrees = [itree_from_dict(load_document(p)) for p in _paths(args.itrees)]
    variables = itrees[0].base.variables
    tables = [ingest_csv(args.obs, variables).table()]
    tables += [ingest_csv(p, variables).table() for p in _paths(args.int)]
    summaries = bootstrap_bic(itrees, tables, args.replicates, args.seed)
    data = {"candidates": [s.to_dict() for s in summaries]}
    _emit(args, data, "\n".join(f"{i}: mean={s.mean:.4f} std={s.std:.4f}" for i, s in enumerate(summaries)))


def cmd_sample(args):
    tree = load_tree(args.tree)
    params = random_parameters(tree, args.seed)
    rows = sample_rows(tree, params, args.n, args.seed + 1)
    frame = rows_frame(tree.variables, rows)
    if args.out:
        write_text(args.out, frame.to_csv(index=False))
    _emit(args, {"n": args.n, "columns": list(frame.columns)}, f"Sampled {args.n} rows")


def cmd_simulate(args):
    if args.compare:
        frame = compare_learners(args.p, args.merge_prob, args.n, args.trials, args.seed)
    else:
        frame = run_trials(args.p, args.merge_prob, args.n, args.trials, args.seed)
    if args.metrics:
        write_metrics(frame, args.metrics)
    summary = summarize(frame)
    _emit(args, {"summary": summary.to_dict(orient="records")}, summary.to_string(index=False))


def cmd_count(args):
    result = count(args.what, args.p)
    _emit(args, {"what": args.what, "p": args.p, **result.to_dict()},
          f"{result.value}" + (" (tabulated)" if result.tabulated else ""))


def cmd_export_dot(args):
    if args.itree:
        text = context_graphs_dot(itree_from_dict(load_document(args.itree)).idags)
    else:
        tree = load_tree(args.tree)
        text = tree_dot(tree) if args.kind == "tree" else context_graphs_dot(context_graphs(tree))
    if args.out:
        write_text(args.out, text)
    _emit(args, {"dot": text}, text.rstrip())


def cmd_discretize(args):
    dataset = discretize_csv(args.data, args.bins)
    if args.out:
        write_dataset(dataset, args.out)
    _emit(args, {"rows": len(dataset.rows), "discretized": list(dataset.discretized)},
          f"Discretised {len(dataset.discretized)} columns of {len(dataset.rows)} rows")


# ──────────────────────────────────────────────
# Parser
# ──────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("--json", action="store_true", help="machine-readable JSON on stdout")
    parser = argparse.ArgumentParser(prog="cstree", description="CStree learning, equivalence and interventions")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", parents=[common])
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--order", default="auto", help="'auto' for every ordering, or comma-separated variable names")
    p.add_argument("--seed", type=int, default=config.CSTREE_SEED, help="recorded with the result; BHC-CS is deterministic")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("score", parents=[common])
    p.add_argument("--tree", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--undefined", choices=("raise", "uniform"), default="raise")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("equiv", parents=[common])
    p.add_argument("--a", type=Path, required=True)
    p.add_argument("--b", type=Path, required=True)
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("class", parents=[common])
    p.add_argument("--tree", type=Path, required=True)
    p.set_defaults(func=cmd_class)

    p = sub.add_parser("contexts", parents=[common])
    p.add_argument("--tree", type=Path, required=True)
    p.set_defaults(func=cmd_contexts)

    p = sub.add_parser("intervene", parents=[common])
    p.add_argument("--tree", type=Path, required=True)
    p.add_argument("--obs", type=Path, required=True)
    p.add_argument("--int", required=True, help="comma-separated interventional CSVs")
    p.add_argument("--over-class", action="store_true", help="search the whole equivalence class")
    p.add_argument("--budget", type=int, default=config.CSTREE_TARGET_BUDGET)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_intervene)

    p = sub.add_parser("bootstrap", parents=[common])
    p.add_argument("--itrees", required=True, help="comma-separated interventional tree JSON files")
    p.add_argument("--obs", type=Path, required=True)
    p.add_argument("--int", required=True)
    p.add_argument("--replicates", type=int, default=config.CSTREE_BOOTSTRAP_REPLICATES)
    p.add_argument("--seed", type=int, default=config.CSTREE_SEED)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("sample", parents=[common])
    p.add_argument("--tree", type=Path, required=True)
    p.add_argument("--n", type=int, default=config.CSTREE_TRAIN_SAMPLES)
    p.add_argument("--seed", type=int, default=config.CSTREE_SEED)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("simulate", parents=[common])
    p.add_argument("--p", type=int, default=6)
    p.add_argument("--merge-prob", type=float, default=0.4)
    p.add_argument("--n", type=int, default=config.CSTREE_TRAIN_SAMPLES)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=config.CSTREE_SEED)
    p.add_argument("--compare", action="store_true", help="BHC-CS against BHC-S on general staged trees")
    p.add_argument("--metrics", type=Path, help="metrics CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("count", parents=[common])
    p.add_argument("--what", choices=COUNT_KINDS, required=True)
    p.add_argument("--p", type=int, required=True)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("export-dot", parents=[common])
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--tree", type=Path)
    source.add_argument("--itree", type=Path)
    p.add_argument("--kind", choices=("graphs", "tree"), default="graphs")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_export_dot)

    p = sub.add_parser("discretize", parents=[common])
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--bins", type=int, default=2)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_discretize)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # usage errors exit 1; --help exits 0
        return 0 if e.code in (0, None) else 1
    level = logging.DEBUG if args.verbose else getattr(logging, config.LOG_LEVEL, logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
    )
    try:
        args.func(args)
    except CStreeError as e:
        if args.json:
            print(json.dumps({"error": e.to_dict()}, indent=2))
        else:
            print(f"error: {e.message}", file=sys.stderr)
        return 1
    except Exception:
        log.exception(f"Command {args.command} failed")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
