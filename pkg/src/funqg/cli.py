"""Command-line entry point: ``funqg <command> ...``.

Every command writes a JSON report to stdout (or ``--report``) and exits
with status 0 on success, 2 on a declared error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path

from funqg import __version__
from funqg.errors import FunQGError
from funqg.functional_groups import functional_groups
from funqg.optim import load_checkpoint, params_to_dict
from funqg import pipeline as pl
from funqg.smiles import read_smiles

log = logging.getLogger("funqg")


def _emit(report: dict, path: str | None) -> None:
    text = json.dumps(report, sort_keys=True, indent=2)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _run_config(path: str | None) -> pl.RunConfig:
    return pl.RunConfig.from_json(path) if path else pl.RunConfig()


def cmd_coarsen(a) -> dict:
    spec = pl.DatasetSpec(a.input, a.smiles_column, a.targets.split(","), a.task)
    records = pl.load_dataset(spec, keep_largest_fragment=a.keep_largest_fragment)
    cache = pl.build_cache(
        records,
        a.output,
        coarsen=a.coarsen,
        task_type=a.task,
        target_names=spec.target_columns,
        keep_largest_fragment=a.keep_largest_fragment,
    )
    return {
        "rows_read": len(records) + pl.load_dataset.last_dropped,
        "rows_dropped": pl.load_dataset.last_dropped,
        "molecules_cached": len(cache),
        "coarsen": a.coarsen,
        "output": a.output,
    }


def cmd_stats(a) -> dict:
    cache = pl.load_cache(a.cache)
    nodes = Counter(e.graph.num_nodes for e in cache.entries)
    atoms = Counter(e.num_atoms for e in cache.entries)
    return {
        "molecules": len(cache),
        "coarsen": cache.manifest["coarsen"],
        "abstraction_ratio": cache.abstraction_ratio(),
        "graph_size_histogram": {str(k): nodes[k] for k in sorted(nodes)},
        "molecule_size_histogram": {str(k): atoms[k] for k in sorted(atoms)},
    }


def cmd_split(a) -> dict:
    cache = pl.load_cache(a.cache)
    ratios = tuple(float(r) for r in a.ratios.split(","))
    split = pl.split_cache(cache, a.seed, ratios)
    pl.write_split(a.output, cache, split)
    return {"seed": a.seed, "ratios": list(ratios), "train": len(split.train), "valid": len(split.valid), "test": len(split.test), "output": a.output}


def cmd_train(a) -> dict:
    cache = pl.load_cache(a.cache)
    split = pl.read_split(a.split, cache)
    run = _run_config(a.config)
    result = pl.train(cache, split, run)
    data = result.checkpoint(run, cache, split)
    data["log"] = result.log
    Path(a.output).write_text(json.dumps(data, sort_keys=True) + "\n")
    return {"checkpoint": a.output, "best_epoch": result.best_epoch, "best_valid": result.best_metric, "epochs": len(result.log), "seed": run.seed, "split_seed": split.seed, "config_digest": run.digest()}


def cmd_eval(a) -> dict:
    cache = pl.load_cache(a.cache)
    split = pl.read_split(a.split, cache)
    store, extra = load_checkpoint(a.checkpoint)
    data = params_to_dict(store)
    data.update(extra)
    return pl.evaluate(cache, split, data, partition=a.partition)


def cmd_protocol(a) -> dict:
    cache = pl.load_cache(a.cache)
    run = _run_config(a.config)
    seeds = [int(s) for s in a.seeds.split(",")]
    return pl.run_protocol(cache, run, seeds)


def cmd_search(a) -> dict:
    cache = pl.load_cache(a.cache)
    base = _run_config(a.config)
    space = json.loads(Path(a.space).read_text()) if a.space else None
    best, trials = pl.hyper_search(cache, base, space, budget=a.budget, seed=a.seed, split_seed=a.split_seed)
    if a.best_config:
        Path(a.best_config).write_text(json.dumps(best.to_dict(), sort_keys=True, indent=2) + "\n")
    return {"seed": a.seed, "budget": a.budget, "best": best.to_dict(), "trials": trials}


def cmd_fg(a) -> dict:
    m = read_smiles(a.smiles, keep_largest_fragment=a.keep_largest_fragment)
    groups = functional_groups(m)
    return {
        "smiles": a.smiles,
        "atoms": [a_.element + ("(ar)" if a_.aromatic else "") for a_ in m.atoms],
        "groups": [fg.sorted() for fg in groups],
    }


def cmd_gradcheck(a) -> dict:
    from funqg.gradcheck import run_suite

    results = run_suite(instances=a.instances, seed=a.seed)
    worst = max(r["max_rel_error"] for r in results)
    return {"instances": len(results), "worst_max_rel_error": worst, "passed": worst < 1e-4, "results": results}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="funqg", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("coarsen", help="CSV -> graph cache")
    s.add_argument("--input", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--smiles-column", default="smiles")
    s.add_argument("--targets", required=True, help="comma-separated target columns")
    s.add_argument("--task", choices=pl.TASK_TYPES, default="classification")
    s.add_argument("--no-coarsen", dest="coarsen", action="store_false", help="cache raw molecular graphs")
    s.add_argument("--keep-largest-fragment", action=argparse.BooleanOptionalAction, default=True)
    s.set_defaults(func=cmd_coarsen)

    s = sub.add_parser("stats", help="abstraction ratio and size histograms of a cache")
    s.add_argument("--cache", required=True)
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("split", help="scaffold split of a cache")
    s.add_argument("--cache", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--ratios", default="0.8,0.1,0.1")
    s.add_argument("--output", required=True)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("train", help="train one model on one split")
    s.add_argument("--cache", required=True)
    s.add_argument("--split", required=True)
    s.add_argument("--config", help="RunConfig JSON")
    s.add_argument("--output", required=True, help="checkpoint path")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="score a checkpoint")
    s.add_argument("--cache", required=True)
    s.add_argument("--split", required=True)
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--partition", choices=("train", "valid", "test"), default="test")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("protocol", help="split/train/test over several seeds")
    s.add_argument("--cache", required=True)
    s.add_argument("--config")
    s.add_argument("--seeds", default="0,1,2")
    s.set_defaults(func=cmd_protocol)

    s = sub.add_parser("search", help="seeded random hyperparameter search")
    s.add_argument("--cache", required=True)
    s.add_argument("--config", help="base RunConfig JSON")
    s.add_argument("--space", help="search space JSON")
    s.add_argument("--budget", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--split-seed", type=int, default=1)
    s.add_argument("--best-config", help="write the winning RunConfig here")
    s.set_defaults(func=cmd_search)

    s = sub.add_parser("fg", help="print detected functional groups")
    s.add_argument("--smiles", required=True)
    s.add_argument("--keep-largest-fragment", action=argparse.BooleanOptionalAction, default=True)
    s.set_defaults(func=cmd_fg)

    s = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    s.add_argument("--instances", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        report = args.func(args)
    except FunQGError as exc:
        print(json.dumps({"error": exc.code, "message": str(exc)}), file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    report.setdefault("tool_version", __version__)
    _emit(report, args.report)
    return 0


if __name__ == "__main__":
    sys.exit(main())
