"""Command-line experiments: ``gen``, ``embed``, ``dedup``, ``query``, ``stress``.

Every command writes its data files plus ``manifest.json`` recording the
command, all parameters, input and output paths, tool version and timings.
The default output directory comes from ``$EMBEDBLOCK_OUT_DIR``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import CorruptionSpec, InfeasibleDatasetError, make_dedup_dataset, make_query_benchmark
from .embedding import OosConfig, StressConfig, embed_dataset, load_embedding, lsmds_full, save_embedding
from .evaluation import evaluate_dedup, evaluate_query_run, sweep_rows
from .pipelines import (
    QueryEngine,
    block_to_dict,
    candidate_pairs,
    dedup_index,
    run_query_stream,
    sweep_block_sizes,
    write_jsonl,
)
from .records import read_pairs, read_records, write_pairs, write_records
from .strdist import distance_matrix

OUT_DIR_ENV = "EMBEDBLOCK_OUT_DIR"
MANIFEST = "manifest.json"
TIMING_KEYS = frozenset({
    "timings", "elapsed", "tp_per_second", "mean_query_seconds", "mean_embed_seconds",
    "mean_distance_seconds", "mean_search_seconds",
})


def strip_timings(obj):
    """Drop wall-clock fields recursively, leaving only reproducible data."""
    if isinstance(obj, dict):
        return {k: strip_timings(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timings(v) for v in obj]
    return obj


class UsageError(Exception):
    pass


def _out_dir(args) -> Path:
    out = Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or "embedblock-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(out: Path, command: str, args, outputs: list[str], timings: dict, extra: dict | None = None) -> None:
    params = {k: v for k, v in vars(args).items() if k not in ("func",)}
    doc = {
        "command": command,
        "version": __version__,
        "parameters": params,
        "outputs": sorted(outputs),
        "timings": timings,
    }
    if extra:
        doc.update(extra)
    _write_json(out / MANIFEST, doc)


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


# -- gen ----------------------------------------------------------------------


def cmd_gen(args) -> int:
    if (args.dmr is None) == (args.qmr is None):
        raise UsageError("give exactly one of --dmr or --qmr")
    if args.dmr is not None and args.dmr <= 0:
        raise UsageError("--dmr must be positive")
    if args.qmr is not None and args.n_query is None:
        raise UsageError("--qmr needs --n-query")
    out = _out_dir(args)
    spec = CorruptionSpec(max_edits=args.max_edits, rng_seed=args.seed)
    t0 = time.perf_counter()
    if args.dmr is not None:
        records, truth = make_dedup_dataset(args.n, args.dmr, spec)
        write_records(out / "records.csv", records)
        write_pairs(out / "truth.csv", truth, ("left_id", "right_id"))
        outputs = ["records.csv", "truth.csv"]
        stats = {"records": len(records), "truth_pairs": len(truth), "rate": len(truth) / len(records)}
    else:
        bundle = make_query_benchmark(args.n, args.n_query, args.qmr, spec)
        write_records(out / "reference.csv", bundle.reference)
        write_records(out / "queries.csv", bundle.queries)
        write_pairs(out / "truth.csv", bundle.truth, ("query_id", "reference_id"))
        outputs = ["reference.csv", "queries.csv", "truth.csv"]
        stats = {
            "reference": len(bundle.reference),
            "queries": len(bundle.queries),
            "truth_pairs": len(bundle.truth),
            "rate": bundle.rate,
        }
    _manifest(out, "gen", args, outputs, {"total": time.perf_counter() - t0}, {"stats": stats})
    print(json.dumps(stats))
    return 0


# -- embed --------------------------------------------------------------------


def cmd_embed(args) -> int:
    if not Path(args.input).is_file():
        raise UsageError(f"input file not found: {args.input}")
    records = read_records(args.input)
    n = len(records)
    L = n if args.landmarks == 0 else args.landmarks
    if not 1 <= L <= n:
        raise UsageError(f"--landmarks must be 0 or in [1, {n}]")
    out = _out_dir(args)
    cfg = StressConfig(max_iterations=args.max_iter, rel_tolerance=args.tol, rng_seed=args.seed)
    oos = OosConfig(
        epochs=args.epochs, initial_step=args.initial_step, step_decay=args.step_decay, rng_seed=args.seed
    )
    t0 = time.perf_counter()
    emb = embed_dataset(records.blocking_values(), args.k_dim, L, cfg, oos)
    elapsed = time.perf_counter() - t0
    mode = "complete" if L == n else "landmark"
    meta = save_embedding(
        out, emb, records.ids, extra={"input": str(Path(args.input).resolve()), "mode": mode}
    )
    summary = {
        "mode": mode,
        "K": meta["K"],
        "L": meta["L"],
        "normalized_stress": meta["normalized_stress"],
        "raw_stress": meta["raw_stress"],
    }
    _manifest(
        out, "embed", args, ["landmarks.csv", "points.csv", "embedding.json"], {"embed": elapsed}, summary
    )
    print(json.dumps(summary))
    return 0


def _load_embedded_records(emb_dir: str, override: str | None, role: str):
    emb, ids, meta = load_embedding(emb_dir)
    src = override or meta.get("input")
    if not src or not Path(src).is_file():
        raise UsageError("records for the embedding not found; pass the records CSV explicitly")
    records = read_records(src, role=role)
    values = records.blocking_values() if records.ids == ids else []
    if not values or [values[i] for i in emb.landmark_indices] != emb.landmark_values:
        raise UsageError(f"records in {src} do not match the embedding")
    return emb, records, meta


# -- dedup --------------------------------------------------------------------


def cmd_dedup(args) -> int:
    emb, records, _ = _load_embedded_records(args.embedding, args.input, "dedup")
    truth = read_pairs(args.truth) if args.truth else None
    out = _out_dir(args)
    outputs = ["blocks.jsonl", "candidates.csv"]
    t0 = time.perf_counter()
    blocks = dedup_index(emb, args.block_size)
    t1 = time.perf_counter()
    pairs, n_b = candidate_pairs(blocks, records.blocking_values(), records.ids, args.theta)
    t2 = time.perf_counter()
    ids = records.ids
    write_jsonl(out / "blocks.jsonl", (block_to_dict(b, ids) for b in blocks))
    with open(out / "candidates.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["left_id", "right_id", "edit_distance"])
        w.writerows((p.left, p.right, p.edit_distance) for p in pairs)
    summary = {"blocks": len(blocks), "n_b": n_b, "candidates": len(pairs)}
    if truth:
        ev = evaluate_dedup(n_b, pairs, truth, len(records))
        _write_json(out / "metrics.json", ev.to_dict())
        outputs.append("metrics.json")
        summary.update(pc=ev.pc, rr=ev.rr)
    timings = {"blocks": t1 - t0, "candidates": t2 - t1}
    if args.sweep_block_sizes:
        if not truth:
            raise UsageError("--sweep-block-sizes needs --truth")
        ts = time.perf_counter()
        rows = sweep_rows(sweep_block_sizes(emb, records, args.sweep_block_sizes, truth, args.theta))
        timings["sweep"] = time.perf_counter() - ts
        with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        outputs.append("sweep.csv")
    _manifest(out, "dedup", args, outputs, timings, {"summary": summary})
    print(json.dumps(summary))
    return 0


# -- query --------------------------------------------------------------------


def cmd_query(args) -> int:
    emb, reference, _ = _load_embedded_records(args.reference_embedding, args.reference, "reference")
    if not Path(args.queries).is_file():
        raise UsageError(f"queries file not found: {args.queries}")
    queries = read_records(args.queries, role="query")
    out = _out_dir(args)
    t0 = time.perf_counter()
    engine = QueryEngine(emb, reference, k=args.k, theta_m=args.theta)
    t1 = time.perf_counter()
    report = run_query_stream(engine, queries, args.budget_seconds)
    ids = reference.ids
    write_jsonl(out / "results.jsonl", (r.to_dict(ids) for r in report.results))
    summary = report.summary()
    summary["landmarks"] = engine.n_landmarks
    summary["k"] = engine.k
    if report.processed:
        summary["mean_distance_seconds"] = float(np.mean([r.timings["distance"] for r in report.results]))
        summary["mean_embed_seconds"] = float(np.mean([r.timings["embed"] for r in report.results]))
        summary["mean_search_seconds"] = float(np.mean([r.timings["search"] for r in report.results]))
        summary["mean_query_seconds"] = float(np.mean([r.total_seconds for r in report.results]))
    _write_json(out / "report.json", summary)
    outputs = ["results.jsonl", "report.json"]
    if args.truth:
        ev = evaluate_query_run(report, read_pairs(args.truth), known_queries=queries.ids)
        _write_json(out / "metrics.json", ev.to_dict())
        outputs.append("metrics.json")
        summary.update(tp=ev.tp, fp=ev.fp, precision=ev.precision, recall=ev.recall)
    _manifest(out, "query", args, outputs, {"engine_build": t1 - t0, "stream": report.elapsed}, {"summary": summary})
    print(json.dumps(summary))
    return 0


# -- stress -------------------------------------------------------------------


def cmd_stress(args) -> int:
    records = read_records(args.input)
    values = records.blocking_values()
    if args.sample and args.sample < len(values):
        rng = np.random.default_rng(args.seed)
        values = [values[i] for i in sorted(rng.choice(len(values), args.sample, replace=False))]
    out = _out_dir(args)
    D = distance_matrix(values)
    rows = []
    timings = {}
    for K in args.dims:
        t0 = time.perf_counter()
        conf = lsmds_full(D, K, StressConfig(max_iterations=args.max_iter, rel_tolerance=args.tol, rng_seed=args.seed))
        timings[f"K={K}"] = time.perf_counter() - t0
        rows.append({"K": K, "normalized_stress": conf.normalized_stress, "raw_stress": conf.raw_stress,
                     "iterations": conf.n_iter})
    with open(out / "stress.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    _manifest(out, "stress", args, ["stress.csv"], timings, {"n": len(values)})
    for r in rows:
        print(json.dumps(r))
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="embedblock", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dedup or query benchmark")
    g.add_argument("--n", type=int, required=True, help="records (dedup) or reference size (query)")
    rate = g.add_mutually_exclusive_group()
    rate.add_argument("--dmr", type=float, help="deduplication matching rate")
    rate.add_argument("--qmr", type=float, help="fraction of queries with a reference duplicate")
    g.add_argument("--n-query", type=int)
    g.add_argument("--max-edits", type=int, default=2)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("embed", help="embed blocking values (landmark or complete LSMDS)")
    e.add_argument("--input", required=True)
    e.add_argument("--k-dim", type=int, default=7)
    e.add_argument("--landmarks", type=int, default=1500, help="0 = complete LSMDS")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--max-iter", type=int, default=StressConfig.max_iterations)
    e.add_argument("--tol", type=float, default=StressConfig.rel_tolerance)
    e.add_argument("--epochs", type=int, default=OosConfig.epochs)
    e.add_argument("--initial-step", type=float, default=OosConfig.initial_step)
    e.add_argument("--step-decay", type=float, default=OosConfig.step_decay)
    e.add_argument("--out-dir")
    e.set_defaults(func=cmd_embed)

    d = sub.add_parser("dedup", help="k-NN blocks and candidate pairs over an embedding")
    d.add_argument("--embedding", required=True)
    d.add_argument("--input", help="records CSV (defaults to the one recorded at embed time)")
    d.add_argument("--block-size", type=int, default=50)
    d.add_argument("--theta", type=int, default=2)
    d.add_argument("--truth")
    d.add_argument("--sweep-block-sizes", type=_int_list)
    d.add_argument("--out-dir")
    d.set_defaults(func=cmd_dedup)

    q = sub.add_parser("query", help="stream queries against an embedded reference set")
    q.add_argument("--reference-embedding", required=True)
    q.add_argument("--reference", help="reference CSV (defaults to the one recorded at embed time)")
    q.add_argument("--queries", required=True)
    q.add_argument("--k", type=int, default=150)
    q.add_argument("--theta", type=int, default=2)
    q.add_argument("--budget-seconds", type=float, default=60.0)
    q.add_argument("--truth")
    q.add_argument("--out-dir")
    q.set_defaults(func=cmd_query)

    s = sub.add_parser("stress", help="final normalized stress of complete LSMDS per dimension")
    s.add_argument("--input", required=True)
    s.add_argument("--dims", type=_int_list, default=[2, 4, 7, 10])
    s.add_argument("--sample", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-iter", type=int, default=StressConfig.max_iterations)
    s.add_argument("--tol", type=float, default=StressConfig.rel_tolerance)
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_stress)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InfeasibleDatasetError, ValueError) as exc:
        parser.exit(2, f"embedblock {args.command}: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
