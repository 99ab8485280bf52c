"""Command line entry point.

Every subcommand reads the same INI config (--config); --seed and --threads
override the config's values. `run` executes the stage chain with
checksum-based skipping; the single-stage subcommands force their stage so an
explicit request always recomputes. Exit codes: 0 success, 2 configuration
error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .corpus import load_corpus, load_cooc
from .dialectogram import (
    aggregate_characteristic_use,
    mean_offset_projection,
    save_aggregate_table,
)
from .errors import DialectoscopeError
from .figures import swap_report_png
from .fileio import sha256_file
from .measures import save_measure_table
from .pipeline import (
    STAGES,
    Workspace,
    _ec_names,
    _load_pair,
    _write_dialectogram,
    dialectogram_outputs,
    parse_config,
    run_pipeline,
    run_stage,
)
from .swapbench import load_pos_map, run_swapbench, save_eval_report, save_swap_plan


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="INI config file")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=None, help="override the config thread count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialectoscope",
        description="Quantify how two corpora use a shared vocabulary differently.",
    )
    parser.add_argument("--version", action="version", version=f"dialectoscope {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the full pipeline (or a stage range)")
    _add_common(p_run)
    p_run.add_argument(
        "--stages", default=None,
        help=f"stage or inclusive range 'a:b'; stages are {', '.join(STAGES)}",
    )
    p_run.add_argument("--force", action="store_true", help="rerun even if outputs are current")

    for name, help_text in (
        ("vocab", "build the shared min-count vocabulary"),
        ("cooc", "count windowed co-occurrences for both corpora"),
        ("train", "train one embedding per corpus"),
        ("align", "frequency-adjust, normalize, and align the embeddings"),
        ("measure", "compute the per-word difference measure table"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)

    p_dia = sub.add_parser("dialectogram", help="export dialectograms for focal words")
    _add_common(p_dia)
    p_dia.add_argument("focal", nargs="+", help="focal word(s)")

    p_mean = sub.add_parser("meanoffset", help="distill a shared direction from a word list")
    _add_common(p_mean)
    p_mean.add_argument("wordlist", help="text file, one vocabulary word per line")
    p_mean.add_argument("--top-k", type=int, default=10, help="extreme words to report per end")

    p_agg = sub.add_parser("aggregate", help="rank words by characteristic-use counts")
    _add_common(p_agg)
    p_agg.add_argument("--threshold", type=float, default=None, help="projection magnitude cutoff")

    p_swap = sub.add_parser("swapbench", help="synthetic swap validation on corpus1")
    _add_common(p_swap)
    p_swap.add_argument("--deciles", type=int, default=None)
    p_swap.add_argument("--pairs-per-decile", type=int, default=None)

    return parser


_STAGE_COMMANDS = {
    "vocab": "vocab",
    "cooc": "cooc",
    "train": "train",
    "align": "align",
    "measure": "measures",
}


def _cmd_run(ws: Workspace, args) -> int:
    results = run_pipeline(ws.config, stage_range=args.stages, force=args.force)
    for stage, status in results.items():
        print(f"{stage}: {status}")
    return 0


def _cmd_stage(ws: Workspace, stage: str) -> int:
    status = run_stage(ws, stage, force=True)
    print(f"{stage}: {status}")
    return 0


def _cmd_dialectogram(ws: Workspace, args) -> int:
    cfg = ws.config
    _, pair = _load_pair(ws)
    ec1_name, ec2_name = _ec_names(cfg)
    ec1 = load_cooc(ws.read(ec1_name))
    ec2 = load_cooc(ws.read(ec2_name))
    inputs = ws.hash_inputs(
        ["vocab.txt", "aligned1.txt", "aligned2.txt", "aligned.json", ec1_name, ec2_name]
    )
    for focal in args.focal:
        _write_dialectogram(ws, pair, ec1, ec2, focal)
        for name in dialectogram_outputs(focal):
            ws.write_sidecar("dialectograms", name, inputs)
        print(f"dialectogram: {focal}")
    return 0


def _cmd_meanoffset(ws: Workspace, args) -> int:
    wordlist = Path(args.wordlist)
    if not wordlist.exists():
        print(f"error: word list not found: {wordlist}", file=sys.stderr)
        return 2
    words = [w.strip() for w in wordlist.read_text(encoding="utf-8").splitlines() if w.strip()]
    vocab, pair = _load_pair(ws)
    mop = mean_offset_projection(pair, words, top_k=args.top_k)
    out_name = f"meanoffset.{wordlist.stem}.json"
    payload = {
        "words": [vocab.tokens[i] for i in mop.word_set],
        "direction": [float(x) for x in mop.final_direction],
        "member_alpha1": [float(x) for x in mop.member_alpha1],
        "member_alpha2": [float(x) for x in mop.member_alpha2],
        "flipped_words": [vocab.tokens[mop.word_set[j]] for j in mop.sign_flips],
        "extremes": mop.extremes,
    }
    with open(ws.base(out_name), "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")
    inputs = ws.hash_inputs(
        ["vocab.txt", "aligned1.txt", "aligned2.txt", "aligned.json", ("wordlist", wordlist)]
    )
    ws.write_sidecar("meanoffset", out_name, inputs)
    print(f"meanoffset: {out_name} ({len(words)} words, {len(mop.sign_flips)} flipped)")
    return 0


def _cmd_aggregate(ws: Workspace, args) -> int:
    cfg = ws.config
    threshold = cfg.threshold if args.threshold is None else args.threshold
    _, pair = _load_pair(ws)
    table = aggregate_characteristic_use(pair, threshold=threshold)
    save_aggregate_table(table, ws.base("aggregate.csv"), compress=cfg.compress)
    inputs = ws.hash_inputs(["vocab.txt", "aligned1.txt", "aligned2.txt", "aligned.json"])
    ws.write_sidecar("dialectograms", "aggregate.csv", inputs)
    print(f"aggregate: {len(pair.vocab)} words at threshold {threshold}")
    return 0


def _cmd_swapbench(ws: Workspace, args) -> int:
    cfg = ws.config
    deciles = cfg.sw_deciles if args.deciles is None else args.deciles
    ppd = cfg.sw_pairs_per_decile if args.pairs_per_decile is None else args.pairs_per_decile
    corpus = load_corpus(cfg.corpus1, label="corpus1", dedup=cfg.dedup)
    pos_map = None
    checksum = ""
    if cfg.sw_pos_file is not None:
        pos_map = load_pos_map(cfg.sw_pos_file)
        checksum = sha256_file(cfg.sw_pos_file)
    result = run_swapbench(
        corpus,
        cfg.glove,
        min_count=cfg.min_count,
        window=cfg.window,
        deciles=deciles,
        pairs_per_decile=ppd,
        degrees=cfg.sw_degrees,
        knn_k=cfg.knn_k,
        method=cfg.method,
        pos_map=pos_map,
        pos_map_checksum=checksum,
        seed=cfg.seed,
        threads=cfg.threads,
    )
    out = ws.dir / "swapbench"
    out.mkdir(parents=True, exist_ok=True)
    save_swap_plan(result.plan, out / "plan.json")
    save_measure_table(result.table, out / "measures.csv", compress=cfg.compress)
    save_eval_report(result.report, out)
    swap_report_png(result.report, out / "report.png")
    for row in result.report.correlations:
        rho = "nan" if row.rho is None else f"{row.rho:+.3f}"
        print(f"rho[{row.scope}] {row.measure}: {rho} (n={row.n_used}/{row.n_total})")
    for bucket, (n, acc) in result.report.translation.buckets.items():
        shown = "n/a" if acc is None else f"{acc:.3f}"
        print(f"translation[{bucket}]: {shown} (n={n})")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = parse_config(args.config, seed=args.seed, threads=args.threads)
        ws = Workspace(config)
        if args.command == "run":
            return _cmd_run(ws, args)
        if args.command in _STAGE_COMMANDS:
            return _cmd_stage(ws, _STAGE_COMMANDS[args.command])
        if args.command == "dialectogram":
            return _cmd_dialectogram(ws, args)
        if args.command == "meanoffset":
            return _cmd_meanoffset(ws, args)
        if args.command == "aggregate":
            return _cmd_aggregate(ws, args)
        if args.command == "swapbench":
            return _cmd_swapbench(ws, args)
        raise AssertionError(f"unhandled command {args.command}")
    except DialectoscopeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
