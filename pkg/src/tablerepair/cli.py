"""Command-line entry point: prepare, run, score, report, compare, perturb, make-repair-data."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
import warnings
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .errors import BackendError, ConfigError, JoinMismatch, TableError
from .metrics import null_lev_ted, score
from .perturb import PerturbConfig, flatten_clipboard, perturb_task, sample_ids
from .pipeline import (
    BackendSpec,
    build_repair_corpus,
    format_contribution_table,
    parse_inline_backend,
    run_batch,
    split_tasks,
)
from .pipeline.runner import DEFAULT_MAX_RESPONSE_CHARS, Prediction, check_backends
from .report import ReportRow, ScoredRecord, aggregate, improvement_vs_baseline, render_report
from .table_model import parse_table, scitsr_to_html, to_grid
from .tasks import DATASETS, JsonlIndex, Task, dumps, iter_jsonl, iter_tasks

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("tablerepair")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

_SETTINGS = ("seed", "threshold", "concurrency", "max_repair_rounds", "max_response_chars", "output_dir")


def load_config(path: Optional[str]) -> dict[str, Any]:
    if path is None:
        return {"backends": {}}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    with open(p, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    unknown = set(raw) - set(_SETTINGS) - {"backends"}
    if unknown:
        raise ConfigError(f"{path}: unknown settings {sorted(unknown)}")
    backends = {
        name: BackendSpec.from_mapping(name, d) for name, d in raw.get("backends", {}).items()
    }
    return {**{k: raw[k] for k in _SETTINGS if k in raw}, "backends": backends}


def resolve_backend(cfg: dict, ref: Optional[str]) -> Optional[BackendSpec]:
    if ref is None:
        return None
    if ref in cfg["backends"]:
        return cfg["backends"][ref]
    if ":" in ref:
        return parse_inline_backend(ref)
    raise ConfigError(f"backend {ref!r} is not defined in the config")


def setting(args: argparse.Namespace, cfg: dict, name: str, default: Any) -> Any:
    v = getattr(args, name, None)
    if v is not None:
        return v
    return cfg.get(name, default)


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"input not found: {path}")
    return p


def _out_path(args, cfg: dict, name: str) -> Path:
    if args.out:
        return Path(args.out)
    return Path(cfg.get("output_dir", ".")) / name


# ---------------------------------------------------------------------------
# prepare
# ---------------------------------------------------------------------------


def _html_tasks(path: Path, dataset: Optional[str]):
    for rec in iter_jsonl(path):
        html = rec.get("ground_truth_html", rec.get("html"))
        if html is None:
            raise UsageError(f"{path}: record without 'html' / 'ground_truth_html'")
        yield _make_task(str(rec["id"]), html, rec.get("raw_text"), dataset or rec.get("source_dataset", "other"))


def _scitsr_files(path: Path):
    if path.is_dir():
        yield from sorted(path.glob("*.json"))
    else:
        yield path


def _scitsr_tasks(path: Path):
    for f in _scitsr_files(path):
        with open(f, encoding="utf-8") as fh:
            ann = json.load(fh)
        yield _make_task(ann.get("id", f.stem), scitsr_to_html(ann), ann.get("raw_text"), "scitsr")


def _make_task(task_id: str, html: str, raw_text: Optional[str], dataset: str) -> Optional[Task]:
    try:
        tree = parse_table(html)
        to_grid(tree)
    except TableError as exc:
        log.warning("skipping %s: ground truth does not parse (%s)", task_id, exc)
        return None
    if raw_text is None:
        raw_text = flatten_clipboard(tree)
    if dataset not in DATASETS:
        dataset = "other"
    return Task(task_id, raw_text, html, dataset)


def _parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"bad split sizes {text!r}; expected TRAIN,VAL,TEST") from None
    if len(sizes) != 3:
        raise UsageError(f"bad split sizes {text!r}; expected TRAIN,VAL,TEST")
    return sizes


def _prepare_splits(args, sources, seed: int, out_dir: Path, scratch: str):
    # pass 1: normalize every input into a scratch file, keep only ids in memory
    stubs: list[Task] = []
    seen: set[str] = set()
    with open(scratch, "w", encoding="utf-8") as tmp:
        for path, kind in sources:
            gen = _html_tasks(path, args.dataset) if kind == "html" else _scitsr_tasks(path)
            for task in gen:
                if task is None:
                    continue
                if task.id in seen:
                    raise UsageError(f"duplicate task id {task.id!r}")
                seen.add(task.id)
                tmp.write(dumps(task.to_dict()) + "\n")
                stubs.append(Task(task.id, "", "", task.source_dataset))
    try:
        if args.per_dataset:
            per = {}
            for item in args.per_dataset:
                ds, _, sizes = item.partition("=")
                per[ds] = _parse_sizes(sizes)
            splits, table = split_tasks(stubs, per_dataset=per, seed=seed)
        elif args.ratios:
            splits, table = split_tasks(stubs, ratios=[float(x) for x in args.ratios.split(",")], seed=seed)
        elif args.sizes:
            splits, table = split_tasks(stubs, _parse_sizes(args.sizes), seed=seed)
        else:
            splits, table = split_tasks(stubs, ratios=[0.7, 0.1, 0.2], seed=seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    # pass 2: route records into split files in input order
    assignment = {t.id: s for s, items in splits.items() for t in items}
    handles = {s: open(out_dir / f"{s}.jsonl", "w", encoding="utf-8") for s in splits}
    try:
        for task in iter_tasks(scratch):
            s = assignment.get(task.id)
            if s is not None:
                handles[s].write(dumps(task.with_(split=s).to_dict()) + "\n")
    finally:
        for h in handles.values():
            h.close()
    return splits, table


def cmd_prepare(args, cfg) -> int:
    if not args.html and not args.scitsr:
        raise UsageError("prepare needs at least one --html or --scitsr input")
    sources = [(_require_file(p), "html") for p in args.html or []]
    sources += [(_require_file(p), "scitsr") for p in args.scitsr or []]
    out_dir = Path(args.out_dir or cfg.get("output_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = setting(args, cfg, "seed", 0)

    fd, scratch = tempfile.mkstemp(dir=out_dir, suffix=".jsonl")
    os.close(fd)
    try:
        splits, table = _prepare_splits(args, sources, seed, out_dir, scratch)
    finally:
        os.unlink(scratch)
    summary = {"seed": seed, "splits": {s: len(v) for s, v in splits.items()}, "contribution": table}
    (out_dir / "split_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    text = format_contribution_table(table)
    (out_dir / "split_summary.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# run / score
# ---------------------------------------------------------------------------


def cmd_run(args, cfg) -> int:
    tasks_path = _require_file(args.tasks)
    extractor = resolve_backend(cfg, args.extractor)
    repairer = resolve_backend(cfg, args.repairer)
    mode = check_backends(args.mode, extractor, repairer)
    out = _out_path(args, cfg, f"predictions_{mode}.jsonl")
    concurrency = setting(args, cfg, "concurrency", 4)

    def progress(n: int) -> None:
        if n % 50 == 0:
            log.info("%d predictions written", n)

    stats = run_batch(
        iter_tasks(tasks_path),
        mode,
        extractor,
        repairer,
        out,
        concurrency=concurrency,
        threshold=setting(args, cfg, "threshold", 0.5),
        max_repair_rounds=setting(args, cfg, "max_repair_rounds", 1),
        max_response_chars=setting(args, cfg, "max_response_chars", DEFAULT_MAX_RESPONSE_CHARS),
        progress=progress,
    )
    print(json.dumps({"output": str(out), **stats}, sort_keys=True))
    return EXIT_OK


def cmd_score(args, cfg) -> int:
    preds_path = _require_file(args.predictions)
    tasks_path = _require_file(args.tasks)
    out = _out_path(args, cfg, preds_path.stem + ".scored.jsonl")
    counts = {"scored": 0, "valid": 0, "invalid": 0, "missing_task": 0}
    missing: list[str] = []
    with JsonlIndex(tasks_path) as index, open(out, "w", encoding="utf-8") as fh:
        for d in iter_jsonl(preds_path):
            pred = Prediction.from_dict(d)
            if pred.task_id not in index:
                missing.append(pred.task_id)
                continue
            truth = index[pred.task_id]["ground_truth_html"]
            vec = score(pred.final_output, truth, args.teds_normalization)
            rec = ScoredRecord(pred.task_id, vec, pred.mode, null_lev_ted(truth))
            fh.write(dumps(rec.to_dict()) + "\n")
            counts["scored"] += 1
            counts["valid" if vec else "invalid"] += 1
    if missing:
        counts["missing_task"] = len(missing)
        warnings.warn(JoinMismatch(missing), stacklevel=1)
    print(json.dumps({"output": str(out), **counts}, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# report / compare
# ---------------------------------------------------------------------------


def _load_scored(path: str) -> list[ScoredRecord]:
    return [ScoredRecord.from_dict(d) for d in iter_jsonl(_require_file(path))]


def _rows(args, files: Sequence[str], baseline: Optional[list[ScoredRecord]]) -> list[ReportRow]:
    named = sorted((Path(f).name.split(".")[0], f) for f in files)
    rows = []
    for name, f in named:
        recs = _load_scored(f)
        aggs = aggregate(
            recs,
            penalize_invalid=args.penalize_invalid,
            resamples=args.resamples,
            level=args.level,
            seed=args.seed if args.seed is not None else 0,
        )
        imp = improvement_vs_baseline(recs, baseline) if baseline is not None else None
        rows.append(ReportRow(name, aggs, imp))
    return rows


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_report(args, cfg) -> int:
    _emit(args, render_report(_rows(args, args.files, None), args.format))
    return EXIT_OK


def cmd_compare(args, cfg) -> int:
    baseline = _load_scored(args.baseline)
    _emit(args, render_report(_rows(args, args.files, baseline), args.format))
    return EXIT_OK


# ---------------------------------------------------------------------------
# perturb / make-repair-data
# ---------------------------------------------------------------------------


def cmd_perturb(args, cfg) -> int:
    tasks_path = _require_file(args.tasks)
    seed = setting(args, cfg, "seed", 0)
    pcfg = PerturbConfig(seed, args.flip_prob, args.junk_prob)
    out = _out_path(args, cfg, f"{tasks_path.stem}.{args.kind}.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with JsonlIndex(tasks_path) as index, open(out, "w", encoding="utf-8") as fh:
        picked = sample_ids(index.keys(), args.n, seed)
        for task_id in picked:
            csv_task, json_task = perturb_task(Task.from_dict(index[task_id]), seed, pcfg)
            chosen = csv_task if args.kind == "csv" else json_task
            if chosen is not None:
                fh.write(dumps(chosen.to_dict()) + "\n")
                n += 1
    if n == 0:
        warnings.warn(f"no task survived the {args.kind} exclusions; wrote an empty file", stacklevel=1)
    print(json.dumps({"output": str(out), "written": n, "sampled": len(picked)}, sort_keys=True))
    return EXIT_OK


def cmd_make_repair_data(args, cfg) -> int:
    tasks_path = _require_file(args.tasks)
    extractor = resolve_backend(cfg, args.extractor)
    if extractor is None:
        raise ConfigError("make-repair-data needs --extractor")
    out = _out_path(args, cfg, f"{tasks_path.stem}.repair.jsonl")
    _, summary = build_repair_corpus(
        iter_tasks(tasks_path),
        extractor,
        setting(args, cfg, "threshold", 0.5),
        out,
        concurrency=setting(args, cfg, "concurrency", 4),
        max_response_chars=setting(args, cfg, "max_response_chars", DEFAULT_MAX_RESPONSE_CHARS),
    )
    print(json.dumps({"output": str(out), **summary}, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _fraction(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text} must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tablerepair", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="TOML config with settings and [backends.NAME] tables")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="ingest ground truths and write split task files")
    p.add_argument("--html", action="append", help="JSONL with id, html and optional raw_text/source_dataset")
    p.add_argument("--scitsr", action="append", help="SciTSR structure JSON file or directory")
    p.add_argument("--dataset", choices=DATASETS, help="source dataset for --html inputs")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--sizes", help="TRAIN,VAL,TEST absolute counts")
    g.add_argument("--ratios", help="TRAIN,VAL,TEST proportions")
    g.add_argument("--per-dataset", action="append", metavar="DATASET=TRAIN,VAL,TEST")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("run", help="run a flow over a task file")
    p.add_argument("--tasks", required=True)
    p.add_argument("--mode", required=True, choices=["extract-only", "sd", "lift", "eeft"])
    p.add_argument("--extractor", required=True, help="config backend name or replay:/fixed:/http: shorthand")
    p.add_argument("--repairer")
    p.add_argument("--out")
    p.add_argument("--concurrency", type=_positive)
    p.add_argument("--threshold", type=_fraction)
    p.add_argument("--max-repair-rounds", type=_positive)
    p.add_argument("--max-response-chars", type=_positive)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("score", help="attach metric vectors to predictions")
    p.add_argument("--predictions", required=True)
    p.add_argument("--tasks", required=True)
    p.add_argument("--out")
    p.add_argument("--teds-normalization", choices=["sum", "max"], default="sum")
    p.set_defaults(func=cmd_score)

    for name, func, help_ in (
        ("report", cmd_report, "aggregate scored files into a comparison table"),
        ("compare", cmd_compare, "report plus improvement over a baseline"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("files", nargs="+")
        if name == "compare":
            p.add_argument("--baseline", required=True)
        p.add_argument("--format", choices=["table-text", "csv", "json"], default="table-text")
        p.add_argument("--penalize-invalid", action="store_true")
        p.add_argument("--resamples", type=_positive, default=1000)
        p.add_argument("--level", type=_fraction, default=0.95)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("perturb", help="noisy CSV / JSON variants of sampled tasks")
    p.add_argument("--tasks", required=True)
    p.add_argument("--kind", required=True, choices=["csv", "json"])
    p.add_argument("--n", type=_positive, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--flip-prob", type=_fraction, default=0.3)
    p.add_argument("--junk-prob", type=_fraction, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("make-repair-data", help="build a repair-training corpus")
    p.add_argument("--tasks", required=True)
    p.add_argument("--extractor", required=True)
    p.add_argument("--threshold", type=_fraction)
    p.add_argument("--concurrency", type=_positive)
    p.add_argument("--max-response-chars", type=_positive)
    p.add_argument("--out")
    p.set_defaults(func=cmd_make_repair_data)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"tablerepair {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TableError, BackendError, OSError, ValueError) as exc:
        print(f"tablerepair {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
