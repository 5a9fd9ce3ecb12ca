"""Command-line front end: ``icfoot <subcommand> ...``.

Data goes to files (or stdout for ``eval``); logs go to stderr as
``key=value`` lines. When ``-o`` is omitted, outputs land under
``$ICFOOT_OUT/<subcommand>`` (default root ``./icfoot-out``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Iterator

from . import __version__
from .evaluation import INDEX, NEAREST, aggregate, report_csv, report_json, report_table, score_sample
from .geometry import FootprintGeometry, GeometryError
from .interchange import (
    InterchangeError,
    export_kicad,
    geometry_from_dict,
    parse_eda_xml,
    parse_geometry_json,
    write_geometry_json,
)
from .qa import (
    DATASET_STRATEGIES,
    DIALOGUE_STRATEGIES,
    SOURCES,
    StrategyError,
    answers_to_geometry,
    build_conversation,
    build_manifest,
    parse_prediction,
    validate_record,
)
from .render import RenderSpec, render_overlay, render_svg
from .synth import CorpusSpec, GenerationError, sample_one

ENV_OUT = "ICFOOT_OUT"
DEFAULT_OUT_ROOT = "icfoot-out"
log = logging.getLogger("icfoot")


class CLIError(Exception):
    pass


class _KVFormatter(logging.Formatter):
    def format(self, record):
        fields = {"level": record.levelname.lower(), "event": record.getMessage()}
        fields.update(getattr(record, "kv", {}))
        return " ".join(f"{k}={_kv(v)}" for k, v in fields.items())


def _kv(v) -> str:
    s = str(v)
    return json.dumps(s) if (not s or any(c in s for c in ' "=')) else s


def _event(event: str, level: int = logging.INFO, **kv):
    log.log(level, event, extra={"kv": kv})


def write_atomic(path: Path, data: bytes | str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _out_dir(args, sub: str) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        out = Path(os.environ.get(ENV_OUT) or DEFAULT_OUT_ROOT) / sub
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CLIError(f"cannot create output directory {out}: {exc.strerror}") from None
    if not os.access(out, os.W_OK):
        raise CLIError(f"output directory {out} is not writable")
    return out


# ---------------------------------------------------------------------------
# geometry input


def iter_geometries(path: str | Path) -> Iterator[FootprintGeometry]:
    """Geometries from a ``gen`` output directory, a JSONL file, a single
    canonical JSON file or an EDA XML file."""
    path = Path(path)
    if not path.exists():
        raise CLIError(f"input not found: {path}")
    if path.is_dir():
        index = path / "index.json"
        if not index.exists():
            raise CLIError(f"{path} has no index.json; is it a gen output directory?")
        for entry in json.loads(index.read_text())["samples"]:
            yield parse_geometry_json((path / entry["file"]).read_bytes())
        return
    if path.suffix == ".jsonl":
        with path.open() as fh:
            for lineno, line in enumerate(fh, 1):
                if line.strip():
                    try:
                        yield geometry_from_dict(json.loads(line))
                    except (ValueError, InterchangeError, GeometryError) as exc:
                        raise CLIError(f"{path}:{lineno}: {exc}") from None
        return
    data = path.read_bytes()
    if path.suffix == ".xml":
        g = parse_eda_xml(data)
        yield g if g.source_id else replace(g, source_id=path.stem)
    else:
        yield parse_geometry_json(data)


def _load(path) -> list[FootprintGeometry]:
    try:
        geoms = list(iter_geometries(path))
    except (InterchangeError, GeometryError) as exc:
        raise CLIError(f"{path}: {exc}") from None
    ids = [g.source_id for g in geoms]
    if len(set(ids)) != len(ids):
        raise CLIError(f"{path}: duplicate sample ids")
    return geoms


# ---------------------------------------------------------------------------
# subcommands


def _gen_one(args):
    spec, index = args
    try:
        g = sample_one(spec, index)
        return index, g.source_id, write_geometry_json(g), g.package_class.name, len(g.pins), None
    except (GenerationError, GeometryError) as exc:
        return index, spec.sample_id(index), None, None, None, str(exc)


def cmd_gen(args) -> int:
    try:
        spec = CorpusSpec.load(args.spec) if args.spec else CorpusSpec(count=0)
        overrides = {k: v for k, v in (("count", args.count), ("seed", args.seed)) if v is not None}
        spec = replace(spec, **overrides)
    except (OSError, ValueError, TypeError) as exc:
        raise CLIError(f"bad corpus spec: {exc}") from None
    out = _out_dir(args, "gen")
    jobs = [(spec, i) for i in range(spec.count)]
    if args.workers > 1 and spec.count > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_gen_one, jobs, chunksize=16))
    else:
        results = [_gen_one(j) for j in jobs]

    entries, failures, lines = [], [], []
    for index, sid, blob, pclass, npins, err in results:
        if err:
            failures.append(f"{sid}\t{err}")
            _event("sample-failed", logging.ERROR, sample=sid, error=err)
            continue
        rel = f"geometry/{sid}.json"
        write_atomic(out / rel, blob)
        lines.append(json.dumps(json.loads(blob), separators=(",", ":")))
        entries.append({"id": sid, "package_class": pclass, "pins": npins, "file": rel})
    write_atomic(out / "geometries.jsonl", "".join(l + "\n" for l in lines))
    index = {"version": __version__, "count": spec.count, "seed": spec.seed, "samples": entries}
    write_atomic(out / "index.json", json.dumps(index, indent=2) + "\n")
    if failures:
        write_atomic(out / "errors.log", "\n".join(failures) + "\n")
    elif (out / "errors.log").exists():
        (out / "errors.log").unlink()
    _event("gen-done", out=out, written=len(entries), failed=len(failures), seed=spec.seed)
    return 1 if failures else 0


def _render_spec(args) -> RenderSpec:
    kw = {}
    for name in ("px_per_mm", "font_size_pt", "jitter_mm"):
        if getattr(args, name, None) is not None:
            kw[name] = getattr(args, name)
    if getattr(args, "omission_threshold", None) is not None:
        kw["omission_threshold"] = args.omission_threshold or None
    if getattr(args, "no_pin_numbers", False):
        kw["show_pin_numbers"] = False
    if getattr(args, "seed", None) is not None:
        kw["seed"] = args.seed
    try:
        return RenderSpec(**kw)
    except ValueError as exc:
        raise CLIError(str(exc)) from None


def _render_one(job):
    g, spec = job
    try:
        return g.source_id, render_svg(g, spec), None
    except Exception as exc:  # one bad sample must not stop the batch
        return g.source_id, None, f"{type(exc).__name__}: {exc}"


def cmd_render(args) -> int:
    geoms = _load(args.input)
    spec = _render_spec(args)
    out = _out_dir(args, "render")
    jobs = [(g, spec) for g in geoms]
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_render_one, jobs, chunksize=8))
    else:
        results = [_render_one(j) for j in jobs]
    failed = 0
    for sid, svg, err in results:
        if err:
            failed += 1
            _event("render-failed", logging.ERROR, sample=sid, error=err)
        else:
            write_atomic(out / f"{sid}.svg", svg)
    _event("render-done", out=out, written=len(results) - failed, failed=failed)
    return 1 if failed else 0


def cmd_build_qa(args) -> int:
    geoms = _load(args.input)
    out = _out_dir(args, "qa")
    lines = []
    for g in geoms:
        image = f"{args.image_prefix}{g.source_id}.svg"
        for sample in build_conversation(g, image, args.strategy, source=args.source):
            rec = sample.to_record()
            validate_record(rec)
            lines.append(json.dumps(rec, ensure_ascii=False))
    write_atomic(out / "conversations.jsonl", "".join(l + "\n" for l in lines))
    _event("build-qa-done", out=out, footprints=len(geoms), samples=len(lines), strategy=args.strategy)
    return 0


def _read_refs(path: str | None) -> list[str]:
    """Sample ids from a conversations JSONL (``id`` field) or a plain list."""
    if not path:
        return []
    p = Path(path)
    if not p.exists():
        raise CLIError(f"input not found: {p}")
    refs = []
    for line in p.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("{"):
            refs.append(json.loads(line)["id"])
        else:
            refs.append(line)
    return refs


def cmd_manifest(args) -> int:
    synthetic = _read_refs(args.synthetic)
    real = _read_refs(args.real)
    seed = 0 if args.seed is None else args.seed
    try:
        manifest = build_manifest(synthetic, real, args.strategy, seed=seed)
    except StrategyError as exc:
        raise CLIError(str(exc)) from None
    out = _out_dir(args, "manifest")
    write_atomic(out / "manifest.json", json.dumps(manifest.to_dict(), indent=2) + "\n")
    _event("manifest-done", out=out, strategy=args.strategy, stages=[len(s.sample_refs) for s in manifest.stages])
    return 0


def read_predictions(path) -> dict[tuple[str, str], dict[int, str]]:
    """(sample_id, run) -> {task: output_text}. Later lines override earlier ones."""
    p = Path(path)
    if not p.exists():
        raise CLIError(f"predictions not found: {p}")
    preds: dict[tuple[str, str], dict[int, str]] = {}
    with p.open() as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                key = (str(rec["sample_id"]), str(rec.get("run", "")))
                task = int(rec["task"])
                text = rec.get("output_text", "")
            except (ValueError, KeyError, TypeError) as exc:
                raise CLIError(f"{p}:{lineno}: bad prediction record ({exc})") from None
            if task not in (1, 2, 3):
                raise CLIError(f"{p}:{lineno}: task must be 1, 2 or 3")
            preds.setdefault(key, {})[task] = text if isinstance(text, str) else json.dumps(text)
    return preds


def score_predictions(truths: Iterable[FootprintGeometry], preds, mode: str = INDEX):
    """Sample reports, run labels and the set of prediction ids with no truth."""
    truths = list(truths)
    runs = sorted({run for _, run in preds}) or [""]
    reports, labels = [], []
    for run in runs:
        for g in truths:
            answers = preds.get((g.source_id, run))
            flags = []
            if answers is None:
                flags.append("missing-prediction")
                answers = {}
            parsed = {t: parse_prediction(answers[t], t) for t in sorted(answers)}
            centers = parsed[2].value if 2 in parsed and not parsed[2].failed else None
            dims = parsed[3].value if 3 in parsed and not parsed[3].failed else None
            if centers is not None and dims is not None and len(centers) != len(dims):
                flags.append("centers-dims-length-mismatch")
            pred = answers_to_geometry(centers, dims, g)
            count = None
            if 1 in parsed:
                count = parsed[1].value if not parsed[1].failed else 0
            elif answers == {}:
                count = 0
            reports.append(
                score_sample(
                    pred,
                    g,
                    sample_id=g.source_id,
                    count_pred=count,
                    parse={str(t): a.outcome for t, a in parsed.items()},
                    flags=flags,
                    mode=mode,
                )
            )
            labels.append(run)
    unknown = {sid for sid, _ in preds} - {g.source_id for g in truths}
    return reports, labels, unknown


def cmd_eval(args) -> int:
    truths = _load(args.truth)
    preds = read_predictions(args.predictions)
    reports, labels, unknown = score_predictions(truths, preds, NEAREST if args.match == "nearest" else INDEX)
    if unknown:
        _event("unknown-prediction-ids", logging.WARNING, count=len(unknown), example=sorted(unknown)[0])
    missing = sum("missing-prediction" in r.flags for r in reports)
    if missing:
        _event("missing-predictions", logging.WARNING, count=missing, of=len(reports))
    report = aggregate(reports, runs=labels if len(set(labels)) > 1 else None, seed=args.seed)
    if args.format == "json":
        text = report_json(report, reports if args.samples else ())
    elif args.format == "csv":
        text = report_csv(report)
    else:
        text = report_table(report)
    if args.out:
        write_atomic(Path(args.out), text)
    else:
        sys.stdout.write(text)
    _event("eval-done", n=report.n, missing=missing, unknown=len(unknown), match=args.match)
    return 0


def cmd_export_kicad(args) -> int:
    geoms = _load(args.input)
    out = _out_dir(args, "kicad")
    for g in geoms:
        name = g.source_id or g.package_class.name
        write_atomic(out / f"{name}.kicad_mod", export_kicad(g, name))
    _event("export-done", out=out, written=len(geoms))
    return 0


def cmd_overlay(args) -> int:
    truths = _load(args.truth)
    preds = read_predictions(args.predictions)
    reports, labels, _ = score_predictions(truths, preds)
    spec = _render_spec(args)
    out = _out_dir(args, "overlay")
    by_id = {g.source_id: g for g in truths}
    written = 0
    for rep, run in zip(reports, labels):
        truth = by_id[rep.sample_id]
        answers = preds.get((rep.sample_id, run), {})
        centers = parse_prediction(answers[2], 2).value if 2 in answers else None
        dims = parse_prediction(answers[3], 3).value if 3 in answers else None
        pred = answers_to_geometry(centers, dims, truth)
        suffix = f"-{run}" if run else ""
        write_atomic(out / f"{rep.sample_id}{suffix}.svg", render_overlay(pred, truth, spec, iou=rep.iou_ic))
        written += 1
    _event("overlay-done", out=out, written=written)
    return 0


# ---------------------------------------------------------------------------


def _add_render_flags(p):
    g = p.add_argument_group("drawing options")
    g.add_argument("--px-per-mm", type=float, help="drawing scale (default 40)")
    g.add_argument("--font-size-pt", type=float, help="label font size (default 3.5)")
    g.add_argument("--omission-threshold", type=int, help="rows longer than this are drawn with an ellipsis; 0 disables (default 20)")
    g.add_argument("--jitter-mm", type=float, help="random label offset for augmentation (default 0)")
    g.add_argument("--no-pin-numbers", action="store_true", help="omit pin number labels")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icfoot",
        description="Synthetic IC footprint corpora, datasheet-style drawings, QA datasets and metric evaluation.",
        epilog=f"Outputs default to ${ENV_OUT}/<subcommand> (or ./{DEFAULT_OUT_ROOT}/<subcommand>) when -o is omitted.",
        allow_abbrev=False,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, allow_abbrev=False)
        p.set_defaults(func=func)
        return p

    p = add("gen", cmd_gen, "Generate a synthetic footprint corpus.")
    p.add_argument("spec", nargs="?", help="corpus spec JSON (count, seed, class_weights, ranges, id_prefix)")
    p.add_argument("--count", type=int, help="override the spec's sample count")
    p.add_argument("--seed", type=int, help="override the spec's seed (default 0)")
    p.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("-o", "--out", help="output directory")

    p = add("render", cmd_render, "Draw footprints as SVG images.")
    p.add_argument("input", help="gen directory, geometry JSONL, geometry JSON or EDA XML")
    p.add_argument("--seed", type=int, help="seed for label jitter (default 0)")
    p.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("-o", "--out", help="output directory")
    _add_render_flags(p)

    p = add("build-qa", cmd_build_qa, "Build QA conversation samples (JSONL).")
    p.add_argument("input", help="gen directory, geometry JSONL, geometry JSON or EDA XML")
    p.add_argument("--strategy", choices=sorted(DIALOGUE_STRATEGIES), default="S1", help="dialogue strategy (default S1)")
    p.add_argument("--source", choices=SOURCES, default="synthetic", help="corpus origin label (default synthetic)")
    p.add_argument("--image-prefix", default="images/", help="prefix for image references (default images/)")
    p.add_argument("-o", "--out", help="output directory")

    p = add("manifest", cmd_manifest, "Build a training-stage manifest.")
    p.add_argument("--synthetic", help="synthetic conversations JSONL or list of sample ids")
    p.add_argument("--real", help="real-world conversations JSONL or list of sample ids")
    p.add_argument("--strategy", choices=sorted(DATASET_STRATEGIES), default="T4", help="dataset strategy (default T4)")
    p.add_argument("--seed", type=int, help="shuffle seed (default 0)")
    p.add_argument("-o", "--out", help="output directory")

    p = add("eval", cmd_eval, "Score model answers against truth geometry.")
    p.add_argument("--truth", required=True, help="gen directory or geometry JSONL")
    p.add_argument("--predictions", required=True, help="JSONL of {sample_id, task, output_text[, run]}")
    p.add_argument("--format", choices=("json", "csv", "table"), default="table", help="report format (default table)")
    p.add_argument("--samples", action="store_true", help="include per-sample reports in JSON output")
    p.add_argument("--match", choices=("index", "nearest"), default="index", help="pin matching; nearest is for analysis only (default index)")
    p.add_argument("--seed", type=int, help="seed recorded in the report metadata")
    p.add_argument("-o", "--out", help="report file (default stdout)")

    p = add("export-kicad", cmd_export_kicad, "Write KiCad footprint files.")
    p.add_argument("input", help="gen directory, geometry JSONL, geometry JSON or EDA XML")
    p.add_argument("-o", "--out", help="output directory")

    p = add("overlay", cmd_overlay, "Draw predicted pads over the truth layout.")
    p.add_argument("--truth", required=True, help="gen directory or geometry JSONL")
    p.add_argument("--predictions", required=True, help="JSONL of {sample_id, task, output_text[, run]}")
    p.add_argument("-o", "--out", help="output directory")
    _add_render_flags(p)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be >= 1")
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_KVFormatter())
    log.handlers[:] = [handler]
    log.setLevel(logging.DEBUG if args.verbose else logging.INFO)
    log.propagate = False
    try:
        return args.func(args)
    except CLIError as exc:
        _event("error", logging.ERROR, command=args.command, message=exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
