"""Command-line entry points.

Data goes to files or standard output; every diagnostic goes to standard
error. Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .docx_labeler import apply_run_edits, extract_runs
from .errors import FormflowError, MissingAnswer, ValidationFailure
from .interview import parse_interview_yaml, run_fill
from .llm.client import HttpBackend, LlmClient
from .llm.scripted import ScriptedBackend
from .llm.stages import label_docx_runs
from .pipeline import (
    GATES,
    STAGES,
    CheckpointLock,
    PipelineCheckpoint,
    PipelineConfig,
    approve,
    compute_metrics,
    run_all,
)


def _config_from_args(args) -> PipelineConfig:
    overrides = {
        "mode": getattr(args, "mode", None),
        "model": getattr(args, "model", None),
        "api_base": getattr(args, "api_base", None),
        "dpi": getattr(args, "dpi", None),
        "rasterizer": getattr(args, "rasterizer", None),
        "rasterizer_fixtures": getattr(args, "rasterizer_fixtures", None),
        "ocr": getattr(args, "ocr", None),
        "ocr_fixtures": getattr(args, "ocr_fixtures", None),
        "gates": (False if getattr(args, "no_gate", False) else None),
    }
    config_file = getattr(args, "config", None)
    return PipelineConfig.from_sources(
        config_file=Path(config_file) if config_file else None,
        overrides=overrides)


def _add_llm_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=("live", "record", "replay"))
    p.add_argument("--model")
    p.add_argument("--api-base", dest="api_base")
    p.add_argument("--config", help="INI config file ([formflow] section)")


def _status_line(status: str, cp: PipelineCheckpoint) -> str:
    if status.startswith("waiting_review:"):
        stage = status.split(":", 1)[1]
        return (f"run {cp.run_id} is waiting for review of {stage}; "
                f"run `formflow approve --checkpoint {cp.dir} "
                f"--stage {stage}` after editing")
    return f"run {cp.run_id} {status} (stage {cp.stage})"


def cmd_label_docx(args) -> int:
    src = Path(args.input)
    if not src.exists():
        print(f"error: input {src} does not exist", file=sys.stderr)
        return 2
    config = _config_from_args(args)
    transcript = Path(args.transcript) if args.transcript else \
        Path(str(args.output) + ".transcript.jsonl")
    backend = None
    if config.mode in ("live", "record"):
        backend = (ScriptedBackend() if config.api_base == "scripted"
                   else HttpBackend(config.api_base, config.api_key_env))
    client = LlmClient(backend=backend, mode=config.mode,
                       transcript_path=transcript)

    table = extract_runs(src.read_bytes())
    result = label_docx_runs(client, table, model=config.model)
    labeled = apply_run_edits(src.read_bytes(), result.edits)
    Path(args.output).write_bytes(labeled)
    print(f"labeled {len(result.edits)} run(s) -> {args.output}",
          file=sys.stderr)
    for q in result.quarantined:
        print(f"quarantined run ({q['paragraph_index']},{q['run_index']}): "
              + "; ".join(v["message"] for v in q["violations"]),
              file=sys.stderr)
    return 0


def cmd_analyze_pdf(args) -> int:
    src = Path(args.input)
    if not src.exists():
        print(f"error: input {src} does not exist", file=sys.stderr)
        return 2
    config = _config_from_args(args)
    with CheckpointLock(Path(args.checkpoint)):
        cp = PipelineCheckpoint.create(Path(args.checkpoint),
                                       src.read_bytes(), src.name, config)
        status = run_all(cp, config, stop_after=args.stop_after,
                         no_gate=args.no_gate)
    print(_status_line(status, cp), file=sys.stderr)
    return 0


def cmd_resume(args) -> int:
    with CheckpointLock(Path(args.checkpoint)):
        cp = PipelineCheckpoint.load(Path(args.checkpoint))
        status = run_all(cp, stop_after=args.stop_after,
                         no_gate=args.no_gate)
    print(_status_line(status, cp), file=sys.stderr)
    return 0


def cmd_approve(args) -> int:
    with CheckpointLock(Path(args.checkpoint)):
        cp = PipelineCheckpoint.load(Path(args.checkpoint))
        approve(cp, args.stage)
    print(f"approved {args.stage}; run resume to continue", file=sys.stderr)
    return 0


def cmd_build(args) -> int:
    with CheckpointLock(Path(args.checkpoint)):
        cp = PipelineCheckpoint.load(Path(args.checkpoint))
        status = run_all(cp)
    if status != "complete":
        print(f"error: cannot build, {_status_line(status, cp)}",
              file=sys.stderr)
        return 1
    bundle = cp.dir / cp.payload("assembled")["bundle_path"]
    out = Path(args.output)
    out.write_bytes(bundle.read_bytes())
    print(f"bundle -> {out}", file=sys.stderr)
    return 0


def cmd_fill(args) -> int:
    spec_path = Path(args.spec)
    answers_path = Path(args.answers)
    if not spec_path.exists():
        print(f"error: interview file {spec_path} does not exist",
              file=sys.stderr)
        return 2
    if not answers_path.exists():
        print(f"error: answers file {answers_path} does not exist",
              file=sys.stderr)
        return 2
    spec = parse_interview_yaml(spec_path.read_text("utf-8"))
    answers = json.loads(answers_path.read_text("utf-8"))
    template = (Path(args.template) if args.template
                else spec_path.parent / spec.template_ref)
    if not template.exists():
        print(f"error: template {template} does not exist", file=sys.stderr)
        return 2
    try:
        filled = run_fill(spec, answers, template.read_bytes())
    except MissingAnswer as exc:
        print(f"error: missing answers for: {', '.join(exc.variables)}",
              file=sys.stderr)
        return 1
    except ValidationFailure as exc:
        for variable, message in exc.failures:
            print(f"error: {variable}: {message}", file=sys.stderr)
        return 1
    Path(args.output).write_bytes(filled)
    print(f"filled document -> {args.output}", file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    report = compute_metrics([Path(d) for d in args.checkpoint])
    if args.json:
        print(report.to_json())
    else:
        print(report.render_text())
    return 0


def cmd_review(args) -> int:
    import uvicorn

    from .review_api import create_app

    static_dir = Path(args.static_dir) if args.static_dir else None
    app = create_app(Path(args.checkpoint), static_dir=static_dir)
    print(f"review API on http://{args.host}:{args.port}", file=sys.stderr)
    if static_dir:
        print(f"review UI on http://{args.host}:{args.port}/ui",
              file=sys.stderr)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="formflow",
        description="Turn fillable court forms into guided-interview "
                    "definitions with human review gates.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("label-docx", help="label a DOCX template's runs")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--transcript")
    _add_llm_flags(p)
    p.set_defaults(func=cmd_label_docx)

    p = sub.add_parser("analyze-pdf", help="start a checkpointed PDF run")
    p.add_argument("input")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--stop-after", choices=STAGES)
    p.add_argument("--no-gate", action="store_true",
                   help="promote drafts without review")
    p.add_argument("--dpi", type=int)
    p.add_argument("--rasterizer", choices=("command", "recorded"))
    p.add_argument("--rasterizer-fixtures", dest="rasterizer_fixtures")
    p.add_argument("--ocr", choices=("command", "recorded"))
    p.add_argument("--ocr-fixtures", dest="ocr_fixtures")
    _add_llm_flags(p)
    p.set_defaults(func=cmd_analyze_pdf)

    p = sub.add_parser("resume", help="continue a checkpointed run")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--stop-after", choices=STAGES)
    p.add_argument("--no-gate", action="store_true")
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("approve", help="approve a reviewed draft stage")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--stage", required=True,
                   choices=sorted(set(GATES) | set(GATES.values())))
    p.set_defaults(func=cmd_approve)

    p = sub.add_parser("build", help="assemble and export the bundle")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("fill", help="fill a template from an answers file")
    p.add_argument("spec", help="interview YAML")
    p.add_argument("answers", help="answers JSON file")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--template", help="template path (defaults to the "
                                      "reference inside the interview)")
    p.set_defaults(func=cmd_fill)

    p = sub.add_parser("report", help="coverage metrics over checkpoints")
    p.add_argument("--checkpoint", action="append", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("review", help="serve the review API")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static-dir", dest="static_dir",
                   help="serve a built UI from this directory under /ui")
    p.set_defaults(func=cmd_review)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FormflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
