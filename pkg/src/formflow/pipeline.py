"""Checkpointed pipeline with two human review gates.

One run owns one checkpoint directory: `state.json` (deterministic,
hand-editable), `transcript.jsonl`, `pages/*.png`, `ocr/*.txt`,
`stamped.pdf`, and finally `bundle.zip`. Every stage writes its payload
atomically; re-running a completed stage is a no-op. Draft stages stop
at a gate until approved, mirroring a reviewer stepping in before names
and then questions are frozen.
"""

from __future__ import annotations

import configparser
import dataclasses
import fcntl
import hashlib
import io
import json
import logging
import os
import time
import zipfile
from dataclasses import dataclass
from pathlib import Path

from .conventions import NamingConventions, validate_variable
from .errors import FormflowError, SchemaViolation, StageOrderViolation
from .interview import assemble, normalize_datatypes
from .llm.client import HttpBackend, LlmClient
from .llm.scripted import ScriptedBackend
from .llm.stages import (
    DocMetadata,
    QuestionSpec,
    VariableBinding,
    draft_questions,
    generate_doc_metadata,
    pair_checkboxes,
    rename_placeholders,
    write_definitions,
)
from .ocr_context import (
    CommandOcr,
    CommandRasterizer,
    PlaceholderContext,
    RecordedOcr,
    RecordedRasterizer,
    WordBox,
    ocr_pages,
    rasterize,
    reconcile,
    words_to_page_frame,
)
from .pdf import PdfReader, classify_all, enumerate_fields, stamp_placeholders
from .pdf.acroform import FieldDescriptor, PlaceholderMap, _inherited
from .schemas import validate_stage

logger = logging.getLogger("formflow.pipeline")

STAGES = ("ingested", "stamped", "ocr_done", "metadata_bound",
          "bindings_draft", "bindings_reviewed", "questions_draft",
          "questions_reviewed", "assembled")
GATES = {"bindings_reviewed": "bindings_draft",
         "questions_reviewed": "questions_draft"}

STATE_FILE = "state.json"
TRANSCRIPT_FILE = "transcript.jsonl"
STAMPED_FILE = "stamped.pdf"
SOURCE_FILE = "source.pdf"
YAML_FILE = "interview.yml"
BUNDLE_FILE = "bundle.zip"
LOCK_FILE = ".lock"
AUDIT_LOG = "audit.log"


def stage_index(stage: str) -> int:
    try:
        return STAGES.index(stage)
    except ValueError:
        raise StageOrderViolation(f"unknown stage {stage!r}; "
                                  f"stages are {', '.join(STAGES)}") from None


# --- configuration ------------------------------------------------------------


@dataclass
class PipelineConfig:
    mode: str = "record"            # live | record | replay
    model: str = "scripted-v1"
    api_base: str = "scripted"      # "scripted" or an HTTP base URL
    api_key_env: str = "FORMFLOW_API_KEY"
    dpi: int = 200
    rasterizer: str = "command"     # command | recorded
    rasterizer_binary: str = "pdftoppm"
    rasterizer_fixtures: str = ""
    ocr: str = "command"            # command | recorded
    ocr_binary: str = "tesseract"
    ocr_fixtures: str = ""
    pair_radius: float = 150.0
    pair_overlap: float = 10.0
    gates: bool = True

    @classmethod
    def from_sources(cls, config_file: Path | None = None,
                     env: dict | None = None,
                     overrides: dict | None = None) -> "PipelineConfig":
        """Precedence: defaults < config file < environment < overrides."""
        values: dict = {}
        if config_file:
            parser = configparser.ConfigParser()
            parser.read(config_file)
            if parser.has_section("formflow"):
                values.update(parser.items("formflow"))
        env = os.environ if env is None else env
        for f in dataclasses.fields(cls):
            var = f"FORMFLOW_{f.name.upper()}"
            if var in env:
                values[f.name] = env[var]
        for key, value in (overrides or {}).items():
            if value is not None:
                values[key] = value

        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name not in values:
                continue
            raw = values[f.name]
            if f.type in ("int", int):
                raw = int(raw)
            elif f.type in ("float", float):
                raw = float(raw)
            elif f.type in ("bool", bool) and isinstance(raw, str):
                raw = raw.strip().lower() in ("1", "true", "yes", "on")
            kwargs[f.name] = raw
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


# --- checkpoint ---------------------------------------------------------------


class CheckpointLock:
    """Advisory single-writer lock on the checkpoint directory."""

    def __init__(self, directory: Path):
        self.path = Path(directory) / LOCK_FILE
        self._fh = None

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w")
        try:
            fcntl.flock(self._fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError:
            self._fh.close()
            raise FormflowError(
                f"another process holds the lock on {self.path.parent}")
        return self

    def __exit__(self, *exc):
        fcntl.flock(self._fh, fcntl.LOCK_UN)
        self._fh.close()


class PipelineCheckpoint:
    def __init__(self, directory: Path, state: dict):
        self.dir = Path(directory)
        self.state = state

    # -- persistence --

    @classmethod
    def create(cls, directory: Path, source_bytes: bytes,
               source_name: str, config: PipelineConfig) -> "PipelineCheckpoint":
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        if (directory / STATE_FILE).exists():
            raise FormflowError(f"{directory} already holds a run; "
                                "use resume or a fresh directory")
        digest = hashlib.sha256(source_bytes).hexdigest()
        fields = classify_all(enumerate_fields(source_bytes))
        page_count = len(PdfReader(source_bytes).pages())
        state = {
            "run_id": digest[:12],
            "stage": "ingested",
            "input": {"source_name": source_name, "source_digest": digest,
                      "kind": "pdf"},
            "config": config.to_dict(),
            "payloads": {
                "ingested": {
                    "kind": "pdf",
                    "source_name": source_name,
                    "source_digest": digest,
                    "page_count": page_count,
                    "fields": [f.to_dict() for f in fields],
                },
            },
            "audit": [],
            "transcript_path": TRANSCRIPT_FILE,
        }
        (directory / SOURCE_FILE).write_bytes(source_bytes)
        cp = cls(directory, state)
        cp.audit("ingested", source=source_name, fields=len(fields))
        cp.save()
        return cp

    @classmethod
    def load(cls, directory: Path) -> "PipelineCheckpoint":
        directory = Path(directory)
        state_path = directory / STATE_FILE
        if not state_path.exists():
            raise FormflowError(f"{directory} has no {STATE_FILE}")
        return cls(directory, json.loads(state_path.read_text("utf-8")))

    def save(self) -> None:
        data = self.serialized()
        tmp = self.dir / (STATE_FILE + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, self.dir / STATE_FILE)

    def serialized(self) -> bytes:
        return (json.dumps(self.state, indent=2, sort_keys=True,
                           ensure_ascii=False) + "\n").encode("utf-8")

    def version(self) -> str:
        return hashlib.sha256(self.serialized()).hexdigest()

    # -- bookkeeping --

    @property
    def stage(self) -> str:
        return self.state["stage"]

    @property
    def run_id(self) -> str:
        return self.state["run_id"]

    def payload(self, stage: str) -> dict:
        try:
            return self.state["payloads"][stage]
        except KeyError:
            raise StageOrderViolation(
                f"stage {stage!r} has no payload yet") from None

    def config(self) -> PipelineConfig:
        return PipelineConfig.from_dict(self.state.get("config", {}))

    def audit(self, event: str, **detail) -> None:
        entry = {"seq": len(self.state["audit"]) + 1, "event": event}
        entry.update(detail)
        self.state["audit"].append(entry)
        stamp = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        with open(self.dir / AUDIT_LOG, "a", encoding="utf-8") as fh:
            fh.write(f"{stamp} {json.dumps(entry, sort_keys=True)}\n")


# --- stage runners ------------------------------------------------------------


def _make_client(cp: PipelineCheckpoint, config: PipelineConfig) -> LlmClient:
    transcript = cp.dir / cp.state["transcript_path"]
    backend = None
    if config.mode in ("live", "record"):
        if config.api_base == "scripted":
            backend = ScriptedBackend()
        else:
            backend = HttpBackend(config.api_base, config.api_key_env)
    return LlmClient(backend=backend, mode=config.mode,
                     transcript_path=transcript)


def _page_heights(pdf_bytes: bytes) -> list[float]:
    reader = PdfReader(pdf_bytes)
    heights = []
    for ref in reader.pages():
        page = reader.resolve(ref)
        media = _inherited(reader, page, "MediaBox") or [0, 0, 612, 792]
        media = [float(reader.resolve(v)) for v in media]
        heights.append(media[3] - media[1])
    return heights


def _run_stamped(cp: PipelineCheckpoint, config: PipelineConfig) -> dict:
    source = (cp.dir / SOURCE_FILE).read_bytes()
    # geometry work needs the live widget handles, not the json echo
    live = classify_all(enumerate_fields(source))
    stamped, pmap, final_fields = stamp_placeholders(source, live)
    (cp.dir / STAMPED_FILE).write_bytes(stamped)
    return {
        "placeholder_map": pmap.to_dict(),
        "fields": [f.to_dict() for f in final_fields],
        "stamped_digest": hashlib.sha256(stamped).hexdigest(),
    }


def _run_ocr(cp: PipelineCheckpoint, config: PipelineConfig) -> dict:
    stamped = (cp.dir / STAMPED_FILE).read_bytes()
    if config.rasterizer == "recorded":
        raster = RecordedRasterizer(Path(config.rasterizer_fixtures))
    else:
        raster = CommandRasterizer(config.rasterizer_binary)
    if config.ocr == "recorded":
        ocr = RecordedOcr(Path(config.ocr_fixtures))
    else:
        ocr = CommandOcr(config.ocr_binary)

    images = rasterize(stamped, cp.dir, dpi=config.dpi, adapter=raster)
    page_texts = ocr_pages(images, cp.dir, adapter=ocr)
    pmap = PlaceholderMap.from_dict(cp.payload("stamped")["placeholder_map"])
    context = reconcile(page_texts, pmap)

    heights = _page_heights(stamped)
    words_by_page = {}
    for pt in page_texts:
        if not pt.words:
            continue
        height = heights[pt.page - 1] if pt.page - 1 < len(heights) else 792.0
        boxes = words_to_page_frame(pt.words, height, config.dpi)
        words_by_page[str(pt.page - 1)] = [
            [w.text, round(w.x0, 2), round(w.y0, 2),
             round(w.x1, 2), round(w.y1, 2)]
            for w in boxes]
    return {"context": context.to_dict(), "dpi": config.dpi,
            "words_by_page": words_by_page}


def _run_metadata(cp: PipelineCheckpoint, config: PipelineConfig) -> dict:
    client = _make_client(cp, config)
    context = PlaceholderContext.from_dict(cp.payload("ocr_done")["context"])
    metadata = generate_doc_metadata(client, context, model=config.model)
    return {"metadata": metadata.to_dict()}


def _fields_from_payload(payload: dict) -> list[FieldDescriptor]:
    return [FieldDescriptor(
        name=d["name"], kind=d["kind"], page=d["page"],
        bbox=tuple(d["bbox"]), size_class=d["size_class"],
        options=tuple(d.get("options", ())))
        for d in payload["fields"]]


def _run_bindings_draft(cp: PipelineCheckpoint, config: PipelineConfig) -> dict:
    client = _make_client(cp, config)
    conv = NamingConventions.defaults()
    stamped_payload = cp.payload("stamped")
    context = PlaceholderContext.from_dict(cp.payload("ocr_done")["context"])
    pmap = PlaceholderMap.from_dict(stamped_payload["placeholder_map"])
    fields = _fields_from_payload(stamped_payload)

    bindings = rename_placeholders(client, context, pmap, fields, conv,
                                   model=config.model)
    bindings = write_definitions(client, bindings, context,
                                 model=config.model)

    small = [f for f in fields if f.size_class == "small"]
    words_by_page = {
        int(k): [WordBox(t, x0, y0, x1, y1) for t, x0, y0, x1, y1 in v]
        for k, v in cp.payload("ocr_done").get("words_by_page", {}).items()}
    checkbox_bindings = pair_checkboxes(
        client, small, words_by_page, conv, model=config.model,
        radius=config.pair_radius, overlap=config.pair_overlap)
    for b in checkbox_bindings:
        if not b.definition:
            b = dataclasses.replace(
                b, definition=f"unidentified field on page {b.page + 1}")
        bindings.append(b)
    return {"bindings": [b.to_dict() for b in bindings]}


def _run_questions_draft(cp: PipelineCheckpoint, config: PipelineConfig) -> dict:
    client = _make_client(cp, config)
    bindings = [VariableBinding.from_dict(d)
                for d in cp.payload("bindings_reviewed")["bindings"]]
    questions = draft_questions(client, bindings, model=config.model)
    overrides: list = []
    questions = normalize_datatypes(questions, overrides)
    for o in overrides:
        cp.audit("datatype_override", **o)
    return {"questions": [q.to_dict() for q in questions],
            "overrides": overrides}


def _write_bundle(cp: PipelineCheckpoint, yaml_text: str,
                  metadata: DocMetadata) -> Path:
    next_steps = (
        f"# Next steps\n\n## {metadata.title}\n\n{metadata.description}\n\n"
        "TODO(author): describe service of process, filing fees, and what\n"
        "to do after this form is filed. This stub is generated; the\n"
        "content is yours to write.\n")
    bundle_path = cp.dir / BUNDLE_FILE
    stamp = (1980, 1, 1, 0, 0, 0)
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        for name, data in [
            (YAML_FILE, yaml_text.encode("utf-8")),
            (STAMPED_FILE, (cp.dir / STAMPED_FILE).read_bytes()),
            ("next_steps.md", next_steps.encode("utf-8")),
        ]:
            zf.writestr(zipfile.ZipInfo(name, date_time=stamp), data)
    bundle_path.write_bytes(buf.getvalue())
    return bundle_path


def _run_assembled(cp: PipelineCheckpoint, config: PipelineConfig) -> dict:
    metadata = DocMetadata.from_dict(
        cp.payload("metadata_bound")["metadata"])
    bindings = [VariableBinding.from_dict(d)
                for d in cp.payload("bindings_reviewed")["bindings"]]
    questions = [QuestionSpec.from_dict(d)
                 for d in cp.payload("questions_reviewed")["questions"]]
    spec, yaml_text = assemble(metadata, questions, bindings, STAMPED_FILE)
    (cp.dir / YAML_FILE).write_text(yaml_text, "utf-8")
    _write_bundle(cp, yaml_text, metadata)
    return {
        "yaml_path": YAML_FILE,
        "bundle_path": BUNDLE_FILE,
        "spec_digest": hashlib.sha256(yaml_text.encode("utf-8")).hexdigest(),
    }


_RUNNERS = {
    "stamped": _run_stamped,
    "ocr_done": _run_ocr,
    "metadata_bound": _run_metadata,
    "bindings_draft": _run_bindings_draft,
    "questions_draft": _run_questions_draft,
    "assembled": _run_assembled,
}


# --- stage driver -------------------------------------------------------------


def _check_conventions(stage: str, payload: dict) -> list[dict]:
    """Error-severity naming violations in a reviewed/edited payload."""
    conv = NamingConventions.defaults()
    problems = []
    items = payload.get("bindings") or payload.get("questions") or []
    for i, item in enumerate(items):
        for v in validate_variable(item.get("variable", ""), conv):
            if v.severity == "error":
                problems.append({
                    "path": f"/{'bindings' if 'bindings' in payload else 'questions'}/{i}/variable",
                    "variable": item.get("variable", ""),
                    "code": v.code, "message": v.message,
                })
    return problems


def run_stage(cp: PipelineCheckpoint, target: str,
              config: PipelineConfig | None = None, force: bool = False,
              no_gate: bool = False) -> PipelineCheckpoint:
    """Advance the checkpoint into `target`, which must be the next stage."""
    config = config or cp.config()
    current = stage_index(cp.stage)
    wanted = stage_index(target)

    if wanted <= current and not force:
        logger.info("stage %s already complete; no-op", target)
        return cp
    if wanted > current + 1:
        raise StageOrderViolation(
            f"cannot run {target!r} from {cp.stage!r}; stages advance one "
            "at a time")

    validate_stage(STAGES[wanted - 1], cp.payload(STAGES[wanted - 1]))

    if target in GATES:
        draft_stage = GATES[target]
        if config.gates and not no_gate:
            raise StageOrderViolation(
                f"{draft_stage} needs review: run approve (or pass "
                "--no-gate to promote automatically)")
        return approve(cp, draft_stage, approved_by="no-gate",
                       audit_event="gate_skipped")

    payload = _RUNNERS[target](cp, config)
    validate_stage(target, payload)
    cp.state["payloads"][target] = payload
    if force and wanted <= current:
        # a forced re-run invalidates everything downstream of it
        for later in STAGES[wanted + 1:]:
            cp.state["payloads"].pop(later, None)
    cp.state["stage"] = target
    cp.audit("stage", stage=target, **({"forced": True} if force else {}))
    cp.save()
    return cp


def approve(cp: PipelineCheckpoint, stage: str, approved_by: str = "cli",
            audit_event: str = "approved") -> PipelineCheckpoint:
    """Promote a reviewed draft stage: bindings_draft or questions_draft."""
    if stage in GATES:
        stage = GATES[stage]
    if stage not in GATES.values():
        raise StageOrderViolation(
            f"{stage!r} is not a reviewable draft stage")
    reviewed = next(k for k, v in GATES.items() if v == stage)
    if stage_index(cp.stage) < stage_index(stage):
        raise StageOrderViolation(
            f"cannot approve {stage}: checkpoint is at {cp.stage}")
    if stage_index(cp.stage) >= stage_index(reviewed):
        logger.info("%s already approved; no-op", stage)
        return cp

    payload = dict(cp.payload(stage))
    validate_stage(stage, payload)
    problems = _check_conventions(stage, payload)
    if problems:
        raise SchemaViolation(
            f"{stage} has naming violations: "
            + "; ".join(f"{p['path']}: {p['message']}" for p in problems))
    payload["approved_by"] = approved_by
    cp.state["payloads"][reviewed] = payload
    cp.state["stage"] = reviewed
    cp.audit(audit_event, stage=reviewed, approved_by=approved_by)
    cp.save()
    return cp


def run_all(cp: PipelineCheckpoint, config: PipelineConfig | None = None,
            stop_after: str | None = None, no_gate: bool = False) -> str:
    """Run stages until done, a gate, or `stop_after`. Returns a status
    string: complete | stopped:<stage> | waiting_review:<draft stage>."""
    config = config or cp.config()
    while cp.stage != STAGES[-1]:
        target = STAGES[stage_index(cp.stage) + 1]
        if target in GATES and config.gates and not no_gate:
            return f"waiting_review:{GATES[target]}"
        run_stage(cp, target, config, no_gate=no_gate)
        if stop_after and target == stop_after:
            return f"stopped:{target}"
    return "complete"


# --- metrics ------------------------------------------------------------------


@dataclass
class MetricsReport:
    rows: list[dict]

    def aggregates(self) -> dict:
        n = len(self.rows)
        total = sum(r["total_fields"] for r in self.rows)
        placed = sum(r["placed_inline"] for r in self.rows)
        paired = sum(r["paired_checkboxes"] for r in self.rows)
        unid = sum(r["unidentified"] for r in self.rows)
        unweighted = {
            "recognized_fraction":
                sum(r["recognized_fraction"] for r in self.rows) / n,
            "paired_fraction":
                sum(r["paired_fraction"] for r in self.rows) / n,
            "unidentified_fraction":
                sum(r["unidentified_fraction"] for r in self.rows) / n,
        } if n else {"recognized_fraction": 0.0, "paired_fraction": 0.0,
                     "unidentified_fraction": 0.0}
        weighted = {
            "total_fields": total,
            "placed_inline": placed,
            "paired_checkboxes": paired,
            "unidentified": unid,
            "recognized_fraction": (placed + paired) / total if total else 0.0,
            "paired_fraction": paired / total if total else 0.0,
            "unidentified_fraction": unid / total if total else 0.0,
        }
        return {"unweighted_mean": unweighted, "field_weighted": weighted}

    def to_json(self) -> str:
        return json.dumps({"forms": self.rows, "aggregate": self.aggregates()},
                          indent=2, sort_keys=True)

    def render_text(self) -> str:
        headers = ["form", "total", "inline", "paired", "unidentified",
                   "recognized%", "unidentified%"]
        lines = []

        def fmt(name, total, placed, paired, unid, rec_f, unid_f):
            return [name, str(total), str(placed), str(paired), str(unid),
                    f"{rec_f * 100:.1f}", f"{unid_f * 100:.1f}"]

        for r in self.rows:
            lines.append(fmt(r["form"], r["total_fields"], r["placed_inline"],
                             r["paired_checkboxes"], r["unidentified"],
                             r["recognized_fraction"],
                             r["unidentified_fraction"]))
        agg = self.aggregates()
        un = agg["unweighted_mean"]
        we = agg["field_weighted"]
        lines.append(fmt("mean (per form)", "-", "-", "-", "-",
                         un["recognized_fraction"],
                         un["unidentified_fraction"]))
        lines.append(fmt("all fields (weighted)", we["total_fields"],
                         we["placed_inline"], we["paired_checkboxes"],
                         we["unidentified"], we["recognized_fraction"],
                         we["unidentified_fraction"]))

        widths = [max(len(h), *(len(row[i]) for row in lines))
                  for i, h in enumerate(headers)]
        out = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
        out.append("  ".join("-" * w for w in widths))
        for row in lines:
            out.append("  ".join(c.ljust(widths[i])
                                 for i, c in enumerate(row)))
        return "\n".join(out)


def compute_metrics(checkpoint_dirs: list[Path]) -> MetricsReport:
    """Coverage per form plus unweighted-mean and field-weighted rows."""
    rows = []
    for directory in checkpoint_dirs:
        cp = PipelineCheckpoint.load(directory)
        if stage_index(cp.stage) < stage_index("bindings_draft"):
            raise StageOrderViolation(
                f"{directory}: metrics need bindings_draft or later, "
                f"run is at {cp.stage}")
        fields = cp.payload("stamped")["fields"]
        context = cp.payload("ocr_done")["context"]
        bindings = cp.payload("bindings_draft")["bindings"]

        total = len(fields)
        placed = len(context["recovered"])
        paired = sum(1 for b in bindings if "paired" in b.get("flags", []))
        unid = total - placed - paired
        row = {
            "form": cp.payload("ingested")["source_name"],
            "total_fields": total,
            "placed_inline": placed,
            "paired_checkboxes": paired,
            "unidentified": unid,
            "recognized_fraction": (placed + paired) / total if total else 0.0,
            "paired_fraction": paired / total if total else 0.0,
            "unidentified_fraction": unid / total if total else 0.0,
        }
        fractions = (row["recognized_fraction"] + row["unidentified_fraction"])
        if abs(fractions - 1.0) > 1e-9 and total:
            raise FormflowError(
                f"metrics identity broken for {directory}: fractions sum "
                f"to {fractions}")
        rows.append(row)
    return MetricsReport(rows=rows)
