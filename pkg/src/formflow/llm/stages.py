"""The staged workflow: label runs, describe, rename, define, question, pair.

Every stage demands a strict JSON reply and gets exactly one repair
retry quoting the validation error; after that the stage fails loudly.
Invalid variable names never pass downstream: they are quarantined onto
review flags instead.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from string import Template

from ..conventions import NamingConventions, validate_variable
from ..docx_labeler import RunEdit, RunTable, serialize_runs
from ..errors import BudgetExceeded, SchemaViolation
from ..ocr_context import PlaceholderContext, WordBox
from ..pdf.acroform import FieldDescriptor, PlaceholderMap
from .client import ChatRequest, LlmClient

logger = logging.getLogger("formflow.llm")

DATATYPES = ("text", "area", "yesno", "number", "currency", "date",
             "email", "phone", "zip")

# near-misses a model is known to emit for the closed datatype list
_DATATYPE_ALIASES = {
    "integer": "number",
    "int": "number",
    "float": "number",
    "decimal": "number",
    "string": "text",
    "str": "text",
    "textarea": "area",
    "boolean": "yesno",
    "bool": "yesno",
    "checkbox": "yesno",
    "money": "currency",
    "dollar": "currency",
    "telephone": "phone",
    "datetime": "date",
    "postal_code": "zip",
    "zipcode": "zip",
}

CHUNK_TOKEN_LIMIT = 3000
REQUEST_TOKEN_LIMIT = 8000
DEFAULT_MODEL = "scripted-v1"

_TEMPLATE_VAR_RE = re.compile(r"\{\{(.*?)\}\}")


def estimate_tokens(text: str) -> int:
    """Cheap upper-bound token estimate (about 4 characters per token)."""
    return (len(text) + 3) // 4


@dataclass(frozen=True)
class DocMetadata:
    title: str
    description: str

    def to_dict(self) -> dict:
        return {"title": self.title, "description": self.description}

    @classmethod
    def from_dict(cls, d: dict) -> "DocMetadata":
        return cls(title=d["title"], description=d["description"])


@dataclass(frozen=True)
class VariableBinding:
    token: str
    field_name: str
    kind: str
    variable: str
    definition: str = ""
    page: int = 0
    flags: tuple[str, ...] = ()
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "token": self.token, "field_name": self.field_name,
            "kind": self.kind, "variable": self.variable,
            "definition": self.definition, "page": self.page,
            "flags": list(self.flags), "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VariableBinding":
        return cls(token=d["token"], field_name=d["field_name"],
                   kind=d["kind"], variable=d["variable"],
                   definition=d.get("definition", ""),
                   page=d.get("page", 0),
                   flags=tuple(d.get("flags", [])),
                   notes=d.get("notes", ""))


@dataclass(frozen=True)
class QuestionSpec:
    variable: str
    prompt: str
    datatype: str
    screen_id: int
    screen_title: str
    help: str = ""

    def to_dict(self) -> dict:
        return {"variable": self.variable, "prompt": self.prompt,
                "datatype": self.datatype, "screen_id": self.screen_id,
                "screen_title": self.screen_title, "help": self.help}

    @classmethod
    def from_dict(cls, d: dict) -> "QuestionSpec":
        return cls(variable=d["variable"], prompt=d["prompt"],
                   datatype=d["datatype"], screen_id=int(d["screen_id"]),
                   screen_title=d["screen_title"], help=d.get("help", ""))


@dataclass
class LabelResult:
    edits: list[RunEdit] = field(default_factory=list)
    quarantined: list[dict] = field(default_factory=list)


# --- prompt plumbing ----------------------------------------------------------


def _template(name: str) -> Template:
    text = resources.files("formflow.prompts").joinpath(f"{name}.txt") \
        .read_text("utf-8")
    return Template(text)


_SYSTEM = None


def _system_prompt() -> str:
    global _SYSTEM
    if _SYSTEM is None:
        _SYSTEM = resources.files("formflow.prompts").joinpath("system.txt") \
            .read_text("utf-8").strip()
    return _SYSTEM


def _strip_fences(text: str) -> str:
    stripped = text.strip()
    if stripped.startswith("```"):
        stripped = re.sub(r"\A```[a-zA-Z]*\n", "", stripped)
        stripped = re.sub(r"\n```\Z", "", stripped)
    return stripped.strip()


def _ask_json(client: LlmClient, model: str, template_name: str,
              subs: dict, validate) -> object:
    """One stage call: render prompt, demand strict JSON, one repair retry."""
    user = _template(template_name).substitute(subs)
    budget = estimate_tokens(user)
    if budget > REQUEST_TOKEN_LIMIT:
        raise BudgetExceeded(
            f"prompt for {template_name} estimates {budget} tokens, "
            f"limit {REQUEST_TOKEN_LIMIT}; chunk the input")
    messages = [{"role": "system", "content": _system_prompt()},
                {"role": "user", "content": user}]
    last_error = ""
    for attempt in range(2):
        reply = client.complete(ChatRequest.make(model, messages))
        try:
            parsed = json.loads(_strip_fences(reply))
            validate(parsed)
            return parsed
        except (ValueError, SchemaViolation) as exc:
            last_error = str(exc)
            if attempt == 0:
                logger.warning("%s reply rejected (%s); one repair retry",
                               template_name, last_error)
                messages = messages + [
                    {"role": "assistant", "content": reply},
                    {"role": "user", "content":
                        f"Your previous reply was rejected: {last_error}. "
                        "Respond again with corrected strict JSON only."},
                ]
    raise SchemaViolation(f"{template_name}: {last_error}")


# --- stage: label DOCX runs ---------------------------------------------------


def _chunk_run_tables(table: RunTable) -> list[list]:
    """Split triples at paragraph boundaries into token-bounded chunks
    with one paragraph of overlap for context continuity."""
    triples = [[r.paragraph_index, r.run_index, r.text] for r in table.runs]
    if not triples:
        return [[]]
    by_para: dict[int, list] = {}
    for t in triples:
        by_para.setdefault(t[0], []).append(t)
    paras = [by_para[p] for p in sorted(by_para)]

    chunks: list[list] = []
    current: list = []
    for para in paras:
        para_tokens = estimate_tokens(json.dumps(para, ensure_ascii=False))
        if para_tokens > CHUNK_TOKEN_LIMIT:
            raise BudgetExceeded(
                f"paragraph {para[0][0]} alone estimates {para_tokens} "
                f"tokens (limit {CHUNK_TOKEN_LIMIT}); cannot chunk further")
        current_tokens = estimate_tokens(json.dumps(current, ensure_ascii=False))
        if current and current_tokens + para_tokens > CHUNK_TOKEN_LIMIT:
            chunks.append(current)
            overlap = [t for t in current if t[0] == current[-1][0]]
            current = overlap + para
        else:
            current = current + para
    chunks.append(current)
    return chunks


def label_docx_runs(client: LlmClient, table: RunTable,
                    conv: NamingConventions | None = None,
                    model: str = DEFAULT_MODEL) -> LabelResult:
    """Ask for full-text run replacements; quarantine edits whose embedded
    variables break the naming rules."""
    conv = conv or NamingConventions.defaults()
    known = {(r.paragraph_index, r.run_index) for r in table.runs}

    def validate(parsed):
        if not isinstance(parsed, list):
            raise SchemaViolation("expected a JSON array of triples")
        for item in parsed:
            if (not isinstance(item, list) or len(item) != 3
                    or not isinstance(item[0], int)
                    or not isinstance(item[1], int)
                    or not isinstance(item[2], str)):
                raise SchemaViolation(f"bad triple {item!r}")
            if (item[0], item[1]) not in known:
                raise SchemaViolation(
                    f"triple {item!r} targets a run not in the document")

    merged: dict[tuple[int, int], str] = {}
    for chunk in _chunk_run_tables(table):
        if not chunk:
            continue
        parsed = _ask_json(client, model, "label_runs",
                           {"runs": json.dumps(chunk, ensure_ascii=False)},
                           validate)
        for p, r, text in parsed:
            if (p, r) in merged and merged[(p, r)] != text:
                logger.warning("chunks disagree on run (%d,%d); last wins",
                               p, r)
            merged[(p, r)] = text

    result = LabelResult()
    for (p, r), text in sorted(merged.items()):
        bad = []
        for var in _TEMPLATE_VAR_RE.findall(text):
            bad.extend(v for v in validate_variable(var.strip(), conv)
                       if v.severity == "error")
        if bad:
            result.quarantined.append({
                "paragraph_index": p, "run_index": r, "new_text": text,
                "violations": [v.to_dict() for v in bad],
            })
        else:
            result.edits.append(RunEdit(p, r, text))
    return result


# --- stage: document metadata -------------------------------------------------


def generate_doc_metadata(client: LlmClient, context: PlaceholderContext,
                          model: str = DEFAULT_MODEL) -> DocMetadata:
    if not context.full_text.strip():
        raise ValueError("document text is empty; nothing to describe")

    def validate(parsed):
        if not isinstance(parsed, dict):
            raise SchemaViolation("expected a JSON object")
        for key in ("title", "description"):
            if not isinstance(parsed.get(key), str) or not parsed[key].strip():
                raise SchemaViolation(f"{key} must be a non-empty string")

    parsed = _ask_json(client, model, "doc_metadata",
                       {"document": context.full_text}, validate)
    title, description = parsed["title"].strip(), parsed["description"].strip()
    if len(title) > 120:
        logger.warning("title over 120 chars; truncated")
        title = title[:119] + "…"
    if len(description) > 600:
        logger.warning("description over 600 chars; truncated")
        description = description[:599] + "…"
    return DocMetadata(title=title, description=description)


# --- stage: rename placeholders -----------------------------------------------


def _synthetic_name(token: str) -> str:
    digits = re.search(r"(\d+)", token)
    return f"unknown_field_{digits.group(1) if digits else '00'}"


def rename_placeholders(client: LlmClient, context: PlaceholderContext,
                        placeholder_map: PlaceholderMap,
                        fields: list[FieldDescriptor],
                        conv: NamingConventions | None = None,
                        model: str = DEFAULT_MODEL) -> list[VariableBinding]:
    """One binding per token: recovered tokens are named by the model,
    missing tokens get synthetic review names."""
    conv = conv or NamingConventions.defaults()
    by_name = {f.name: f for f in fields}
    recovered = [t for t in placeholder_map.tokens() if t in context.recovered]

    entries = [{"token": t, "context": context.per_token_window.get(t, "")}
               for t in recovered]

    parsed: list[dict] = []
    if entries:
        def validate(reply):
            if not isinstance(reply, list) or len(reply) != len(entries):
                raise SchemaViolation(
                    f"expected {len(entries)} objects, got "
                    f"{len(reply) if isinstance(reply, list) else type(reply)}")
            for i, item in enumerate(reply):
                if not isinstance(item, dict):
                    raise SchemaViolation(f"entry {i} is not an object")
                if item.get("token") != entries[i]["token"]:
                    raise SchemaViolation(
                        f"entry {i} token mismatch: {item.get('token')!r}")
                if not isinstance(item.get("variable"), str) \
                        or not item["variable"].strip():
                    raise SchemaViolation(f"entry {i} missing variable")

        parsed = _ask_json(client, model, "rename_placeholders",
                           {"windows": json.dumps(entries, ensure_ascii=False)},
                           validate)

    bindings: list[VariableBinding] = []
    for token, item in zip(recovered, parsed):
        field_name = placeholder_map.field_for(token)
        fd = by_name.get(field_name)
        variable = item["variable"].strip()
        flags: tuple[str, ...] = ()
        notes = ""
        if item.get("repeated"):
            flags += ("repeated",)
        violations = validate_variable(variable, conv)
        errors = [v for v in violations if v.severity == "error"]
        warnings = [v for v in violations if v.severity == "warning"]
        if errors:
            notes = (f"suggested name {variable!r} rejected: "
                     + "; ".join(v.message for v in errors))
            variable = _synthetic_name(token)
            flags += ("quarantined", "review")
        elif warnings:
            notes = "; ".join(v.message for v in warnings)
            flags += ("review",)
        bindings.append(VariableBinding(
            token=token, field_name=field_name,
            kind=fd.kind if fd else "text", variable=variable,
            page=fd.page if fd else 0, flags=flags, notes=notes))

    for token in placeholder_map.tokens():
        if token in context.recovered:
            continue
        field_name = placeholder_map.field_for(token)
        fd = by_name.get(field_name)
        bindings.append(VariableBinding(
            token=token, field_name=field_name,
            kind=fd.kind if fd else "text",
            variable=_synthetic_name(token),
            page=fd.page if fd else 0,
            flags=("synthetic", "review"),
            notes="token not recovered from the page text"))

    # distinct tokens may share a variable only when marked repeated
    seen: dict[str, VariableBinding] = {}
    out: list[VariableBinding] = []
    for b in bindings:
        prior = seen.get(b.variable)
        if prior is not None and "repeated" not in b.flags:
            logger.warning("tokens %s and %s share variable %r without the "
                           "repeated flag; both quarantined",
                           prior.token, b.token, b.variable)
            out = [x if x.token != prior.token else _quarantine_dup(x)
                   for x in out]
            b = _quarantine_dup(b)
        seen.setdefault(b.variable, b)
        out.append(b)
    return out


def _quarantine_dup(b: VariableBinding) -> VariableBinding:
    if "quarantined" in b.flags:
        return b
    return replace(
        b,
        notes=(b.notes + "; " if b.notes else "")
        + f"duplicate variable {b.variable!r} without repeated flag",
        variable=_synthetic_name(b.token),
        flags=b.flags + ("quarantined", "review"),
    )


# --- stage: write definitions -------------------------------------------------


def write_definitions(client: LlmClient, bindings: list[VariableBinding],
                      context: PlaceholderContext,
                      model: str = DEFAULT_MODEL) -> list[VariableBinding]:
    """Every binding leaves with a non-empty definition; synthetic tokens
    keep a fixed placeholder definition naming their page."""
    ask = [b for b in bindings if "synthetic" not in b.flags]
    entries = [{"variable": b.variable,
                "context": context.per_token_window.get(b.token, "")}
               for b in ask]

    parsed: list[dict] = []
    if entries:
        def validate(reply):
            if not isinstance(reply, list) or len(reply) != len(entries):
                raise SchemaViolation(f"expected {len(entries)} objects")
            for i, item in enumerate(reply):
                if not isinstance(item, dict) \
                        or item.get("variable") != entries[i]["variable"]:
                    raise SchemaViolation(f"entry {i} variable mismatch")
                if not isinstance(item.get("definition"), str) \
                        or not item["definition"].strip():
                    raise SchemaViolation(f"entry {i} definition empty")

        parsed = _ask_json(client, model, "write_definitions",
                           {"bindings": json.dumps(entries, ensure_ascii=False)},
                           validate)

    by_variable = {item["variable"]: item["definition"].strip()
                   for item in parsed}
    out = []
    for b in bindings:
        if "synthetic" in b.flags:
            out.append(replace(
                b, definition=f"unidentified field on page {b.page + 1}"))
        else:
            out.append(replace(b, definition=by_variable[b.variable]))
    return out


# --- stage: draft questions ---------------------------------------------------


def draft_questions(client: LlmClient, bindings: list[VariableBinding],
                    model: str = DEFAULT_MODEL) -> list[QuestionSpec]:
    """One question per binding, datatypes from the closed list, screens
    regrouped so bindings sharing a path prefix sit together."""
    if not bindings:
        return []
    entries = [{"variable": b.variable, "definition": b.definition}
               for b in bindings]

    def validate(reply):
        if not isinstance(reply, list) or len(reply) != len(entries):
            raise SchemaViolation(f"expected {len(entries)} objects")
        for i, item in enumerate(reply):
            if not isinstance(item, dict) \
                    or item.get("variable") != entries[i]["variable"]:
                raise SchemaViolation(f"entry {i} variable mismatch")
            for key in ("prompt", "datatype", "screen_title"):
                if not isinstance(item.get(key), str) or not item[key].strip():
                    raise SchemaViolation(f"entry {i} missing {key}")
            datatype = item["datatype"].strip().lower()
            if datatype not in DATATYPES and datatype not in _DATATYPE_ALIASES:
                raise SchemaViolation(
                    f"entry {i} datatype {item['datatype']!r} not in "
                    f"{list(DATATYPES)}")

    parsed = _ask_json(client, model, "draft_questions",
                       {"bindings": json.dumps(entries, ensure_ascii=False)},
                       validate)

    by_kind = {b.variable: b.kind for b in bindings}
    drafts = []
    for item in parsed:
        datatype = item["datatype"].strip().lower()
        if datatype in _DATATYPE_ALIASES:
            logger.warning("datatype %r normalized to %r for %s",
                           datatype, _DATATYPE_ALIASES[datatype],
                           item["variable"])
            datatype = _DATATYPE_ALIASES[datatype]
        if by_kind.get(item["variable"]) == "checkbox":
            datatype = "yesno"
        drafts.append({
            "variable": item["variable"],
            "prompt": item["prompt"].strip(),
            "datatype": datatype,
            "screen_title": item["screen_title"].strip(),
        })

    # group by shared path prefix, first appearance fixes screen order
    def group_key(variable: str, screen_title: str) -> str:
        if "." in variable:
            return variable.split(".")[0]
        return f"title:{screen_title}"

    order: list[str] = []
    titles: dict[str, str] = {}
    for d in drafts:
        key = group_key(d["variable"], d["screen_title"])
        if key not in titles:
            order.append(key)
            titles[key] = d["screen_title"]

    questions = []
    for d in drafts:
        key = group_key(d["variable"], d["screen_title"])
        questions.append(QuestionSpec(
            variable=d["variable"], prompt=d["prompt"],
            datatype=d["datatype"], screen_id=order.index(key) + 1,
            screen_title=titles[key]))
    questions.sort(key=lambda q: q.screen_id)
    return questions


# --- stage: pair checkboxes ---------------------------------------------------


DEFAULT_PAIR_RADIUS_PTS = 150.0
DEFAULT_PAIR_OVERLAP_PTS = 10.0


def _merge_lines(words: list[WordBox], gap_pts: float = 8.0) -> list[WordBox]:
    """Join adjacent word boxes on one visual line into text runs."""
    if not words:
        return []
    ordered = sorted(words, key=lambda w: (round(-w.y1, 1), w.x0))
    runs: list[WordBox] = []
    for w in ordered:
        if runs:
            prev = runs[-1]
            same_line = min(prev.y1, w.y1) - max(prev.y0, w.y0) > 0
            if same_line and 0 <= w.x0 - prev.x1 <= gap_pts:
                runs[-1] = WordBox(prev.text + " " + w.text, prev.x0,
                                   min(prev.y0, w.y0), w.x1,
                                   max(prev.y1, w.y1))
                continue
        runs.append(w)
    return runs


def _candidate_label(fd: FieldDescriptor, runs: list[WordBox],
                     radius: float, overlap: float) -> tuple[WordBox | None, float]:
    x0, y0, x1, y1 = fd.bbox
    best: tuple[float, WordBox] | None = None
    for run in runs:
        v_overlap = min(run.y1, y1 + overlap) - max(run.y0, y0 - overlap)
        if v_overlap <= 0:
            continue
        if run.x0 >= x1 - 2 and run.x0 - x1 <= radius:
            distance = max(run.x0 - x1, 0.0)
        elif run.x1 <= x0 + 2 and x0 - run.x1 <= radius:
            # left-side labels rank after any right-side candidate
            distance = max(x0 - run.x1, 0.0) + radius
        else:
            continue
        if best is None or distance < best[0]:
            best = (distance, run)
    if best is None:
        return None, float("inf")
    return best[1], best[0]


def pair_checkboxes(client: LlmClient, small_fields: list[FieldDescriptor],
                    words_by_page: dict[int, list[WordBox]],
                    conv: NamingConventions | None = None,
                    model: str = DEFAULT_MODEL,
                    radius: float = DEFAULT_PAIR_RADIUS_PTS,
                    overlap: float = DEFAULT_PAIR_OVERLAP_PTS,
                    ) -> list[VariableBinding]:
    """Offer each small field its nearest adjacent text as a label; one
    text run labels at most one field (nearest wins)."""
    conv = conv or NamingConventions.defaults()
    lines_by_page = {p: _merge_lines(ws) for p, ws in words_by_page.items()}

    choices: list[tuple[FieldDescriptor, WordBox | None, float]] = []
    for fd in small_fields:
        run, distance = _candidate_label(
            fd, lines_by_page.get(fd.page, []), radius, overlap)
        choices.append((fd, run, distance))

    # nearest-distance tie-break when two fields claim one run
    claimed: dict[tuple[int, float, float, str], tuple[float, int]] = {}
    for i, (fd, run, distance) in enumerate(choices):
        if run is None:
            continue
        key = (fd.page, run.x0, run.y0, run.text)
        if key not in claimed or distance < claimed[key][0]:
            claimed[key] = (distance, i)
    for i, (fd, run, distance) in enumerate(choices):
        if run is not None:
            key = (fd.page, run.x0, run.y0, run.text)
            if claimed[key][1] != i:
                logger.info("checkbox %s lost label %r to a nearer field",
                            fd.name, run.text)
                choices[i] = (fd, None, float("inf"))

    entries = [{"field_name": fd.name,
                "label": run.text if run is not None else None}
               for fd, run, _ in choices]

    parsed: list[dict] = []
    if entries:
        def validate(reply):
            if not isinstance(reply, list) or len(reply) != len(entries):
                raise SchemaViolation(f"expected {len(entries)} objects")
            for i, item in enumerate(reply):
                if not isinstance(item, dict) \
                        or item.get("field_name") != entries[i]["field_name"]:
                    raise SchemaViolation(f"entry {i} field_name mismatch")
                if entries[i]["label"] is not None and \
                        not (item.get("variable") or "").strip():
                    raise SchemaViolation(f"entry {i} missing variable")

        parsed = _ask_json(client, model, "pair_checkboxes",
                           {"fields": json.dumps(entries, ensure_ascii=False)},
                           validate)

    bindings: list[VariableBinding] = []
    used: set[str] = set()
    for (fd, run, _), item in zip(choices, parsed):
        token = f"checkbox:{fd.name}"
        if run is None or not item.get("variable"):
            bindings.append(VariableBinding(
                token=token, field_name=fd.name, kind=fd.kind,
                variable=f"unidentified_checkbox_{len(bindings) + 1}",
                page=fd.page, flags=("unpaired", "review"),
                notes="no text found near the field"))
            continue
        variable = item["variable"].strip()
        flags: tuple[str, ...] = ("paired",)
        notes = f"label: {run.text}"
        errors = [v for v in validate_variable(variable, conv)
                  if v.severity == "error"]
        if errors or variable in used:
            reason = ("; ".join(v.message for v in errors)
                      or f"duplicate variable {variable!r}")
            notes += f"; suggested name rejected: {reason}"
            variable = f"unidentified_checkbox_{len(bindings) + 1}"
            flags += ("quarantined", "review")
        used.add(variable)
        bindings.append(VariableBinding(
            token=token, field_name=fd.name, kind=fd.kind,
            variable=variable, definition=item.get("label") or "",
            page=fd.page, flags=flags, notes=notes))
    return bindings
