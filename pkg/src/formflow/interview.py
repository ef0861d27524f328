"""Interview definition assembly, datatype guards, and non-interactive fill.

The emitted YAML is a small, documented subset of a guided-interview
platform's format: metadata, question screens, review, and an attachment
block. Conditional logic is never auto-generated; a clearly marked
scaffold block is reserved for hand-authoring.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from datetime import date
from pathlib import Path

import yaml

from .docx_labeler import RunEdit, apply_run_edits, extract_runs
from .errors import (
    DuplicateVariable,
    MissingAnswer,
    UnboundVariable,
    ValidationFailure,
)
from .llm.stages import DocMetadata, QuestionSpec, VariableBinding
from .pdf import fill_fields

logger = logging.getLogger("formflow.interview")

SKELETON_IDS = ("title_screen", "before_you_start", "preview_screen",
                "review_screen", "signature_screen", "download_screen")

_PHONE_NAME_RE = re.compile(r"(^|[._\[])(phone|telephone|fax)", re.IGNORECASE)
_ZIP_NAME_RE = re.compile(r"(^|[._\[])(zip|postal)", re.IGNORECASE)
_ZIP_VALUE_RE = re.compile(r"\d{5}(-\d{4})?\Z")
_EMAIL_RE = re.compile(r"[^@\s]+@[^@\s]+\.[A-Za-z]{2,}\Z")
_TEMPLATE_VAR_RE = re.compile(r"\{\{\s*(.*?)\s*\}\}")


@dataclass(frozen=True)
class ScreenSpec:
    screen_id: int
    title: str
    questions: tuple[QuestionSpec, ...]


@dataclass(frozen=True)
class InterviewSpec:
    metadata: DocMetadata
    screens: tuple[ScreenSpec, ...]
    template_ref: str
    attachment_fields: tuple[tuple[str, str], ...]  # (field_name, variable)

    def variables(self) -> list[str]:
        return [q.variable for s in self.screens for q in s.questions]

    def question_for(self, variable: str) -> QuestionSpec | None:
        for s in self.screens:
            for q in s.questions:
                if q.variable == variable:
                    return q
        return None


# --- datatype guards ----------------------------------------------------------


def normalize_datatypes(questions: list[QuestionSpec],
                        overrides: list | None = None) -> list[QuestionSpec]:
    """Re-type questions whose names mark them as phone or ZIP fields.

    Bare numeric types strip leading zeros and separators on render, so
    these stay formatted strings. Idempotent; every change is logged and
    appended to `overrides` when given.
    """
    out = []
    for q in questions:
        hay = f"{q.variable} {q.prompt} {q.help}"
        wanted = None
        if _ZIP_NAME_RE.search(q.variable) or "zip code" in hay.lower():
            wanted = "zip"
        elif _PHONE_NAME_RE.search(q.variable) or "phone number" in hay.lower():
            wanted = "phone"
        if wanted and q.datatype != wanted:
            logger.warning("datatype override: %s %s -> %s",
                           q.variable, q.datatype, wanted)
            if overrides is not None:
                overrides.append({"variable": q.variable,
                                  "from": q.datatype, "to": wanted})
            q = replace(q, datatype=wanted)
        out.append(q)
    return out


# --- answer validation --------------------------------------------------------


def validate_answer(value, datatype: str) -> str | None:
    """None when the value satisfies the datatype, else a message."""
    if datatype == "yesno":
        if isinstance(value, bool):
            return None
        if isinstance(value, str) and value.strip().lower() in (
                "true", "false", "yes", "no"):
            return None
        return "expected a yes/no value (true or false)"
    if not isinstance(value, (str, int, float)):
        return f"expected a scalar value, got {type(value).__name__}"
    text = str(value).strip()
    if datatype == "date":
        try:
            date.fromisoformat(text)
            return None
        except ValueError:
            return "expected an ISO date (YYYY-MM-DD) naming a real day"
    if datatype == "email":
        return None if _EMAIL_RE.match(text) else "expected an email address"
    if datatype in ("number", "currency"):
        try:
            Decimal(text.replace(",", "").lstrip("$"))
            return None
        except InvalidOperation:
            return "expected a decimal number"
    if datatype == "zip":
        return (None if _ZIP_VALUE_RE.match(text)
                else "expected a 5-digit ZIP code (ZIP+4 allowed)")
    if datatype == "phone":
        digits = re.sub(r"[\s\-\+\(\)\.]", "", text)
        if digits.isdigit() and 7 <= len(digits) <= 15:
            return None
        return "expected a phone number (7 to 15 digits, separators allowed)"
    # text / area
    return None if text else "expected a non-empty value"


# --- assembly -----------------------------------------------------------------


def _screens_from_questions(questions: list[QuestionSpec]) -> tuple[ScreenSpec, ...]:
    by_id: dict[int, list[QuestionSpec]] = {}
    for q in questions:
        by_id.setdefault(q.screen_id, []).append(q)
    ids = sorted(by_id)
    if ids and ids != list(range(1, len(ids) + 1)):
        raise ValueError(f"screen ids must be contiguous from 1, got {ids}")
    return tuple(
        ScreenSpec(screen_id=i, title=by_id[i][0].screen_title,
                   questions=tuple(by_id[i]))
        for i in ids)


def assemble(metadata: DocMetadata, questions: list[QuestionSpec],
             bindings: list[VariableBinding],
             template_ref: str) -> tuple[InterviewSpec, str]:
    """Build the InterviewSpec and its YAML text.

    Every question must reference a bound variable; a variable may appear
    on only one screen. Zero questions still yields a valid skeleton-only
    interview.
    """
    bound = {b.variable for b in bindings}
    seen: dict[str, int] = {}
    for q in questions:
        if q.variable not in bound:
            raise UnboundVariable(
                f"question references {q.variable!r}, which no binding defines")
        if q.variable in seen and seen[q.variable] != q.screen_id:
            raise DuplicateVariable(
                f"{q.variable!r} appears on screens {seen[q.variable]} "
                f"and {q.screen_id}")
        if q.variable in seen:
            raise DuplicateVariable(f"{q.variable!r} asked twice")
        seen[q.variable] = q.screen_id

    if not questions:
        logger.warning("no questions; emitting a skeleton-only interview")

    screens = _screens_from_questions(questions)
    asked = {q.variable for q in questions}
    attachment = tuple(
        (b.field_name, b.variable) for b in bindings if b.variable in asked)
    spec = InterviewSpec(metadata=metadata, screens=screens,
                         template_ref=template_ref,
                         attachment_fields=attachment)
    return spec, emit_yaml(spec)


def _question_entry(q: QuestionSpec) -> dict:
    entry = {q.prompt: q.variable, "datatype": q.datatype}
    if q.help:
        entry["help"] = q.help
    return entry


def emit_yaml(spec: InterviewSpec) -> str:
    docs: list[dict] = []
    docs.append({"metadata": {"title": spec.metadata.title,
                              "description": spec.metadata.description}})
    docs.append({
        "id": "title_screen",
        "question": spec.metadata.title,
        "subquestion": spec.metadata.description,
        "continue button field": "intro_accepted",
    })
    docs.append({
        "id": "before_you_start",
        "question": "Before you start",
        "subquestion": ("Gather the information this form asks for. "
                        "You can stop and come back; your answers are "
                        "saved between screens."),
        "continue button field": "ready_to_continue",
    })
    for screen in spec.screens:
        docs.append({
            "id": f"screen_{screen.screen_id}",
            "question": screen.title,
            "fields": [_question_entry(q) for q in screen.questions],
        })
    docs.append({
        "id": "preview_screen",
        "question": "Preview the completed form",
        "subquestion": ("Check the filled-in document before you sign. "
                        "Use Back to fix anything that looks wrong."),
        "continue button field": "preview_accepted",
    })
    docs.append({
        "id": "review_screen",
        "question": "Review your answers",
        "review": spec.variables(),
    })
    docs.append({
        "id": "signature_screen",
        "question": "Sign the form",
        "subquestion": ("TODO(author): connect this screen to your "
                        "platform's signature widget."),
        "continue button field": "signature_done",
    })
    docs.append({
        "id": "download_screen",
        "question": "Your document is ready",
        "attachment": {
            "name": spec.metadata.title,
            "filename": "filled_form",
            "template": spec.template_ref,
            "fields": {f: v for f, v in spec.attachment_fields},
        },
    })
    docs.append({
        "id": "interview_logic",
        "comment": ("Conditional logic is hand-authored, never generated. "
                    "Add code blocks here to control which screens appear "
                    "and in what order; without them, screens run in the "
                    "order above."),
    })
    return "---\n".join(
        yaml.safe_dump(doc, sort_keys=False, allow_unicode=True,
                       default_flow_style=False, width=76)
        for doc in docs)


def parse_interview_yaml(text: str) -> InterviewSpec:
    """Inverse of emit_yaml for the documented subset."""
    metadata = None
    screens: list[ScreenSpec] = []
    template_ref = ""
    attachment_fields: tuple[tuple[str, str], ...] = ()
    review_listed: list[str] = []

    for doc in yaml.safe_load_all(text):
        if not isinstance(doc, dict):
            continue
        if "metadata" in doc:
            md = doc["metadata"]
            metadata = DocMetadata(title=md["title"],
                                   description=md.get("description", ""))
            continue
        doc_id = doc.get("id", "")
        m = re.match(r"screen_(\d+)\Z", doc_id)
        if m:
            screen_id = int(m.group(1))
            title = doc.get("question", "")
            questions = []
            for entry in doc.get("fields", []):
                datatype = entry.get("datatype", "text")
                help_text = entry.get("help", "")
                prompt, variable = next(
                    (k, v) for k, v in entry.items()
                    if k not in ("datatype", "help", "required"))
                questions.append(QuestionSpec(
                    variable=variable, prompt=prompt, datatype=datatype,
                    screen_id=screen_id, screen_title=title, help=help_text))
            screens.append(ScreenSpec(screen_id=screen_id, title=title,
                                      questions=tuple(questions)))
        elif doc_id == "review_screen":
            review_listed = list(doc.get("review", []))
        elif doc_id == "download_screen":
            attachment = doc.get("attachment", {})
            template_ref = attachment.get("template", "")
            attachment_fields = tuple(
                (f, v) for f, v in attachment.get("fields", {}).items())

    if metadata is None:
        raise ValueError("interview YAML has no metadata document")
    screens.sort(key=lambda s: s.screen_id)
    spec = InterviewSpec(metadata=metadata, screens=tuple(screens),
                         template_ref=template_ref,
                         attachment_fields=attachment_fields)
    if review_listed != spec.variables():
        logger.warning("review screen list is out of step with questions")
    return spec


# --- fill ---------------------------------------------------------------------


def _coerce(value, datatype: str):
    if datatype == "yesno":
        if isinstance(value, bool):
            return value
        return str(value).strip().lower() in ("true", "yes")
    return str(value)


def run_fill(spec: InterviewSpec, answers: dict,
             template_bytes: bytes | None = None) -> bytes:
    """Fill the template with validated answers.

    Missing variables are reported all at once; so are per-value
    validation failures. String datatypes (zip, phone) render verbatim.
    """
    if template_bytes is None:
        template_bytes = Path(spec.template_ref).read_bytes()

    wanted = spec.variables()
    missing = sorted(v for v in wanted if v not in answers)
    if missing:
        raise MissingAnswer(missing)
    extra = sorted(set(answers) - set(wanted))
    if extra:
        logger.info("ignoring %d answer(s) with no question: %s",
                    len(extra), ", ".join(extra))

    failures = []
    for variable in wanted:
        q = spec.question_for(variable)
        message = validate_answer(answers[variable], q.datatype)
        if message is not None:
            failures.append((variable, f"{message} (datatype {q.datatype})"))
    if failures:
        raise ValidationFailure(failures)

    if spec.template_ref.lower().endswith(".pdf"):
        by_variable = {v: f for f, v in spec.attachment_fields}
        field_answers = {}
        for variable in wanted:
            field_name = by_variable.get(variable)
            if field_name is None:
                continue
            q = spec.question_for(variable)
            field_answers[field_name] = _coerce(answers[variable], q.datatype)
        return fill_fields(template_bytes, field_answers)
    return _fill_docx(spec, answers, template_bytes)


def _fill_docx(spec: InterviewSpec, answers: dict,
               template_bytes: bytes) -> bytes:
    def render(variable: str) -> str:
        q = spec.question_for(variable)
        value = answers[variable]
        if q is not None and q.datatype == "yesno":
            return "Yes" if _coerce(value, "yesno") else "No"
        return str(value)

    table = extract_runs(template_bytes)
    edits = []
    for run in table.runs:
        if "{{" not in run.text:
            continue
        new = _TEMPLATE_VAR_RE.sub(
            lambda m: render(m.group(1)) if m.group(1) in answers
            else m.group(0),
            run.text)
        if new != run.text:
            edits.append(RunEdit(run.paragraph_index, run.run_index, new))
    return apply_run_edits(template_bytes, edits)
