"""Staged language-model workflow with record/replay plumbing."""

from ..conventions import NamingConventions, Violation, is_valid, validate_variable
from .client import ChatRequest, HttpBackend, LlmClient, Transcript
from .scripted import ScriptedBackend
from .stages import (
    DATATYPES,
    DocMetadata,
    LabelResult,
    QuestionSpec,
    VariableBinding,
    draft_questions,
    generate_doc_metadata,
    label_docx_runs,
    pair_checkboxes,
    rename_placeholders,
    write_definitions,
)

__all__ = [
    "NamingConventions",
    "Violation",
    "is_valid",
    "validate_variable",
    "ChatRequest",
    "HttpBackend",
    "LlmClient",
    "Transcript",
    "ScriptedBackend",
    "DATATYPES",
    "DocMetadata",
    "LabelResult",
    "QuestionSpec",
    "VariableBinding",
    "draft_questions",
    "generate_doc_metadata",
    "label_docx_runs",
    "pair_checkboxes",
    "rename_placeholders",
    "write_definitions",
]
