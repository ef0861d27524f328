"""JSON schemas for checkpoint stage payloads.

Checkpoints are pretty-printed JSON so reviewers can hand-edit them;
each stage's payload must re-validate before the next stage may run, so
a bad edit is caught at the door with the offending JSON path.
"""

from __future__ import annotations

import jsonschema

from .errors import SchemaViolation

_VARIABLE = {"type": "string", "minLength": 1}

_FIELD_DESCRIPTOR = {
    "type": "object",
    "required": ["name", "kind", "page", "bbox", "size_class"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "kind": {"enum": ["text", "checkbox", "radio", "choice",
                          "signature", "other"]},
        "page": {"type": "integer", "minimum": 0},
        "bbox": {"type": "array", "items": {"type": "number"},
                 "minItems": 4, "maxItems": 4},
        "size_class": {"enum": ["writable", "small"]},
        "options": {"type": "array", "items": {"type": "string"}},
    },
}

_BINDING = {
    "type": "object",
    "required": ["token", "field_name", "kind", "variable"],
    "properties": {
        "token": {"type": "string", "minLength": 1},
        "field_name": {"type": "string", "minLength": 1},
        "kind": {"type": "string"},
        "variable": _VARIABLE,
        "definition": {"type": "string"},
        "page": {"type": "integer", "minimum": 0},
        "flags": {"type": "array", "items": {"type": "string"}},
        "notes": {"type": "string"},
    },
}

_QUESTION = {
    "type": "object",
    "required": ["variable", "prompt", "datatype", "screen_id",
                 "screen_title"],
    "properties": {
        "variable": _VARIABLE,
        "prompt": {"type": "string", "minLength": 1},
        "datatype": {"enum": ["text", "area", "yesno", "number", "currency",
                              "date", "email", "phone", "zip"]},
        "screen_id": {"type": "integer", "minimum": 1},
        "screen_title": {"type": "string", "minLength": 1},
        "help": {"type": "string"},
    },
}

STAGE_SCHEMAS: dict[str, dict] = {
    "ingested": {
        "type": "object",
        "required": ["kind", "source_name", "source_digest"],
        "properties": {
            "kind": {"enum": ["pdf", "docx"]},
            "source_name": {"type": "string"},
            "source_digest": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
            "page_count": {"type": "integer", "minimum": 1},
            "fields": {"type": "array", "items": _FIELD_DESCRIPTOR},
        },
    },
    "stamped": {
        "type": "object",
        "required": ["placeholder_map", "fields", "stamped_digest"],
        "properties": {
            "placeholder_map": {
                "type": "object",
                "additionalProperties": {"type": "string"},
            },
            "fields": {"type": "array", "items": _FIELD_DESCRIPTOR},
            "stamped_digest": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        },
    },
    "ocr_done": {
        "type": "object",
        "required": ["context", "dpi"],
        "properties": {
            "dpi": {"type": "integer", "minimum": 150},
            "context": {
                "type": "object",
                "required": ["full_text", "recovered", "missing",
                             "per_token_window"],
                "properties": {
                    "full_text": {"type": "string"},
                    "recovered": {"type": "array",
                                  "items": {"type": "string"}},
                    "missing": {"type": "array", "items": {"type": "string"}},
                    "per_token_window": {
                        "type": "object",
                        "additionalProperties": {"type": "string"},
                    },
                },
            },
        },
    },
    "metadata_bound": {
        "type": "object",
        "required": ["metadata"],
        "properties": {
            "metadata": {
                "type": "object",
                "required": ["title", "description"],
                "properties": {
                    "title": {"type": "string", "minLength": 1,
                              "maxLength": 120},
                    "description": {"type": "string", "minLength": 1,
                                    "maxLength": 600},
                },
            },
        },
    },
    "bindings_draft": {
        "type": "object",
        "required": ["bindings"],
        "properties": {"bindings": {"type": "array", "items": _BINDING}},
    },
    "bindings_reviewed": {
        "type": "object",
        "required": ["bindings", "approved_by"],
        "properties": {
            "bindings": {"type": "array", "items": _BINDING},
            "approved_by": {"type": "string", "minLength": 1},
        },
    },
    "questions_draft": {
        "type": "object",
        "required": ["questions"],
        "properties": {
            "questions": {"type": "array", "items": _QUESTION},
            "overrides": {"type": "array"},
        },
    },
    "questions_reviewed": {
        "type": "object",
        "required": ["questions", "approved_by"],
        "properties": {
            "questions": {"type": "array", "items": _QUESTION},
            "approved_by": {"type": "string", "minLength": 1},
        },
    },
    "assembled": {
        "type": "object",
        "required": ["yaml_path", "bundle_path", "spec_digest"],
        "properties": {
            "yaml_path": {"type": "string"},
            "bundle_path": {"type": "string"},
            "spec_digest": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        },
    },
}


def validate_stage(stage: str, payload: dict) -> None:
    """Raise SchemaViolation naming the JSON path of the first problem."""
    schema = STAGE_SCHEMAS.get(stage)
    if schema is None:
        raise SchemaViolation(f"no schema for stage {stage!r}")
    try:
        jsonschema.validate(payload, schema)
    except jsonschema.ValidationError as exc:
        path = "/" + "/".join(str(p) for p in exc.absolute_path)
        raise SchemaViolation(
            f"{stage} payload invalid at {path}: {exc.message}") from exc
