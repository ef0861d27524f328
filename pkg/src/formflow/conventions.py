"""Variable naming rules for interview paths.

Paths look like ``users[0].name.first``: snake_case segments, optional
list index per segment. Certain nouns are reserved as list names and must
carry an index; people carry a known attribute vocabulary, and anything
outside it is worth a reviewer's glance but not a hard stop.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources

_NAME_RE = re.compile(r"[a-z][a-z0-9_]*\Z")
_SEGMENT_RE = re.compile(r"(?P<name>[^.\[\]]*)(?:\[(?P<index>[^\]]*)\])?\Z")

CODE_SYNTAX = "syntax"
CODE_UPPERCASE = "uppercase"
CODE_LEADING_DIGIT = "leading_digit"
CODE_RESERVED_UNINDEXED = "reserved_noun_unindexed"
CODE_UNKNOWN_ATTRIBUTE = "unknown_attribute"

_ERROR_CODES = {CODE_SYNTAX, CODE_UPPERCASE, CODE_LEADING_DIGIT,
                CODE_RESERVED_UNINDEXED}


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    severity: str = "error"  # "error" | "warning"

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message,
                "severity": self.severity}


@dataclass(frozen=True)
class NamingConventions:
    reserved_nouns: tuple[str, ...] = ()
    person_attributes: tuple[str, ...] = ()
    extra_attributes: dict = field(default_factory=dict)

    @classmethod
    def defaults(cls) -> "NamingConventions":
        raw = json.loads(
            resources.files("formflow.data").joinpath("conventions.json")
            .read_text("utf-8"))
        return cls(
            reserved_nouns=tuple(raw["reserved_nouns"]),
            person_attributes=tuple(raw["person_attributes"]),
            extra_attributes=dict(raw.get("extra_attributes", {})),
        )

    def sub_attributes(self, attribute: str) -> tuple[str, ...]:
        return tuple(self.extra_attributes.get(attribute, ()))


def _segment_violations(raw: str, conv: NamingConventions,
                        is_first: bool) -> tuple[list[Violation], str | None]:
    m = _SEGMENT_RE.match(raw)
    if not m or not m.group("name"):
        return [Violation(CODE_SYNTAX, f"segment {raw!r} is not name[index]")], None
    name, index = m.group("name"), m.group("index")
    out: list[Violation] = []
    if index is not None and not index.isdigit():
        out.append(Violation(CODE_SYNTAX,
                             f"index {index!r} in {raw!r} is not a number"))
    if name != name.lower():
        out.append(Violation(CODE_UPPERCASE,
                             f"{name!r} must be lower snake_case"))
    elif name[0].isdigit():
        out.append(Violation(CODE_LEADING_DIGIT,
                             f"{name!r} may not start with a digit"))
    elif not _NAME_RE.match(name):
        out.append(Violation(CODE_SYNTAX,
                             f"{name!r} has characters outside [a-z0-9_]"))
    if name.lower() in conv.reserved_nouns and index is None and is_first:
        out.append(Violation(
            CODE_RESERVED_UNINDEXED,
            f"{name!r} names a list and needs an index, e.g. {name}[0]"))
    return out, name.lower()


def validate_variable(path: str, conv: NamingConventions | None = None) -> list[Violation]:
    """All rule violations for one variable path; empty list means ok.

    Unknown person attributes are warnings: reviewers should see them,
    but they do not block a stage.
    """
    conv = conv or NamingConventions.defaults()
    if not path or not path.strip():
        return [Violation(CODE_SYNTAX, "empty variable path")]
    if path != path.strip():
        return [Violation(CODE_SYNTAX, "leading/trailing whitespace")]

    violations: list[Violation] = []
    segments = path.split(".")
    names: list[str | None] = []
    for i, seg in enumerate(segments):
        if seg == "":
            violations.append(Violation(CODE_SYNTAX, "empty path segment"))
            names.append(None)
            continue
        vs, name = _segment_violations(seg, conv, is_first=(i == 0))
        violations.extend(vs)
        names.append(name)

    if (not any(v.severity == "error" for v in violations)
            and len(names) > 1 and names[0] in conv.reserved_nouns):
        attr = names[1]
        if attr and attr not in conv.person_attributes:
            violations.append(Violation(
                CODE_UNKNOWN_ATTRIBUTE,
                f"{attr!r} is not a known person attribute "
                f"(known: {', '.join(conv.person_attributes)})",
                severity="warning"))
        elif attr and len(names) > 2 and conv.sub_attributes(attr):
            sub = names[2]
            if sub and sub not in conv.sub_attributes(attr):
                violations.append(Violation(
                    CODE_UNKNOWN_ATTRIBUTE,
                    f"{sub!r} is not a known {attr} part "
                    f"(known: {', '.join(conv.sub_attributes(attr))})",
                    severity="warning"))
    return violations


def is_valid(path: str, conv: NamingConventions | None = None) -> bool:
    """True when no error-severity violation exists (warnings allowed)."""
    return not any(v.severity == "error" for v in validate_variable(path, conv))
