"""Deterministic rule-based backend for offline runs and fixtures.

Dispatches on the ``Task:`` marker each prompt template carries and
answers from keyword heuristics. No network, no state: the same request
always yields the same reply. Quality is deliberately modest; the point
is a realistic stand-in whose mistakes (wrong datatypes for phone/zip,
occasional bad names) exercise the downstream guards.
"""

from __future__ import annotations

import json
import re

from .client import ChatRequest

_NAME = r"[A-Z][a-z]+(?: [A-Z]\.?)? [A-Z][a-z]+"
_ADDRESS = (r"\d+ [A-Z][a-z]+(?: [A-Z][a-z]+)? "
            r"(?:Street|St\.?|Avenue|Ave\.?|Road|Rd\.?|Lane|Drive|Blvd\.?)")
_DATE = (r"(?:January|February|March|April|May|June|July|August|September|"
         r"October|November|December) \d{1,2}, \d{4}")
_AMOUNT = r"\$[\d,]+(?:\.\d{2})?"

# Label phrase -> variable path, in priority order. The nearest phrase
# before a token wins; ties fall back to this ordering.
_RENAME_RULES: list[tuple[str, str]] = [
    ("first name", "users[0].name.first"),
    ("middle name", "users[0].name.middle"),
    ("last name", "users[0].name.last"),
    ("name of court", "court_name"),
    ("docket number", "docket_number"),
    ("case number", "docket_number"),
    ("date of birth", "users[0].birthdate"),
    ("social security", "SSN"),
    ("email address", "users[0].email"),
    ("street address", "users[0].address.line_one"),
    ("mailing address", "users[0].address.block"),
    ("email", "users[0].email"),
    ("phone", "users[0].phone"),
    ("telephone", "users[0].phone"),
    ("zip", "users[0].address.zip"),
    ("city", "users[0].address.city"),
    ("state", "users[0].address.state"),
    ("county", "users[0].address.county"),
    ("landlord", "other_parties[0].name.full"),
    ("defendant", "other_parties[0].name.full"),
    ("plaintiff", "users[0].name.full"),
    ("your name", "users[0].name.full"),
    ("amount", "amount_demanded"),
    ("signature", "users[0].signature"),
    ("date", "signature_date"),
    ("address", "users[0].address.block"),
    ("name", "users[0].name.full"),
]

_DEFINITION_RULES: list[tuple[str, str]] = [
    ("name.first", "The first name of the person filling out the form."),
    ("name.last", "The last name of the person filling out the form."),
    ("name.full", "The full name as it should appear on the form."),
    ("address.zip", "The ZIP code of the mailing address."),
    ("address.city", "The city of the mailing address."),
    ("address.state", "The state of the mailing address."),
    ("address", "The mailing address written on the form."),
    ("phone", "A phone number where the person can be reached."),
    ("email", "An email address where the person can be reached."),
    ("birthdate", "The person's date of birth."),
    ("signature_date", "The date the form is signed."),
    ("signature", "The person's signature on the form."),
    ("docket_number", "The court's case or docket number."),
    ("court_name", "The name of the court hearing the case."),
    ("amount", "The dollar amount claimed on the form."),
]

_STOPWORDS = {"a", "an", "the", "of", "to", "for", "in", "on", "i", "we"}


def _payload_after(content: str, marker: str) -> str:
    at = content.rfind(f"\n{marker}\n")
    if at == -1:
        raise ValueError(f"prompt has no {marker} payload")
    return content[at + len(marker) + 2:].strip()


def _slug(label: str, max_words: int = 4) -> str:
    words = [re.sub(r"[^a-z0-9]", "", w.lower()) for w in label.split()]
    words = [w for w in words if w and w not in _STOPWORDS]
    if not words:
        return "checkbox_option"
    slug = "_".join(words[:max_words])
    if slug[0].isdigit():
        slug = "option_" + slug
    return slug


class ScriptedBackend:
    """Offline stand-in for a chat-completion model."""

    def send(self, request: ChatRequest) -> str:
        content = request.messages[-1][1]
        m = re.search(r"^Task: ([a-z-]+)$", content, re.MULTILINE)
        if not m:
            return '{"error": "no task marker"}'
        task = m.group(1)
        handler = getattr(self, "_" + task.replace("-", "_"), None)
        if handler is None:
            return '{"error": "unknown task"}'
        return handler(content)

    # --- label-runs ---

    def _label_runs(self, content: str) -> str:
        triples = json.loads(_payload_after(content, "Runs:"))
        signoff_seen = False
        edits = []
        for p, r, text in triples:
            if re.match(r"\s*(Sincerely|Respectfully|Regards)", text):
                signoff_seen = True
                continue
            new = text
            if re.search(r"\bDear\s*$", _before(triples, p, r)) or "Dear " in text:
                new = re.sub(_NAME, "{{ other_parties[0].name.full }}", new, count=1)
            elif signoff_seen and re.fullmatch(_NAME, text.strip()):
                new = "{{ users[0].name.full }}"
            new = re.sub(_ADDRESS, "{{ users[0].address.block }}", new)
            new = re.sub(_DATE, "{{ signature_date }}", new)
            new = re.sub(_AMOUNT, "{{ amount_demanded }}", new)
            if re.search(r"\bSSN\b|\d{3}-\d{2}-\d{4}", new):
                new = re.sub(r"\d{3}-\d{2}-\d{4}", "{{ SSN }}", new)
            if new != text:
                edits.append([p, r, new])
        return json.dumps(edits, ensure_ascii=False)

    # --- doc-metadata ---

    def _doc_metadata(self, content: str) -> str:
        document = _payload_after(content, "Document:")
        title = ""
        for line in document.splitlines():
            line = re.sub(r"\{\{.*?\}\}", "", line).strip()
            if line and not line.startswith("====="):
                title = line.title() if line.isupper() else line
                break
        if not title:
            title = "Court Form"
        tokens = len(set(re.findall(r"\{\{field_\d+\}\}", document)))
        description = (f"A court form titled {title!r}. It collects "
                       f"{tokens} value(s) from the person filling it out.")
        return json.dumps({"title": title[:120], "description": description},
                          ensure_ascii=False)

    # --- rename-placeholders ---

    def _rename_placeholders(self, content: str) -> str:
        entries = json.loads(_payload_after(content, "Tokens:"))
        used: dict[str, int] = {}
        out = []
        for entry in entries:
            window = entry.get("context", "")
            token = entry["token"]
            variable = self._nearest_rule(window, token)
            if variable is None:
                digits = re.search(r"(\d+)", token)
                variable = f"answer_{digits.group(1) if digits else 'x'}"
            count = used.get(variable, 0)
            used[variable] = count + 1
            if count:
                variable = f"{variable}_{count + 1}"
            out.append({"token": token, "variable": variable,
                        "repeated": False})
        return json.dumps(out, ensure_ascii=False)

    @staticmethod
    def _nearest_rule(window: str, token: str) -> str | None:
        low = window.lower()
        at = low.find(token.lower())
        if at == -1:
            at = len(low)
        best: tuple[float, int, str] | None = None
        for rank, (phrase, variable) in enumerate(_RENAME_RULES):
            for m in re.finditer(re.escape(phrase), low):
                if m.end() <= at:
                    distance = float(at - m.end())
                else:
                    # labels after the token are possible but less likely
                    distance = float(m.start() - at) + 1000.0
                cand = (distance, rank, variable)
                if best is None or cand < best:
                    best = cand
        return best[2] if best else None

    # --- write-definitions ---

    def _write_definitions(self, content: str) -> str:
        entries = json.loads(_payload_after(content, "Variables:"))
        out = []
        for entry in entries:
            variable = entry["variable"]
            definition = next(
                (d for needle, d in _DEFINITION_RULES if needle in variable),
                f"The value written into the form for {variable}.")
            out.append({"variable": variable, "definition": definition})
        return json.dumps(out, ensure_ascii=False)

    # --- draft-questions ---

    def _draft_questions(self, content: str) -> str:
        entries = json.loads(_payload_after(content, "Variables:"))
        out = []
        for entry in entries:
            variable = entry["variable"]
            out.append({
                "variable": variable,
                "prompt": _prompt_for(variable, entry.get("definition", "")),
                "datatype": _guess_datatype(variable),
                "screen_title": _screen_for(variable),
            })
        return json.dumps(out, ensure_ascii=False)

    # --- pair-checkboxes ---

    def _pair_checkboxes(self, content: str) -> str:
        entries = json.loads(_payload_after(content, "Fields:"))
        out = []
        for entry in entries:
            label = entry.get("label")
            if not label:
                out.append({"field_name": entry["field_name"],
                            "variable": None, "label": None})
            else:
                out.append({"field_name": entry["field_name"],
                            "variable": _slug(label), "label": label})
        return json.dumps(out, ensure_ascii=False)


def _before(triples, p: int, r: int) -> str:
    for tp, tr, text in triples:
        if tp == p and tr == r - 1:
            return text
    return ""


def _humanize(variable: str) -> str:
    head = variable.split(".")[0]
    if head.startswith("users"):
        owner = "your"
    elif head.startswith("other_parties"):
        owner = "the other party's"
    elif head.startswith("attorneys"):
        owner = "the attorney's"
    else:
        owner = "the"
    rest = variable.split(".")[1:] or [re.sub(r"\[\d+\]", "", head)]
    words = " ".join(seg.replace("_", " ") for seg in rest)
    words = words.replace("name full", "full name").replace(
        "name first", "first name").replace("name last", "last name")
    return f"{owner} {words}"


def _prompt_for(variable: str, definition: str) -> str:
    return f"What is {_humanize(variable)}?"


def _guess_datatype(variable: str) -> str:
    # phone/zip as bare numbers and counts as "integer" are deliberate
    # model-style mistakes; downstream guards must correct them.
    if "zip" in variable:
        return "number"
    if "phone" in variable:
        return "number"
    if "count" in variable or "number_of" in variable:
        return "integer"
    if "email" in variable:
        return "email"
    if "birthdate" in variable or variable.endswith("date") or ".date" in variable:
        return "date"
    if "amount" in variable or "rent" in variable or "wage" in variable:
        return "currency"
    if "address.block" in variable or variable.endswith("_details"):
        return "area"
    if re.match(r"(has_|is_|wants_)", variable.split(".")[-1]) \
            or variable.endswith("_requested"):
        return "yesno"
    return "text"


def _screen_for(variable: str) -> str:
    head = variable.split(".")[0]
    if head.startswith("users"):
        return "About you"
    if head.startswith("other_parties"):
        return "About the other party"
    if head.startswith("attorneys"):
        return "About the attorneys"
    if head in ("court_name", "docket_number"):
        return "Court information"
    return "Form details"
