"""Run-level DOCX editing for template labeling.

A run is the smallest formatted span in a document. Labeling replaces the
text of whole runs and never splices inside one, so formatting survives
untouched: the run's properties element is kept and only its text content
is rewritten.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import re
import zipfile
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from .errors import MalformedXml, NotDocx, UnbalancedBraces, UnknownRun

logger = logging.getLogger("formflow.docx")

W_NS = "http://schemas.openxmlformats.org/wordprocessingml/2006/main"
XML_NS = "http://www.w3.org/XML/1998/namespace"
DOCUMENT_PART = "word/document.xml"

_PLACEHOLDER_RE = re.compile(r"\{\{(.*?)\}\}", re.DOTALL)


def _w(tag: str) -> str:
    return f"{{{W_NS}}}{tag}"


@dataclass(frozen=True)
class RunRef:
    paragraph_index: int
    run_index: int
    text: str


@dataclass(frozen=True)
class RunEdit:
    paragraph_index: int
    run_index: int
    new_text: str


@dataclass
class RunTable:
    runs: list[RunRef] = field(default_factory=list)
    source_digest: str = ""
    skipped_table_cells: int = 0
    skipped_wrapped_runs: int = 0

    def body_text(self) -> str:
        return "".join(r.text for r in self.runs)

    def index(self) -> dict[tuple[int, int], RunRef]:
        return {(r.paragraph_index, r.run_index): r for r in self.runs}


def _read_document_xml(docx_bytes: bytes) -> bytes:
    try:
        zf = zipfile.ZipFile(io.BytesIO(docx_bytes))
    except zipfile.BadZipFile as exc:
        raise NotDocx("input is not a ZIP archive") from exc
    names = set(zf.namelist())
    if DOCUMENT_PART not in names:
        raise NotDocx(f"ZIP has no {DOCUMENT_PART} part")
    return zf.read(DOCUMENT_PART)


def _parse_xml(xml_bytes: bytes) -> ET.Element:
    try:
        return ET.fromstring(xml_bytes)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from exc


def _run_text(run: ET.Element) -> str:
    parts: list[str] = []
    for child in run:
        tag = child.tag
        if tag == _w("t"):
            parts.append(child.text or "")
        elif tag == _w("tab"):
            parts.append("\t")
        elif tag in (_w("br"), _w("cr")):
            parts.append("\n")
    return "".join(parts)


def _body_paragraphs(root: ET.Element) -> list[ET.Element]:
    body = root.find(_w("body"))
    if body is None:
        raise MalformedXml("document has no body element")
    return [el for el in body if el.tag == _w("p")]


def extract_runs(docx_bytes: bytes) -> RunTable:
    """Read every run of every body paragraph, in document order.

    Empty runs stay in the table: their indices must line up with the
    document so later edits land on the right element. Runs inside tables
    or wrapped in hyperlink/tracked-change containers are skipped and
    counted.
    """
    xml_bytes = _read_document_xml(docx_bytes)
    root = _parse_xml(xml_bytes)
    body = root.find(_w("body"))
    if body is None:
        raise MalformedXml("document has no body element")

    table = RunTable(source_digest=hashlib.sha256(docx_bytes).hexdigest())
    for el in body:
        if el.tag == _w("tbl"):
            table.skipped_table_cells += len(el.findall(f".//{_w('tc')}"))
    for p_idx, para in enumerate(_body_paragraphs(root)):
        r_idx = 0
        for child in para:
            if child.tag == _w("r"):
                table.runs.append(RunRef(p_idx, r_idx, _run_text(child)))
                r_idx += 1
            elif child.findall(f".//{_w('r')}"):
                table.skipped_wrapped_runs += len(child.findall(f".//{_w('r')}"))
    if table.skipped_table_cells:
        logger.warning("skipped %d table cell(s); table text is not editable",
                       table.skipped_table_cells)
    if table.skipped_wrapped_runs:
        logger.warning("skipped %d run(s) inside hyperlink/change containers",
                       table.skipped_wrapped_runs)
    return table


def serialize_runs(table: RunTable) -> str:
    """JSON array of [paragraph_index, run_index, text] triples."""
    triples = [[r.paragraph_index, r.run_index, r.text] for r in table.runs]
    return json.dumps(triples, ensure_ascii=False)


def parse_serialized_runs(text: str) -> list[RunRef]:
    triples = json.loads(text)
    return [RunRef(int(p), int(r), str(t)) for p, r, t in triples]


# --- writing ------------------------------------------------------------------


def _collect_ns_decls(xml_bytes: bytes) -> list[tuple[str, str]]:
    decls: list[tuple[str, str]] = []
    seen: set[str] = set()
    for event, payload in ET.iterparse(io.BytesIO(xml_bytes), events=("start-ns",)):
        prefix, uri = payload
        if prefix not in seen:
            seen.add(prefix)
            decls.append((prefix, uri))
    return decls


def _xml_declaration(xml_bytes: bytes) -> bytes:
    if xml_bytes.startswith(b"<?xml"):
        end = xml_bytes.find(b"?>")
        if end != -1:
            return xml_bytes[: end + 2] + b"\n"
    return b'<?xml version="1.0" encoding="UTF-8" standalone="yes"?>\n'


def _reinject_root_decls(serialized: bytes, decls: list[tuple[str, str]]) -> bytes:
    """Re-add xmlns declarations the serializer dropped.

    Prefixes referenced only from attribute values (mc:Ignorable lists)
    must still be declared for the file to open cleanly.
    """
    end = serialized.find(b">")
    if end == -1:
        return serialized
    head = serialized[:end]
    additions = b""
    for prefix, uri in decls:
        attr = f"xmlns:{prefix}=" if prefix else "xmlns="
        if attr.encode() not in head:
            additions += f' {attr}"{uri}"'.encode()
    return serialized[:end] + additions + serialized[end:]


def _set_run_text(run: ET.Element, new_text: str) -> None:
    rpr = run.find(_w("rPr"))
    for child in list(run):
        if child.tag in (_w("t"), _w("tab"), _w("br"), _w("cr")):
            run.remove(child)
    normalized = new_text.replace("\r\n", "\n").replace("\r", "\n")
    for segment in re.split(r"([\t\n])", normalized):
        if segment == "":
            continue
        if segment == "\t":
            run.append(ET.Element(_w("tab")))
        elif segment == "\n":
            run.append(ET.Element(_w("br")))
        else:
            t = ET.Element(_w("t"))
            t.set(f"{{{XML_NS}}}space", "preserve")
            t.text = segment
            run.append(t)
    # keep run properties first, as the schema requires
    if rpr is not None and list(run) and list(run)[0] is not rpr:
        run.remove(rpr)
        run.insert(0, rpr)


def apply_run_edits(docx_bytes: bytes, edits: list[RunEdit]) -> bytes:
    """Replace the full text of each targeted run, preserving formatting.

    Duplicate targets in one batch resolve last-write-wins with a warning.
    All other ZIP parts are copied through byte-for-byte.
    """
    xml_bytes = _read_document_xml(docx_bytes)
    if not edits:
        return docx_bytes
    decls = _collect_ns_decls(xml_bytes)
    for prefix, uri in decls:
        ET.register_namespace(prefix, uri)
    root = _parse_xml(xml_bytes)

    unique: dict[tuple[int, int], RunEdit] = {}
    for edit in edits:
        key = (edit.paragraph_index, edit.run_index)
        if key in unique:
            logger.warning("duplicate edit for run %s; last write wins", key)
        unique[key] = edit

    paragraphs = _body_paragraphs(root)
    for (p_idx, r_idx), edit in unique.items():
        if p_idx < 0 or p_idx >= len(paragraphs):
            raise UnknownRun(f"no paragraph {p_idx} (document has "
                             f"{len(paragraphs)})")
        runs = [c for c in paragraphs[p_idx] if c.tag == _w("r")]
        if r_idx < 0 or r_idx >= len(runs):
            raise UnknownRun(f"no run {r_idx} in paragraph {p_idx} "
                             f"(paragraph has {len(runs)})")
        _set_run_text(runs[r_idx], edit.new_text)

    serialized = ET.tostring(root, encoding="unicode").encode("utf-8")
    serialized = _reinject_root_decls(serialized, decls)
    new_xml = _xml_declaration(xml_bytes) + serialized

    src = zipfile.ZipFile(io.BytesIO(docx_bytes))
    out_buf = io.BytesIO()
    with zipfile.ZipFile(out_buf, "w", zipfile.ZIP_DEFLATED) as out:
        for info in src.infolist():
            data = src.read(info.filename)
            if info.filename == DOCUMENT_PART:
                data = new_xml
            clone = zipfile.ZipInfo(info.filename, date_time=info.date_time)
            clone.compress_type = info.compress_type
            clone.external_attr = info.external_attr
            out.writestr(clone, data)
    return out_buf.getvalue()


def extract_template_variables(docx_bytes: bytes) -> list[str]:
    """Distinct `{{ ... }}` inner expressions, trimmed, first-appearance order."""
    table = extract_runs(docx_bytes)
    by_para: dict[int, list[str]] = {}
    for run in table.runs:
        by_para.setdefault(run.paragraph_index, []).append(run.text)

    seen: dict[str, None] = {}
    for p_idx in sorted(by_para):
        text = "".join(by_para[p_idx])
        consumed = _PLACEHOLDER_RE.sub("", text)
        if "{{" in consumed:
            raise UnbalancedBraces(
                f"paragraph {p_idx} opens a placeholder it never closes")
        for match in _PLACEHOLDER_RE.finditer(text):
            seen.setdefault(match.group(1).strip())
    return list(seen)
