"""Hand-built DOCX fixtures: small, valid OOXML with controlled structure."""

from __future__ import annotations

import io
import zipfile
from xml.sax.saxutils import escape, quoteattr

W_NS = "http://schemas.openxmlformats.org/wordprocessingml/2006/main"

CONTENT_TYPES = """<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<Types xmlns="http://schemas.openxmlformats.org/package/2006/content-types">
<Default Extension="rels" ContentType="application/vnd.openxmlformats-package.relationships+xml"/>
<Default Extension="xml" ContentType="application/xml"/>
<Override PartName="/word/document.xml" ContentType="application/vnd.openxmlformats-officedocument.wordprocessingml.document.main+xml"/>
</Types>"""

ROOT_RELS = """<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships">
<Relationship Id="rId1" Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/officeDocument" Target="word/document.xml"/>
</Relationships>"""

# mc:Ignorable references w14, which appears in no element: serializers that
# drop "unused" namespace declarations would break this file.
DOC_OPEN = (
    '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>\n'
    '<w:document xmlns:w="%s"'
    ' xmlns:mc="http://schemas.openxmlformats.org/markup-compatibility/2006"'
    ' xmlns:w14="http://schemas.microsoft.com/office/word/2010/wordml"'
    ' mc:Ignorable="w14"><w:body>' % W_NS
)
DOC_CLOSE = "</w:body></w:document>"


def run_xml(run) -> str:
    """Run spec: plain string, or (text, props) with props like
    {"b": True, "i": True, "sz": 28, "font": "Arial"}."""
    if isinstance(run, str):
        text, props = run, {}
    else:
        text, props = run
    rpr = ""
    if props:
        bits = ""
        if props.get("font"):
            bits += '<w:rFonts w:ascii=%s/>' % quoteattr(props["font"])
        if props.get("b"):
            bits += "<w:b/>"
        if props.get("i"):
            bits += "<w:i/>"
        if props.get("u"):
            bits += '<w:u w:val="single"/>'
        if props.get("sz"):
            bits += '<w:sz w:val="%d"/>' % props["sz"]
        rpr = "<w:rPr>%s</w:rPr>" % bits
    body = ""
    for piece in text.split("\t"):
        if body:
            body += "<w:tab/>"
        if piece:
            body += '<w:t xml:space="preserve">%s</w:t>' % escape(piece)
    if not text:
        body = ""
    return "<w:r>%s%s</w:r>" % (rpr, body)


def paragraph_xml(runs, style: str | None = None) -> str:
    ppr = ('<w:pPr><w:pStyle w:val=%s/></w:pPr>' % quoteattr(style)) if style else ""
    return "<w:p>%s%s</w:p>" % (ppr, "".join(run_xml(r) for r in runs))


def table_xml(rows) -> str:
    cells = lambda row: "".join(
        "<w:tc><w:tcPr/><w:p><w:r><w:t>%s</w:t></w:r></w:p></w:tc>" % escape(c)
        for c in row)
    return "<w:tbl><w:tblPr/>%s</w:tbl>" % "".join(
        "<w:tr>%s</w:tr>" % cells(row) for row in rows)


def build_docx(paragraphs, tables_after: dict[int, list] | None = None) -> bytes:
    """paragraphs: list of paragraph specs (list of run specs, or
    (runs, style) tuple). tables_after maps paragraph index -> table rows
    inserted after that paragraph."""
    parts = []
    for i, para in enumerate(paragraphs):
        if isinstance(para, tuple):
            runs, style = para
        else:
            runs, style = para, None
        parts.append(paragraph_xml(runs, style))
        if tables_after and i in tables_after:
            parts.append(table_xml(tables_after[i]))
    doc = DOC_OPEN + "".join(parts) + DOC_CLOSE

    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        stamp = (1980, 1, 1, 0, 0, 0)
        for name, data in [
            ("[Content_Types].xml", CONTENT_TYPES),
            ("_rels/.rels", ROOT_RELS),
            ("word/document.xml", doc),
        ]:
            zf.writestr(zipfile.ZipInfo(name, date_time=stamp), data)
    return buf.getvalue()


def letter_fixture() -> bytes:
    """Small demand letter with mixed formatting."""
    return build_docx([
        ([("COMMONWEALTH OF MASSACHUSETTS", {"b": True, "sz": 28})], "Title"),
        [("Dear ", {}), ("John Smith", {"b": True}), (":", {})],
        ["I am writing about the deposit for my tenancy at ",
         ("123 Main Street", {"i": True}), "."],
        [],
        ["Sincerely,"],
        [("Jane Doe", {"b": True})],
    ])


def tabular_fixture() -> bytes:
    return build_docx(
        [["Case caption"], ["See table below."]],
        tables_after={1: [["Plaintiff", "Defendant"], ["Jane", "John"]]},
    )


def unicode_fixture() -> bytes:
    return build_docx([
        ["Sección 8 — ", ("vivienda", {"i": True})],
        ["Tenant: José Álvarez → unit 4B"],
    ])


def empty_fixture() -> bytes:
    return build_docx([])


def multirun_fixture() -> bytes:
    return build_docx([
        [("", {"b": True}), "start ", "", "end"],
        ["tab\there and a second line"],
    ])


ALL_FIXTURES = {
    "letter": letter_fixture,
    "tabular": tabular_fixture,
    "unicode": unicode_fixture,
    "empty": empty_fixture,
    "multirun": multirun_fixture,
}
