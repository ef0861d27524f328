"""Object-model round trips and file parsing for the PDF layer."""

from __future__ import annotations

import struct
import zlib

import pytest

from formflow.errors import NotPdf, PdfParseError
from formflow.pdf import IncrementalWriter, PdfName, PdfReader, PdfRef
from formflow.pdf.cos import Lexer, PdfStream, PdfString, parse_object, serialize


def parse_bytes(data: bytes):
    return parse_object(Lexer(data))


class TestParsing:
    @pytest.mark.parametrize("src,expected", [
        (b"42", 42),
        (b"-17", -17),
        (b"3.5", 3.5),
        (b"-.25", -0.25),
        (b"true", True),
        (b"false", False),
        (b"null", None),
        (b"/Name", PdfName("Name")),
        (b"/A#20B", PdfName("A B")),
        (b"12 0 R", PdfRef(12, 0)),
        (b"[1 2 /X]", [1, 2, PdfName("X")]),
    ])
    def test_literals(self, src, expected):
        assert parse_bytes(src) == expected

    def test_nested_dict(self):
        obj = parse_bytes(b"<< /A << /B [1 (s)] >> /C 2 0 R >>")
        assert obj[PdfName("A")][PdfName("B")] == [1, PdfString(b"s")]
        assert obj[PdfName("C")] == PdfRef(2, 0)

    def test_string_escapes(self):
        assert parse_bytes(rb"(a\(b\)c\\d)") == PdfString(b"a(b)c\\d")
        assert parse_bytes(rb"(\101\12)") == PdfString(b"A\n")
        # balanced parens need no escape
        assert parse_bytes(b"(a(b)c)") == PdfString(b"a(b)c")

    def test_hex_string(self):
        assert parse_bytes(b"<48 6920>") == PdfString(b"Hi ")
        # odd digit count pads with zero
        assert parse_bytes(b"<486>") == PdfString(b"H`")

    def test_comment_skipped(self):
        assert parse_bytes(b"% noise\n7") == 7

    def test_ref_vs_bare_ints(self):
        assert parse_bytes(b"[1 2 R 3]") == [PdfRef(1, 2), 3]
        assert parse_bytes(b"[1 2 3]") == [1, 2, 3]

    def test_garbage_raises(self):
        with pytest.raises(PdfParseError):
            parse_bytes(b">>")


class TestSerialization:
    @pytest.mark.parametrize("obj", [
        0, -3, 2.5, True, False, None,
        PdfName("Helv"), PdfName("with space"),
        PdfRef(9, 0),
        PdfString(b"plain"),
        PdfString(b"needs (escaping) \\ here"),
        PdfString(b"\xfe\xff\x00H\x00i"),
        [1, [2, PdfName("X")], PdfString(b"s")],
        {PdfName("A"): 1, PdfName("B"): [PdfRef(1, 0)]},
    ])
    def test_round_trip(self, obj):
        assert parse_bytes(serialize(obj)) == obj

    def test_stream_serializes_payload_verbatim(self):
        stm = PdfStream({PdfName("Length"): 3}, b"abc")
        out = serialize(stm)
        assert b"stream" in out and b"abc" in out

    def test_stream_decoding(self):
        flate = PdfStream({PdfName("Filter"): PdfName("FlateDecode")},
                          zlib.compress(b"payload"))
        assert flate.decoded() == b"payload"
        plain = PdfStream({}, b"raw bytes")
        assert plain.decoded() == b"raw bytes"
        with pytest.raises(PdfParseError):
            PdfStream({PdfName("Filter"): PdfName("JBIG2Decode")},
                      b"x").decoded()

    def test_text_helpers(self):
        assert PdfString.from_text("plain").text == "plain"
        assert PdfString.from_text("Ünïcode ≠ latin").text == "Ünïcode ≠ latin"


def build_objstm_pdf(predictor: bool = False) -> bytes:
    """Minimal PDF whose document objects live in an object stream and
    whose xref is a stream, optionally PNG-Up predicted."""
    inner = {
        1: b"<< /Type /Catalog /Pages 2 0 R >>",
        2: b"<< /Type /Pages /Kids [3 0 R] /Count 1 >>",
        3: b"<< /Type /Page /Parent 2 0 R /MediaBox [0 0 612 792] >>",
    }
    head_parts, payload = [], b""
    for num, body in inner.items():
        head_parts.append(f"{num} {len(payload)}")
        payload += body + b" "
    head = (" ".join(head_parts) + " ").encode()
    stm_data = zlib.compress(head + payload)

    out = bytearray(b"%PDF-1.5\n")
    objstm_off = len(out)
    out += (f"4 0 obj\n<< /Type /ObjStm /N 3 /First {len(head)} "
            f"/Length {len(stm_data)} /Filter /FlateDecode >>\n"
            "stream\n").encode() + stm_data + b"\nendstream\nendobj\n"

    xref_off = len(out)
    rows = [
        (0, 0, 65535),
        (2, 4, 0), (2, 4, 1), (2, 4, 2),
        (1, objstm_off, 0),
        (1, xref_off, 0),
    ]
    raw = b"".join(struct.pack(">BHH", *row) for row in rows)
    parms = ""
    if predictor:
        width = 5
        encoded, prev = bytearray(), bytes(width)
        for i in range(0, len(raw), width):
            row = raw[i:i + width]
            encoded.append(2)
            encoded += bytes((row[j] - prev[j]) % 256 for j in range(width))
            prev = row
        raw = bytes(encoded)
        parms = " /DecodeParms << /Predictor 12 /Columns 5 >>"
    xref_data = zlib.compress(raw)
    out += (f"5 0 obj\n<< /Type /XRef /Size 6 /W [1 2 2] /Root 1 0 R "
            f"/Filter /FlateDecode{parms} /Length {len(xref_data)} >>\n"
            "stream\n").encode() + xref_data + b"\nendstream\nendobj\n"
    out += f"startxref\n{xref_off}\n%%EOF\n".encode()
    return bytes(out)


class TestReader:
    def test_classic_xref_file(self, acceptance_pdf):
        reader = PdfReader(acceptance_pdf)
        assert len(reader.pages()) == 2
        catalog = reader.catalog
        assert str(catalog[PdfName("Type")]) == "Catalog"

    @pytest.mark.parametrize("predictor", [False, True])
    def test_xref_stream_and_object_stream(self, predictor):
        reader = PdfReader(build_objstm_pdf(predictor=predictor))
        pages = reader.pages()
        assert len(pages) == 1
        page = reader.resolve(pages[0])
        assert str(page[PdfName("Type")]) == "Page"

    def test_resolve_chases_refs(self, acceptance_pdf):
        reader = PdfReader(acceptance_pdf)
        pages_ref = reader.catalog[PdfName("Pages")]
        assert isinstance(pages_ref, PdfRef)
        assert str(reader.resolve(pages_ref)[PdfName("Type")]) == "Pages"

    def test_not_a_pdf(self):
        with pytest.raises(NotPdf):
            PdfReader(b"just some text, no header")


class TestIncrementalWriter:
    def test_update_preserves_original_bytes(self, acceptance_pdf):
        reader = PdfReader(acceptance_pdf)
        writer = IncrementalWriter(reader)
        ref = writer.add_object({PdfName("Marker"): 1})
        out = writer.tobytes()
        assert out.startswith(acceptance_pdf)
        again = PdfReader(out)
        assert again.resolve(ref)[PdfName("Marker")] == 1
        assert len(again.pages()) == 2

    def test_overwrite_object_wins(self):
        base = build_objstm_pdf()
        reader = PdfReader(base)
        page_ref = reader.pages()[0]
        page = dict(reader.resolve(page_ref))
        page[PdfName("Rotate")] = 90
        writer = IncrementalWriter(reader)
        writer.set_object(page_ref, page)
        again = PdfReader(writer.tobytes())
        assert again.resolve(again.pages()[0])[PdfName("Rotate")] == 90

    def test_two_generations_of_updates(self, acceptance_pdf):
        first = IncrementalWriter(PdfReader(acceptance_pdf))
        r1 = first.add_object([1])
        second_bytes = first.tobytes()
        second = IncrementalWriter(PdfReader(second_bytes))
        r2 = second.add_object([2])
        final = PdfReader(second.tobytes())
        assert final.resolve(r1) == [1]
        assert final.resolve(r2) == [2]
