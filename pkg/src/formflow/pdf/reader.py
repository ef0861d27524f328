"""Read-only PDF access: cross-reference resolution, objects, and pages.

Handles classic xref tables, PDF 1.5 cross-reference streams, object
streams, and incremental-update chains. Encrypted files are rejected.
"""

from __future__ import annotations

import re

from ..errors import EncryptedPdf, NotPdf, PdfParseError
from .cos import Lexer, PdfName, PdfRef, PdfStream, parse_object

_XREF_ENTRY = re.compile(rb"(\d{10}) (\d{5}) ([nf])")


class PdfReader:
    def __init__(self, data: bytes):
        if not isinstance(data, (bytes, bytearray)):
            raise NotPdf("expected PDF bytes")
        data = bytes(data)
        header = data.find(b"%PDF-")
        if header == -1 or header > 1024:
            raise NotPdf("missing %PDF- header")
        self.data = data
        self._cache: dict[int, object] = {}
        # xref: obj num -> ('n', offset) | ('objstm', stream_num, index)
        self.xref: dict[int, tuple] = {}
        self.trailer: dict = {}
        self._xref_is_stream = False
        self._load_xref()
        if PdfName("Encrypt") in self.trailer:
            raise EncryptedPdf("encrypted PDFs are unsupported")
        self._pages: list[PdfRef] | None = None

    # --- cross-reference loading -------------------------------------------

    def _load_xref(self):
        tail = self.data[-2048:]
        m = None
        for m in re.finditer(rb"startxref\s+(\d+)", tail):
            pass
        if m is None:
            raise PdfParseError("startxref not found")
        offset = int(m.group(1))
        seen = set()
        while offset and offset not in seen:
            seen.add(offset)
            offset = self._load_xref_section(offset)

    def _load_xref_section(self, offset: int) -> int:
        """Load one xref section; returns the /Prev offset or 0."""
        if offset >= len(self.data):
            raise PdfParseError(f"xref offset {offset} beyond end of file")
        lex = Lexer(self.data, offset)
        lex.skip_ws()
        if self.data.startswith(b"xref", lex.pos):
            return self._load_classic_xref(lex)
        return self._load_xref_stream(lex)

    def _load_classic_xref(self, lex: Lexer) -> int:
        lex.expect(b"xref")
        while True:
            lex.skip_ws()
            if self.data.startswith(b"trailer", lex.pos):
                break
            start = int(lex.read_regular_token())
            count = int(lex.read_regular_token())
            lex.skip_ws()
            for i in range(count):
                m = _XREF_ENTRY.match(self.data, lex.pos)
                if not m:
                    raise PdfParseError(f"bad xref entry at offset {lex.pos}")
                lex.pos = m.end()
                lex.skip_ws()
                num = start + i
                if m.group(3) == b"n" and num not in self.xref:
                    self.xref[num] = ("n", int(m.group(1)))
        lex.expect(b"trailer")
        trailer = parse_object(lex)
        for k, v in trailer.items():
            self.trailer.setdefault(k, v)
        # Hybrid files park a cross-reference stream behind /XRefStm
        xrefstm = trailer.get(PdfName("XRefStm"))
        if isinstance(xrefstm, int):
            self._load_xref_section(xrefstm)
        prev = trailer.get(PdfName("Prev"))
        return int(prev) if prev else 0

    def _load_xref_stream(self, lex: Lexer) -> int:
        int(lex.read_regular_token())  # object number
        int(lex.read_regular_token())  # generation
        lex.expect(b"obj")
        obj = parse_object(lex)
        if not (isinstance(obj, tuple) and obj[0] == "__stream__"):
            raise PdfParseError("xref offset does not point at an xref stream")
        _, sdict, payload_start = obj
        length = sdict.get(PdfName("Length"))
        if not isinstance(length, int):
            raise PdfParseError("xref stream /Length must be direct")
        stream = PdfStream(sdict, self.data[payload_start:payload_start + length])
        self._xref_is_stream = True

        data = stream.decoded()
        w = [int(x) for x in sdict[PdfName("W")]]
        size = int(sdict[PdfName("Size")])
        index = sdict.get(PdfName("Index"), [0, size])
        row = sum(w)
        pos = 0

        def field(raw, width, default):
            return int.from_bytes(raw, "big") if width else default

        pairs = list(zip(index[0::2], index[1::2]))
        for start, count in pairs:
            for i in range(int(count)):
                raw = data[pos:pos + row]
                pos += row
                if len(raw) < row:
                    raise PdfParseError("truncated xref stream")
                t = field(raw[:w[0]], w[0], 1)
                f2 = field(raw[w[0]:w[0] + w[1]], w[1], 0)
                f3 = field(raw[w[0] + w[1]:], w[2], 0)
                num = int(start) + i
                if num in self.xref:
                    continue
                if t == 1:
                    self.xref[num] = ("n", f2)
                elif t == 2:
                    self.xref[num] = ("objstm", f2, f3)
        for k, v in sdict.items():
            if k not in ("W", "Index", "Filter", "DecodeParms", "Length", "Type"):
                self.trailer.setdefault(k, v)
        prev = sdict.get(PdfName("Prev"))
        return int(prev) if prev else 0

    # --- object access ---------------------------------------------------

    def get(self, ref: PdfRef):
        if ref.num in self._cache:
            return self._cache[ref.num]
        entry = self.xref.get(ref.num)
        if entry is None:
            return None
        if entry[0] == "n":
            obj = self._parse_at(entry[1], ref.num)
        else:
            obj = self._parse_in_objstm(entry[1], entry[2], ref.num)
        self._cache[ref.num] = obj
        return obj

    def _parse_at(self, offset: int, expected_num: int):
        lex = Lexer(self.data, offset)
        num = int(lex.read_regular_token())
        int(lex.read_regular_token())
        if num != expected_num:
            raise PdfParseError(
                f"xref names object {expected_num} at {offset} but found {num}")
        lex.expect(b"obj")
        obj = parse_object(lex)
        if isinstance(obj, tuple) and obj[0] == "__stream__":
            _, sdict, payload_start = obj
            length = self.resolve(sdict.get(PdfName("Length")))
            if not isinstance(length, int):
                raise PdfParseError(f"object {expected_num}: bad stream /Length")
            return PdfStream(sdict, self.data[payload_start:payload_start + length])
        return obj

    def _parse_in_objstm(self, stm_num: int, index: int, expected_num: int):
        container = self.get(PdfRef(stm_num))
        if not isinstance(container, PdfStream):
            raise PdfParseError(f"object stream {stm_num} missing")
        data = container.decoded()
        n = int(self.resolve(container.dict[PdfName("N")]))
        first = int(self.resolve(container.dict[PdfName("First")]))
        lex = Lexer(data, 0)
        offsets = []
        for _ in range(n):
            onum = int(lex.read_regular_token())
            ooff = int(lex.read_regular_token())
            offsets.append((onum, ooff))
        if index >= len(offsets):
            raise PdfParseError(f"object stream index {index} out of range")
        onum, ooff = offsets[index]
        if onum != expected_num:
            # some writers reorder; fall back to a scan
            for onum, ooff in offsets:
                if onum == expected_num:
                    break
            else:
                raise PdfParseError(
                    f"object {expected_num} not in object stream {stm_num}")
        return parse_object(Lexer(data, first + ooff))

    def resolve(self, obj, depth: int = 0):
        while isinstance(obj, PdfRef):
            if depth > 64:
                raise PdfParseError("reference chain too deep")
            obj = self.get(obj)
            depth += 1
        return obj

    # --- document structure ---------------------------------------------------

    @property
    def catalog(self) -> dict:
        root = self.resolve(self.trailer.get(PdfName("Root")))
        if not isinstance(root, dict):
            raise PdfParseError("document catalog missing")
        return root

    def pages(self) -> list[PdfRef]:
        """Ordered page references."""
        if self._pages is not None:
            return self._pages
        pages_ref = self.catalog.get(PdfName("Pages"))
        out: list[PdfRef] = []
        seen = set()

        def walk(ref):
            if not isinstance(ref, PdfRef) or ref.num in seen:
                return
            seen.add(ref.num)
            node = self.resolve(ref)
            if not isinstance(node, dict):
                return
            if node.get(PdfName("Type")) == PdfName("Page"):
                out.append(ref)
                return
            for kid in self.resolve(node.get(PdfName("Kids"))) or []:
                walk(kid)

        walk(pages_ref)
        self._pages = out
        return out

    def max_object_number(self) -> int:
        size = self.trailer.get(PdfName("Size"))
        n = int(size) if isinstance(size, int) else 0
        if self.xref:
            n = max(n, max(self.xref) + 1)
        return n
