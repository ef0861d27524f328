"""PDF object model: lexer, parser, and serializer for COS syntax.

Covers the object types AcroForm work needs: dictionaries, arrays, names,
numbers, booleans, null, literal/hex strings, indirect references, and
streams. Filters handled on decode: FlateDecode (with PNG predictors) and
ASCII85Decode, which is all the fixtures and typical court forms use for
structural data.
"""

from __future__ import annotations

import base64
import re
import zlib
from dataclasses import dataclass

from ..errors import PdfParseError

WHITESPACE = b"\x00\t\n\x0c\r "
DELIMITERS = b"()<>[]{}/%"


class PdfName(str):
    """A /Name. Subclasses str so it can key dicts naturally."""

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"/{str.__str__(self)}"


@dataclass(frozen=True)
class PdfRef:
    num: int
    gen: int = 0

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"{self.num} {self.gen} R"


class PdfString:
    """A PDF string; raw bytes plus text codec helpers."""

    __slots__ = ("raw",)

    def __init__(self, raw: bytes):
        self.raw = raw

    @classmethod
    def from_text(cls, text: str) -> "PdfString":
        try:
            raw = text.encode("latin-1")
        except UnicodeEncodeError:
            return cls(b"\xfe\xff" + text.encode("utf-16-be"))
        if raw[:2] == b"\xfe\xff":
            # would masquerade as a UTF-16 marker; encode wide instead
            return cls(b"\xfe\xff" + text.encode("utf-16-be"))
        return cls(raw)

    @property
    def text(self) -> str:
        if self.raw[:2] == b"\xfe\xff":
            return self.raw[2:].decode("utf-16-be", errors="replace")
        return self.raw.decode("latin-1")

    def __eq__(self, other):
        if isinstance(other, PdfString):
            return self.raw == other.raw
        return NotImplemented

    def __hash__(self):
        return hash(self.raw)

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"PdfString({self.text!r})"


class PdfStream:
    """Stream object: its dictionary plus the encoded payload."""

    __slots__ = ("dict", "raw")

    def __init__(self, sdict: dict, raw: bytes):
        self.dict = sdict
        self.raw = raw

    def decoded(self) -> bytes:
        data = self.raw
        filters = self.dict.get(PdfName("Filter"))
        if filters is None:
            return data
        if not isinstance(filters, list):
            filters = [filters]
        parms = self.dict.get(PdfName("DecodeParms"))
        if not isinstance(parms, list):
            parms = [parms] * len(filters)
        for filt, parm in zip(filters, parms):
            name = str(filt)
            if name == "FlateDecode":
                data = zlib.decompress(data)
                if isinstance(parm, dict):
                    data = _apply_predictor(data, parm)
            elif name == "ASCII85Decode":
                payload = data.strip()
                if payload.endswith(b"~>"):
                    payload = payload[:-2]
                data = base64.a85decode(payload)
            else:
                raise PdfParseError(f"unsupported stream filter {name}")
        return data


def _apply_predictor(data: bytes, parms: dict) -> bytes:
    predictor = parms.get(PdfName("Predictor"), 1)
    if predictor in (None, 1):
        return data
    if predictor < 10:
        raise PdfParseError(f"unsupported predictor {predictor}")
    # PNG predictors; columns measured in bytes
    colors = parms.get(PdfName("Colors"), 1)
    bpc = parms.get(PdfName("BitsPerComponent"), 8)
    columns = parms.get(PdfName("Columns"), 1)
    stride = (colors * bpc * columns + 7) // 8
    out = bytearray()
    prev = bytearray(stride)
    pos = 0
    while pos < len(data):
        tag = data[pos]
        row = bytearray(data[pos + 1:pos + 1 + stride])
        pos += 1 + stride
        if tag == 0:
            pass
        elif tag == 1:
            for i in range(1, len(row)):
                row[i] = (row[i] + row[i - 1]) & 0xFF
        elif tag == 2:
            for i in range(len(row)):
                row[i] = (row[i] + prev[i]) & 0xFF
        elif tag == 3:
            for i in range(len(row)):
                left = row[i - 1] if i else 0
                row[i] = (row[i] + (left + prev[i]) // 2) & 0xFF
        elif tag == 4:
            for i in range(len(row)):
                a = row[i - 1] if i else 0
                b = prev[i]
                c = prev[i - 1] if i else 0
                p = a + b - c
                pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                if pa <= pb and pa <= pc:
                    pred = a
                elif pb <= pc:
                    pred = b
                else:
                    pred = c
                row[i] = (row[i] + pred) & 0xFF
        else:
            raise PdfParseError(f"bad PNG predictor row tag {tag}")
        out.extend(row)
        prev = row
    return bytes(out)


class Lexer:
    """Byte-level tokenizer over the whole file buffer."""

    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def skip_ws(self):
        data, n = self.data, len(self.data)
        while self.pos < n:
            c = data[self.pos]
            if c in WHITESPACE:
                self.pos += 1
            elif c == 0x25:  # '%' comment runs to end of line
                eol = data.find(b"\n", self.pos)
                eol2 = data.find(b"\r", self.pos)
                if eol == -1:
                    eol = n
                if eol2 != -1:
                    eol = min(eol, eol2)
                self.pos = eol
            else:
                return

    def peek_byte(self) -> int:
        self.skip_ws()
        if self.pos >= len(self.data):
            raise PdfParseError("unexpected end of file")
        return self.data[self.pos]

    def read_regular_token(self) -> bytes:
        """Read a run of non-delimiter, non-whitespace bytes."""
        self.skip_ws()
        start = self.pos
        data, n = self.data, len(self.data)
        while self.pos < n:
            c = data[self.pos]
            if c in WHITESPACE or c in DELIMITERS:
                break
            self.pos += 1
        if self.pos == start:
            raise PdfParseError(f"expected token at offset {start}")
        return data[start:self.pos]

    def expect(self, keyword: bytes):
        self.skip_ws()
        if not self.data.startswith(keyword, self.pos):
            raise PdfParseError(
                f"expected {keyword!r} at offset {self.pos}, "
                f"found {self.data[self.pos:self.pos + 12]!r}")
        self.pos += len(keyword)


_NUMBER_RE = re.compile(rb"[+-]?(\d+\.?\d*|\.\d+)")


def parse_object(lex: Lexer):
    """Parse one object at the lexer position. References are recognized
    by the two-token lookahead `<int> <int> R`."""
    lex.skip_ws()
    data = lex.data
    c = lex.peek_byte()

    if c == 0x3C:  # '<'
        if data.startswith(b"<<", lex.pos):
            return _parse_dict_or_stream(lex)
        return _parse_hex_string(lex)
    if c == 0x28:  # '('
        return _parse_literal_string(lex)
    if c == 0x2F:  # '/'
        return _parse_name(lex)
    if c == 0x5B:  # '['
        lex.pos += 1
        items = []
        while True:
            lex.skip_ws()
            if lex.peek_byte() == 0x5D:
                lex.pos += 1
                return items
            items.append(parse_object(lex))
    if c in b"tfn":
        tok = data[lex.pos:lex.pos + 5]
        if tok.startswith(b"true"):
            lex.pos += 4
            return True
        if tok.startswith(b"false"):
            lex.pos += 5
            return False
        if tok.startswith(b"null"):
            lex.pos += 4
            return None
        raise PdfParseError(f"bad keyword at offset {lex.pos}")

    m = _NUMBER_RE.match(data, lex.pos)
    if not m:
        raise PdfParseError(f"cannot parse object at offset {lex.pos}: "
                            f"{data[lex.pos:lex.pos + 12]!r}")
    lex.pos = m.end()
    text = m.group().decode("ascii")
    if "." in text:
        return float(text)
    value = int(text)

    # Lookahead for "gen R"
    save = lex.pos
    lex.skip_ws()
    m2 = _NUMBER_RE.match(data, lex.pos)
    if m2 and b"." not in m2.group():
        after = m2.end()
        lex2 = Lexer(data, after)
        lex2.skip_ws()
        if data.startswith(b"R", lex2.pos) and (
                lex2.pos + 1 >= len(data)
                or data[lex2.pos + 1] in WHITESPACE
                or data[lex2.pos + 1] in DELIMITERS):
            lex.pos = lex2.pos + 1
            return PdfRef(value, int(m2.group()))
    lex.pos = save
    return value


def _parse_name(lex: Lexer) -> PdfName:
    lex.pos += 1  # '/'
    data, n = lex.data, len(lex.data)
    out = bytearray()
    while lex.pos < n:
        c = data[lex.pos]
        if c in WHITESPACE or c in DELIMITERS:
            break
        if c == 0x23 and lex.pos + 2 < n:  # '#' hex escape
            out.append(int(data[lex.pos + 1:lex.pos + 3], 16))
            lex.pos += 3
        else:
            out.append(c)
            lex.pos += 1
    return PdfName(out.decode("latin-1"))


def _parse_literal_string(lex: Lexer) -> PdfString:
    data, n = lex.data, len(lex.data)
    lex.pos += 1  # '('
    out = bytearray()
    depth = 1
    while lex.pos < n:
        c = data[lex.pos]
        if c == 0x5C:  # backslash
            lex.pos += 1
            if lex.pos >= n:
                break
            e = data[lex.pos]
            mapped = {0x6E: 0x0A, 0x72: 0x0D, 0x74: 0x09,
                      0x62: 0x08, 0x66: 0x0C}.get(e)
            if mapped is not None:
                out.append(mapped)
                lex.pos += 1
            elif e in b"()\\":
                out.append(e)
                lex.pos += 1
            elif e in b"01234567":
                octal = bytearray([e])
                lex.pos += 1
                while len(octal) < 3 and lex.pos < n and data[lex.pos] in b"01234567":
                    octal.append(data[lex.pos])
                    lex.pos += 1
                out.append(int(octal, 8) & 0xFF)
            elif e in b"\r\n":  # line continuation
                lex.pos += 1
                if e == 0x0D and lex.pos < n and data[lex.pos] == 0x0A:
                    lex.pos += 1
            else:
                out.append(e)
                lex.pos += 1
        elif c == 0x28:
            depth += 1
            out.append(c)
            lex.pos += 1
        elif c == 0x29:
            depth -= 1
            lex.pos += 1
            if depth == 0:
                return PdfString(bytes(out))
            out.append(c)
        else:
            out.append(c)
            lex.pos += 1
    raise PdfParseError("unterminated literal string")


def _parse_hex_string(lex: Lexer) -> PdfString:
    data = lex.data
    end = data.find(b">", lex.pos)
    if end == -1:
        raise PdfParseError("unterminated hex string")
    digits = re.sub(rb"[^0-9A-Fa-f]", b"", data[lex.pos + 1:end])
    if len(digits) % 2:
        digits += b"0"
    lex.pos = end + 1
    return PdfString(bytes.fromhex(digits.decode("ascii")))


def _parse_dict_or_stream(lex: Lexer):
    lex.pos += 2  # '<<'
    d: dict = {}
    while True:
        lex.skip_ws()
        if lex.data.startswith(b">>", lex.pos):
            lex.pos += 2
            break
        key = parse_object(lex)
        if not isinstance(key, PdfName):
            raise PdfParseError(f"dictionary key is not a name at {lex.pos}")
        d[key] = parse_object(lex)
    save = lex.pos
    lex.skip_ws()
    if lex.data.startswith(b"stream", lex.pos):
        lex.pos += len(b"stream")
        if lex.data.startswith(b"\r\n", lex.pos):
            lex.pos += 2
        elif lex.data.startswith(b"\n", lex.pos):
            lex.pos += 1
        return ("__stream__", d, lex.pos)  # reader finishes the job (Length may be indirect)
    lex.pos = save
    return d


# --- serialization -----------------------------------------------------------

_NAME_ESCAPE = re.compile(rb"[^!-~]|[()<>\[\]{}/%#]")


def _serialize_name(name: PdfName) -> bytes:
    raw = str(name).encode("latin-1")
    return b"/" + _NAME_ESCAPE.sub(lambda m: b"#%02X" % m.group()[0], raw)


def _serialize_string(s: PdfString) -> bytes:
    out = bytearray(b"(")
    for b in s.raw:
        if b in b"()\\":
            out += b"\\" + bytes([b])
        elif b == 0x0A:
            out += b"\\n"
        elif b == 0x0D:
            out += b"\\r"
        elif 32 <= b < 127:
            out.append(b)
        else:
            out += b"\\%03o" % b
    out += b")"
    return bytes(out)


def serialize(obj) -> bytes:
    """Serialize an object body (not including `N G obj` framing)."""
    if obj is None:
        return b"null"
    if obj is True:
        return b"true"
    if obj is False:
        return b"false"
    if isinstance(obj, PdfRef):
        return b"%d %d R" % (obj.num, obj.gen)
    if isinstance(obj, PdfName):
        return _serialize_name(obj)
    if isinstance(obj, PdfString):
        return _serialize_string(obj)
    if isinstance(obj, int):
        return b"%d" % obj
    if isinstance(obj, float):
        text = ("%.6f" % obj).rstrip("0").rstrip(".")
        return text.encode("ascii") or b"0"
    if isinstance(obj, list):
        return b"[ " + b" ".join(serialize(x) for x in obj) + b" ]"
    if isinstance(obj, PdfStream):
        d = dict(obj.dict)
        d[PdfName("Length")] = len(obj.raw)
        return serialize(d) + b"\nstream\n" + obj.raw + b"\nendstream"
    if isinstance(obj, dict):
        parts = [b"<<"]
        for k, v in obj.items():
            parts.append(_serialize_name(PdfName(k)) + b" " + serialize(v))
        parts.append(b">>")
        return b" ".join(parts)
    raise TypeError(f"cannot serialize {type(obj).__name__}")
