"""AcroForm field enumeration, placeholder stamping, and filling.

Field widgets live in an annotation layer separate from the page text, so
the pipeline stamps a visible `{{field_NN}}` token into every writable
field before rasterizing; checkbox-sized fields are skipped because no
legible text fits inside them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

from ..errors import AppearanceFailure, TypeMismatch, UnknownField
from .cos import PdfName, PdfRef, PdfStream, PdfString
from .reader import PdfReader
from .writer import IncrementalWriter

logger = logging.getLogger("formflow.pdf")

KIND_TEXT = "text"
KIND_CHECKBOX = "checkbox"
KIND_RADIO = "radio"
KIND_CHOICE = "choice"
KIND_SIGNATURE = "signature"
KIND_OTHER = "other"

SIZE_WRITABLE = "writable"
SIZE_SMALL = "small"

_FF_RADIO = 1 << 15
_FF_PUSHBUTTON = 1 << 16

# Helvetica advance widths (1/1000 em) for ASCII 32..126, from the standard
# Type1 core-font metrics; used for auto-fitting stamped text.
_HELV_WIDTHS = [
    278, 278, 355, 556, 556, 889, 667, 191, 333, 333, 389, 584, 278, 333,
    278, 278, 556, 556, 556, 556, 556, 556, 556, 556, 556, 556, 278, 278,
    584, 584, 584, 556, 1015, 667, 667, 722, 722, 667, 611, 778, 722, 278,
    500, 667, 556, 833, 722, 778, 667, 778, 722, 667, 611, 722, 667, 944,
    667, 667, 611, 278, 278, 278, 469, 556, 333, 556, 556, 500, 556, 556,
    278, 556, 556, 222, 222, 500, 222, 833, 556, 556, 556, 556, 333, 500,
    278, 556, 500, 722, 500, 500, 500, 334, 260, 334, 584,
]


def text_width_1000(text: str) -> int:
    """Width of `text` in 1/1000 em at font size 1 (Helvetica)."""
    total = 0
    for ch in text:
        code = ord(ch)
        if 32 <= code < 127:
            total += _HELV_WIDTHS[code - 32]
        else:
            total += 556
    return total


@dataclass(frozen=True)
class SizePolicy:
    """Thresholds below which a field is too small to stamp legibly."""

    min_dimension_pts: float = 14.0
    min_area_pts2: float = 400.0
    min_font_pts: float = 6.0


@dataclass(frozen=True)
class Widget:
    ref: PdfRef
    rect: tuple[float, float, float, float]
    page: int
    on_state: str | None = None


@dataclass(frozen=True)
class FieldDescriptor:
    name: str
    kind: str
    page: int
    bbox: tuple[float, float, float, float]
    size_class: str = SIZE_WRITABLE
    options: tuple[str, ...] = ()
    widgets: tuple[Widget, ...] = ()
    field_ref: PdfRef | None = None

    @property
    def width(self) -> float:
        return self.bbox[2] - self.bbox[0]

    @property
    def height(self) -> float:
        return self.bbox[3] - self.bbox[1]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "page": self.page,
            "bbox": list(self.bbox),
            "size_class": self.size_class,
            "options": list(self.options),
        }


@dataclass
class PlaceholderMap:
    """Ordered token -> field-name map; tokens carry their braces."""

    entries: dict[str, str] = field(default_factory=dict)

    def tokens(self) -> list[str]:
        return list(self.entries)

    def field_for(self, token: str) -> str:
        return self.entries[token]

    def to_dict(self) -> dict:
        return dict(self.entries)

    @classmethod
    def from_dict(cls, d: dict) -> "PlaceholderMap":
        return cls(entries=dict(d))


def make_token(index: int, width: int) -> str:
    return "{{field_%0*d}}" % (width, index)


# --- enumeration -------------------------------------------------------------


def _rect_tuple(rect) -> tuple[float, float, float, float]:
    x0, y0, x1, y1 = (float(v) for v in rect)
    if x1 < x0:
        x0, x1 = x1, x0
    if y1 < y0:
        y0, y1 = y1, y0
    return (x0, y0, x1, y1)


def _inherited(reader: PdfReader, node: dict, key: str, depth=0):
    if depth > 32 or not isinstance(node, dict):
        return None
    if PdfName(key) in node:
        return reader.resolve(node[PdfName(key)])
    parent = node.get(PdfName("Parent"))
    if parent is None:
        return None
    return _inherited(reader, reader.resolve(parent), key, depth + 1)


def _kind_of(reader: PdfReader, node: dict) -> str:
    ft = _inherited(reader, node, "FT")
    flags = _inherited(reader, node, "Ff") or 0
    if ft == PdfName("Tx"):
        return KIND_TEXT
    if ft == PdfName("Btn"):
        if flags & _FF_PUSHBUTTON:
            return KIND_OTHER
        if flags & _FF_RADIO:
            return KIND_RADIO
        return KIND_CHECKBOX
    if ft == PdfName("Ch"):
        return KIND_CHOICE
    if ft == PdfName("Sig"):
        return KIND_SIGNATURE
    return KIND_OTHER


def _on_state(reader: PdfReader, widget: dict) -> str | None:
    ap = reader.resolve(widget.get(PdfName("AP")))
    if not isinstance(ap, dict):
        return None
    normal = reader.resolve(ap.get(PdfName("N")))
    if isinstance(normal, dict):
        for key in normal:
            if str(key) != "Off":
                return str(key)
    return None


def _page_of(reader: PdfReader, widget: dict, widget_ref: PdfRef,
             page_annots: dict[int, int]) -> int:
    p = widget.get(PdfName("P"))
    if isinstance(p, PdfRef):
        for i, page_ref in enumerate(reader.pages()):
            if page_ref.num == p.num:
                return i
    return page_annots.get(widget_ref.num, 0)


def enumerate_fields(pdf_bytes: bytes) -> list[FieldDescriptor]:
    """One descriptor per terminal form field, ordered by (page, top-down,
    left-to-right). A PDF without a form layer yields an empty list."""
    reader = PdfReader(pdf_bytes)
    return _enumerate(reader)


def _enumerate(reader: PdfReader) -> list[FieldDescriptor]:
    acro = reader.resolve(reader.catalog.get(PdfName("AcroForm")))
    if not isinstance(acro, dict) or not acro.get(PdfName("Fields")):
        logger.info("no AcroForm layer; returning zero fields")
        return []

    # widget object number -> page index, from page /Annots arrays
    page_annots: dict[int, int] = {}
    for i, page_ref in enumerate(reader.pages()):
        page = reader.resolve(page_ref)
        for annot in reader.resolve(page.get(PdfName("Annots"))) or []:
            if isinstance(annot, PdfRef):
                page_annots[annot.num] = i

    descriptors: list[FieldDescriptor] = []

    def terminal(node_ref: PdfRef, node: dict, name: str):
        kind = _kind_of(reader, node)
        kids = reader.resolve(node.get(PdfName("Kids")))
        widget_refs = []
        if kids:
            widget_refs = [k for k in kids if isinstance(k, PdfRef)]
        else:
            widget_refs = [node_ref]
        widgets = []
        for wref in widget_refs:
            w = reader.resolve(wref)
            if not isinstance(w, dict) or PdfName("Rect") not in w:
                continue
            rect = _rect_tuple(reader.resolve(w[PdfName("Rect")]))
            widgets.append(Widget(
                ref=wref,
                rect=rect,
                page=_page_of(reader, w, wref, page_annots),
                on_state=_on_state(reader, w),
            ))
        if not widgets:
            logger.warning("field %r has no renderable widget; skipped", name)
            return
        widgets.sort(key=lambda w: (w.page, -w.rect[3], w.rect[0]))
        if len(widgets) > 1 and kind != KIND_RADIO:
            logger.info("field %r has %d widgets; all will share one token",
                        name, len(widgets))
        options: tuple[str, ...] = ()
        if kind == KIND_RADIO:
            options = tuple(dict.fromkeys(
                w.on_state for w in widgets if w.on_state))
        elif kind == KIND_CHOICE:
            raw = reader.resolve(node.get(PdfName("Opt"))) or []
            opts = []
            for o in raw:
                o = reader.resolve(o)
                if isinstance(o, list) and o:
                    o = reader.resolve(o[-1])
                if isinstance(o, PdfString):
                    opts.append(o.text)
            options = tuple(opts)
        head = widgets[0]
        descriptors.append(FieldDescriptor(
            name=name, kind=kind, page=head.page, bbox=head.rect,
            options=options, widgets=tuple(widgets), field_ref=node_ref))

    def walk(ref, prefix: str, depth=0):
        if depth > 32 or not isinstance(ref, PdfRef):
            return
        node = reader.resolve(ref)
        if not isinstance(node, dict):
            return
        t = node.get(PdfName("T"))
        part = t.text if isinstance(t, PdfString) else None
        name = f"{prefix}.{part}" if prefix and part else (part or prefix)
        kids = reader.resolve(node.get(PdfName("Kids")))
        kid_dicts = [reader.resolve(k) for k in kids or []]
        has_named_kids = any(
            isinstance(k, dict) and PdfName("T") in k for k in kid_dicts)
        if has_named_kids:
            for kid in kids:
                walk(kid, name, depth + 1)
        else:
            terminal(ref, node, name or f"field@{ref.num}")

    for fref in reader.resolve(acro[PdfName("Fields")]) or []:
        walk(fref, "")

    descriptors.sort(key=lambda d: (d.page, -d.bbox[3], d.bbox[0]))
    return descriptors


def classify_size(fd: FieldDescriptor, policy: SizePolicy = SizePolicy()) -> str:
    if fd.kind in (KIND_CHECKBOX, KIND_RADIO):
        return SIZE_SMALL
    if min(fd.width, fd.height) < policy.min_dimension_pts:
        return SIZE_SMALL
    if fd.width * fd.height < policy.min_area_pts2:
        return SIZE_SMALL
    return SIZE_WRITABLE


def classify_all(fields: list[FieldDescriptor],
                 policy: SizePolicy = SizePolicy()) -> list[FieldDescriptor]:
    return [replace(f, size_class=classify_size(f, policy)) for f in fields]


# --- stamping and filling ---------------------------------------------------


def _escape_content_string(text: str) -> bytes:
    out = bytearray()
    for ch in text:
        code = ord(ch)
        if ch in "()\\":
            out += b"\\" + ch.encode("ascii")
        elif 32 <= code < 127:
            out.append(code)
        elif code < 256:
            out += b"\\%03o" % code
        else:
            out.append(ord("?"))
    return bytes(out)


def _fit_font_size(text: str, w: float, h: float, cap: float = 12.0) -> float:
    size = min(cap, h - 4.0)
    per_em = text_width_1000(text) / 1000.0
    if per_em > 0:
        size = min(size, (w - 4.0) / per_em)
    return size


def _appearance_stream(text: str, w: float, h: float, size: float,
                       font_ref: PdfRef) -> PdfStream:
    y = max(2.0, (h - size) / 2.0 + size * 0.2)
    content = (
        b"/Tx BMC\nq\nBT\n/Helv %.2f Tf\n0 g\n2 %.2f Td\n(%s) Tj\nET\nQ\nEMC"
        % (size, y, _escape_content_string(text))
    )
    return PdfStream({
        PdfName("Type"): PdfName("XObject"),
        PdfName("Subtype"): PdfName("Form"),
        PdfName("FormType"): 1,
        PdfName("BBox"): [0, 0, round(w, 2), round(h, 2)],
        PdfName("Resources"): {
            PdfName("Font"): {PdfName("Helv"): font_ref},
        },
    }, content)


def _ensure_helv(writer: IncrementalWriter, reader: PdfReader) -> PdfRef:
    """Append a Helvetica font object and register it in the AcroForm /DR."""
    font_ref = writer.add_object({
        PdfName("Type"): PdfName("Font"),
        PdfName("Subtype"): PdfName("Type1"),
        PdfName("BaseFont"): PdfName("Helvetica"),
        PdfName("Encoding"): PdfName("WinAnsiEncoding"),
    })
    acro_ref = reader.catalog.get(PdfName("AcroForm"))
    if isinstance(acro_ref, PdfRef):
        acro = dict(reader.resolve(acro_ref) or {})
        dr = dict(reader.resolve(acro.get(PdfName("DR"))) or {})
        fonts = dict(reader.resolve(dr.get(PdfName("Font"))) or {})
        fonts.setdefault(PdfName("Helv"), font_ref)
        dr[PdfName("Font")] = fonts
        acro[PdfName("DR")] = dr
        writer.set_object(acro_ref, acro)
    return font_ref


def _set_field_text(writer: IncrementalWriter, reader: PdfReader,
                    fd: FieldDescriptor, value: str, font_ref: PdfRef,
                    min_font: float | None) -> None:
    """Set /V and regenerate each widget's normal appearance.

    min_font None means clamp (fill path); a number means raise
    AppearanceFailure below it (stamp path).
    """
    node = dict(reader.resolve(fd.field_ref) or {})
    node[PdfName("V")] = PdfString.from_text(value)
    node.pop(PdfName("AP"), None)

    merged = len(fd.widgets) == 1 and fd.widgets[0].ref.num == fd.field_ref.num
    for widget in fd.widgets:
        w = widget.rect[2] - widget.rect[0]
        h = widget.rect[3] - widget.rect[1]
        size = _fit_font_size(value, w, h)
        if min_font is not None and size < min_font:
            raise AppearanceFailure(
                f"field {fd.name!r}: no legible text fits "
                f"({w:.0f}x{h:.0f} pt needs {size:.1f} pt font)")
        size = max(size, 4.0)
        ap_ref = writer.add_object(_appearance_stream(value, w, h, size, font_ref))
        if merged:
            node[PdfName("AP")] = {PdfName("N"): ap_ref}
        else:
            wdict = dict(reader.resolve(widget.ref) or {})
            wdict[PdfName("AP")] = {PdfName("N"): ap_ref}
            writer.set_object(widget.ref, wdict)
    writer.set_object(fd.field_ref, node)


def stamp_placeholders(
    pdf_bytes: bytes,
    fields: list[FieldDescriptor],
    policy: SizePolicy = SizePolicy(),
) -> tuple[bytes, PlaceholderMap, list[FieldDescriptor]]:
    """Write a `{{field_NN}}` token into every writable field.

    Returns (stamped pdf, token map, final field list). Fields whose boxes
    cannot hold legible text at the policy's font floor are demoted to
    small, so the returned list is authoritative for later stages.
    """
    reader = PdfReader(pdf_bytes)
    writer = IncrementalWriter(reader)
    font_ref = _ensure_helv(writer, reader)

    writable = [f for f in fields if f.size_class == SIZE_WRITABLE]
    width = max(2, len(str(len(writable))))

    # Fit pass first: demotion must not leave gaps in the numbering.
    final_fields: list[FieldDescriptor] = []
    kept: list[FieldDescriptor] = []
    demoted: set[str] = set()
    for fd in fields:
        if fd.size_class != SIZE_WRITABLE:
            final_fields.append(fd)
            continue
        probe = make_token(len(kept) + 1, width)
        size = min(_fit_font_size(probe, w.rect[2] - w.rect[0],
                                  w.rect[3] - w.rect[1])
                   for w in fd.widgets)
        if size < policy.min_font_pts:
            logger.warning(
                "field %r demoted to small: token would need %.1f pt font",
                fd.name, size)
            demoted.add(fd.name)
            final_fields.append(replace(fd, size_class=SIZE_SMALL))
        else:
            kept.append(fd)
            final_fields.append(fd)

    width = max(2, len(str(len(kept))))
    placeholder_map = PlaceholderMap()
    for i, fd in enumerate(kept, start=1):
        token = make_token(i, width)
        _set_field_text(writer, reader, fd, token, font_ref, min_font=None)
        placeholder_map.entries[token] = fd.name

    return writer.tobytes(), placeholder_map, final_fields


def _set_button_state(writer: IncrementalWriter, reader: PdfReader,
                      fd: FieldDescriptor, state: str) -> None:
    node = dict(reader.resolve(fd.field_ref) or {})
    node[PdfName("V")] = PdfName(state)
    merged = len(fd.widgets) == 1 and fd.widgets[0].ref.num == fd.field_ref.num
    for widget in fd.widgets:
        wstate = state if (widget.on_state == state or state == "Off") else "Off"
        if merged:
            node[PdfName("AS")] = PdfName(wstate)
        else:
            wdict = dict(reader.resolve(widget.ref) or {})
            wdict[PdfName("AS")] = PdfName(wstate)
            writer.set_object(widget.ref, wdict)
    writer.set_object(fd.field_ref, node)


def fill_fields(pdf_bytes: bytes, answers: dict[str, str | bool]) -> bytes:
    """Fill named fields; read_field_values on the result equals `answers`."""
    reader = PdfReader(pdf_bytes)
    fields = {f.name: f for f in _enumerate(reader)}
    writer = IncrementalWriter(reader)
    font_ref: PdfRef | None = None

    for name, value in answers.items():
        fd = fields.get(name)
        if fd is None:
            raise UnknownField(f"no form field named {name!r}")
        if isinstance(value, bool):
            if fd.kind == KIND_CHECKBOX:
                on = fd.widgets[0].on_state or "Yes"
                _set_button_state(writer, reader, fd, on if value else "Off")
            elif fd.kind == KIND_RADIO:
                if value and len(fd.options) != 1:
                    raise TypeMismatch(
                        f"radio group {name!r} needs an option name, "
                        f"one of {list(fd.options)}")
                _set_button_state(writer, reader, fd,
                                  fd.options[0] if value else "Off")
            else:
                raise TypeMismatch(
                    f"boolean answer for {fd.kind} field {name!r}")
        elif isinstance(value, str):
            if fd.kind == KIND_CHECKBOX:
                raise TypeMismatch(f"string answer for checkbox {name!r}")
            if fd.kind == KIND_RADIO:
                if value not in fd.options:
                    raise TypeMismatch(
                        f"radio group {name!r} has no option {value!r}; "
                        f"options: {list(fd.options)}")
                _set_button_state(writer, reader, fd, value)
            else:
                if font_ref is None:
                    font_ref = _ensure_helv(writer, reader)
                _set_field_text(writer, reader, fd, value, font_ref,
                                min_font=None)
        else:
            raise TypeMismatch(
                f"answer for {name!r} must be string or boolean, "
                f"got {type(value).__name__}")
    return writer.tobytes()


def read_field_values(pdf_bytes: bytes) -> dict[str, str | bool]:
    """Current field values: text as strings, buttons as booleans or the
    selected option name for radio groups."""
    reader = PdfReader(pdf_bytes)
    out: dict[str, str | bool] = {}
    for fd in _enumerate(reader):
        node = reader.resolve(fd.field_ref)
        v = reader.resolve(node.get(PdfName("V")))
        if fd.kind == KIND_CHECKBOX:
            out[fd.name] = isinstance(v, PdfName) and str(v) != "Off"
        elif fd.kind == KIND_RADIO:
            out[fd.name] = str(v) if isinstance(v, PdfName) and str(v) != "Off" else ""
        elif isinstance(v, PdfString):
            out[fd.name] = v.text
        elif isinstance(v, PdfName):
            out[fd.name] = str(v)
        else:
            out[fd.name] = ""
    return out
