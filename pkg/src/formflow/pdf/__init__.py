"""Self-contained PDF form layer: parse, enumerate, stamp, fill."""

from .acroform import (
    FieldDescriptor,
    PlaceholderMap,
    SizePolicy,
    Widget,
    classify_all,
    classify_size,
    enumerate_fields,
    fill_fields,
    make_token,
    read_field_values,
    stamp_placeholders,
    text_width_1000,
)
from .cos import PdfName, PdfRef, PdfStream, PdfString
from .reader import PdfReader
from .writer import IncrementalWriter

__all__ = [
    "FieldDescriptor",
    "PlaceholderMap",
    "SizePolicy",
    "Widget",
    "classify_all",
    "classify_size",
    "enumerate_fields",
    "fill_fields",
    "make_token",
    "read_field_values",
    "stamp_placeholders",
    "text_width_1000",
    "PdfName",
    "PdfRef",
    "PdfStream",
    "PdfString",
    "PdfReader",
    "IncrementalWriter",
]
