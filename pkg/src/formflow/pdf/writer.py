"""Incremental-update PDF writer.

Edits never rewrite the original bytes: changed and new objects are
appended after the existing file together with a fresh cross-reference
section, so every untouched object stays byte-identical. The appended
section mirrors the style of the file's own xref (classic table or
cross-reference stream) to keep strict readers happy.
"""

from __future__ import annotations

import zlib

from .cos import PdfName, PdfRef, PdfStream, serialize
from .reader import PdfReader


class IncrementalWriter:
    def __init__(self, reader: PdfReader):
        self.reader = reader
        self._objects: dict[int, object] = {}
        self._next_num = reader.max_object_number()

    def set_object(self, ref: PdfRef, obj) -> None:
        """Override an existing object in the update section."""
        self._objects[ref.num] = obj

    def add_object(self, obj) -> PdfRef:
        ref = PdfRef(self._next_num)
        self._next_num += 1
        self._objects[ref.num] = obj
        return ref

    def updated(self, ref: PdfRef):
        """The pending version of an object, or the original if untouched."""
        if ref.num in self._objects:
            return self._objects[ref.num]
        return self.reader.get(ref)

    def tobytes(self) -> bytes:
        if not self._objects:
            return self.reader.data
        base = self.reader.data
        out = bytearray(base)
        if not base.endswith(b"\n"):
            out += b"\n"
        offsets: dict[int, int] = {}
        for num in sorted(self._objects):
            offsets[num] = len(out)
            body = serialize(self._objects[num])
            out += b"%d 0 obj\n" % num
            out += body
            out += b"\nendobj\n"

        prev_start = self._previous_startxref(base)
        size = max(self.reader.max_object_number(), max(offsets) + 1)
        if self.reader._xref_is_stream:
            xref_off = self._append_xref_stream(out, offsets, size, prev_start)
        else:
            xref_off = self._append_classic_xref(out, offsets, size, prev_start)
        out += b"startxref\n%d\n%%%%EOF\n" % xref_off
        return bytes(out)

    def _previous_startxref(self, base: bytes) -> int:
        import re
        m = None
        for m in re.finditer(rb"startxref\s+(\d+)", base[-2048:]):
            pass
        return int(m.group(1)) if m else 0

    def _trailer_dict(self, size: int, prev: int) -> dict:
        trailer: dict = {PdfName("Size"): size}
        for key in ("Root", "Info", "ID"):
            val = self.reader.trailer.get(PdfName(key))
            if val is not None:
                trailer[PdfName(key)] = val
        trailer[PdfName("Prev")] = prev
        return trailer

    def _append_classic_xref(self, out: bytearray, offsets, size, prev) -> int:
        xref_off = len(out)
        out += b"xref\n"
        # contiguous subsections
        nums = sorted(offsets)
        runs: list[list[int]] = []
        for num in nums:
            if runs and num == runs[-1][-1] + 1:
                runs[-1].append(num)
            else:
                runs.append([num])
        out += b"0 1\n0000000000 65535 f \n"
        for run in runs:
            out += b"%d %d\n" % (run[0], len(run))
            for num in run:
                out += b"%010d %05d n \n" % (offsets[num], 0)
        out += b"trailer\n"
        out += serialize(self._trailer_dict(size, prev))
        out += b"\n"
        return xref_off

    def _append_xref_stream(self, out: bytearray, offsets, size, prev) -> int:
        xref_num = self._next_num
        self._next_num += 1
        xref_off = len(out)
        entries = dict(offsets)
        entries[xref_num] = xref_off
        nums = sorted(entries)
        index: list[int] = []
        rows = bytearray()
        run_start = None
        run_len = 0
        for i, num in enumerate(nums):
            if run_start is None:
                run_start, run_len = num, 1
            elif num == nums[i - 1] + 1:
                run_len += 1
            else:
                index += [run_start, run_len]
                run_start, run_len = num, 1
            rows += b"\x01" + entries[num].to_bytes(4, "big") + b"\x00\x00"
        index += [run_start, run_len]

        sdict = self._trailer_dict(max(size, xref_num + 1), prev)
        sdict[PdfName("Type")] = PdfName("XRef")
        sdict[PdfName("W")] = [1, 4, 2]
        sdict[PdfName("Index")] = index
        sdict[PdfName("Filter")] = PdfName("FlateDecode")
        stream = PdfStream(sdict, zlib.compress(bytes(rows), 9))
        out += b"%d 0 obj\n" % xref_num
        out += serialize(stream)
        out += b"\nendobj\n"
        return xref_off
