"""Stamped-PDF rasterization, OCR, and placeholder reconciliation.

Rendering and recognition are external engines behind small adapters:
a command adapter shells out (poppler's pdftoppm, tesseract), a recorded
adapter replays fixture files so the suite runs with neither installed.
Reconciliation turns noisy OCR text back into canonical tokens.
"""

from __future__ import annotations

import logging
import re
import shutil
import struct
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    NotPdf,
    OcrFailure,
    OcrUnavailable,
    RendererUnavailable,
    RenderFailure,
)
from .pdf import PdfReader
from .pdf.acroform import PlaceholderMap

logger = logging.getLogger("formflow.ocr")

MIN_DPI = 150
DEFAULT_DPI = 200
PAGE_MARKER = "===== page %d ====="
WINDOW_CHARS = 200

# Braces often OCR as parens or brackets and the underscore drops out;
# the digits are the token's identity and get no such forgiveness.
TOKEN_RE = re.compile(r"[({\[]{2}\s*field[_ ]?(\d+)\s*[)}\]]{2}", re.IGNORECASE)


@dataclass(frozen=True)
class PageImage:
    page: int
    width_px: int
    height_px: int
    dpi: int
    path: Path


@dataclass(frozen=True)
class WordBox:
    text: str
    x0: float
    y0: float
    x1: float
    y1: float


@dataclass
class PageText:
    page: int
    text: str
    words: list[WordBox] = field(default_factory=list)


@dataclass
class PlaceholderContext:
    full_text: str
    recovered: set[str]
    missing: set[str]
    per_token_window: dict[str, str]

    def to_dict(self) -> dict:
        return {
            "full_text": self.full_text,
            "recovered": sorted(self.recovered),
            "missing": sorted(self.missing),
            "per_token_window": dict(sorted(self.per_token_window.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlaceholderContext":
        return cls(
            full_text=d["full_text"],
            recovered=set(d["recovered"]),
            missing=set(d["missing"]),
            per_token_window=dict(d["per_token_window"]),
        )


def _png_size(path: Path) -> tuple[int, int]:
    with open(path, "rb") as fh:
        header = fh.read(24)
    if len(header) < 24 or header[:8] != b"\x89PNG\r\n\x1a\n":
        raise RenderFailure(f"{path} is not a PNG file")
    width, height = struct.unpack(">II", header[16:24])
    return width, height


# --- rasterizer adapters ------------------------------------------------------


class RecordedRasterizer:
    """Replays previously rendered page PNGs from a fixture directory."""

    def __init__(self, fixture_dir: Path):
        self.fixture_dir = Path(fixture_dir)

    def render(self, pdf_path: Path, dpi: int, out_dir: Path,
               page_count: int) -> list[Path]:
        out: list[Path] = []
        for n in range(1, page_count + 1):
            src = self.fixture_dir / f"page-{n}.png"
            if not src.exists():
                raise RenderFailure(f"no recorded image for page {n} "
                                    f"under {self.fixture_dir}")
            dst = out_dir / f"page-{n}.png"
            shutil.copyfile(src, dst)
            out.append(dst)
        return out


class CommandRasterizer:
    """Shells out to a poppler-style renderer.

    Contract: given a PDF path and dpi, produce one PNG per page named
    ``<prefix>-N.png`` with N starting at 1.
    """

    def __init__(self, binary: str = "pdftoppm"):
        self.binary = binary

    def render(self, pdf_path: Path, dpi: int, out_dir: Path,
               page_count: int) -> list[Path]:
        if shutil.which(self.binary) is None:
            raise RendererUnavailable(
                f"renderer {self.binary!r} not found; install poppler-utils "
                "or configure rasterizer.command. Adapter contract: PDF path "
                "and dpi in, one PNG per page out, named <prefix>-N.png")
        prefix = out_dir / "page"
        proc = subprocess.run(
            [self.binary, "-png", "-r", str(dpi), str(pdf_path), str(prefix)],
            capture_output=True, text=True)
        if proc.returncode != 0:
            raise RenderFailure(f"{self.binary} failed: {proc.stderr.strip()}")
        produced = sorted(out_dir.glob("page-*.png"),
                          key=lambda p: int(p.stem.split("-")[1]))
        if len(produced) != page_count:
            raise RenderFailure(
                f"expected {page_count} page image(s), got {len(produced)}")
        return produced


def rasterize(pdf_bytes: bytes, workdir: Path, dpi: int = DEFAULT_DPI,
              adapter=None) -> list[PageImage]:
    """One PNG per page, in order, under workdir/pages."""
    if dpi < MIN_DPI:
        raise ValueError(f"dpi {dpi} below minimum {MIN_DPI}; "
                         "token glyphs become unreliable for OCR")
    page_count = len(PdfReader(pdf_bytes).pages())
    if page_count == 0:
        raise NotPdf("document has no pages")
    adapter = adapter or CommandRasterizer()

    pages_dir = Path(workdir) / "pages"
    pages_dir.mkdir(parents=True, exist_ok=True)
    pdf_path = Path(workdir) / "stamped.pdf"
    if not pdf_path.exists() or pdf_path.read_bytes() != pdf_bytes:
        pdf_path.write_bytes(pdf_bytes)

    paths = adapter.render(pdf_path, dpi, pages_dir, page_count)
    images = []
    for n, path in enumerate(paths, start=1):
        width, height = _png_size(path)
        images.append(PageImage(page=n, width_px=width, height_px=height,
                                dpi=dpi, path=path))
    return images


# --- OCR adapters -------------------------------------------------------------


class RecordedOcr:
    """Replays fixture text (and optional word boxes) per page image."""

    def __init__(self, fixture_dir: Path):
        self.fixture_dir = Path(fixture_dir)

    def recognize(self, image: PageImage) -> PageText:
        txt = self.fixture_dir / f"page-{image.page}.txt"
        if not txt.exists():
            raise OcrFailure(f"no recorded OCR text for page {image.page} "
                             f"under {self.fixture_dir}")
        words: list[WordBox] = []
        tsv = self.fixture_dir / f"page-{image.page}.tsv"
        if tsv.exists():
            for line in tsv.read_text("utf-8").splitlines():
                if not line.strip():
                    continue
                text, x0, y0, x1, y1 = line.split("\t")
                words.append(WordBox(text, float(x0), float(y0),
                                     float(x1), float(y1)))
        return PageText(page=image.page, text=txt.read_text("utf-8"),
                        words=words)


class CommandOcr:
    """Shells out to a tesseract-style engine.

    Contract: image path in; UTF-8 plain text on stdout; nonzero exit
    signals failure for that page.
    """

    def __init__(self, binary: str = "tesseract"):
        self.binary = binary

    def recognize(self, image: PageImage) -> PageText:
        if shutil.which(self.binary) is None:
            raise OcrUnavailable(
                f"OCR engine {self.binary!r} not found; install tesseract-ocr "
                "or configure ocr.command. Adapter contract: image path in, "
                "UTF-8 plain text out on stdout, nonzero exit on failure")
        proc = subprocess.run([self.binary, str(image.path), "stdout"],
                              capture_output=True, text=True)
        if proc.returncode != 0:
            raise OcrFailure(f"{self.binary} failed on page {image.page}: "
                             f"{proc.stderr.strip()}")
        words = self._words(image)
        return PageText(page=image.page, text=proc.stdout, words=words)

    def _words(self, image: PageImage) -> list[WordBox]:
        proc = subprocess.run(
            [self.binary, str(image.path), "stdout", "tsv"],
            capture_output=True, text=True)
        if proc.returncode != 0:
            return []
        words: list[WordBox] = []
        for line in proc.stdout.splitlines()[1:]:
            cols = line.split("\t")
            if len(cols) < 12 or not cols[11].strip():
                continue
            left, top, w, h = (float(c) for c in cols[6:10])
            words.append(WordBox(cols[11], left, top, left + w, top + h))
        return words


def ocr_pages(images: list[PageImage], workdir: Path,
              adapter=None) -> list[PageText]:
    """Recognize each page; a failed page degrades to empty text."""
    adapter = adapter or CommandOcr()
    ocr_dir = Path(workdir) / "ocr"
    ocr_dir.mkdir(parents=True, exist_ok=True)
    results: list[PageText] = []
    for image in images:
        try:
            result = adapter.recognize(image)
        except OcrFailure as exc:
            logger.warning("page %d OCR failed, continuing with empty text: %s",
                           image.page, exc)
            result = PageText(page=image.page, text="")
        (ocr_dir / f"page-{image.page}.txt").write_text(result.text, "utf-8")
        results.append(result)
    return results


# --- reconciliation -----------------------------------------------------------


def words_to_page_frame(words: list[WordBox], page_height_pts: float,
                        dpi: int) -> list[WordBox]:
    """Convert pixel boxes (top-down y) to PDF points (bottom-up y)."""
    scale = 72.0 / dpi
    out = []
    for w in words:
        out.append(WordBox(
            text=w.text,
            x0=w.x0 * scale,
            y0=page_height_pts - w.y1 * scale,
            x1=w.x1 * scale,
            y1=page_height_pts - w.y0 * scale,
        ))
    return out


def reconcile(page_texts: list[PageText],
              placeholder_map: PlaceholderMap) -> PlaceholderContext:
    """Match OCR'd token shapes back to canonical `{{field_NN}}` strings.

    Matched spans are rewritten to canonical form in the combined text;
    a token whose digits never appear intact is missing, which is data
    for the metrics report rather than an error.
    """
    by_digits: dict[str, str] = {}
    for token in placeholder_map.tokens():
        m = re.search(r"(\d+)", token)
        if m:
            by_digits.setdefault(m.group(1), token)

    recovered: set[str] = set()
    chunks: list[str] = []
    for pt in page_texts:
        chunks.append(PAGE_MARKER % pt.page)
        normalized = []
        last = 0
        for m in TOKEN_RE.finditer(pt.text):
            token = by_digits.get(m.group(1))
            if token is None:
                continue
            normalized.append(pt.text[last:m.start()])
            normalized.append(token)
            last = m.end()
            recovered.add(token)
        normalized.append(pt.text[last:])
        chunks.append("".join(normalized))
    full_text = "\n".join(chunks)

    missing = set(placeholder_map.tokens()) - recovered
    windows: dict[str, str] = {}
    for token in recovered:
        at = full_text.find(token)
        start = max(0, at - WINDOW_CHARS)
        end = min(len(full_text), at + len(token) + WINDOW_CHARS)
        windows[token] = full_text[start:end]
    return PlaceholderContext(full_text=full_text, recovered=recovered,
                              missing=missing, per_token_window=windows)
