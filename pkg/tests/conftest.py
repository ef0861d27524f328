from __future__ import annotations

from pathlib import Path

import pytest

import fixture_pdf
from formflow.pipeline import (PipelineCheckpoint, PipelineConfig, approve,
                               run_all)


@pytest.fixture(scope="session")
def acceptance_pdf() -> bytes:
    return fixture_pdf.build_acceptance_pdf()


@pytest.fixture(scope="session")
def recorded_dirs(tmp_path_factory) -> tuple[Path, Path]:
    base = tmp_path_factory.mktemp("recorded")
    raster, ocr = base / "raster", base / "ocr"
    fixture_pdf.write_recorded_fixtures(raster, ocr)
    return raster, ocr


def make_config(recorded_dirs: tuple[Path, Path], mode: str = "record",
                gates: bool = False, **extra) -> PipelineConfig:
    raster, ocr = recorded_dirs
    return PipelineConfig(
        mode=mode, model="scripted-v1", api_base="scripted", dpi=200,
        rasterizer="recorded", rasterizer_fixtures=str(raster),
        ocr="recorded", ocr_fixtures=str(ocr), gates=gates, **extra)


def drive(cp: PipelineCheckpoint, config: PipelineConfig,
          approver: str = "tester") -> str:
    """Run to completion, approving each gate as a reviewer would."""
    while True:
        status = run_all(cp, config)
        if not status.startswith("waiting_review:"):
            return status
        approve(cp, status.split(":", 1)[1], approved_by=approver)


@pytest.fixture(scope="session")
def completed_run(tmp_path_factory, acceptance_pdf,
                  recorded_dirs) -> PipelineCheckpoint:
    """One recorded end-to-end run over the 14-field form, gates approved."""
    workdir = tmp_path_factory.mktemp("run") / "case"
    config = make_config(recorded_dirs, mode="record", gates=True)
    cp = PipelineCheckpoint.create(workdir, acceptance_pdf,
                                   "small_claims.pdf", config)
    status = drive(cp, config)
    assert status == "complete"
    return cp
