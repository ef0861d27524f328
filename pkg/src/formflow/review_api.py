"""HTTP review surface over checkpoint directories.

Edits use JSON-pointer patches guarded by optimistic concurrency: the
caller sends the state version it read, and a mismatch is a 409. A patch
that would break the stage schema or the naming rules never lands (422),
so the checkpoint always stays runnable.
"""

from __future__ import annotations

import copy
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .conventions import NamingConventions, validate_variable
from .errors import FormflowError, SchemaViolation, StageOrderViolation
from .pipeline import (
    GATES,
    STAGES,
    CheckpointLock,
    PipelineCheckpoint,
    approve,
    compute_metrics,
    run_all,
)
from .schemas import validate_stage

EDITABLE_STAGES = set(STAGES) - {"ingested"}


class PatchOp(BaseModel):
    path: str
    value: object = None


class EditRequest(BaseModel):
    base_version: str
    patch: list[PatchOp]


def _pointer_tokens(pointer: str) -> list[str]:
    if not pointer.startswith("/"):
        raise ValueError(f"JSON pointer must start with '/': {pointer!r}")
    return [t.replace("~1", "/").replace("~0", "~")
            for t in pointer.split("/")[1:]]


def _pointer_set(doc, pointer: str, value) -> None:
    tokens = _pointer_tokens(pointer)
    node = doc
    for i, token in enumerate(tokens):
        last = i == len(tokens) - 1
        if isinstance(node, list):
            idx = int(token)
            if not 0 <= idx < len(node):
                raise ValueError(f"index {idx} out of range at {pointer!r}")
            if last:
                node[idx] = value
            else:
                node = node[idx]
        elif isinstance(node, dict):
            if last:
                node[token] = value
            else:
                if token not in node:
                    raise ValueError(f"no member {token!r} at {pointer!r}")
                node = node[token]
        else:
            raise ValueError(f"cannot descend into scalar at {pointer!r}")


def _convention_findings(payload: dict) -> tuple[list[dict], list[dict]]:
    """(errors, warnings) for variables in a bindings/questions payload."""
    conv = NamingConventions.defaults()
    key = "bindings" if "bindings" in payload else (
        "questions" if "questions" in payload else None)
    errors: list[dict] = []
    warnings: list[dict] = []
    if key is None:
        return errors, warnings
    for i, item in enumerate(payload.get(key, [])):
        for v in validate_variable(item.get("variable", ""), conv):
            finding = {"path": f"/{key}/{i}/variable",
                       "variable": item.get("variable", ""),
                       "code": v.code, "message": v.message,
                       "severity": v.severity}
            (errors if v.severity == "error" else warnings).append(finding)
    return errors, warnings


def create_app(root: Path, static_dir: Path | None = None) -> FastAPI:
    root = Path(root)
    app = FastAPI(title="formflow review API", version="1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"])

    def run_dirs() -> dict[str, Path]:
        if (root / "state.json").exists():
            cp = PipelineCheckpoint.load(root)
            return {cp.run_id: root}
        out: dict[str, Path] = {}
        for child in sorted(root.iterdir()) if root.exists() else []:
            if (child / "state.json").exists():
                out[PipelineCheckpoint.load(child).run_id] = child
        return out

    def load(run_id: str) -> PipelineCheckpoint:
        directory = run_dirs().get(run_id)
        if directory is None:
            raise HTTPException(404, f"no run {run_id!r}")
        return PipelineCheckpoint.load(directory)

    @app.get("/runs")
    def list_runs():
        out = []
        for run_id, directory in run_dirs().items():
            cp = PipelineCheckpoint.load(directory)
            out.append({"run_id": run_id, "stage": cp.stage,
                        "source_name": cp.payload("ingested")["source_name"]})
        return out

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        cp = load(run_id)
        return {
            "run_id": cp.run_id,
            "stage": cp.stage,
            "version": cp.version(),
            "stages": {s: (s in cp.state["payloads"]) for s in STAGES},
            "gates": GATES,
            "audit": cp.state["audit"],
        }

    @app.get("/runs/{run_id}/stage/{stage}")
    def get_stage(run_id: str, stage: str):
        cp = load(run_id)
        if stage not in cp.state["payloads"]:
            raise HTTPException(404, f"run has no {stage!r} payload")
        payload = cp.payload(stage)
        errors, warnings = _convention_findings(payload)
        return {"stage": stage, "version": cp.version(), "payload": payload,
                "violations": errors + warnings}

    @app.patch("/runs/{run_id}/stage/{stage}")
    def patch_stage(run_id: str, stage: str, edit: EditRequest):
        directory = run_dirs().get(run_id)
        if directory is None:
            raise HTTPException(404, f"no run {run_id!r}")
        if stage not in EDITABLE_STAGES:
            raise HTTPException(404, f"stage {stage!r} is not editable")
        with CheckpointLock(directory):
            cp = PipelineCheckpoint.load(directory)
            if stage not in cp.state["payloads"]:
                raise HTTPException(404, f"run has no {stage!r} payload")
            if edit.base_version != cp.version():
                return JSONResponse(status_code=409, content={
                    "error": "version conflict: state changed since you "
                             "read it",
                    "current_version": cp.version(),
                })
            payload = copy.deepcopy(cp.payload(stage))
            try:
                for op in edit.patch:
                    _pointer_set(payload, op.path, op.value)
            except (ValueError, TypeError) as exc:
                raise HTTPException(422, detail={"violations": [
                    {"path": op.path, "message": str(exc)}]})
            try:
                validate_stage(stage, payload)
            except SchemaViolation as exc:
                raise HTTPException(422, detail={"violations": [
                    {"path": "", "message": str(exc)}]})
            errors, warnings = _convention_findings(payload)
            if errors:
                raise HTTPException(422, detail={"violations": errors})
            cp.state["payloads"][stage] = payload
            cp.audit("edited", stage=stage, ops=len(edit.patch))
            cp.save()
            return {"stage": stage, "version": cp.version(),
                    "payload": payload, "warnings": warnings}

    @app.post("/runs/{run_id}/approve/{stage}")
    def approve_stage(run_id: str, stage: str):
        directory = run_dirs().get(run_id)
        if directory is None:
            raise HTTPException(404, f"no run {run_id!r}")
        with CheckpointLock(directory):
            cp = PipelineCheckpoint.load(directory)
            try:
                approve(cp, stage, approved_by="api")
                status = run_all(cp)
            except StageOrderViolation as exc:
                raise HTTPException(404, detail=str(exc))
            except (SchemaViolation, FormflowError) as exc:
                raise HTTPException(422, detail={"violations": [
                    {"path": "", "message": str(exc)}]})
        return {"run_id": cp.run_id, "stage": cp.stage, "status": status,
                "version": cp.version()}

    @app.get("/runs/{run_id}/metrics")
    def get_metrics(run_id: str):
        directory = run_dirs().get(run_id)
        if directory is None:
            raise HTTPException(404, f"no run {run_id!r}")
        try:
            report = compute_metrics([directory])
        except StageOrderViolation as exc:
            raise HTTPException(404, detail=str(exc))
        return {"forms": report.rows, "aggregate": report.aggregates()}

    @app.get("/runs/{run_id}/preview")
    def get_preview(run_id: str):
        from .interview import assemble
        from .llm.stages import DocMetadata, QuestionSpec, VariableBinding

        cp = load(run_id)
        payloads = cp.state["payloads"]
        if "metadata_bound" not in payloads:
            raise HTTPException(404, "no metadata yet; preview needs the "
                                     "metadata_bound stage")
        metadata = DocMetadata.from_dict(payloads["metadata_bound"]["metadata"])
        bindings_payload = payloads.get("bindings_reviewed") \
            or payloads.get("bindings_draft") or {"bindings": []}
        questions_payload = payloads.get("questions_reviewed") \
            or payloads.get("questions_draft") or {"questions": []}
        bindings = [VariableBinding.from_dict(d)
                    for d in bindings_payload["bindings"]]
        questions = [QuestionSpec.from_dict(d)
                     for d in questions_payload["questions"]]
        try:
            _, yaml_text = assemble(metadata, questions, bindings,
                                    "stamped.pdf")
        except FormflowError as exc:
            raise HTTPException(422, detail={"violations": [
                {"path": "", "message": str(exc)}]})
        return {"run_id": cp.run_id, "stage": cp.stage, "yaml": yaml_text}

    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True),
                  name="ui")

    return app
