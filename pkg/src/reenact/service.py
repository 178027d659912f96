"""Editor-facing HTTP service: live parameter edits with rendered previews.

All endpoints live under /v1/ and speak JSON, except the frame endpoint which
returns PNG.  A single lock serializes synthesis so concurrent previews never
interleave; every accepted mutation is appended to a JSON-lines request log
that can be replayed offline to reproduce the state.
"""

from __future__ import annotations

import io
import json
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, Response

from . import __version__
from .conditioning import assemble_window
from .facemodel import GAZE_BOUND, FaceBasis, FaceParameters
from .formats import write_png
from .nn.train import NetworkWeights, infer_frame
from .render import CameraIntrinsics, rasterize_color, render_conditioning
from .transfer import EditDeltas, edit_parameters

EDIT_FIELDS = {
    "rotation": 3, "translation": 3, "expression": None, "gaze": 4, "alpha": None,
}


class EditorService:
    """Owns the editable parameter state and renders previews on demand."""

    def __init__(self, basis: FaceBasis, cam: CameraIntrinsics,
                 initial: FaceParameters, weights: NetworkWeights | None = None,
                 window_size: int = 11, log_path=None):
        self.basis = basis
        self.cam = cam
        self.initial = initial.copy()
        self.params = initial.copy()
        self.weights = weights
        self.window_size = window_size
        self.log_path = Path(log_path) if log_path else None
        self.seq = 0
        self.lock = threading.Lock()

    def state(self, warnings: list[str] | None = None) -> dict:
        n_alpha, n_beta, n_delta = self.basis.dims
        return {
            "seq": self.seq,
            "params": self.params.to_dict(),
            "bounds": {
                "gaze": GAZE_BOUND,
                "dims": [n_alpha, n_beta, n_delta],
            },
            "warnings": warnings or [],
        }

    def _log(self, op: str, payload: dict) -> None:
        if self.log_path is None:
            return
        with open(self.log_path, "a") as fh:
            fh.write(json.dumps({"op": op, "payload": payload}) + "\n")

    def validate_edit(self, payload: dict) -> EditDeltas:
        n_delta = self.basis.dims[2]
        n_alpha = self.basis.dims[0]
        lengths = dict(EDIT_FIELDS, expression=n_delta, alpha=n_alpha)
        for key, value in payload.items():
            if key == "client_seq":
                continue
            if key not in EDIT_FIELDS:
                raise FieldError(key, "unknown edit field")
            if value is None:
                continue
            if not isinstance(value, (list, tuple)) \
                    or not all(isinstance(v, (int, float)) for v in value):
                raise FieldError(key, "must be a list of numbers")
            if len(value) != lengths[key]:
                raise FieldError(key, f"expected {lengths[key]} values")
        return EditDeltas.from_dict(payload)

    def apply_edit(self, payload: dict) -> dict:
        deltas = self.validate_edit(payload)
        with self.lock:
            self.params, warnings = edit_parameters(self.params, deltas)
            self.seq += 1
            self._log("edit", {k: v for k, v in payload.items()
                               if k != "client_seq"})
            state = self.state(warnings)
        if "client_seq" in payload:
            state["client_seq"] = payload["client_seq"]
        return state

    def reset(self) -> dict:
        with self.lock:
            self.params = self.initial.copy()
            self.seq += 1
            self._log("reset", {})
            return self.state()

    def render_frame(self, mode: str) -> tuple[bytes, int]:
        with self.lock:
            params = self.params.copy()
            seq = self.seq
        if mode == "conditioning":
            img = rasterize_color(self.basis, params, self.cam)
        elif mode == "output":
            if self.weights is None:
                raise NoWeightsError()
            cond = render_conditioning(self.basis, params, self.cam)
            window = assemble_window([cond] * self.window_size)
            img = infer_frame(window, self.weights)
        else:
            raise FieldError("mode", "must be 'conditioning' or 'output'")
        buf = io.BytesIO()
        write_png(img, buf)
        return buf.getvalue(), seq


class FieldError(ValueError):
    def __init__(self, fieldname: str, message: str):
        super().__init__(message)
        self.fieldname = fieldname


class NoWeightsError(RuntimeError):
    pass


def replay_log(initial: FaceParameters, log_path) -> FaceParameters:
    """Re-run a request log offline; the result must match the live state."""
    params = initial.copy()
    with open(log_path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            entry = json.loads(line)
            if entry["op"] == "reset":
                params = initial.copy()
            elif entry["op"] == "edit":
                params, _ = edit_parameters(params,
                                            EditDeltas.from_dict(entry["payload"]))
            else:
                raise ValueError(f"unknown log op {entry['op']!r}")
    return params


def create_app(service: EditorService) -> FastAPI:
    app = FastAPI(title="reenact editor", version=__version__)

    @app.exception_handler(FieldError)
    async def field_error(_: Request, exc: FieldError):
        return JSONResponse(status_code=400, content={
            "error": {"field": exc.fieldname, "message": str(exc)}})

    @app.exception_handler(NoWeightsError)
    async def no_weights(_: Request, exc: NoWeightsError):
        return JSONResponse(status_code=404, content={
            "error": {"message": "no network weights loaded"}})

    @app.get("/v1/state")
    async def get_state():
        with service.lock:
            return service.state()

    @app.post("/v1/edit")
    async def post_edit(payload: dict):
        try:
            return service.apply_edit(payload)
        except FieldError:
            raise
        except ValueError as exc:
            raise FieldError("payload", str(exc))

    @app.post("/v1/reset")
    async def post_reset():
        return service.reset()

    @app.get("/v1/frame")
    async def get_frame(mode: str = Query("conditioning")):
        data, seq = service.render_frame(mode)
        return Response(content=data, media_type="image/png",
                        headers={"X-State-Seq": str(seq)})

    @app.get("/v1/meta")
    async def get_meta():
        return {
            "version": __version__,
            "resolution": list(service.cam.image_size),
            "window_size": service.window_size,
            "dims": list(service.basis.dims),
            "has_weights": service.weights is not None,
        }

    return app
