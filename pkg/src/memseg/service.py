"""Session-oriented HTTP API for annotate / propagate / inspect / correct.

State is plain files under the data directory — each session is a
sequence folder (frames/ + optional ground-truth masks/) plus
annotations/ and one masks directory per propagation run — so anything
the service produces is inspectable with the command-line tools and
survives a restart. Propagation runs on a background thread and writes
each mask as soon as it is produced; every 4xx response body carries a
machine-readable ``code`` string.
"""

from __future__ import annotations

import base64
import io
import json
import logging
import os
import threading
import uuid
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
from starlette.datastructures import UploadFile
from starlette.exceptions import HTTPException as StarletteHTTPException

from .grids import MaskMap, resize_nearest
from .metrics import evaluate_sequence, report_to_dict
from .propagate import init_session
from .seqio import (RunConfig, load_sequence, read_frame, read_mask,
                    write_frame, write_mask)

__all__ = ["create_app", "ApiError"]

log = logging.getLogger(__name__)


class ApiError(Exception):
    """HTTP error with a stable machine-readable code."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_json(path: Path, payload: dict) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, indent=1))
    os.replace(tmp, path)


def _read_json(path: Path) -> dict:
    return json.loads(path.read_text())


def _decode_mask_png(data: bytes) -> np.ndarray:
    from PIL import Image

    try:
        with Image.open(io.BytesIO(data)) as img:
            if img.mode not in ("P", "L"):
                raise ValueError("not indexed")
            return np.asarray(img, dtype=np.int32)
    except Exception:
        raise ApiError(422, "undecodable_mask",
                       "body is not a decodable indexed PNG") from None


class _Store:
    """Filesystem layout and per-session locking."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._registry = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        with self._registry:
            return self._locks.setdefault(session_id, threading.Lock())

    def session_dir(self, session_id: str) -> Path:
        path = self.root / session_id
        if not (path / "session.json").is_file():
            raise ApiError(404, "unknown_sequence", f"no sequence '{session_id}'")
        return path

    def session_info(self, session_id: str) -> dict:
        return _read_json(self.session_dir(session_id) / "session.json")

    def run_dirs(self, session_id: str) -> list[Path]:
        runs = self.session_dir(session_id) / "runs"
        if not runs.is_dir():
            return []
        found = [p for p in runs.iterdir() if (p / "run.json").is_file()]
        return sorted(found, key=lambda p: _read_json(p / "run.json")["seq"])

    def run_info(self, session_id: str, run_id: str) -> dict:
        path = self.session_dir(session_id) / "runs" / run_id / "run.json"
        if not path.is_file():
            raise ApiError(404, "unknown_run", f"no run '{run_id}'")
        return _read_json(path)

    def recover(self) -> None:
        """Mark runs that were mid-flight when the process died."""
        for session in self.root.iterdir():
            if not (session / "session.json").is_file():
                continue
            runs = session / "runs"
            if not runs.is_dir():
                continue
            for run in runs.iterdir():
                meta_path = run / "run.json"
                if not meta_path.is_file():
                    continue
                meta = _read_json(meta_path)
                if meta.get("status") == "running":
                    meta["status"] = "error"
                    meta["error"] = {"code": "interrupted",
                                     "message": "service stopped mid-run"}
                    _write_json(meta_path, meta)
                    log.warning("marked run %s of %s interrupted",
                                run.name, session.name)


def _session_summary(store: _Store, session_id: str) -> dict:
    info = store.session_info(session_id)
    base = store.session_dir(session_id)
    annotations = sorted(
        int(p.stem) for p in (base / "annotations").glob("*.png")
    ) if (base / "annotations").is_dir() else []
    runs = [_run_summary(_read_json(p / "run.json"), p)
            for p in store.run_dirs(session_id)]
    status = runs[-1]["status"] if runs else "idle"
    gt = sorted(int(p.stem) for p in (base / "masks").glob("*.png")) \
        if (base / "masks").is_dir() else []
    return {"id": info["id"], "frame_count": info["frame_count"],
            "dims": info["dims"], "status": status,
            "annotations": annotations, "ground_truth_frames": gt,
            "runs": runs}


def _run_summary(meta: dict, run_dir: Path) -> dict:
    produced = sorted(int(p.stem) for p in (run_dir / "masks").glob("*.png"))
    return {"run_id": meta["run_id"], "status": meta["status"],
            "from": meta["from"], "direction": meta["direction"],
            "frames_done": produced, "events": meta.get("events", []),
            "error": meta.get("error")}


def _resolve_mask_path(store: _Store, session_id: str, frame: int,
                       run: str) -> Path:
    name = f"{frame:05d}.png"
    if run == "latest":
        for run_dir in reversed(store.run_dirs(session_id)):
            path = run_dir / "masks" / name
            if path.is_file():
                return path
        raise ApiError(404, "mask_not_ready",
                       f"no run has produced a mask for frame {frame}")
    store.run_info(session_id, run)
    path = store.session_dir(session_id) / "runs" / run / "masks" / name
    if not path.is_file():
        raise ApiError(404, "mask_not_ready",
                       f"run '{run}' has not produced a mask for frame {frame}")
    return path


def _propagation_worker(store: _Store, session_id: str, run_dir: Path) -> None:
    meta_path = run_dir / "run.json"
    meta = _read_json(meta_path)
    try:
        base = store.session_dir(session_id)
        cfg = RunConfig.from_mapping(dict(meta["config"]))
        folder = load_sequence(base, resolution=cfg.resolution)
        frames = folder.load_frames()
        start = int(meta["from"])
        annotation_path = base / "annotations" / f"{start:05d}.png"
        annotation = read_mask(annotation_path)
        if cfg.resolution is not None and annotation.labels.shape != cfg.resolution:
            annotation = MaskMap.from_labels(
                resize_nearest(annotation.labels, cfg.resolution))
        masks_dir = run_dir / "masks"
        masks_dir.mkdir(exist_ok=True)
        written: set[int] = set()

        def emit(index: int, mask: MaskMap) -> None:
            if index in written:
                return
            labels = mask.labels
            if labels.shape != tuple(folder.dims):
                labels = resize_nearest(labels, folder.dims)
            tmp = masks_dir / f".{index:05d}.png.tmp"
            write_mask(tmp, labels)
            os.replace(tmp, masks_dir / f"{index:05d}.png")
            written.add(index)

        directions = (["forward", "backward"] if meta["direction"] == "both"
                      else [meta["direction"]])
        for direction in directions:
            prop = replace(cfg.propagation, direction=direction)
            session = init_session(frames, start, annotation, prop)
            emit(start, session.masks[start])
            while not session.finished:
                index = session.order[session.cursor]
                emit(index, session.step(index))
            meta["events"].extend(
                {"frame": e.frame_index, "prototypes": e.prototypes}
                for e in session.events)
            _write_json(meta_path, meta)
        meta["status"] = "done"
        _write_json(meta_path, meta)
    except Exception as exc:  # propagation must always reach a terminal state
        log.exception("run %s failed", meta.get("run_id"))
        meta["status"] = "error"
        meta["error"] = {"code": "propagation_failed", "message": str(exc)}
        _write_json(meta_path, meta)


class _AnnotationBody(BaseModel):
    mask: str


class _PropagateBody(BaseModel):
    start: int = Field(alias="from")
    direction: str = "both"
    config: dict[str, object] | None = None

    model_config = {"populate_by_name": True}


class _CreateByPath(BaseModel):
    path: str


def create_app(data_dir, max_upload_mb: int = 64) -> FastAPI:
    """Build the service around a data directory; safe across restarts."""
    store = _Store(Path(data_dir))
    store.recover()
    app = FastAPI(title="memseg annotation service")
    limit_bytes = max_upload_mb * 1024 * 1024

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_req: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422,
                            content={"code": "invalid_request",
                                     "message": str(exc.errors()[:1])})

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(_req: Request, exc: StarletteHTTPException):
        return JSONResponse(status_code=exc.status_code,
                            content={"code": "http_error",
                                     "message": str(exc.detail)})

    def _ingest_upload(files: list[UploadFile],
                       mask_files: list[UploadFile]) -> tuple[str, int, list[int]]:
        session_id = uuid.uuid4().hex[:12]
        base = store.root / session_id
        (base / "frames").mkdir(parents=True)
        (base / "annotations").mkdir()
        total = 0
        frames: list[np.ndarray] = []
        for upload in files:
            data = upload.file.read()
            total += len(data)
            if total > limit_bytes:
                raise ApiError(413, "upload_too_large",
                               f"upload exceeds {max_upload_mb} MiB")
            try:
                frames.append(read_frame(io.BytesIO(data)))
            except Exception:
                raise ApiError(400, "undecodable_image",
                               f"could not decode '{upload.filename}'") from None
        dims = frames[0].shape
        if any(f.shape != dims for f in frames):
            raise ApiError(400, "dim_mismatch", "frames differ in size")
        for at, frame in enumerate(frames):
            write_frame(base / "frames" / f"{at:05d}.png", frame)
        gt_indices: list[int] = []
        if mask_files:
            (base / "masks").mkdir()
            for upload in mask_files:
                data = upload.file.read()
                total += len(data)
                if total > limit_bytes:
                    raise ApiError(413, "upload_too_large",
                                   f"upload exceeds {max_upload_mb} MiB")
                stem = Path(upload.filename or "").stem
                if not stem.isdigit() or not 0 <= int(stem) < len(frames):
                    raise ApiError(400, "bad_mask_name",
                                   f"mask filename '{upload.filename}' is not a frame index")
                labels = _decode_mask_png(data)
                if labels.shape != dims:
                    raise ApiError(400, "dim_mismatch",
                                   f"mask {stem} dims do not match frames")
                write_mask(base / "masks" / f"{int(stem):05d}.png", labels)
                gt_indices.append(int(stem))
        return session_id, len(frames), list(dims)

    def _ingest_path(src: str) -> tuple[str, int, list[int]]:
        try:
            folder = load_sequence(src)
        except ValueError as exc:
            raise ApiError(400, "bad_sequence", str(exc)) from None
        session_id = uuid.uuid4().hex[:12]
        base = store.root / session_id
        (base / "frames").mkdir(parents=True)
        (base / "annotations").mkdir()
        if folder.annotations:
            (base / "masks").mkdir()
        for pos in range(len(folder)):
            write_frame(base / "frames" / f"{pos:05d}.png", folder.load_frame(pos))
        for index in folder.annotations:
            pos = folder.position_of(index)
            write_mask(base / "masks" / f"{pos:05d}.png",
                       folder.load_mask(index).labels)
        return session_id, len(folder), list(folder.dims)

    @app.post("/sequences", status_code=201)
    async def create_sequence(request: Request):
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("multipart/form-data"):
            form = await request.form()
            files = [v for k, v in form.multi_items()
                     if k == "frames" and isinstance(v, UploadFile)]
            mask_files = [v for k, v in form.multi_items()
                          if k == "masks" and isinstance(v, UploadFile)]
            if not files:
                raise ApiError(400, "no_frames", "no frame files uploaded")
            session_id, count, dims = _ingest_upload(files, mask_files)
        else:
            try:
                body = _CreateByPath.model_validate(await request.json())
            except Exception:
                raise ApiError(400, "no_frames",
                               "send multipart 'frames' files or JSON {\"path\": ...}") from None
            session_id, count, dims = _ingest_path(body.path)
        _write_json(store.root / session_id / "session.json",
                    {"id": session_id, "frame_count": count, "dims": dims,
                     "created": _now()})
        return {"id": session_id, "frame_count": count, "dims": dims}

    @app.get("/sequences")
    def list_sequences():
        ids = sorted(p.name for p in store.root.iterdir()
                     if (p / "session.json").is_file())
        return {"sequences": [_session_summary(store, i) for i in ids]}

    @app.get("/sequences/{session_id}")
    def get_sequence(session_id: str):
        return _session_summary(store, session_id)

    @app.get("/sequences/{session_id}/frames/{frame}")
    def get_frame(session_id: str, frame: int):
        info = store.session_info(session_id)
        if not 0 <= frame < info["frame_count"]:
            raise ApiError(404, "unknown_frame", f"no frame {frame}")
        path = store.session_dir(session_id) / "frames" / f"{frame:05d}.png"
        return Response(content=path.read_bytes(), media_type="image/png")

    @app.put("/sequences/{session_id}/annotations/{frame}", status_code=204)
    def put_annotation(session_id: str, frame: int, body: _AnnotationBody):
        info = store.session_info(session_id)
        if not 0 <= frame < info["frame_count"]:
            raise ApiError(404, "unknown_frame", f"no frame {frame}")
        try:
            data = base64.b64decode(body.mask, validate=True)
        except Exception:
            raise ApiError(422, "undecodable_mask",
                           "mask is not valid base64") from None
        labels = _decode_mask_png(data)
        if list(labels.shape) != list(info["dims"]):
            raise ApiError(422, "dim_mismatch",
                           f"mask dims {list(labels.shape)} != {info['dims']}")
        if not (labels > 0).any():
            raise ApiError(422, "empty_mask", "annotation has no foreground")
        with store.lock(session_id):
            write_mask(store.session_dir(session_id) / "annotations"
                       / f"{frame:05d}.png", labels)
        return Response(status_code=204)

    @app.get("/sequences/{session_id}/annotations/{frame}")
    def get_annotation(session_id: str, frame: int):
        path = store.session_dir(session_id) / "annotations" / f"{frame:05d}.png"
        if not path.is_file():
            raise ApiError(404, "unknown_annotation",
                           f"no annotation for frame {frame}")
        return Response(content=path.read_bytes(), media_type="image/png")

    @app.post("/sequences/{session_id}/propagate", status_code=202)
    def propagate(session_id: str, body: _PropagateBody):
        info = store.session_info(session_id)
        if body.direction not in ("forward", "backward", "both"):
            raise ApiError(422, "bad_direction",
                           "direction must be forward, backward, or both")
        if not 0 <= body.start < info["frame_count"]:
            raise ApiError(404, "unknown_frame", f"no frame {body.start}")
        base = store.session_dir(session_id)
        if not (base / "annotations" / f"{body.start:05d}.png").is_file():
            raise ApiError(422, "missing_annotation",
                           f"no annotation at frame {body.start}")
        raw_config = {str(k): ("none" if v is None else str(v))
                      for k, v in (body.config or {}).items()}
        raw_config.setdefault("resolution", "native")
        try:
            RunConfig.from_mapping(dict(raw_config))
        except ValueError as exc:
            raise ApiError(422, "bad_config", str(exc)) from None
        with store.lock(session_id):
            runs = store.run_dirs(session_id)
            if any(_read_json(p / "run.json")["status"] == "running"
                   for p in runs):
                raise ApiError(409, "already_running",
                               "a propagation is already running")
            seq = 1 + max((_read_json(p / "run.json")["seq"] for p in runs),
                          default=0)
            run_id = f"run{seq:04d}"
            run_dir = base / "runs" / run_id
            (run_dir / "masks").mkdir(parents=True)
            _write_json(run_dir / "run.json",
                        {"run_id": run_id, "seq": seq, "status": "running",
                         "from": body.start, "direction": body.direction,
                         "config": raw_config, "events": [],
                         "created": _now()})
        threading.Thread(target=_propagation_worker,
                         args=(store, session_id, run_dir),
                         daemon=True).start()
        return {"run_id": run_id}

    @app.get("/sequences/{session_id}/runs/{run_id}")
    def get_run(session_id: str, run_id: str):
        meta = store.run_info(session_id, run_id)
        return _run_summary(meta, store.session_dir(session_id) / "runs" / run_id)

    @app.get("/sequences/{session_id}/masks/{frame}")
    def get_mask(session_id: str, frame: int, run: str = "latest"):
        info = store.session_info(session_id)
        if not 0 <= frame < info["frame_count"]:
            raise ApiError(404, "unknown_frame", f"no frame {frame}")
        path = _resolve_mask_path(store, session_id, frame, run)
        return Response(content=path.read_bytes(), media_type="image/png")

    @app.get("/sequences/{session_id}/report")
    def get_report(session_id: str, run: str = "latest",
                   tolerance: int | None = None):
        base = store.session_dir(session_id)
        gt_dir = base / "masks"
        gt_frames = sorted(int(p.stem) for p in gt_dir.glob("*.png")) \
            if gt_dir.is_dir() else []
        if not gt_frames:
            raise ApiError(409, "no_ground_truth",
                           "no ground-truth masks for this sequence")
        preds, gts = [], []
        for frame in gt_frames:
            try:
                pred_path = _resolve_mask_path(store, session_id, frame, run)
            except ApiError:
                raise ApiError(409, "missing_predictions",
                               f"no mask produced yet for frame {frame}") from None
            preds.append(read_mask(pred_path))
            gts.append(read_mask(gt_dir / f"{frame:05d}.png"))
        report = evaluate_sequence(preds, gts, tol=tolerance, indices=gt_frames)
        payload = report_to_dict(report)
        payload["run"] = run
        return payload

    return app
