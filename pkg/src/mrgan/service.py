"""HTTP inference service exposing a checkpoint to the mixer UI.

Endpoints (JSON): GET /model/info, POST /latents/sample, POST /generate,
POST /heatmap, GET /health, plus static UI assets under /ui. Responses
are pure functions of (checkpoint, request, stored latent bundles).
"""

from __future__ import annotations

import os
import threading

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import metrics as M
from . import trainer as T
from .models import LatentBundle

__all__ = ["create_app", "serve", "DEFAULT_ADDR"]

DEFAULT_ADDR = "127.0.0.1:8087"


class SampleRequest(BaseModel):
    seed: int | None = None


class Interpolation(BaseModel):
    root: int
    t: float
    target: str  # bundle id


class GenerateRequest(BaseModel):
    bundle: str | None = None  # bundle id
    latents: list[float] | None = None  # flat R*z_dim values
    root_sources: dict[int, str] | None = None  # root index -> bundle id
    interpolation: Interpolation | None = None
    dropped_root: int | None = None


class HeatmapRequest(BaseModel):
    a: GenerateRequest
    b: GenerateRequest


class _Session:
    """Loaded checkpoint plus the in-memory latent-bundle table."""

    def __init__(self, ckpt: T.Checkpoint):
        self.models = T.restore_models(ckpt)
        self.config = ckpt.config
        gen_cfg = self.models.generator.config
        self.roots = gen_cfg.roots
        self.z_dim = gen_cfg.z_dim
        self.points_per_root = gen_cfg.points_per_root
        self._bundles: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def store(self, z: np.ndarray) -> str:
        with self._lock:
            self._counter += 1
            bid = f"b{self._counter}"
            self._bundles[bid] = z
        return bid

    def bundle(self, bid: str) -> np.ndarray:
        z = self._bundles.get(bid)
        if z is None:
            raise HTTPException(404, f"unknown bundle id {bid!r}")
        return z

    def resolve(self, req: GenerateRequest) -> tuple[np.ndarray, list[str]]:
        """Per-root latent matrix plus a per-root source annotation."""
        if (req.bundle is None) == (req.latents is None):
            raise HTTPException(
                400, "exactly one of 'bundle' or 'latents' is required")
        if req.bundle is not None:
            z = self.bundle(req.bundle).copy()
            sources = [req.bundle] * self.roots
        else:
            flat = np.asarray(req.latents, dtype=np.float64)
            if flat.size != self.roots * self.z_dim:
                raise HTTPException(
                    409, f"expected {self.roots * self.z_dim} latent values, "
                         f"got {flat.size}")
            z = flat.reshape(self.roots, self.z_dim)
            sources = ["explicit"] * self.roots
        if req.root_sources:
            for root, bid in req.root_sources.items():
                if not 0 <= root < self.roots:
                    raise HTTPException(400, f"root index {root} out of range")
                z[root] = self.bundle(bid)[root]
                sources[root] = bid
        if req.interpolation is not None:
            it = req.interpolation
            if not 0 <= it.root < self.roots:
                raise HTTPException(400, f"root index {it.root} out of range")
            t = min(max(it.t, 0.0), 1.0)
            target = self.bundle(it.target)
            z[it.root] = (1.0 - t) * z[it.root] + t * target[it.root]
            sources[it.root] = f"{sources[it.root]}~{it.target}@{t:g}"
        if req.dropped_root is not None and not \
                0 <= req.dropped_root < self.roots:
            raise HTTPException(400, f"root index {req.dropped_root} out of range")
        return z, sources

    def generate(self, req: GenerateRequest) -> dict:
        z, sources = self.resolve(req)
        try:
            cloud = self.models.generator.generate(LatentBundle(z, "independent"))
        except FloatingPointError as exc:
            raise HTTPException(500, f"numeric failure: {exc}")
        points = cloud.points
        if not np.all(np.isfinite(points)):
            raise HTTPException(500, "numeric failure: non-finite output")
        if req.dropped_root is not None:
            keep = cloud.root_of_point != req.dropped_root
            points = points[keep]
            sources = [s for i, s in enumerate(sources) if i != req.dropped_root]
        return {
            "points": points.ravel().tolist(),
            "points_per_root": self.points_per_root,
            "roots": len(sources),
            "sources": sources,
        }


def create_app(ckpt, ui_dir=None) -> FastAPI:
    """Build the service around a loaded checkpoint or checkpoint path."""
    if not isinstance(ckpt, T.Checkpoint):
        ckpt = T.load_checkpoint(ckpt)
    session = _Session(ckpt)
    app = FastAPI(title="mrgan studio")
    app.state.session = session

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/model/info")
    def model_info():
        return {"roots": session.roots,
                "points_per_root": session.points_per_root,
                "z_dim": session.z_dim}

    @app.post("/latents/sample")
    def sample(req: SampleRequest):
        seed = req.seed
        if seed is None:
            seed = int.from_bytes(os.urandom(4), "little")
        z = np.random.default_rng(seed).normal(
            size=(session.roots, session.z_dim))
        bid = session.store(z)
        return {"id": bid, "z": z.ravel().tolist(), "seed": seed}

    @app.post("/generate")
    def generate(req: GenerateRequest):
        return session.generate(req)

    @app.post("/heatmap")
    def heatmap(req: HeatmapRequest):
        a = session.generate(req.a)
        b = session.generate(req.b)
        if len(a["points"]) != len(b["points"]):
            raise HTTPException(409, "heatmap requires equal point counts")
        pa = np.asarray(a["points"]).reshape(-1, 3)
        pb = np.asarray(b["points"]).reshape(-1, 3)
        d = M.locality_heatmap(pa, pb)
        return {"distances": d.tolist(),
                "min": float(d.min()), "max": float(d.max()),
                "points": b["points"],
                "points_per_root": session.points_per_root}

    if ui_dir is None:
        ui_dir = os.environ.get("MRGAN_UI_DIR", os.path.join("frontend", "dist"))
    if os.path.isdir(ui_dir):
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def serve(ckpt_path, host: str = "127.0.0.1", port: int = 8087,
          ui_dir=None) -> None:
    import uvicorn

    app = create_app(ckpt_path, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
