"""HTTP inference service over a trained model artifact.

Endpoints:

    GET  /healthz   liveness + model version
    GET  /schema    the artifact's attribute schema, verbatim
    POST /predict   multipart field "image", optional query "threshold"
    GET  /metrics   request count and p50/p95 latency

The artifact is loaded once at app construction and shared read-only; the
forward pass is serialized behind a lock so concurrent requests cannot
perturb each other and identical inputs always produce identical bytes.
Thresholds only ever change the flagged markers, never the probabilities.
"""

from __future__ import annotations

import socket
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch
from fastapi import FastAPI, File, Header, HTTPException, Query, UploadFile
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .artifact import ModelArtifact, load_artifact
from .errors import DecodeError, PayloadTooLarge, PortInUse
from .imaging import decode_image
from .models import preprocess

DEFAULT_MAX_IMAGE_BYTES = 8 * 1024 * 1024


@dataclass(frozen=True)
class ServiceConfig:
    model_dir: Path
    host: str = "127.0.0.1"
    port: int = 8080
    default_threshold: float = 0.5
    max_image_bytes: int = DEFAULT_MAX_IMAGE_BYTES
    cors_allowed: bool = False
    auth_token: Optional[str] = None

    def __post_init__(self) -> None:
        if not 0.0 < self.default_threshold < 1.0:
            raise ValueError("default_threshold must be in (0, 1)")
        if not 0 < self.port < 65536:
            raise ValueError(f"invalid port {self.port}")


class AttributePrediction(BaseModel):
    attribute: str
    group: str
    probability: float
    flagged: bool


class PredictionResponse(BaseModel):
    model_version: str
    threshold_used: float
    predictions: list[AttributePrediction]
    latency_ms: float


class HealthResponse(BaseModel):
    status: str
    model_version: str


class MetricsResponse(BaseModel):
    requests: int
    p50_latency_ms: Optional[float]
    p95_latency_ms: Optional[float]


@dataclass
class _RequestStats:
    lock: threading.Lock = field(default_factory=threading.Lock)
    latencies_ms: list[float] = field(default_factory=list)
    count: int = 0

    def record(self, latency_ms: float) -> None:
        with self.lock:
            self.count += 1
            self.latencies_ms.append(latency_ms)
            if len(self.latencies_ms) > 10000:
                del self.latencies_ms[: len(self.latencies_ms) - 10000]


def predict_pixels(
    artifact: ModelArtifact,
    pixels: np.ndarray,
    threshold: float,
    lock: Optional[threading.Lock] = None,
) -> PredictionResponse:
    """Run one image through the artifact's preprocessing and model."""
    t0 = time.perf_counter()
    tensor = torch.from_numpy(
        preprocess(pixels, artifact.preprocess_spec).transpose(2, 0, 1)[None]
    )
    ctx = lock if lock is not None else threading.Lock()
    with ctx:
        with torch.no_grad():
            probs = torch.sigmoid(artifact.model(tensor))[0].numpy()
    latency_ms = (time.perf_counter() - t0) * 1000.0

    schema = artifact.schema
    predictions = [
        AttributePrediction(
            attribute=name,
            group=schema.group_of(name),
            probability=float(p),
            flagged=bool(p >= threshold),
        )
        for name, p in zip(schema.attributes, probs)
    ]
    return PredictionResponse(
        model_version=artifact.model_version,
        threshold_used=threshold,
        predictions=predictions,
        latency_ms=latency_ms,
    )


def predict_image(
    artifact: ModelArtifact,
    data: bytes,
    threshold: float = 0.5,
    max_image_bytes: int = DEFAULT_MAX_IMAGE_BYTES,
    lock: Optional[threading.Lock] = None,
) -> PredictionResponse:
    """Decode raw image bytes and predict; shared by the service and the CLI."""
    if len(data) > max_image_bytes:
        raise PayloadTooLarge(f"image is {len(data)} bytes, cap is {max_image_bytes}")
    pixels = decode_image(data)
    return predict_pixels(artifact, pixels, threshold, lock=lock)


def create_app(config: ServiceConfig) -> FastAPI:
    """Build the FastAPI app with the artifact loaded eagerly."""
    artifact = load_artifact(config.model_dir)
    artifact.model.eval()
    stats = _RequestStats()
    forward_lock = threading.Lock()

    app = FastAPI(title="par inference service")
    app.state.artifact = artifact
    app.state.config = config

    if config.cors_allowed:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=["*"],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    def check_token(token: Optional[str]) -> None:
        if config.auth_token is not None and token != config.auth_token:
            raise HTTPException(status_code=401, detail="invalid or missing API token")

    @app.get("/healthz", response_model=HealthResponse)
    def healthz() -> HealthResponse:
        return HealthResponse(status="ok", model_version=artifact.model_version)

    @app.get("/schema")
    def schema() -> JSONResponse:
        return JSONResponse(artifact.schema.to_json_dict())

    @app.get("/metrics", response_model=MetricsResponse)
    def metrics() -> MetricsResponse:
        with stats.lock:
            lat = list(stats.latencies_ms)
            count = stats.count
        if lat:
            p50, p95 = (float(v) for v in np.percentile(lat, [50, 95]))
        else:
            p50 = p95 = None
        return MetricsResponse(requests=count, p50_latency_ms=p50, p95_latency_ms=p95)

    @app.post("/predict", response_model=PredictionResponse)
    def predict(
        image: UploadFile = File(...),
        threshold: Optional[float] = Query(default=None, gt=0.0, lt=1.0),
        x_api_token: Optional[str] = Header(default=None),
    ) -> PredictionResponse:
        check_token(x_api_token)
        data = image.file.read(config.max_image_bytes + 1)
        try:
            response = predict_image(
                artifact,
                data,
                threshold=threshold if threshold is not None else config.default_threshold,
                max_image_bytes=config.max_image_bytes,
                lock=forward_lock,
            )
        except PayloadTooLarge as exc:
            raise HTTPException(status_code=413, detail=str(exc)) from exc
        except DecodeError as exc:
            raise HTTPException(status_code=400, detail=f"DecodeError: {exc}") from exc
        stats.record(response.latency_ms)
        return response

    return app


def _check_port_free(host: str, port: int) -> None:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((host, port))
        except OSError as exc:
            raise PortInUse(f"{host}:{port} is already bound: {exc}") from exc


def serve(config: ServiceConfig) -> None:
    """Run the service until interrupted (blocking)."""
    import uvicorn

    _check_port_free(config.host, config.port)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
