"""HTTP inference service for interactive mask-based editing.

JSON envelope with base64 PNG payloads. Known pixels in the response are
byte-identical to the request image after one decode/encode round trip; when
an image exceeds the serving resolution it is downscaled for the generator and
the composition is re-applied at native resolution, so the guarantee holds at
any size.
"""

from __future__ import annotations

import base64
import binascii
import io
import logging
import threading
import time

import numpy as np
import torch
import torch.nn.functional as F
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field
from PIL import Image

from .generator import compose
from .trainer import load_generator

log = logging.getLogger("aotinpaint.service")


class InpaintOptions(BaseModel):
    max_side: int | None = Field(default=None, ge=32)


class InpaintRequest(BaseModel):
    image: str
    mask: str
    options: InpaintOptions = Field(default_factory=InpaintOptions)


class InpaintResponse(BaseModel):
    result: str
    timing_ms: float
    model_fingerprint: str
    hole_ratio: float
    scaled_for_inference: bool


class ModelBundle:
    def __init__(self, path):
        self.gen, self.config, self.fingerprint = load_generator(path)


def _bad_request(reason: str):
    return HTTPException(status_code=400, detail={"reason": reason})


def _decode_png(b64: str, reason: str) -> Image.Image:
    try:
        raw = base64.b64decode(b64, validate=True)
        img = Image.open(io.BytesIO(raw))
        img.load()
        return img
    except (binascii.Error, OSError, ValueError):
        raise _bad_request(reason) from None


def _encode_png(arr: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _pad_to_multiple(x: torch.Tensor, multiple: int) -> tuple[torch.Tensor, int, int]:
    """Replicate-pad bottom/right so H and W divide `multiple`; returns original dims."""
    h, w = x.shape[-2:]
    pad_h = (-h) % multiple
    pad_w = (-w) % multiple
    if pad_h or pad_w:
        x = F.pad(x, (0, pad_w, 0, pad_h), mode="replicate")
    return x, h, w


def create_app(
    checkpoint: str | None = None,
    max_inflight: int = 4,
    payload_limit_mb: int = 16,
    default_max_side: int = 512,
) -> FastAPI:
    app = FastAPI(title="aotinpaint")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.bundle = None
    app.state.swap_lock = threading.Lock()
    app.state.inflight = threading.BoundedSemaphore(max(max_inflight, 1))
    app.state.reject_all = max_inflight <= 0
    app.state.payload_limit = payload_limit_mb * 1024 * 1024
    app.state.default_max_side = default_max_side

    def load_model(path) -> None:
        bundle = ModelBundle(path)
        with app.state.swap_lock:
            app.state.bundle = bundle

    app.state.load_model = load_model
    if checkpoint is not None:
        load_model(checkpoint)

    def _current_bundle() -> ModelBundle:
        bundle = app.state.bundle
        if bundle is None:
            raise HTTPException(status_code=503, detail={"reason": "model_not_loaded"})
        return bundle

    @app.get("/api/v1/model")
    def model_info():
        bundle = _current_bundle()
        gen_cfg = bundle.config.generator
        return {
            "fingerprint": bundle.fingerprint,
            "blocks": gen_cfg.num_blocks,
            "rates": list(gen_cfg.block.rates),
            "width": gen_cfg.base_width,
            "residual_mode": gen_cfg.block.residual_mode,
            "max_side": app.state.default_max_side,
            "trained_image_size": bundle.config.image_size,
        }

    @app.post("/api/v1/inpaint", response_model=InpaintResponse)
    def do_inpaint(req: InpaintRequest):
        if len(req.image) + len(req.mask) > app.state.payload_limit * 4 // 3 + 8:
            raise HTTPException(status_code=413, detail={"reason": "payload_too_large"})
        if app.state.reject_all or not app.state.inflight.acquire(blocking=False):
            raise HTTPException(status_code=429, detail={"reason": "too_many_requests"})
        try:
            return _handle_inpaint(req)
        finally:
            if not app.state.reject_all:
                app.state.inflight.release()

    def _handle_inpaint(req: InpaintRequest) -> InpaintResponse:
        bundle = _current_bundle()
        t0 = time.perf_counter()
        img = _decode_png(req.image, "malformed_image").convert("RGB")
        mask_img = _decode_png(req.mask, "malformed_mask").convert("L")
        if img.size != mask_img.size:
            raise _bad_request("shape_mismatch")
        mask_arr = np.asarray(mask_img)
        if not np.isin(mask_arr, (0, 255)).all():
            raise _bad_request("mask_not_binary")

        x = torch.from_numpy(np.asarray(img, dtype=np.float32)).permute(2, 0, 1)
        x = (x / 255.0 * 2.0 - 1.0).unsqueeze(0)
        m = torch.from_numpy((mask_arr == 255).astype(np.float32)).unsqueeze(0).unsqueeze(0)
        hole_ratio = float(m.mean())

        max_side = req.options.max_side or app.state.default_max_side
        h, w = x.shape[-2:]
        scaled = max(h, w) > max_side
        with torch.no_grad():
            if scaled:
                scale = max_side / max(h, w)
                sh, sw = max(32, int(h * scale)), max(32, int(w * scale))
                xs = F.interpolate(x, size=(sh, sw), mode="bilinear", align_corners=False)
                ms = F.interpolate(m, size=(sh, sw), mode="nearest")
                xs_p, oh, ow = _pad_to_multiple(xs, 4)
                ms_p, _, _ = _pad_to_multiple(ms, 4)
                out_small = bundle.gen(xs_p * (1.0 - ms_p), ms_p)[:, :, :oh, :ow]
                out = F.interpolate(out_small, size=(h, w), mode="bilinear", align_corners=False)
            else:
                x_p, oh, ow = _pad_to_multiple(x, 4)
                m_p, _, _ = _pad_to_multiple(m, 4)
                out = bundle.gen(x_p * (1.0 - m_p), m_p)[:, :, :oh, :ow]
            z = compose(x, out.clamp(-1.0, 1.0), m)

        result = ((z[0].permute(1, 2, 0) + 1.0) * 0.5 * 255.0).round().to(torch.uint8).numpy()
        timing_ms = (time.perf_counter() - t0) * 1000.0
        log.info(
            "inpaint fingerprint=%s size=%dx%d hole_ratio=%.4f timing_ms=%.1f scaled=%s",
            bundle.fingerprint, w, h, hole_ratio, timing_ms, scaled,
        )
        return InpaintResponse(
            result=_encode_png(result),
            timing_ms=timing_ms,
            model_fingerprint=bundle.fingerprint,
            hole_ratio=hole_ratio,
            scaled_for_inference=scaled,
        )

    return app


def run_server(checkpoint, port: int, max_inflight: int, payload_limit_mb: int, max_side: int):
    import uvicorn

    app = create_app(checkpoint, max_inflight, payload_limit_mb, max_side)
    uvicorn.run(app, host="0.0.0.0", port=port, log_level="info")
