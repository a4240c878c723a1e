"""Client for the potacc service.

The CLI talks to the service through this class. Without a server URL the
handler functions run in-process (same request/response models, no
sockets); with one, the same payloads go over HTTP.
"""

from __future__ import annotations

import httpx

from .errors import InvalidInput
from .service import schemas
from .service.app import do_bench, do_pe_check, do_quantize, do_run_model


class ServiceClient:
    def __init__(self, base_url: str | None = None, timeout: float = 300.0):
        self.base_url = base_url.rstrip("/") if base_url else None
        self.timeout = timeout

    def _post(self, path: str, payload: dict) -> dict:
        try:
            resp = httpx.post(f"{self.base_url}{path}", json=payload, timeout=self.timeout)
        except httpx.HTTPError as exc:
            raise ConnectionError(f"cannot reach potacc server at {self.base_url}: {exc}")
        if resp.status_code == 404:
            raise FileNotFoundError(resp.json().get("detail", "not found"))
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            raise InvalidInput(f"server rejected request: {detail}")
        return resp.json()

    def quantize(self, req: schemas.QuantizeRequest) -> schemas.QuantizeResponse:
        if self.base_url is None:
            return do_quantize(req)
        return schemas.QuantizeResponse(**self._post("/quantize", req.model_dump()))

    def pe_check(self, req: schemas.PECheckRequest) -> schemas.PECheckResponse:
        if self.base_url is None:
            return do_pe_check(req)
        return schemas.PECheckResponse(**self._post("/pe-check", req.model_dump()))

    def bench(self, req: schemas.BenchRequest) -> schemas.BenchResponse:
        if self.base_url is None:
            return do_bench(req)
        return schemas.BenchResponse(**self._post("/bench", req.model_dump()))

    def run_model(self, req: schemas.RunModelRequest) -> schemas.RunModelResponse:
        if self.base_url is None:
            return do_run_model(req)
        return schemas.RunModelResponse(**self._post("/run-model", req.model_dump()))
