"""FastAPI application implementing the generation wire protocol.

POST /generate takes {"instances": [{"id", "input"}], "parameters":
{"max_new_tokens", "greedy"}} and answers in request order; GET /health
reports the served model. Errors: 400 malformed, 413 oversized input, 503
while the checkpoint is still loading.
"""

from __future__ import annotations

import threading
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .adapters import Adapter, load_adapter
from .config import ServerConfig


class Instance(BaseModel):
    id: str
    input: str


class Parameters(BaseModel):
    max_new_tokens: int = Field(default=64, ge=1)
    greedy: bool = True


class GenerateRequest(BaseModel):
    instances: list[Instance]
    parameters: Parameters = Parameters()


class AdapterState:
    """Holds the adapter, loading it in the background so /health can 503."""

    def __init__(self, config: ServerConfig, adapter: Adapter | None = None):
        self.config = config
        self.adapter = adapter
        self.error: str | None = None
        self._lock = threading.Lock()

    def start_loading(self) -> None:
        if self.adapter is not None:
            return
        threading.Thread(target=self._load, daemon=True).start()

    def _load(self) -> None:
        try:
            adapter = load_adapter(self.config)
        except Exception as exc:  # pragma: no cover - checkpoint problems
            self.error = str(exc)
            return
        with self._lock:
            self.adapter = adapter

    @property
    def ready(self) -> bool:
        return self.adapter is not None


def create_app(config: ServerConfig, adapter: Adapter | None = None) -> FastAPI:
    state = AdapterState(config, adapter)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        state.start_loading()
        yield

    app = FastAPI(title="qa-modelserver", lifespan=lifespan)
    app.state.adapter_state = state

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "malformed request body"})

    @app.get("/health")
    def health():
        if state.error:
            return JSONResponse(status_code=500, content={"status": "error", "error": state.error})
        if not state.ready:
            return JSONResponse(status_code=503, content={"status": "loading", "model": config.model})
        return {"status": "ok", "model": state.adapter.model_id}

    @app.post("/generate")
    def generate(request: GenerateRequest):
        if not state.ready:
            return JSONResponse(status_code=503, content={"error": "model loading"})
        if not request.parameters.greedy:
            return JSONResponse(status_code=400, content={"error": "only greedy decoding is supported"})
        if not request.instances:
            return JSONResponse(status_code=400, content={"error": "empty instance list"})
        oversized = [i.id for i in request.instances if len(i.input) > config.max_input_chars]
        if oversized:
            return JSONResponse(
                status_code=413,
                content={"error": "input too long", "ids": oversized, "max_chars": config.max_input_chars},
            )
        max_new = min(request.parameters.max_new_tokens, config.max_new_tokens)
        answers: list[str] = []
        for start in range(0, len(request.instances), config.batch_size):
            batch = request.instances[start : start + config.batch_size]
            answers.extend(state.adapter.generate_greedy([i.input for i in batch], max_new))
        return {
            "predictions": [
                {"id": inst.id, "answer": answer}
                for inst, answer in zip(request.instances, answers)
            ]
        }

    return app
