"""FastAPI application: REST control surface plus the WebSocket gateway.

The WebSocket speaks the same JSON frames in both directions:

    inbound   {"address": "/interface", "args": [x1, ...]}
    inbound   {"address": "/config", "mode": ..., "pi_temp": ..., "sigma_temp": ...}
    outbound  {"address": "/prediction", "args": [x1, ...]}

Malformed frames are dropped with a warning; predictions fan out to
every connected client.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import logging

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse
from fastapi.staticfiles import StaticFiles

from .runtime import ServerRuntime
from .schemas import ConfigState, ConfigUpdate, Counters, ResetResponse, StatusResponse

log = logging.getLogger(__name__)

_PLACEHOLDER = """<!doctype html>
<html><head><title>antiphon</title></head>
<body style="font-family: sans-serif">
<h1>antiphon prediction server</h1>
<p>The server is running. The touch surface has not been built;
see <code>frontend/README.md</code> for build steps, or talk to the
server over OSC (<code>/interface</code> in, <code>/prediction</code> out)
or the WebSocket at <code>/ws</code>.</p>
</body></html>"""


def build_app(runtime: ServerRuntime) -> FastAPI:
    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        runtime.start(loop=asyncio.get_running_loop())
        try:
            yield
        finally:
            summary = runtime.stop()
            if summary.get("count"):
                log.info(
                    "served %d predictions, mean latency %.3f ms (p99 %.3f ms)",
                    summary["count"], summary["mean_ms"], summary["p99_ms"],
                )

    app = FastAPI(title="antiphon", version="0.1.0", lifespan=lifespan)
    app.state.runtime = runtime

    @app.get("/api/status", response_model=StatusResponse)
    def status() -> StatusResponse:
        info = runtime.status()
        info["counters"] = Counters(**info["counters"])
        return StatusResponse(**info)

    @app.get("/api/config", response_model=ConfigState)
    def get_config() -> ConfigState:
        return _config_state(runtime)

    @app.post("/api/config", response_model=ConfigState)
    def set_config(update: ConfigUpdate) -> ConfigState:
        runtime.apply_config(
            mode=update.mode,
            pi_temperature=update.pi_temperature,
            sigma_temperature=update.sigma_temperature,
            response_timeout=update.response_timeout,
        )
        return _config_state(runtime, requested=update)

    @app.post("/api/reset", response_model=ResetResponse)
    def reset() -> ResetResponse:
        runtime.reset_model_state()
        return ResetResponse()

    @app.websocket("/ws")
    async def gateway(websocket: WebSocket) -> None:
        await websocket.accept()
        queue = runtime.register_ws()

        async def pump_outbound() -> None:
            while True:
                frame = await queue.get()
                await websocket.send_text(frame)

        pump = asyncio.create_task(pump_outbound())
        try:
            while True:
                text = await websocket.receive_text()
                try:
                    frame = json.loads(text)
                    if not isinstance(frame, dict):
                        raise ValueError("frame must be a JSON object")
                except ValueError as exc:
                    log.warning("dropping malformed WebSocket frame: %s", exc)
                    continue
                runtime.handle_ws_frame(frame)
        except WebSocketDisconnect:
            pass
        finally:
            pump.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await pump
            runtime.unregister_ws(queue)

    webpad = runtime.webpad_dir
    if webpad and (webpad / "index.html").is_file():
        app.mount("/", StaticFiles(directory=webpad, html=True), name="webpad")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index() -> str:
            return _PLACEHOLDER

    return app


def _config_state(runtime: ServerRuntime, requested: ConfigUpdate | None = None) -> ConfigState:
    # immediately after a POST the engine may not have crossed a tick
    # boundary yet; report the requested values so the reply reflects
    # what was accepted
    sampling = runtime.current_sampling()
    state = ConfigState(
        mode=runtime.current_mode().value,
        pi_temperature=sampling.pi_temperature,
        sigma_temperature=sampling.sigma_temperature,
        response_timeout=runtime.current_timeout(),
    )
    if requested is not None:
        if requested.mode is not None and runtime.engine is not None:
            state.mode = requested.mode
        if requested.pi_temperature is not None:
            state.pi_temperature = requested.pi_temperature
        if requested.sigma_temperature is not None:
            state.sigma_temperature = requested.sigma_temperature
        if requested.response_timeout is not None:
            state.response_timeout = requested.response_timeout
    return state
