"""Glue between the transports and the prediction engine.

One runtime owns: the session CSV logs, the OSC receiver/sender, the
engine plus its worker thread (absent in record-only sessions), and
the set of connected WebSocket clients.  OSC datagrams and WebSocket
frames funnel through the same parsing path, so both transports
produce identical control events.
"""

from __future__ import annotations

import asyncio
import json
import logging
import time
from pathlib import Path

from ..checkpoint import Checkpoint
from ..engine import EngineWorker,InteractionMode, PredictionEngine
from ..mixture import SamplingConfig
from ..wire import (
    INTERFACE_ADDRESS,
    PREDICTION_ADDRESS,
    OscReceiver,
    OscSender,
    SessionLogs,
    WireConfig,
    make_control_event,
)

log = logging.getLogger(__name__)


class ServerRuntime:
    def __init__(
        self,
        wire: WireConfig,
        dimension: int,
        checkpoint: Checkpoint | None = None,
        mode: InteractionMode = InteractionMode.NO_PREDICTIONS,
        sampling: SamplingConfig | None = None,
        response_timeout: float = 2.0,
        webpad_dir: str | Path | None = None,
    ):
        if checkpoint is not None and checkpoint.config.dimension != dimension:
            raise ValueError(
                f"checkpoint is {checkpoint.config.dimension}D but the session "
                f"was configured for {dimension}D"
            )
        self.wire = wire
        self.dimension = dimension
        self.checkpoint = checkpoint
        self.sampling = sampling or SamplingConfig()
        self.requested_mode = mode
        self.response_timeout = response_timeout
        self.webpad_dir = Path(webpad_dir) if webpad_dir else None
        self._start_mono = time.monotonic()
        self.engine: PredictionEngine | None = None
        self.worker: EngineWorker | None = None
        self.receiver: OscReceiver | None = None
        self.sender: OscSender | None = None
        self.logs: SessionLogs | None = None
        self._ws_queues: set[asyncio.Queue] = set()
        self._loop: asyncio.AbstractEventLoop | None = None
        self.rejected_messages = 0
        self._running = False

    # --------------------------------------------------------- lifecycle

    def clock(self) -> float:
        """Seconds since process start; timestamps events and log rows."""
        return time.monotonic() - self._start_mono

    def start(self, loop: asyncio.AbstractEventLoop | None = None) -> None:
        if self._running:
            return
        self._loop = loop
        self.logs = SessionLogs.open(self.wire.log_dir, n_values=self.dimension - 1)
        self.sender = OscSender(self.wire.osc_send_host, self.wire.osc_send_port)
        if self.checkpoint is not None:
            self.engine = PredictionEngine(
                weights=self.checkpoint.weights,
                cfg=self.checkpoint.config,
                sampling=self.sampling,
                mode=self.requested_mode,
                response_timeout=self.response_timeout,
                start_time=self.clock(),
            )
            self.worker = EngineWorker(self.engine, self._emit, clock=self.clock)
            self.worker.start()
        self.receiver = OscReceiver(
            self.wire.osc_listen_host, self.wire.osc_listen_port, self._on_osc
        )
        self.receiver.start()
        self._running = True
        log.info(
            "listening for OSC on %s:%d, sending to %s:%d, logging to %s",
            self.wire.osc_listen_host, self.receiver.port,
            self.wire.osc_send_host, self.wire.osc_send_port, self.logs.events.path,
        )

    def stop(self) -> dict:
        """Tear down transports; returns the per-prediction latency summary."""
        summary = {"count": 0}
        if not self._running:
            return summary
        self._running = False
        if self.receiver:
            self.receiver.stop()
        if self.worker:
            self.worker.stop()
        if self.engine:
            summary = self.engine.latency_summary()
        if self.sender:
            self.sender.close()
        if self.logs:
            self.logs.close()
        return summary

    # ----------------------------------------------------------- inbound

    def _on_osc(self, address: str, args: list) -> None:
        if address != INTERFACE_ADDRESS:
            log.debug("ignoring OSC address %s", address)
            return
        self.handle_interface(args)

    def handle_interface(self, args: list) -> bool:
        """Shared OSC/WebSocket entry for one control message."""
        event = make_control_event(args, self.dimension - 1, self.clock())
        if event is None:
            self.rejected_messages += 1
            return False
        self.logs.events.append(event.time, event.values)
        if self.engine is not None:
            self.engine.submit_event(event)
        return True

    def handle_ws_frame(self, frame: dict) -> None:
        address = frame.get("address")
        if address == INTERFACE_ADDRESS:
            self.handle_interface(frame.get("args", []))
        elif address == "/config":
            self.apply_config(
                mode=frame.get("mode"),
                pi_temperature=frame.get("pi_temp"),
                sigma_temperature=frame.get("sigma_temp"),
                response_timeout=frame.get("response_timeout"),
            )
        else:
            log.warning("dropping WebSocket frame with address %r", address)

    def apply_config(
        self,
        mode: str | InteractionMode | None = None,
        pi_temperature: float | None = None,
        sigma_temperature: float | None = None,
        response_timeout: float | None = None,
    ) -> None:
        """Stage config changes; the engine applies them at the next
        event/tick boundary."""
        if mode is not None:
            parsed = mode if isinstance(mode, InteractionMode) else InteractionMode.parse(mode)
            self.requested_mode = parsed
            if self.engine is not None:
                self.engine.request_mode(parsed)
        if pi_temperature is not None or sigma_temperature is not None:
            current = self.engine.session.sampling if self.engine else self.sampling
            self.sampling = SamplingConfig(
                pi_temperature=(
                    pi_temperature if pi_temperature is not None else current.pi_temperature
                ),
                sigma_temperature=(
                    sigma_temperature
                    if sigma_temperature is not None
                    else current.sigma_temperature
                ),
                rng_seed=current.rng_seed,
            )
            if self.engine is not None:
                self.engine.request_sampling(pi_temperature, sigma_temperature)
        if response_timeout is not None:
            self.response_timeout = float(response_timeout)
            if self.engine is not None:
                self.engine.request_timeout(response_timeout)

    def reset_model_state(self) -> None:
        if self.engine is not None:
            self.engine.request_reset()

    # ---------------------------------------------------------- outbound

    def _emit(self, emission) -> None:
        """Engine sink: OSC out, prediction log, WebSocket fan-out."""
        self.sender.send(PREDICTION_ADDRESS, emission.values)
        self.logs.predictions.append(emission.at, emission.values)
        if self._loop is not None and self._ws_queues:
            frame = json.dumps(
                {"address": PREDICTION_ADDRESS, "args": [float(v) for v in emission.values]}
            )
            for queue in list(self._ws_queues):
                self._loop.call_soon_threadsafe(_put_dropping, queue, frame)

    def register_ws(self) -> asyncio.Queue:
        queue: asyncio.Queue = asyncio.Queue(maxsize=256)
        self._ws_queues.add(queue)
        return queue

    def unregister_ws(self, queue: asyncio.Queue) -> None:
        self._ws_queues.discard(queue)

    # ------------------------------------------------------------ status

    def current_mode(self) -> InteractionMode:
        if self.engine is not None:
            return self.engine.session.mode
        return InteractionMode.NO_PREDICTIONS

    def current_sampling(self) -> SamplingConfig:
        if self.engine is not None:
            return self.engine.session.sampling
        return self.sampling

    def current_timeout(self) -> float:
        if self.engine is not None:
            return self.engine.session.response_timeout
        return self.response_timeout

    def counters(self) -> dict:
        out = {
            "events_received": 0,
            "events_processed": 0,
            "predictions_emitted": 0,
            "events_dropped": 0,
            "osc_sent": self.sender.sent if self.sender else 0,
            "osc_send_errors": self.sender.errors if self.sender else 0,
            "ws_clients": len(self._ws_queues),
        }
        if self.engine is not None:
            out.update(self.engine.counters.snapshot())
            out["events_dropped"] = self.engine.queue.dropped
        elif self.logs is not None:
            out["events_received"] = self.logs.events.rows
        return out

    def status(self) -> dict:
        sampling = self.current_sampling()
        info = {
            "dimension": self.dimension,
            "model_loaded": self.engine is not None,
            "mode": self.current_mode().value,
            "pi_temperature": sampling.pi_temperature,
            "sigma_temperature": sampling.sigma_temperature,
            "response_timeout": self.current_timeout(),
            "uptime_seconds": self.clock(),
            "counters": self.counters(),
        }
        if self.checkpoint is not None:
            cfg = self.checkpoint.config
            info.update(units=cfg.units, layers=cfg.layers, mixtures=cfg.mixtures)
        return info


def _put_dropping(queue: asyncio.Queue, item) -> None:
    """Best-effort enqueue: a stalled client loses frames, not the server."""
    try:
        queue.put_nowait(item)
    except asyncio.QueueFull:
        pass
