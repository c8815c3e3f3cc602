"""Live interaction engine.

Conditions the recurrent model on incoming control events and emits
predictions according to the active interaction mode:

* ``nopredictions``: events update the model memory, output is ignored.
* ``filter``: every event also produces one prediction, emitted
  immediately.
* ``callresponse``: events condition the model; after the performer
  goes quiet for ``response_timeout`` seconds the engine generates its
  own control stream until they play again.
* ``battle``: the engine generates continuously regardless of input;
  user events are logged upstream but do not condition the model.

Generated predictions are self-conditioned: each emitted sample is fed
back as the next model input, and the next emission is scheduled its
sampled dt after the previous one.  Exactly one generated prediction is
pending at any time.

Threading contract: any thread may call ``submit_event`` and the
``request_*`` methods; exactly one worker calls ``process``, which owns
the weights reads and the recurrent state.  No lock is held while the
network computes.
"""

from __future__ import annotations

import enum
import threading
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .dataset import DT_CAP, DT_MIN
from .errors import ShapeMismatchError
from .mixture import SamplingConfig, sample
from .network import ModelConfig, RecurrentState, Weights, forward_step


class InteractionMode(str, enum.Enum):
    NO_PREDICTIONS = "nopredictions"
    FILTER = "filter"
    CALL_RESPONSE = "callresponse"
    BATTLE = "battle"

    @classmethod
    def parse(cls, text: str) -> "InteractionMode":
        try:
            return cls(text.strip().lower())
        except ValueError:
            options = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown mode {text!r}; choose one of: {options}") from None


@dataclass
class ControlEvent:
    """A timestamped vector of control values from an interface."""

    time: float
    values: np.ndarray


@dataclass
class Emission:
    """One outgoing prediction: N-1 control values due at ``at`` seconds."""

    at: float
    values: np.ndarray
    generated: bool  # False for filter-mode echoes


class BoundedEventQueue:
    """Thread-safe FIFO that drops its oldest entry when full."""

    def __init__(self, capacity: int = 64):
        self.capacity = capacity
        self._items: deque = deque()
        self._cond = threading.Condition()
        self.dropped = 0

    def put(self, item) -> None:
        with self._cond:
            if len(self._items) >= self.capacity:
                self._items.popleft()
                self.dropped += 1
            self._items.append(item)
            self._cond.notify()

    def drain(self) -> list:
        with self._cond:
            items = list(self._items)
            self._items.clear()
            return items

    def wait(self, timeout: float | None) -> None:
        """Block until an item arrives, a notify fires, or the timeout lapses."""
        with self._cond:
            if not self._items:
                self._cond.wait(timeout)

    def notify(self) -> None:
        with self._cond:
            self._cond.notify()

    def __len__(self) -> int:
        with self._cond:
            return len(self._items)


@dataclass
class SessionState:
    """Mutable per-session interaction state."""

    mode: InteractionMode
    sampling: SamplingConfig
    response_timeout: float = 2.0
    last_user_event_time: float = 0.0
    generator_active: bool = False
    pending: Emission | None = None


@dataclass
class EngineCounters:
    events_received: int = 0
    events_processed: int = 0
    predictions_emitted: int = 0

    def snapshot(self) -> dict:
        return {
            "events_received": self.events_received,
            "events_processed": self.events_processed,
            "predictions_emitted": self.predictions_emitted,
        }


class PredictionEngine:
    """Owns the model state and turns control events into predictions.

    ``process(now)`` is the single entry point for the worker loop; it
    applies queued control changes, drains user events, runs the
    call-and-response silence timer, and plays out due generator
    emissions.  All timing flows through the caller-supplied ``now`` so
    tests can drive a simulated clock.
    """

    def __init__(
        self,
        weights: Weights,
        cfg: ModelConfig,
        sampling: SamplingConfig | None = None,
        mode: InteractionMode = InteractionMode.NO_PREDICTIONS,
        response_timeout: float = 2.0,
        queue_capacity: int = 64,
        start_time: float = 0.0,
    ):
        self.weights = weights
        self.cfg = cfg
        sampling = sampling or SamplingConfig()
        self.session = SessionState(
            mode=mode,
            sampling=sampling,
            response_timeout=response_timeout,
            last_user_event_time=start_time,
        )
        self.state = RecurrentState(cfg, dtype=weights.head_kernel.dtype)
        self.queue = BoundedEventQueue(queue_capacity)
        self.counters = EngineCounters()
        self.latencies_ms: deque = deque(maxlen=4096)
        self._rng = sampling.make_rng()
        self._last_params = None
        self._last_step_time: float | None = None
        self._anchor = start_time
        self._control_lock = threading.Lock()
        self._pending_controls: dict = {}
        if mode is InteractionMode.BATTLE:
            self.session.generator_active = True

    # ---------------------------------------------------------- inputs

    def submit_event(self, event: ControlEvent) -> None:
        """Enqueue a user event from any thread."""
        if event.values.shape != (self.cfg.dimension - 1,):
            raise ShapeMismatchError(
                f"event carries {event.values.shape[0]} values, model wants "
                f"{self.cfg.dimension - 1}"
            )
        self.counters.events_received += 1
        self.queue.put(event)

    def request_mode(self, mode: InteractionMode) -> None:
        with self._control_lock:
            self._pending_controls["mode"] = mode
        self.queue.notify()

    def request_sampling(
        self, pi_temperature: float | None = None, sigma_temperature: float | None = None
    ) -> None:
        with self._control_lock:
            if pi_temperature is not None:
                self._pending_controls["pi_temperature"] = float(pi_temperature)
            if sigma_temperature is not None:
                self._pending_controls["sigma_temperature"] = float(sigma_temperature)
        self.queue.notify()

    def request_timeout(self, seconds: float) -> None:
        with self._control_lock:
            self._pending_controls["response_timeout"] = float(seconds)
        self.queue.notify()

    def request_reset(self) -> None:
        with self._control_lock:
            self._pending_controls["reset"] = True
        self.queue.notify()

    # ----------------------------------------------------- worker side

    def process(self, now: float) -> list[Emission]:
        """Advance the session to ``now``; returns emissions to send."""
        self._apply_controls(now)
        out: list[Emission] = []
        for event in self.queue.drain():
            emission = self._on_user_event(event, now)
            if emission is not None:
                out.append(emission)

        session = self.session
        if session.mode is InteractionMode.CALL_RESPONSE:
            self._check_timeout(now)

        if session.generator_active and session.pending is None:
            self._prime(self._anchor)
        while session.pending is not None and session.pending.at <= now:
            emission = session.pending
            session.pending = None
            out.append(emission)
            self.counters.predictions_emitted += 1
            self._feed_back(emission)
            self._prime(self._anchor)
        return out

    def next_wakeup(self, now: float) -> float | None:
        """Seconds until the worker next has scheduled work, or None."""
        session = self.session
        due: list[float] = []
        if session.pending is not None:
            due.append(session.pending.at - now)
        elif session.mode is InteractionMode.CALL_RESPONSE and not session.generator_active:
            due.append(session.last_user_event_time + session.response_timeout - now)
        if not due:
            return None
        return max(0.0, min(due))

    # -------------------------------------------------------- internals

    def _apply_controls(self, now: float) -> None:
        with self._control_lock:
            controls, self._pending_controls = self._pending_controls, {}
        if not controls:
            return
        session = self.session
        if controls.pop("reset", False):
            self.state.reset()
            self._last_params = None
            self._last_step_time = None
            session.pending = None
            self._anchor = now
        pi_t = controls.pop("pi_temperature", None)
        sigma_t = controls.pop("sigma_temperature", None)
        if pi_t is not None or sigma_t is not None:
            session.sampling = SamplingConfig(
                pi_temperature=pi_t if pi_t is not None else session.sampling.pi_temperature,
                sigma_temperature=(
                    sigma_t if sigma_t is not None else session.sampling.sigma_temperature
                ),
                rng_seed=session.sampling.rng_seed,
            )
        timeout = controls.pop("response_timeout", None)
        if timeout is not None:
            session.response_timeout = timeout
        mode = controls.pop("mode", None)
        if mode is not None and mode is not session.mode:
            session.mode = mode
            session.pending = None
            if mode in (InteractionMode.NO_PREDICTIONS, InteractionMode.FILTER):
                session.generator_active = False
            elif mode is InteractionMode.BATTLE:
                session.generator_active = True
                self._anchor = now
            else:  # call and response: silence timer restarts at mode entry
                session.generator_active = False
                session.last_user_event_time = now

    def _on_user_event(self, event: ControlEvent, now: float) -> Emission | None:
        session = self.session
        self.counters.events_processed += 1
        session.last_user_event_time = event.time
        mode = session.mode
        if mode is InteractionMode.BATTLE:
            # the generator plays on regardless; user input is not mixed
            # into its state
            return None
        if mode is InteractionMode.CALL_RESPONSE and session.generator_active:
            session.generator_active = False
            session.pending = None
        started = time.perf_counter()
        params = self._condition(event)
        if mode is InteractionMode.FILTER:
            drawn = sample(params, session.sampling, self._rng)
            self.latencies_ms.append((time.perf_counter() - started) * 1e3)
            return Emission(at=now, values=drawn.values, generated=False)
        return None

    def _condition(self, event: ControlEvent):
        if self._last_step_time is None:
            dt = DT_MIN
        else:
            dt = float(np.clip(event.time - self._last_step_time, DT_MIN, DT_CAP))
        vec = np.concatenate(([dt], event.values)).astype(self.weights.head_kernel.dtype)
        self._last_params = forward_step(vec, self.state, self.weights, self.cfg)
        self._last_step_time = event.time
        return self._last_params

    def _check_timeout(self, now: float) -> None:
        session = self.session
        if session.generator_active:
            return
        if now - session.last_user_event_time > session.response_timeout:
            session.generator_active = True
            self._anchor = now

    def _prime(self, base: float) -> None:
        """Sample the single in-flight generator prediction."""
        session = self.session
        if not session.generator_active or session.pending is not None:
            return
        started = time.perf_counter()
        if self._last_params is None:
            self._last_params = self._bootstrap_params()
        drawn = sample(self._last_params, session.sampling, self._rng)
        self.latencies_ms.append((time.perf_counter() - started) * 1e3)
        session.pending = Emission(at=base + drawn.dt, values=drawn.values, generated=True)

    def _feed_back(self, emission: Emission) -> None:
        """Feed an emitted prediction back as the model's own input."""
        dt = emission.at - self._anchor if self._last_step_time is not None else DT_MIN
        dt = float(np.clip(dt, DT_MIN, DT_CAP))
        vec = np.concatenate(([dt], emission.values)).astype(self.weights.head_kernel.dtype)
        self._last_params = forward_step(vec, self.state, self.weights, self.cfg)
        self._last_step_time = emission.at
        self._anchor = emission.at

    def _bootstrap_params(self):
        """First-ever prediction with no conditioning: start from a
        neutral mid-range vector."""
        vec = np.full(self.cfg.dimension, 0.5, dtype=self.weights.head_kernel.dtype)
        vec[0] = 0.05
        self._last_step_time = self._anchor
        return forward_step(vec, self.state, self.weights, self.cfg)

    def latency_summary(self) -> dict:
        if not self.latencies_ms:
            return {"count": 0}
        arr = np.asarray(self.latencies_ms)
        return {
            "count": int(arr.size),
            "mean_ms": float(arr.mean()),
            "max_ms": float(arr.max()),
            "p99_ms": float(np.percentile(arr, 99)),
        }


class EngineWorker(threading.Thread):
    """Runs the engine against a real clock and hands emissions to a sink.

    The sink callable receives each :class:`Emission`; it must be fast
    and non-blocking (the service layer fans out to OSC and WebSocket
    queues).
    """

    def __init__(self, engine: PredictionEngine, emit, clock=time.monotonic,
                 poll_interval: float = 0.05):
        super().__init__(name="antiphon-engine", daemon=True)
        self.engine = engine
        self.emit = emit
        self.clock = clock
        self.poll_interval = poll_interval
        self._stop_requested = threading.Event()

    def stop(self) -> None:
        self._stop_requested.set()
        self.engine.queue.notify()
        self.join(timeout=5)

    def run(self) -> None:
        while not self._stop_requested.is_set():
            for emission in self.engine.process(self.clock()):
                self.emit(emission)
            wakeup = self.engine.next_wakeup(self.clock())
            timeout = self.poll_interval if wakeup is None else min(wakeup, self.poll_interval)
            self.engine.queue.wait(timeout)
