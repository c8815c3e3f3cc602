"""End-to-end checks for the browser pad, run only when it is built.

`npm run build` under frontend/ produces frontend/dist; without it these
tests skip and the rest of the suite is unaffected.  The visual half of
the pad (colors, fading) stays a manual check; what is automated here is
the full frame path: static page served, touch frame in, prediction
frame back within the latency budget, and config frames reaching the
sampler.
"""

import json
import socket
import time
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from antiphon.checkpoint import Checkpoint
from antiphon.engine import InteractionMode
from antiphon.mixture import SamplingConfig
from antiphon.network import ModelConfig, init_weights
from antiphon.service import ServerRuntime, build_app
from antiphon.wire import WireConfig

DIST = Path(__file__).resolve().parent.parent / "frontend" / "dist"

pytestmark = pytest.mark.skipif(
    not (DIST / "index.html").is_file(),
    reason="webpad not built (run `npm run build` in frontend/)",
)


@pytest.fixture
def pad_service(tmp_path):
    # 4D model: dt, x, y, pressure
    cfg = ModelConfig(dimension=4, units=8, layers=1, mixtures=2, seq_len=5)
    weights = init_weights(cfg, np.random.default_rng(0))
    sink = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sink.bind(("127.0.0.1", 0))
    runtime = ServerRuntime(
        wire=WireConfig(
            osc_listen_port=0,
            osc_send_port=sink.getsockname()[1],
            log_dir=str(tmp_path),
        ),
        dimension=4,
        checkpoint=Checkpoint(config=cfg, weights=weights, metadata={}),
        mode=InteractionMode.FILTER,
        sampling=SamplingConfig(rng_seed=0),
        webpad_dir=DIST,
    )
    with TestClient(build_app(runtime)) as client:
        yield client, runtime
    sink.close()


def test_pad_page_served(pad_service):
    client, _ = pad_service
    page = client.get("/")
    assert page.status_code == 200
    assert "antiphon pad" in page.text
    assert 'src="./main.js"' in page.text
    assert client.get("/main.js").status_code == 200


def test_touch_to_rendered_prediction_frame_within_100ms(pad_service):
    client, _ = pad_service
    with client.websocket_connect("/ws") as ws:
        started = time.perf_counter()
        ws.send_text(json.dumps({"address": "/interface", "args": [0.5, 0.5, 0.6]}))
        frame = json.loads(ws.receive_text())
        elapsed = time.perf_counter() - started
    assert frame["address"] == "/prediction"
    assert len(frame["args"]) == 3  # x, y, pressure for the pad's marker
    assert elapsed < 0.100, f"prediction frame took {elapsed * 1e3:.1f} ms"


def test_slider_config_frames_change_sampler(pad_service):
    client, runtime = pad_service
    with client.websocket_connect("/ws") as ws:
        ws.send_text(
            json.dumps({"address": "/config", "pi_temp": 0.25, "sigma_temp": 0.0})
        )
        deadline = time.time() + 5
        while time.time() < deadline:
            sampling = runtime.current_sampling()
            if sampling.pi_temperature == 0.25 and sampling.sigma_temperature == 0.0:
                break
            time.sleep(0.01)
    sampling = runtime.current_sampling()
    assert sampling.pi_temperature == 0.25
    assert sampling.sigma_temperature == 0.0
