"""Operator command line: record, train, run, benchmark.

The CLI parses flags, merges them with the optional TOML config file,
and drives the package; the long-running subcommands hand off to the
FastAPI service.  Exit codes: 0 success, 1 usage error, 2 data error,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import socket
import sys
from pathlib import Path

from .benchmark import run_grid, write_benchmark_csv
from .checkpoint import load_checkpoint, save_checkpoint
from .config import Settings, load_config
from .dataset import load_dataset
from .engine import InteractionMode
from .errors import CheckpointError, DataError, TrainingDiverged
from .mixture import SamplingConfig
from .network import SIZE_PRESETS, ModelConfig, param_count
from .training import TrainRun, size_comparison_report, train, write_history_csv
from .wire import WireConfig

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliUsageError(f"{self.prog}: error: {message}")


class CliUsageError(Exception):
    pass


def _mode_arg(text: str) -> InteractionMode:
    try:
        return InteractionMode.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in str(text).split(",") if part != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _dim_range(text: str) -> list[int]:
    text = str(text)
    try:
        if "-" in text:
            lo, hi = text.split("-", 1)
            return list(range(int(lo), int(hi) + 1))
        return _int_list(text)
    except (ValueError, argparse.ArgumentTypeError):
        raise argparse.ArgumentTypeError(
            f"expected a range like 2-9 or a comma list, got {text!r}"
        )


def build_parser() -> Parser:
    parser = Parser(prog="antiphon", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="TOML config file; flags override it")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add_wire_flags(p):
        p.add_argument("--osc-listen-host")
        p.add_argument("--osc-listen-port", type=int)
        p.add_argument("--osc-send-host")
        p.add_argument("--osc-send-port", type=int)
        p.add_argument("--http-port", type=int)
        p.add_argument("--log-dir")
        p.add_argument("--webpad-dir")

    rec = sub.add_parser("record", help="log incoming control events, no model")
    rec.add_argument("--dimension", type=int, help="model dimension (dt + values)")
    add_wire_flags(rec)

    tr = sub.add_parser("train", help="train a model from logged sessions")
    tr.add_argument("--data-dir", help="directory of session CSV logs")
    tr.add_argument("--dimension", type=int)
    tr.add_argument("--size", choices=sorted(SIZE_PRESETS), help="preset width")
    tr.add_argument("--units", type=int, help="custom LSTM width (overrides --size)")
    tr.add_argument("--layers", type=int)
    tr.add_argument("--mixtures", type=int)
    tr.add_argument("--seq-len", type=int)
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--batch-size", type=int)
    tr.add_argument("--learning-rate", type=float)
    tr.add_argument("--validation-fraction", type=float)
    tr.add_argument("--patience", type=int, help="early-stop patience in epochs; 0 disables")
    tr.add_argument("--seed", type=int)
    tr.add_argument("--out", help="checkpoint output path")
    tr.add_argument("--history-out", help="loss history CSV path")
    tr.add_argument(
        "--compare-sizes", type=_int_list, metavar="UNITS,UNITS",
        help="instead of one run, train each width and print an overfitting report",
    )

    rn = sub.add_parser("run", help="serve live predictions from a checkpoint")
    rn.add_argument("--checkpoint", help="checkpoint file from `antiphon train`")
    rn.add_argument("--mode", type=_mode_arg,
                    help="nopredictions | filter | callresponse | battle")
    rn.add_argument("--pi-temp", type=float)
    rn.add_argument("--sigma-temp", type=float)
    rn.add_argument("--response-timeout", type=float)
    rn.add_argument("--rng-seed", type=int)
    add_wire_flags(rn)

    bm = sub.add_parser("benchmark", help="time forward_step+sample over a model grid")
    bm.add_argument("--dimensions", type=_dim_range, metavar="LO-HI")
    bm.add_argument("--units", type=_int_list, metavar="U,U,...")
    bm.add_argument("--repeats", type=int)
    bm.add_argument("--out", help="CSV output path")
    return parser


# ----------------------------------------------------------- subcommands


def _wire_from(args, wire_cfg: Settings) -> WireConfig:
    return WireConfig(
        osc_listen_host=wire_cfg.get("osc_listen_host", args.osc_listen_host, "127.0.0.1"),
        osc_listen_port=int(wire_cfg.get("osc_listen_port", args.osc_listen_port, 5001)),
        osc_send_host=wire_cfg.get("osc_send_host", args.osc_send_host, "127.0.0.1"),
        osc_send_port=int(wire_cfg.get("osc_send_port", args.osc_send_port, 5002)),
        http_port=int(wire_cfg.get("http_port", args.http_port, 8765)),
        log_dir=wire_cfg.get("log_dir", args.log_dir, "logs"),
    )


def _check_ports_free(wire: WireConfig) -> None:
    udp = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    tcp = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    tcp.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        udp.bind((wire.osc_listen_host, wire.osc_listen_port))
        tcp.bind(("0.0.0.0", wire.http_port))
    except OSError as exc:
        raise RuntimeError(f"port unavailable: {exc}") from exc
    finally:
        udp.close()
        tcp.close()


def _serve(runtime, wire: WireConfig) -> int:
    import uvicorn

    from .service import build_app

    _check_ports_free(wire)
    app = build_app(runtime)
    print(f"HTTP/WebSocket on http://127.0.0.1:{wire.http_port}  "
          f"OSC in :{wire.osc_listen_port}  OSC out {wire.osc_send_host}:{wire.osc_send_port}")
    uvicorn.run(app, host="0.0.0.0", port=wire.http_port, log_level="warning")
    if runtime.engine is not None:
        summary = runtime.engine.latency_summary()
        if summary["count"]:
            print(
                f"served {summary['count']} predictions: "
                f"mean {summary['mean_ms']:.3f} ms, p99 {summary['p99_ms']:.3f} ms, "
                f"max {summary['max_ms']:.3f} ms"
            )
    if runtime.logs is not None:
        print(f"session log: {runtime.logs.events.path}")
    return EXIT_OK


def cmd_record(args, config) -> int:
    from .service import ServerRuntime

    model_cfg = Settings(config["model"])
    dimension = model_cfg.get("dimension", args.dimension)
    if dimension is None:
        raise CliUsageError("record: --dimension is required (or set model.dimension)")
    wire = _wire_from(args, Settings(config["wire"]))
    webpad = Settings(config["wire"]).get("webpad_dir", args.webpad_dir, "frontend/dist")
    runtime = ServerRuntime(wire=wire, dimension=int(dimension), webpad_dir=webpad)
    return _serve(runtime, wire)


def _model_config(args, config) -> ModelConfig:
    model_cfg = Settings(config["model"])
    dimension = model_cfg.get("dimension", args.dimension)
    if dimension is None:
        raise CliUsageError("train: --dimension is required (or set model.dimension)")
    # width precedence: --units, --size, file units, file size, preset s
    section = config["model"]
    if args.units is not None:
        units = args.units
    elif args.size is not None:
        units = SIZE_PRESETS[args.size]
    elif "units" in section:
        units = section["units"]
    elif "size" in section:
        units = SIZE_PRESETS[section["size"]]
    else:
        units = SIZE_PRESETS["s"]
    return ModelConfig(
        dimension=int(dimension),
        units=int(units),
        layers=int(model_cfg.get("layers", args.layers, 2)),
        mixtures=int(model_cfg.get("mixtures", args.mixtures, 5)),
        seq_len=int(model_cfg.get("seq_len", args.seq_len, 50)),
    )


def cmd_train(args, config) -> int:
    training_cfg = Settings(config["training"])
    data_dir = training_cfg.get("data_dir", args.data_dir)
    if data_dir is None:
        raise CliUsageError("train: --data-dir is required (or set training.data_dir)")
    cfg = _model_config(args, config)
    patience = training_cfg.get("early_stop_patience", args.patience, 10)
    run = TrainRun(
        epochs=int(training_cfg.get("epochs", args.epochs, 100)),
        batch_size=int(training_cfg.get("batch_size", args.batch_size, 64)),
        learning_rate=float(training_cfg.get("learning_rate", args.learning_rate, 1e-4)),
        validation_fraction=float(
            training_cfg.get("validation_fraction", args.validation_fraction, 0.10)
        ),
        early_stop_patience=int(patience) or None,
        seed=int(training_cfg.get("seed", args.seed, 0)),
    )
    dataset = load_dataset(data_dir, cfg.dimension)
    print(
        f"{cfg.dimension}D model, {cfg.units} units x {cfg.layers} layers, "
        f"{cfg.mixtures} mixtures: {param_count(cfg):,} parameters; "
        f"{dataset.total_samples():,} samples in {len(dataset.sessions)} sessions"
    )

    if args.compare_sizes:
        report = size_comparison_report(
            dataset, cfg.dimension, unit_sizes=tuple(args.compare_sizes),
            epochs=run.epochs, run=run, seq_len=cfg.seq_len,
        )
        print(report)
        return EXIT_OK

    result = train(dataset, cfg, run)
    out = Path(training_cfg.get("checkpoint_out", args.out, "model.ckpt"))
    history_out = Path(training_cfg.get("history_out", args.history_out, "history.csv"))
    save_checkpoint(out, result.checkpoint)
    write_history_csv(history_out, result.history)
    last = result.history[-1]
    print(
        f"{'stopped early' if result.stopped_early else 'finished'} after "
        f"{last.epoch} epochs: train {last.train_loss:.4f}, val {last.val_loss:.4f} "
        f"(best val {result.checkpoint.metadata['best_val_loss']})"
    )
    print(f"checkpoint: {out}\nhistory: {history_out}")
    return EXIT_OK


def cmd_run(args, config) -> int:
    from .service import ServerRuntime

    session_cfg = Settings(config["session"])
    sampling_cfg = Settings(config["sampling"])
    ckpt_path = session_cfg.get("checkpoint", args.checkpoint)
    if ckpt_path is None:
        raise CliUsageError("run: --checkpoint is required (or set session.checkpoint)")
    checkpoint = load_checkpoint(ckpt_path)
    mode = session_cfg.get("mode", args.mode, InteractionMode.NO_PREDICTIONS)
    if not isinstance(mode, InteractionMode):
        mode = InteractionMode.parse(str(mode))
    sampling = SamplingConfig(
        pi_temperature=float(sampling_cfg.get("pi_temperature", args.pi_temp, 1.0)),
        sigma_temperature=float(sampling_cfg.get("sigma_temperature", args.sigma_temp, 1.0)),
        rng_seed=sampling_cfg.get("rng_seed", args.rng_seed),
    )
    wire = _wire_from(args, Settings(config["wire"]))
    webpad = Settings(config["wire"]).get("webpad_dir", args.webpad_dir, "frontend/dist")
    runtime = ServerRuntime(
        wire=wire,
        dimension=checkpoint.config.dimension,
        checkpoint=checkpoint,
        mode=mode,
        sampling=sampling,
        response_timeout=float(session_cfg.get("response_timeout", args.response_timeout, 2.0)),
        webpad_dir=webpad,
    )
    print(
        f"loaded {checkpoint.config.dimension}D checkpoint "
        f"({checkpoint.config.units} units, {param_count(checkpoint.config):,} parameters), "
        f"mode {mode.value}"
    )
    return _serve(runtime, wire)


def cmd_benchmark(args, config) -> int:
    bench_cfg = Settings(config["benchmark"])
    dimensions = bench_cfg.get("dimensions", args.dimensions)
    if dimensions is None:
        dimensions = list(range(2, 10))
    elif isinstance(dimensions, str):
        dimensions = _dim_range(dimensions)
    units = bench_cfg.get("units", args.units, [64, 128, 256, 512])
    if isinstance(units, str):
        units = _int_list(units)
    repeats = int(bench_cfg.get("repeats", args.repeats, 100))
    out = bench_cfg.get("out", args.out, "benchmark.csv")
    print(f"units x dimensions grid, {repeats} repeats each (first discarded)")
    rows = run_grid(
        dimensions=dimensions, unit_sizes=units, repeats=repeats,
        progress=lambda r: print(
            f"  units={r.units:<4d} dim={r.dimension}: {r.mean_ms:.3f} ms (sd {r.sd_ms:.3f})"
        ),
    )
    write_benchmark_csv(out, rows)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliUsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    handlers = {
        "record": cmd_record,
        "train": cmd_train,
        "run": cmd_run,
        "benchmark": cmd_benchmark,
    }
    try:
        config = load_config(args.config)
        return handlers[args.command](args, config)
    except CliUsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CheckpointError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        return EXIT_OK
    except (RuntimeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
