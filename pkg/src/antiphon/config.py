"""Config-file support.

Every CLI flag has a config-file equivalent; a flag given on the
command line overrides the file.  The file is TOML with one section per
concern:

    [model]     dimension, size or units, layers, mixtures, seq_len
    [wire]      osc_listen_host/port, osc_send_host/port, http_port,
                log_dir, webpad_dir
    [sampling]  pi_temperature, sigma_temperature, rng_seed
    [training]  data_dir, epochs, batch_size, learning_rate,
                validation_fraction, early_stop_patience, seed,
                checkpoint_out, history_out
    [session]   mode, checkpoint, response_timeout
    [benchmark] dimensions, units, repeats, out
"""

from __future__ import annotations

from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import DataError

SECTIONS = ("model", "wire", "sampling", "training", "session", "benchmark")


def load_config(path: str | Path | None) -> dict:
    """Returns {section: {key: value}} with every section present."""
    data: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise DataError(f"config file not found: {path}")
        try:
            with path.open("rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise DataError(f"{path}: invalid TOML ({exc})") from exc
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise DataError(
                f"{path}: unknown sections {sorted(unknown)}; expected {list(SECTIONS)}"
            )
    return {section: dict(data.get(section, {})) for section in SECTIONS}


class Settings:
    """Flag-over-file-over-default resolution for one section."""

    def __init__(self, section: dict):
        self._section = section

    def get(self, key: str, flag_value, default=None):
        if flag_value is not None:
            return flag_value
        if key in self._section:
            return self._section[key]
        return default
