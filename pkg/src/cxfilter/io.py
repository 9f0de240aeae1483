"""WAV and JSON manifest helpers shared by scene and pipeline serialization.

Audio is stored as mono 32-bit float little-endian WAV.  Arrays are
float64 in memory; writing quantizes to float32, so one write/read trip
is exact at float32 precision and idempotent afterwards.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from scipy.io import wavfile


def write_wav(path, samples, sample_rate_hz: int) -> None:
    """Write a mono float32 WAV file."""
    data = np.asarray(samples, dtype=np.float32)
    if data.ndim != 1:
        raise ValueError("only mono signals are written")
    wavfile.write(str(path), int(sample_rate_hz), data)


def read_wav(path, expected_rate: int | None = None) -> np.ndarray:
    """Read a mono WAV file as float64 samples.

    Float formats are passed through; 16/32-bit PCM is rescaled to
    [-1, 1) so externally produced scenes are accepted.
    """
    rate, data = wavfile.read(str(path))
    if expected_rate is not None and rate != expected_rate:
        raise ValueError(f"{path}: sample rate {rate} != expected {expected_rate}")
    if data.ndim != 1:
        raise ValueError(f"{path}: expected mono audio, got shape {data.shape}")
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        return data.astype(np.float64) / 2147483648.0
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float64)
    raise ValueError(f"{path}: unsupported WAV sample format {data.dtype}")


def _encode_value(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            raise ValueError("NaN is not storable in a manifest")
    return v


def jsonify(obj):
    """Recursively make an object JSON-safe (inf -> 'inf' strings)."""
    if isinstance(obj, dict):
        return {k: jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonify(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return _encode_value(float(obj))
    return _encode_value(obj)


def parse_float(v) -> float:
    """Inverse of :func:`jsonify` for scalar floats ('inf' -> inf)."""
    if isinstance(v, str):
        return float(v)
    return float(v)


def write_json(path, obj) -> None:
    Path(path).write_text(
        json.dumps(jsonify(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
