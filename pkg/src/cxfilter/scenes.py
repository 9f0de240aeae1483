"""Synthetic multi-speaker reverberant scenes.

A scene realizes the additive mixture model: per speaker, a dry source
is convolved with a room impulse response split into a unit direct-path
impulse and a stochastic exponentially-decaying tail; the mixture is the
sum of the reverberant images plus white noise at a controlled SNR.
Everything is seeded and reproducible, and scenes round-trip through a
WAV + JSON directory layout so externally produced scenes can be used
in place of generated ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from cxfilter.io import jsonify, parse_float, read_json, read_wav, write_json, write_wav

SCENE_MANIFEST = "scene.json"
SCENE_FORMAT_VERSION = 1

# Direct-path delay range in samples: roughly 1-2 m source distance at 8 kHz.
_MIN_DIRECT_DELAY = 23
_MAX_DIRECT_DELAY = 47


@dataclass
class Rir:
    """Room impulse response: unit direct impulse plus decaying tail."""

    taps: np.ndarray
    direct_delay_samples: int
    sample_rate_hz: int

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=np.float64)
        if self.taps.ndim != 1:
            raise ValueError("RIR taps must be 1-D")
        if not 0 <= self.direct_delay_samples < self.taps.size:
            raise ValueError("direct_delay_samples outside the tap range")


@dataclass(frozen=True)
class SceneSpec:
    """Full recipe for one synthetic scene (deterministic given seed)."""

    num_speakers: int = 2
    duration_s: float = 3.0
    t60_s: float = 0.3
    drr_db: float = 0.0
    noise_snr_db: float = 25.0
    seed: int = 0
    sample_rate_hz: int = 8000
    speaker_gains_db: tuple | None = None

    def __post_init__(self):
        if self.num_speakers < 1:
            raise ValueError("num_speakers must be >= 1")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if self.speaker_gains_db is not None:
            if len(self.speaker_gains_db) != self.num_speakers:
                raise ValueError("speaker_gains_db length must equal num_speakers")
            object.__setattr__(
                self, "speaker_gains_db", tuple(float(g) for g in self.speaker_gains_db)
            )

    @property
    def num_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))

    def to_dict(self) -> dict:
        return jsonify(
            {
                "num_speakers": self.num_speakers,
                "duration_s": self.duration_s,
                "t60_s": self.t60_s,
                "drr_db": self.drr_db,
                "noise_snr_db": self.noise_snr_db,
                "seed": self.seed,
                "sample_rate_hz": self.sample_rate_hz,
                "speaker_gains_db": self.speaker_gains_db,
            }
        )

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        gains = d.get("speaker_gains_db")
        return cls(
            num_speakers=int(d["num_speakers"]),
            duration_s=float(d["duration_s"]),
            t60_s=float(d["t60_s"]),
            drr_db=parse_float(d["drr_db"]),
            noise_snr_db=parse_float(d["noise_snr_db"]),
            seed=int(d["seed"]),
            sample_rate_hz=int(d["sample_rate_hz"]),
            speaker_gains_db=None if gains is None else tuple(gains),
        )


@dataclass
class Scene:
    """Rendered acoustic scene with per-speaker ground truth.

    ``mixture == sum(reverberant_image) + noise`` holds sample-exactly
    (float64) for generated scenes.  ``rirs`` is None for scenes loaded
    from external directories that do not ship impulse responses.
    """

    mixture: np.ndarray
    direct_path: list
    reverberant_image: list
    noise: np.ndarray
    spec: SceneSpec
    rirs: list | None = field(default=None)

    @property
    def num_speakers(self) -> int:
        return len(self.reverberant_image)

    @property
    def num_samples(self) -> int:
        return self.mixture.size


def generate_rir(
    t60_s: float,
    direct_delay_samples: int,
    drr_db: float,
    rng: np.random.Generator,
    sample_rate_hz: int = 8000,
) -> Rir:
    """Generate a stochastic RIR with controlled decay and DRR.

    The tail is white Gaussian noise shaped by the amplitude envelope
    ``exp(-3*ln(10)*t/t60)``, which puts the energy envelope 60 dB down
    at ``t60``.  The tail is rescaled exactly so the direct-to-
    reverberant energy ratio equals ``drr_db``; ``drr_db = +inf``
    disables the tail entirely.

    Parameters
    ----------
    t60_s : float
        Reverberation time in seconds, > 0.
    direct_delay_samples : int
        Position of the unit direct impulse.
    drr_db : float
        Requested direct-to-reverberant energy ratio in dB.
    rng : numpy.random.Generator
        Source of the tail noise realization.
    """
    if t60_s <= 0:
        raise ValueError("t60_s must be positive")
    if direct_delay_samples < 0:
        raise ValueError("direct_delay_samples must be non-negative")

    tail_len = int(math.ceil(1.5 * t60_s * sample_rate_hz))
    total = direct_delay_samples + 1 + tail_len
    taps = np.zeros(total)
    taps[direct_delay_samples] = 1.0

    if not math.isinf(drr_db):
        t = np.arange(tail_len) / sample_rate_hz
        envelope = np.exp(-3.0 * math.log(10.0) * t / t60_s)
        tail = rng.standard_normal(tail_len) * envelope
        tail_energy = float(np.sum(tail**2))
        if tail_energy > 0:
            target_energy = 10.0 ** (-drr_db / 10.0)  # direct energy is 1
            tail *= math.sqrt(target_energy / tail_energy)
        taps[direct_delay_samples + 1 :] = tail

    return Rir(taps, direct_delay_samples, sample_rate_hz)


def _fft_lowpass(x: np.ndarray, cutoff_hz: float, sample_rate_hz: int) -> np.ndarray:
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(x.size, 1.0 / sample_rate_hz)
    spec[freqs > cutoff_hz] = 0.0
    return np.fft.irfft(spec, n=x.size)


def synthesize_dry_sources(spec: SceneSpec, rng: np.random.Generator) -> list:
    """Speech-like surrogate dry sources: colored noise under syllabic AM.

    Pink-shaded Gaussian noise is modulated by a smoothed positive
    envelope varying at a few Hz, then normalized to unit RMS with the
    per-speaker gain from ``spec`` applied.  No licensed speech corpus
    is required; arbitrary WAV material can be passed to
    :func:`render_scene` instead.
    """
    n = spec.num_samples
    sr = spec.sample_rate_hz
    sources = []
    for c in range(spec.num_speakers):
        white = rng.standard_normal(n)
        shaped = np.fft.rfft(white)
        freqs = np.fft.rfftfreq(n, 1.0 / sr)
        shaped /= np.sqrt(np.maximum(freqs, 50.0))  # ~1/f power above 50 Hz
        carrier = np.fft.irfft(shaped, n=n)

        env = _fft_lowpass(rng.standard_normal(n), 4.0, sr)
        env = 0.15 + np.abs(env) / (np.max(np.abs(env)) + 1e-12)
        src = carrier * env
        src /= np.sqrt(np.mean(src**2)) + 1e-12

        if spec.speaker_gains_db is not None:
            src *= 10.0 ** (spec.speaker_gains_db[c] / 20.0)
        sources.append(src)
    return sources


def render_scene(sources, spec: SceneSpec, rng: np.random.Generator) -> Scene:
    """Convolve dry sources with generated RIRs and mix with noise.

    Each source is convolved with its own seeded RIR; the direct path
    is the unit-impulse part of that convolution (a pure delay of the
    dry source) and the image is the full convolution.  White noise is
    added at ``spec.noise_snr_db`` relative to the summed images
    (``+inf`` means noise-free).
    """
    if len(sources) == 0:
        raise ValueError("render_scene needs at least one source")
    if len(sources) != spec.num_speakers:
        raise ValueError(
            f"got {len(sources)} sources for num_speakers={spec.num_speakers}"
        )
    n = spec.num_samples
    sources = [np.asarray(s, dtype=np.float64) for s in sources]
    for s in sources:
        if s.ndim != 1 or s.size != n:
            raise ValueError("every source must be 1-D with spec.num_samples samples")

    rirs, directs, images = [], [], []
    for src in sources:
        delay = int(rng.integers(_MIN_DIRECT_DELAY, _MAX_DIRECT_DELAY + 1))
        rir = generate_rir(spec.t60_s, delay, spec.drr_db, rng, spec.sample_rate_hz)
        rirs.append(rir)

        direct = np.zeros(n)
        direct[delay:] = src[: n - delay]
        directs.append(direct)

        # Image = exact delayed source + convolved tail, so the anechoic
        # limit (no tail) reproduces the direct path bit-for-bit.
        tail = rir.taps.copy()
        tail[delay] = 0.0
        if np.any(tail):
            images.append(direct + fftconvolve(src, tail)[:n])
        else:
            images.append(direct.copy())

    image_sum = np.sum(images, axis=0)
    if math.isinf(spec.noise_snr_db):
        noise = np.zeros(n)
    else:
        noise = rng.standard_normal(n)
        signal_energy = float(np.sum(image_sum**2))
        noise_energy = float(np.sum(noise**2))
        target = signal_energy * 10.0 ** (-spec.noise_snr_db / 10.0)
        noise *= math.sqrt(target / noise_energy) if noise_energy > 0 else 0.0

    mixture = image_sum + noise
    return Scene(mixture, directs, images, noise, spec, rirs)


def simulate_scene(spec: SceneSpec) -> Scene:
    """Fully seeded scene synthesis: dry sources plus rendering.

    Identical specs (including seed) produce bit-identical scenes.
    """
    rng = np.random.default_rng(spec.seed)
    sources = synthesize_dry_sources(spec, rng)
    return render_scene(sources, spec, rng)


def save_scene(scene: Scene, directory) -> Path:
    """Write a scene directory (float32 WAVs plus ``scene.json``).

    Returns the manifest path.  Signals are quantized to 32-bit float;
    one save/load trip is exact at that precision and idempotent
    afterwards.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    sr = scene.spec.sample_rate_hz

    files = {"mixture": "mixture.wav", "noise": "noise.wav"}
    write_wav(directory / "mixture.wav", scene.mixture, sr)
    write_wav(directory / "noise.wav", scene.noise, sr)
    for c in range(scene.num_speakers):
        files[f"s{c + 1}_direct"] = f"s{c + 1}_direct.wav"
        files[f"s{c + 1}_image"] = f"s{c + 1}_image.wav"
        write_wav(directory / f"s{c + 1}_direct.wav", scene.direct_path[c], sr)
        write_wav(directory / f"s{c + 1}_image.wav", scene.reverberant_image[c], sr)

    manifest = {"version": SCENE_FORMAT_VERSION, "files": files}
    manifest.update(scene.spec.to_dict())

    if scene.rirs is not None:
        for c, rir in enumerate(scene.rirs):
            files[f"s{c + 1}_rir"] = f"s{c + 1}_rir.wav"
            write_wav(directory / f"s{c + 1}_rir.wav", rir.taps, sr)
        manifest["rir_direct_delays_samples"] = [
            rir.direct_delay_samples for rir in scene.rirs
        ]

    path = directory / SCENE_MANIFEST
    write_json(path, manifest)
    return path


def load_scene(directory) -> Scene:
    """Load a scene directory written by :func:`save_scene` (or externally)."""
    directory = Path(directory)
    manifest_path = directory / SCENE_MANIFEST
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no scene manifest at {manifest_path}")
    manifest = read_json(manifest_path)
    if manifest.get("version") != SCENE_FORMAT_VERSION:
        raise ValueError(
            f"unsupported scene manifest version {manifest.get('version')!r}"
        )
    spec = SceneSpec.from_dict(manifest)
    files = manifest["files"]

    def component(name: str) -> np.ndarray:
        if name not in files:
            raise FileNotFoundError(f"scene manifest lists no '{name}' component")
        path = directory / files[name]
        if not path.is_file():
            raise FileNotFoundError(f"scene component '{name}' missing: {path}")
        return read_wav(path, expected_rate=spec.sample_rate_hz)

    mixture = component("mixture")
    noise = component("noise")
    directs = [component(f"s{c + 1}_direct") for c in range(spec.num_speakers)]
    images = [component(f"s{c + 1}_image") for c in range(spec.num_speakers)]

    rirs = None
    delays = manifest.get("rir_direct_delays_samples")
    if delays is not None and all(
        f"s{c + 1}_rir" in files for c in range(spec.num_speakers)
    ):
        rirs = [
            Rir(component(f"s{c + 1}_rir"), int(delays[c]), spec.sample_rate_hz)
            for c in range(spec.num_speakers)
        ]

    return Scene(mixture, directs, images, noise, spec, rirs)
