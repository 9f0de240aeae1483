"""Two-stage separation pipeline with a physically-constrained middle.

The flow mirrors a sandwich architecture: a first separator produces
per-speaker direct-path and reverberant-image estimates, a convolutive
prediction stage turns the direct estimates into physically-constrained
reverberant images, and a refinement stage consumes the assembled
features.  Neural separators are out of scope; an oracle separator with
controllable degradations stands in for the first stage, and the
refinement stage is pluggable: pass the first stage through, substitute
the predicted images, or exchange features and estimates with an
external model through WAV/JSON directories.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from cxfilter.fcp import FcpConfig, fcp_essu_separate, fcp_separate
from cxfilter.io import read_json, read_wav, write_json, write_wav
from cxfilter.metrics import MetricsReport, evaluate_scene
from cxfilter.scenes import Scene
from cxfilter.stft import (
    SEPARATOR_STFT,
    ComplexSpectrogram,
    StftConfig,
    istft,
    stft,
)

FEATURES_MANIFEST = "features.json"
ESTIMATES_MANIFEST = "estimates.json"
FEATURES_FORMAT_VERSION = 1
ESTIMATES_FORMAT_VERSION = 1

_DEGRADATION_MODES = ("additive_noise", "cross_talk", "combined")
_FCP_VARIANTS = ("fcp", "fcp_essu")
_REFINEMENTS = ("passthrough", "fcp_substitute", "external")


@dataclass(eq=False)
class SeparatorOutput:
    """Per-speaker direct-path and reverberant-image spectrograms."""

    direct_estimates: list
    image_estimates: list

    def __post_init__(self):
        if len(self.direct_estimates) != len(self.image_estimates):
            raise ValueError("direct/image estimate counts differ")
        if len(self.direct_estimates) == 0:
            raise ValueError("SeparatorOutput needs at least one speaker")
        first = self.direct_estimates[0]
        for spec in (*self.direct_estimates, *self.image_estimates):
            if spec.data.shape != first.data.shape or spec.config != first.config:
                raise ValueError("SeparatorOutput spectrograms must share the grid")

    @property
    def num_speakers(self) -> int:
        return len(self.direct_estimates)

    @property
    def stft_config(self) -> StftConfig:
        return self.direct_estimates[0].config


@dataclass(frozen=True)
class DegradationSpec:
    """Controlled corruption of oracle separator outputs.

    ``additive_noise`` adds seeded white Gaussian noise at ``snr_db``
    relative to each signal; ``cross_talk`` blends a fraction of the
    other speakers into each estimate; ``combined`` applies cross-talk
    first, then noise scaled against the blended signal.  An infinite
    SNR with zero fraction reproduces the oracle exactly.
    """

    mode: str = "additive_noise"
    snr_db: float = np.inf
    cross_talk_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in _DEGRADATION_MODES:
            raise ValueError(f"unknown degradation mode {self.mode!r}")
        if np.isnan(self.snr_db) or self.snr_db == -np.inf:
            raise ValueError("snr_db must be finite or +inf")
        if not 0.0 <= self.cross_talk_fraction < 1.0:
            raise ValueError("cross_talk_fraction must lie in [0, 1)")


@dataclass(eq=False)
class FeatureStack:
    """Inputs for a refinement model, all on one STFT grid.

    Ordering is fixed: the mixture, then per speaker the first-stage
    direct estimate, first-stage image estimate, and predicted image.
    ``num_samples`` records the time-domain length the spectrograms
    were computed from, so exports can invert them losslessly.
    """

    mixture: ComplexSpectrogram
    stage1_direct: list
    stage1_image: list
    fcp_images: list
    num_samples: int | None = None

    def __post_init__(self):
        count = len(self.stage1_direct)
        if not (len(self.stage1_image) == len(self.fcp_images) == count):
            raise ValueError("FeatureStack speaker lists must share length")
        if count == 0:
            raise ValueError("FeatureStack needs at least one speaker")
        for spec in (
            self.mixture,
            *self.stage1_direct,
            *self.stage1_image,
            *self.fcp_images,
        ):
            if (
                spec.data.shape != self.mixture.data.shape
                or spec.config != self.mixture.config
            ):
                raise ValueError("FeatureStack spectrograms must share the grid")

    @property
    def num_speakers(self) -> int:
        return len(self.stage1_direct)

    def spectrograms(self) -> list:
        """All spectrograms in the documented deterministic order."""
        out = [self.mixture]
        for c in range(self.num_speakers):
            out += [self.stage1_direct[c], self.stage1_image[c], self.fcp_images[c]]
        return out


@dataclass(frozen=True)
class PipelineConfig:
    """End-to-end pipeline settings.

    The separator operates on ``stft_dnn``; the prediction stage runs
    on its own grid from ``fcp.stft`` with conversion through the time
    domain.  ``external`` refinement requires ``external_dir``, where
    per-iteration feature and estimate directories are exchanged.
    """

    fcp_variant: str = "fcp"
    iterations: int = 1
    refinement: str = "passthrough"
    stft_dnn: StftConfig = field(default_factory=lambda: SEPARATOR_STFT)
    fcp: FcpConfig = field(default_factory=FcpConfig)
    external_dir: str | None = None

    def __post_init__(self):
        if self.fcp_variant not in _FCP_VARIANTS:
            raise ValueError(f"unknown fcp_variant {self.fcp_variant!r}")
        if self.refinement not in _REFINEMENTS:
            raise ValueError(f"unknown refinement {self.refinement!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.refinement == "external" and self.external_dir is None:
            raise ValueError("external refinement requires external_dir")

    @property
    def stft_fcp(self) -> StftConfig:
        return self.fcp.stft


@dataclass(eq=False)
class PipelineResult:
    """Everything a pipeline run produced.

    Estimate lists are time-domain signals at the scene length, indexed
    by the separator's speaker order; the report aligns them to the
    true speakers via its recorded permutation.
    """

    separator: SeparatorOutput
    fcp_images: list
    features: FeatureStack
    direct_estimates: list
    image_estimates: list
    report: MetricsReport


def _degrade(signals: list, degradation: DegradationSpec, rng) -> list:
    """Apply the configured corruption to a per-speaker signal list."""
    out = [np.array(s, dtype=np.float64) for s in signals]
    if degradation.mode in ("cross_talk", "combined"):
        phi = degradation.cross_talk_fraction
        total = np.sum(out, axis=0)
        out = [(1.0 - phi) * s + phi * (total - s) for s in out]
    if degradation.mode in ("additive_noise", "combined"):
        snr = degradation.snr_db
        if snr != np.inf:
            for c, sig in enumerate(out):
                energy = float(np.dot(sig, sig))
                noise = rng.standard_normal(sig.shape[0])
                if energy > 0.0:
                    noise *= np.sqrt(
                        energy / (np.dot(noise, noise) * 10.0 ** (snr / 10.0))
                    )
                    out[c] = sig + noise
    return out


def oracle_separate(
    scene: Scene,
    degradation: DegradationSpec,
    stft_config: StftConfig | None = None,
) -> SeparatorOutput:
    """Ground-truth separator with controlled estimation error.

    Degrades the scene's true direct paths and reverberant images in
    the time domain per ``degradation`` (direct list first, then image
    list, in speaker order, so a fixed seed is bit-reproducible) and
    returns their spectrograms on the separator grid.
    """
    config = SEPARATOR_STFT if stft_config is None else stft_config
    rng = np.random.default_rng(degradation.seed)
    directs = _degrade(scene.direct_path, degradation, rng)
    images = _degrade(scene.reverberant_image, degradation, rng)
    return SeparatorOutput(
        direct_estimates=[stft(s, config) for s in directs],
        image_estimates=[stft(s, config) for s in images],
    )


def _convert(
    spec: ComplexSpectrogram, to_config: StftConfig, num_samples: int
) -> ComplexSpectrogram:
    if spec.config == to_config:
        return ComplexSpectrogram(spec.data.copy(), to_config)
    return stft(istft(spec, output_length=num_samples), to_config)


def run_fcp_stage(
    mixture, separator_output: SeparatorOutput, config: PipelineConfig
) -> list:
    """Predict per-speaker reverberant images from direct estimates.

    The time-domain mixture and the separator's direct estimates are
    moved onto the prediction grid, the selected variant is run, and
    the images are returned on the separator grid.
    """
    mixture = np.asarray(mixture, dtype=np.float64)
    if mixture.ndim != 1:
        raise ValueError("run_fcp_stage expects a 1-D time-domain mixture")
    n = mixture.shape[0]
    mix_spec = stft(mixture, config.stft_fcp)
    s_hats = [
        _convert(s, config.stft_fcp, n) for s in separator_output.direct_estimates
    ]
    separate = fcp_separate if config.fcp_variant == "fcp" else fcp_essu_separate
    images = separate(mix_spec, s_hats, config.fcp)
    return [_convert(img, config.stft_dnn, n) for img in images]


def assemble_features(
    mixture_spec: ComplexSpectrogram,
    separator_output: SeparatorOutput,
    fcp_images: list,
    num_samples: int | None = None,
) -> FeatureStack:
    """Bundle mixture, first-stage estimates, and predicted images."""
    return FeatureStack(
        mixture=mixture_spec,
        stage1_direct=list(separator_output.direct_estimates),
        stage1_image=list(separator_output.image_estimates),
        fcp_images=list(fcp_images),
        num_samples=num_samples,
    )


def _feature_files(count: int) -> list:
    names = ["mixture.wav"]
    for c in range(1, count + 1):
        names += [
            f"s{c}_stage1_direct.wav",
            f"s{c}_stage1_image.wav",
            f"s{c}_fcp_image.wav",
        ]
    return names


def export_features(stack: FeatureStack, directory) -> Path:
    """Write a feature directory: ``features.json`` plus one WAV each.

    Signals are inverted to the time domain and stored as 32-bit float
    WAV; reimporting reproduces the stack exactly when the underlying
    signals are float32-representable, and to 32-bit precision
    otherwise.  Returns the manifest path.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    config = stack.mixture.config
    length = (
        stack.num_samples
        if stack.num_samples is not None
        else config.max_signal_length(stack.mixture.frames)
    )
    names = _feature_files(stack.num_speakers)
    for name, spec in zip(names, stack.spectrograms()):
        write_wav(
            directory / name,
            istft(spec, output_length=length),
            config.sample_rate_hz,
        )
    manifest = {
        "format": "feature-stack",
        "version": FEATURES_FORMAT_VERSION,
        "num_speakers": stack.num_speakers,
        "num_samples": length,
        "frames": stack.mixture.frames,
        "bins": stack.mixture.bins,
        "stft": config.to_dict(),
        "files": names,
    }
    path = directory / FEATURES_MANIFEST
    write_json(path, manifest)
    return path


def _load_manifest(directory: Path, name: str, version: int, required: str) -> dict:
    path = directory / name
    if not path.is_file():
        raise FileNotFoundError(
            f"{path} not found; the directory must contain {name} plus {required}"
        )
    manifest = read_json(path)
    if manifest.get("version") != version:
        raise ValueError(
            f"{path}: version {manifest.get('version')!r} unsupported "
            f"(expected {version})"
        )
    return manifest


def import_features(directory) -> FeatureStack:
    """Read a feature directory written by :func:`export_features`."""
    directory = Path(directory)
    manifest = _load_manifest(
        directory,
        FEATURES_MANIFEST,
        FEATURES_FORMAT_VERSION,
        "mixture.wav and per-speaker s{c}_stage1_direct.wav, "
        "s{c}_stage1_image.wav, s{c}_fcp_image.wav",
    )
    config = StftConfig.from_dict(manifest["stft"])
    count = int(manifest["num_speakers"])
    length = int(manifest["num_samples"])

    def spec_of(name: str) -> ComplexSpectrogram:
        path = directory / name
        if not path.is_file():
            raise FileNotFoundError(f"feature file missing: {path}")
        signal = read_wav(path, expected_rate=config.sample_rate_hz)
        if signal.shape[0] != length:
            raise ValueError(
                f"{path}: {signal.shape[0]} samples, manifest says {length}"
            )
        return stft(signal, config)

    names = _feature_files(count)
    specs = [spec_of(name) for name in names]
    return FeatureStack(
        mixture=specs[0],
        stage1_direct=specs[1::3],
        stage1_image=specs[2::3],
        fcp_images=specs[3::3],
        num_samples=length,
    )


def export_estimates(output: SeparatorOutput, directory, num_samples: int) -> Path:
    """Write refined estimates in the layout :func:`import_estimates` reads."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    config = output.stft_config
    files = []
    for c in range(1, output.num_speakers + 1):
        for kind, spec in (
            ("direct", output.direct_estimates[c - 1]),
            ("image", output.image_estimates[c - 1]),
        ):
            name = f"s{c}_{kind}.wav"
            write_wav(
                directory / name,
                istft(spec, output_length=num_samples),
                config.sample_rate_hz,
            )
            files.append(name)
    manifest = {
        "format": "speaker-estimates",
        "version": ESTIMATES_FORMAT_VERSION,
        "num_speakers": output.num_speakers,
        "num_samples": num_samples,
        "stft": config.to_dict(),
        "files": files,
    }
    path = directory / ESTIMATES_MANIFEST
    write_json(path, manifest)
    return path


def import_estimates(directory) -> SeparatorOutput:
    """Read refined per-speaker estimates from an exchange directory."""
    directory = Path(directory)
    manifest = _load_manifest(
        directory,
        ESTIMATES_MANIFEST,
        ESTIMATES_FORMAT_VERSION,
        "per-speaker s{c}_direct.wav and s{c}_image.wav",
    )
    config = StftConfig.from_dict(manifest["stft"])
    count = int(manifest["num_speakers"])
    length = int(manifest["num_samples"])

    def spec_of(name: str) -> ComplexSpectrogram:
        path = directory / name
        if not path.is_file():
            raise FileNotFoundError(f"estimate file missing: {path}")
        signal = read_wav(path, expected_rate=config.sample_rate_hz)
        if signal.shape[0] != length:
            raise ValueError(
                f"{path}: {signal.shape[0]} samples, manifest says {length}"
            )
        return stft(signal, config)

    return SeparatorOutput(
        direct_estimates=[spec_of(f"s{c}_direct.wav") for c in range(1, count + 1)],
        image_estimates=[spec_of(f"s{c}_image.wav") for c in range(1, count + 1)],
    )


def _refine(
    stack: FeatureStack,
    separator: SeparatorOutput,
    config: PipelineConfig,
    iteration: int,
) -> SeparatorOutput:
    if config.refinement == "passthrough":
        return separator
    if config.refinement == "fcp_substitute":
        return SeparatorOutput(
            direct_estimates=list(separator.direct_estimates),
            image_estimates=list(stack.fcp_images),
        )
    base = Path(config.external_dir) / f"iteration_{iteration}"
    export_features(stack, base / "features")
    estimates_dir = base / "estimates"
    manifest = estimates_dir / ESTIMATES_MANIFEST
    if not manifest.is_file():
        raise FileNotFoundError(
            f"external refinement estimates not found: expected {manifest}; "
            f"features were exported to {base / 'features'}"
        )
    refined = import_estimates(estimates_dir)
    if refined.num_speakers != separator.num_speakers:
        raise ValueError(
            f"external estimates have {refined.num_speakers} speakers, "
            f"expected {separator.num_speakers}"
        )
    return refined


def run_pipeline(
    scene: Scene,
    degradation: DegradationSpec,
    config: PipelineConfig,
    quantiles=(),
) -> PipelineResult:
    """Run separator, prediction, and refinement over a scene.

    Each iteration re-runs the prediction stage on the current direct
    estimates and then refines; refined estimates feed the next
    iteration.  The report scores the final image estimates against the
    scene's true reverberant images.
    """
    n = scene.mixture.shape[0]
    mixture_spec = stft(scene.mixture, config.stft_dnn)
    separator = oracle_separate(scene, degradation, config.stft_dnn)

    current = separator
    stack = None
    fcp_images = None
    for iteration in range(1, config.iterations + 1):
        fcp_images = run_fcp_stage(scene.mixture, current, config)
        stack = assemble_features(mixture_spec, current, fcp_images, num_samples=n)
        current = _refine(stack, current, config, iteration)

    direct_estimates = [
        istft(s, output_length=n) for s in current.direct_estimates
    ]
    image_estimates = [
        istft(s, output_length=n) for s in current.image_estimates
    ]
    report = evaluate_scene(image_estimates, scene, quantiles=quantiles)
    return PipelineResult(
        separator=current,
        fcp_images=fcp_images,
        features=stack,
        direct_estimates=direct_estimates,
        image_estimates=image_estimates,
        report=report,
    )
