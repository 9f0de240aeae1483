"""Reproducible batch experiments over seeded scenes.

An :class:`ExperimentConfig` captures everything that determines a
batch result: scene sampling ranges, separator degradation, pipeline
settings, metric quantiles, and the global seed.  Configs serialize to
versioned JSON, embed into every report together with a content hash,
and identical configs reproduce byte-identical reports.  Scene-level
parallelism is available through a jobs parameter with results merged
in deterministic scene order.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from cxfilter.fcp import FcpConfig
from cxfilter.io import jsonify, parse_float, write_json
from cxfilter.metrics import QuantileSweep, evaluate_scene, quantile_sweep
from cxfilter.pipeline import (
    DegradationSpec,
    PipelineConfig,
    PipelineResult,
    SeparatorOutput,
    export_estimates,
    oracle_separate,
    run_pipeline,
)
from cxfilter.scenes import (
    SCENE_MANIFEST,
    Scene,
    SceneSpec,
    load_scene,
    save_scene,
    simulate_scene,
)
from cxfilter.stft import SEPARATOR_STFT, StftConfig, istft

EXPERIMENT_FORMAT_VERSION = 1
REPORT_FORMAT_VERSION = 1

FCP_MODES = ("off", "fcp", "essu")
SWEEP_AXES = ("taps", "epsilon", "degradation_snr", "t60")


def _range_pair(value, name: str) -> tuple:
    lo, hi = (parse_float(v) for v in value)
    if not lo <= hi:
        raise ValueError(f"{name} must be (lo, hi) with lo <= hi")
    return (lo, hi)


@dataclass(frozen=True)
class SceneRanges:
    """Per-scene parameter sampling ranges for batch generation."""

    num_speakers: int = 2
    duration_s: float = 3.0
    t60_range_s: tuple = (0.2, 0.5)
    drr_range_db: tuple = (-5.0, 0.0)
    noise_snr_range_db: tuple = (20.0, 30.0)
    sample_rate_hz: int = 8000
    speaker_gains_db: tuple | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "t60_range_s", _range_pair(self.t60_range_s, "t60_range_s")
        )
        object.__setattr__(
            self, "drr_range_db", _range_pair(self.drr_range_db, "drr_range_db")
        )
        object.__setattr__(
            self,
            "noise_snr_range_db",
            _range_pair(self.noise_snr_range_db, "noise_snr_range_db"),
        )
        if self.speaker_gains_db is not None:
            object.__setattr__(
                self,
                "speaker_gains_db",
                tuple(float(g) for g in self.speaker_gains_db),
            )

    def to_dict(self) -> dict:
        return jsonify(
            {
                "num_speakers": self.num_speakers,
                "duration_s": self.duration_s,
                "t60_range_s": list(self.t60_range_s),
                "drr_range_db": list(self.drr_range_db),
                "noise_snr_range_db": list(self.noise_snr_range_db),
                "sample_rate_hz": self.sample_rate_hz,
                "speaker_gains_db": self.speaker_gains_db,
            }
        )

    @classmethod
    def from_dict(cls, d: dict) -> "SceneRanges":
        base = cls()
        gains = d.get("speaker_gains_db", base.speaker_gains_db)
        return cls(
            num_speakers=int(d.get("num_speakers", base.num_speakers)),
            duration_s=float(d.get("duration_s", base.duration_s)),
            t60_range_s=tuple(d.get("t60_range_s", base.t60_range_s)),
            drr_range_db=tuple(d.get("drr_range_db", base.drr_range_db)),
            noise_snr_range_db=tuple(
                d.get("noise_snr_range_db", base.noise_snr_range_db)
            ),
            sample_rate_hz=int(d.get("sample_rate_hz", base.sample_rate_hz)),
            speaker_gains_db=None if gains is None else tuple(gains),
        )

    def draw_scene_spec(self, seed: int, index: int) -> SceneSpec:
        """Deterministic per-scene spec for one batch slot."""

        def draw(rng, lo, hi):
            return lo if lo == hi else float(rng.uniform(lo, hi))

        rng = np.random.default_rng([seed, index])
        return SceneSpec(
            num_speakers=self.num_speakers,
            duration_s=self.duration_s,
            t60_s=draw(rng, *self.t60_range_s),
            drr_db=draw(rng, *self.drr_range_db),
            noise_snr_db=draw(rng, *self.noise_snr_range_db),
            seed=int(rng.integers(0, 2**63)),
            sample_rate_hz=self.sample_rate_hz,
            speaker_gains_db=self.speaker_gains_db,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete, serializable recipe for one batch experiment.

    ``fcp_mode`` selects the prediction stage: ``off`` evaluates the
    degraded first-stage estimates directly, ``fcp`` and ``essu`` run
    the plain and energy-sorted variants.  The content hash covers all
    result-determining fields; output locations (``out``,
    ``external_dir``) are excluded so relocating an experiment does not
    change its identity.
    """

    version: int = EXPERIMENT_FORMAT_VERSION
    seed: int = 0
    num_scenes: int = 1
    scene: SceneRanges = field(default_factory=SceneRanges)
    degradation: DegradationSpec = field(default_factory=DegradationSpec)
    fcp_mode: str = "fcp"
    fcp: FcpConfig = field(default_factory=FcpConfig)
    iterations: int = 1
    refinement: str = "passthrough"
    stft_dnn: StftConfig = field(default_factory=lambda: SEPARATOR_STFT)
    quantiles: tuple = ()
    external_dir: str | None = None
    out: str | None = None

    def __post_init__(self):
        if self.version != EXPERIMENT_FORMAT_VERSION:
            raise ValueError(
                f"unsupported experiment config version {self.version!r}"
            )
        if self.fcp_mode not in FCP_MODES:
            raise ValueError(f"unknown fcp_mode {self.fcp_mode!r}")
        if self.num_scenes < 1:
            raise ValueError("num_scenes must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        object.__setattr__(
            self, "quantiles", tuple(float(q) for q in self.quantiles)
        )

    def pipeline_config(self) -> PipelineConfig:
        if self.fcp_mode == "off":
            raise ValueError("fcp_mode 'off' has no pipeline config")
        return PipelineConfig(
            fcp_variant="fcp_essu" if self.fcp_mode == "essu" else "fcp",
            iterations=self.iterations,
            refinement=self.refinement,
            stft_dnn=self.stft_dnn,
            fcp=self.fcp,
            external_dir=self.external_dir,
        )

    def to_dict(self) -> dict:
        return jsonify(
            {
                "version": self.version,
                "seed": self.seed,
                "num_scenes": self.num_scenes,
                "scene": self.scene.to_dict(),
                "degradation": {
                    "mode": self.degradation.mode,
                    "snr_db": self.degradation.snr_db,
                    "cross_talk_fraction": self.degradation.cross_talk_fraction,
                    "seed": self.degradation.seed,
                },
                "fcp_mode": self.fcp_mode,
                "fcp": {
                    "taps": self.fcp.taps,
                    "epsilon": self.fcp.epsilon,
                    "diag_load_delta": self.fcp.diag_load_delta,
                    "per_freq_floor": self.fcp.per_freq_floor,
                    "stft": self.fcp.stft.to_dict(),
                },
                "iterations": self.iterations,
                "refinement": self.refinement,
                "stft_dnn": self.stft_dnn.to_dict(),
                "quantiles": list(self.quantiles),
                "external_dir": self.external_dir,
                "out": self.out,
            }
        )

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        base = cls()
        deg = d.get("degradation", {})
        fcp = d.get("fcp", {})
        return cls(
            version=int(d.get("version", EXPERIMENT_FORMAT_VERSION)),
            seed=int(d.get("seed", base.seed)),
            num_scenes=int(d.get("num_scenes", base.num_scenes)),
            scene=SceneRanges.from_dict(d.get("scene", {})),
            degradation=DegradationSpec(
                mode=deg.get("mode", base.degradation.mode),
                snr_db=parse_float(deg.get("snr_db", base.degradation.snr_db)),
                cross_talk_fraction=float(
                    deg.get(
                        "cross_talk_fraction", base.degradation.cross_talk_fraction
                    )
                ),
                seed=int(deg.get("seed", base.degradation.seed)),
            ),
            fcp_mode=d.get("fcp_mode", base.fcp_mode),
            fcp=FcpConfig(
                taps=int(fcp.get("taps", base.fcp.taps)),
                epsilon=float(fcp.get("epsilon", base.fcp.epsilon)),
                diag_load_delta=float(
                    fcp.get("diag_load_delta", base.fcp.diag_load_delta)
                ),
                stft=(
                    StftConfig.from_dict(fcp["stft"])
                    if "stft" in fcp
                    else base.fcp.stft
                ),
                per_freq_floor=bool(
                    fcp.get("per_freq_floor", base.fcp.per_freq_floor)
                ),
            ),
            iterations=int(d.get("iterations", base.iterations)),
            refinement=d.get("refinement", base.refinement),
            stft_dnn=(
                StftConfig.from_dict(d["stft_dnn"])
                if "stft_dnn" in d
                else base.stft_dnn
            ),
            quantiles=tuple(d.get("quantiles", ())),
            external_dir=d.get("external_dir"),
            out=d.get("out"),
        )

    def config_hash(self) -> str:
        hashed = self.to_dict()
        hashed.pop("out", None)
        hashed.pop("external_dir", None)
        blob = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def run_scene(scene: Scene, config: ExperimentConfig) -> PipelineResult:
    """Run the configured system over one scene.

    With ``fcp_mode='off'`` the degraded first-stage estimates are
    evaluated directly (no prediction stage); otherwise the full
    pipeline runs.
    """
    if config.fcp_mode == "off":
        sep = oracle_separate(scene, config.degradation, config.stft_dnn)
        n = scene.num_samples
        directs = [istft(s, output_length=n) for s in sep.direct_estimates]
        images = [istft(s, output_length=n) for s in sep.image_estimates]
        report = evaluate_scene(images, scene, quantiles=config.quantiles)
        return PipelineResult(
            separator=sep,
            fcp_images=None,
            features=None,
            direct_estimates=directs,
            image_estimates=images,
            report=report,
        )
    return run_pipeline(
        scene, config.degradation, config.pipeline_config(), quantiles=config.quantiles
    )


def discover_scene_dirs(scenes_dir) -> list:
    """Scene directories under a root, in deterministic name order."""
    root = Path(scenes_dir)
    if (root / SCENE_MANIFEST).is_file():
        return [root]
    return sorted(
        (p.parent for p in root.glob(f"*/{SCENE_MANIFEST}")), key=lambda p: p.name
    )


def _map_jobs(func, payloads: list, jobs: int) -> list:
    """Apply a worker over payloads, merging in submission order."""
    if jobs <= 1 or len(payloads) <= 1:
        return [func(p) for p in payloads]
    try:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(func, payloads))
    except (OSError, PermissionError) as err:
        print(
            f"warning: parallel execution unavailable ({err}); running "
            "sequentially",
            file=sys.stderr,
        )
        return [func(p) for p in payloads]


def _scene_from_payload(payload: dict) -> Scene:
    if payload.get("scene_dir") is not None:
        return load_scene(payload["scene_dir"])
    return simulate_scene(SceneSpec.from_dict(payload["scene_spec"]))


def _separate_worker(payload: dict):
    config = ExperimentConfig.from_dict(payload["config"])
    scene = _scene_from_payload(payload)
    result = run_scene(scene, config)
    out_dir = Path(payload["out_dir"])
    export_estimates(result.separator, out_dir / "estimates", scene.num_samples)
    write_json(
        out_dir / "report.json",
        {"version": REPORT_FORMAT_VERSION, "report": result.report.to_dict()},
    )
    return payload["key"], result.report.to_dict()


def run_separation(
    config: ExperimentConfig,
    out_dir,
    scenes_dir=None,
    jobs: int = 1,
) -> dict:
    """Separate a batch of scenes and write per-scene plus batch reports.

    Scenes come from ``scenes_dir`` when given (any directory tree
    produced by the scene writer), otherwise ``config.num_scenes``
    scenes are generated from the config's ranges and seed.  Returns
    the batch report, which is also written to ``out_dir/report.json``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payloads = []
    if scenes_dir is not None:
        for directory in discover_scene_dirs(scenes_dir):
            payloads.append(
                {
                    "key": directory.name,
                    "scene_dir": str(directory),
                    "config": config.to_dict(),
                    "out_dir": str(out_dir / directory.name),
                }
            )
        if not payloads:
            raise FileNotFoundError(
                f"no scene manifest found under {scenes_dir} "
                f"(expected {Path(scenes_dir) / SCENE_MANIFEST} or "
                f"{Path(scenes_dir)}/*/{SCENE_MANIFEST})"
            )
    else:
        for i in range(config.num_scenes):
            key = f"scene_{i + 1:04d}"
            payloads.append(
                {
                    "key": key,
                    "scene_dir": None,
                    "scene_spec": config.scene.draw_scene_spec(
                        config.seed, i
                    ).to_dict(),
                    "config": config.to_dict(),
                    "out_dir": str(out_dir / key),
                }
            )
    results = _map_jobs(_separate_worker, payloads, jobs)
    scenes = {key: report for key, report in results}
    aggregate = {
        "version": REPORT_FORMAT_VERSION,
        "config": config.to_dict(),
        "config_sha256": config.config_hash(),
        "num_scenes": len(scenes),
        "scenes": scenes,
        "mean": _mean_of_means([rep["mean"] for rep in scenes.values()]),
    }
    write_json(out_dir / "report.json", aggregate)
    return aggregate


def _mean_of_means(means: list) -> dict:
    out = {"si_sdr_db": float(np.mean([m["si_sdr_db"] for m in means]))}
    if means and "si_sdr_le_db" in means[0]:
        out["si_sdr_le_db"] = {
            q: float(np.mean([m["si_sdr_le_db"][q] for m in means]))
            for q in means[0]["si_sdr_le_db"]
        }
    return out


def run_simulation(config: ExperimentConfig, out_dir) -> list:
    """Generate and write ``config.num_scenes`` scene directories.

    Returns one summary row per scene (name, drawn parameters, seed).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(config.num_scenes):
        spec = config.scene.draw_scene_spec(config.seed, i)
        scene = simulate_scene(spec)
        key = f"scene_{i + 1:04d}"
        save_scene(scene, out_dir / key)
        rows.append(
            {
                "scene": key,
                "num_speakers": spec.num_speakers,
                "duration_s": spec.duration_s,
                "t60_s": spec.t60_s,
                "drr_db": spec.drr_db,
                "noise_snr_db": spec.noise_snr_db,
                "seed": spec.seed,
            }
        )
    return rows


def evaluate_estimates(
    scene: Scene,
    estimates: SeparatorOutput,
    quantiles,
    out_dir,
    num_samples: int | None = None,
) -> dict:
    """Score imported estimates against a scene; write report and CSVs.

    Raises ValueError on speaker-count or length mismatches.  When
    quantiles are given, a combined low-energy sweep compares the
    estimates with the unprocessed mixture, averaged over speakers, and
    both CSV exports are written next to the report.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if estimates.num_speakers != scene.num_speakers:
        raise ValueError(
            f"estimate speaker count {estimates.num_speakers} does not match "
            f"scene speaker count {scene.num_speakers}"
        )
    n = scene.num_samples
    if num_samples is not None and num_samples != n:
        raise ValueError(
            f"estimates carry {num_samples} samples but the scene has {n}"
        )
    images = [istft(s, output_length=n) for s in estimates.image_estimates]
    quantiles = tuple(float(q) for q in quantiles)
    report = evaluate_scene(images, scene, quantiles=quantiles)

    payload = {
        "version": REPORT_FORMAT_VERSION,
        "report": report.to_dict(),
    }
    write_json(out_dir / "report.json", payload)

    if quantiles:
        per_speaker = []
        for c, ref in enumerate(scene.reverberant_image):
            sweep = quantile_sweep(
                {
                    "estimate": images[report.permutation[c]],
                    "unprocessed": scene.mixture,
                },
                ref,
                quantiles,
            )
            per_speaker.append(sweep)
        values = {
            name: tuple(
                float(np.mean([s.values[name][i] for s in per_speaker]))
                for i in range(len(quantiles))
            )
            for name in per_speaker[0].values
        }
        improvements = {
            pair: tuple(
                float(np.mean([s.improvements[pair][i] for s in per_speaker]))
                for i in range(len(quantiles))
            )
            for pair in per_speaker[0].improvements
        }
        combined = QuantileSweep(
            quantiles=quantiles, values=values, improvements=improvements
        )
        combined.write_values_csv(out_dir / "si_sdr_le_values.csv")
        combined.write_improvements_csv(out_dir / "si_sdr_le_improvements.csv")
        payload["sweep"] = combined.to_dict()
    return payload


def apply_sweep_axis(
    config: ExperimentConfig, axis: str, value: float
) -> ExperimentConfig:
    """A copy of the config with one swept parameter replaced."""
    if axis == "taps":
        return replace(config, fcp=replace(config.fcp, taps=int(value)))
    if axis == "epsilon":
        return replace(config, fcp=replace(config.fcp, epsilon=float(value)))
    if axis == "degradation_snr":
        return replace(
            config, degradation=replace(config.degradation, snr_db=float(value))
        )
    if axis == "t60":
        return replace(
            config,
            scene=replace(config.scene, t60_range_s=(float(value), float(value))),
        )
    raise ValueError(f"unknown sweep axis {axis!r}")


def _sweep_worker(payload: dict):
    config = ExperimentConfig.from_dict(payload["config"])
    scene = _scene_from_payload(payload)
    result = run_scene(scene, config)
    images = [
        istft(s, output_length=scene.num_samples) for s in result.fcp_images
    ]
    report = evaluate_scene(images, scene)
    return float(report.mean["si_sdr_db"])


def run_sweep(
    config: ExperimentConfig,
    axis: str,
    values,
    out_dir,
    jobs: int = 1,
) -> list:
    """One batch per axis value; aggregate CSV of mean FCP-image SI-SDR.

    The swept metric scores the prediction-stage images themselves (not
    the refined outputs) so the axis effect is visible regardless of
    refinement mode.  Requires an FCP-enabled config.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r} (choose from {SWEEP_AXES})")
    if config.fcp_mode == "off":
        raise ValueError("sweep requires fcp_mode 'fcp' or 'essu'")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in values:
        swept = apply_sweep_axis(config, axis, value)
        payloads = [
            {
                "scene_dir": None,
                "scene_spec": swept.scene.draw_scene_spec(swept.seed, i).to_dict(),
                "config": swept.to_dict(),
            }
            for i in range(swept.num_scenes)
        ]
        scores = _map_jobs(_sweep_worker, payloads, jobs)
        rows.append(
            {
                "axis": axis,
                "value": float(value),
                "num_scenes": swept.num_scenes,
                "mean_fcp_image_si_sdr_db": float(np.mean(scores)),
                "config_sha256": swept.config_hash(),
            }
        )
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=[
                "axis",
                "value",
                "num_scenes",
                "mean_fcp_image_si_sdr_db",
                "config_sha256",
            ],
        )
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return rows
