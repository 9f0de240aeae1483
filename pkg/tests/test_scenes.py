"""Scene synthesis: RIR model, mixture accounting, serialization."""

import math

import numpy as np
import pytest

from cxfilter import (
    Scene,
    SceneSpec,
    generate_rir,
    load_scene,
    render_scene,
    save_scene,
    simulate_scene,
    synthesize_dry_sources,
)


def tail_energy(rir):
    tail = rir.taps[rir.direct_delay_samples + 1 :]
    return float(np.sum(tail**2))


class TestGenerateRir:
    def test_anechoic_limit(self):
        rir = generate_rir(0.3, 5, np.inf, np.random.default_rng(0))
        assert rir.taps[5] == 1.0
        assert np.count_nonzero(rir.taps) == 1

    def test_direct_impulse_and_preceding_zeros(self):
        rir = generate_rir(0.3, 11, 0.0, np.random.default_rng(1))
        assert rir.taps[11] == 1.0
        assert np.all(rir.taps[:11] == 0)

    def test_decay_definition(self):
        # The amplitude envelope is exp(-3 ln10 t / t60): energy at t60 is
        # 60 dB below t=0.  Integrated tail energy beyond t60 relative to
        # the total is the envelope-integral ratio; check the realized
        # noise tail against the analytic value loosely.
        t60, fs = 0.3, 8000
        rir = generate_rir(t60, 0, 0.0, np.random.default_rng(2), fs)
        tail = rir.taps[1:]
        cut = int(t60 * fs)
        beyond = float(np.sum(tail[cut:] ** 2))
        total = float(np.sum(tail**2))
        # Analytic ratio: int_{t60}^{1.5 t60} e^(-2at) dt / int_0^{1.5 t60},
        # a = 3 ln10 / t60 -> approximately e^(-6 ln10) = 1e-6.
        assert beyond / total < 1e-5
        envelope = np.exp(-3.0 * math.log(10.0) * np.arange(tail.size) / (t60 * fs))
        assert envelope[cut] ** 2 == pytest.approx(1e-6, rel=1e-9)

    def test_exact_drr_scaling(self):
        for drr in (-5.0, 0.0, 3.0):
            rir = generate_rir(0.25, 3, drr, np.random.default_rng(7))
            measured = 10.0 * math.log10(1.0 / tail_energy(rir))
            assert measured == pytest.approx(drr, abs=1e-9)

    def test_determinism(self):
        a = generate_rir(0.3, 5, 0.0, np.random.default_rng(42))
        b = generate_rir(0.3, 5, 0.0, np.random.default_rng(42))
        np.testing.assert_array_equal(a.taps, b.taps)

    def test_length_covers_t60(self):
        rir = generate_rir(0.4, 0, 0.0, np.random.default_rng(3), 8000)
        assert rir.taps.size >= int(0.4 * 8000)

    def test_nonpositive_t60_rejected(self):
        with pytest.raises(ValueError):
            generate_rir(0.0, 0, 0.0, np.random.default_rng(0))


class TestRenderScene:
    def test_degenerate_scene_is_delayed_source(self, rng):
        spec = SceneSpec(
            num_speakers=1,
            duration_s=0.5,
            drr_db=np.inf,
            noise_snr_db=np.inf,
            seed=0,
        )
        src = rng.standard_normal(spec.num_samples)
        scene = render_scene([src], spec, np.random.default_rng(5))
        delay = scene.rirs[0].direct_delay_samples
        np.testing.assert_allclose(
            scene.mixture[delay:], src[: src.size - delay], atol=1e-12
        )
        np.testing.assert_array_equal(scene.mixture, scene.direct_path[0])

    def test_mixture_accounting_identity(self, small_scene):
        resid = (
            small_scene.mixture
            - np.sum(small_scene.reverberant_image, axis=0)
            - small_scene.noise
        )
        assert np.max(np.abs(resid)) <= 1e-10

    def test_noise_snr_exact(self, small_scene):
        images = np.sum(small_scene.reverberant_image, axis=0)
        snr = 10.0 * math.log10(
            float(np.sum(images**2)) / float(np.sum(small_scene.noise**2))
        )
        assert snr == pytest.approx(small_scene.spec.noise_snr_db, abs=1e-9)

    def test_speaker_gains_control_energy_order(self):
        spec = SceneSpec(
            num_speakers=2,
            duration_s=1.0,
            speaker_gains_db=(0.0, -6.0),
            seed=11,
        )
        scene = simulate_scene(spec)
        e = [float(np.sum(d**2)) for d in scene.direct_path]
        assert e[0] > e[1]
        assert 10.0 * math.log10(e[0] / e[1]) == pytest.approx(6.0, abs=1.0)

    def test_empty_sources_rejected(self):
        spec = SceneSpec(num_speakers=1, duration_s=0.5)
        with pytest.raises(ValueError):
            render_scene([], spec, np.random.default_rng(0))

    def test_source_count_mismatch_rejected(self, rng):
        spec = SceneSpec(num_speakers=2, duration_s=0.5)
        with pytest.raises(ValueError):
            render_scene([rng.standard_normal(4000)], spec, np.random.default_rng(0))


class TestSimulateScene:
    def test_bit_identical_given_seed(self):
        spec = SceneSpec(num_speakers=2, duration_s=0.8, seed=77)
        a, b = simulate_scene(spec), simulate_scene(spec)
        np.testing.assert_array_equal(a.mixture, b.mixture)
        np.testing.assert_array_equal(a.noise, b.noise)
        for c in range(2):
            np.testing.assert_array_equal(a.direct_path[c], b.direct_path[c])
            np.testing.assert_array_equal(
                a.reverberant_image[c], b.reverberant_image[c]
            )

    def test_seed_changes_scene(self):
        a = simulate_scene(SceneSpec(duration_s=0.5, seed=1))
        b = simulate_scene(SceneSpec(duration_s=0.5, seed=2))
        assert np.max(np.abs(a.mixture - b.mixture)) > 1e-3

    def test_dry_sources_unit_rms(self, rng):
        spec = SceneSpec(num_speakers=3, duration_s=1.0, seed=5)
        sources = synthesize_dry_sources(spec, np.random.default_rng(5))
        for src in sources:
            assert float(np.sqrt(np.mean(src**2))) == pytest.approx(1.0, abs=1e-6)

    def test_three_speakers_supported(self):
        scene = simulate_scene(SceneSpec(num_speakers=3, duration_s=0.5, seed=9))
        assert scene.num_speakers == 3
        resid = (
            scene.mixture - np.sum(scene.reverberant_image, axis=0) - scene.noise
        )
        assert np.max(np.abs(resid)) <= 1e-10


class TestSceneSerialization:
    def test_round_trip_float32_exact(self, tmp_path, small_scene):
        save_scene(small_scene, tmp_path / "sc")
        loaded = load_scene(tmp_path / "sc")
        np.testing.assert_array_equal(
            loaded.mixture, small_scene.mixture.astype(np.float32)
        )
        np.testing.assert_array_equal(
            loaded.noise, small_scene.noise.astype(np.float32)
        )
        for c in range(small_scene.num_speakers):
            np.testing.assert_array_equal(
                loaded.direct_path[c],
                small_scene.direct_path[c].astype(np.float32),
            )
            np.testing.assert_array_equal(
                loaded.reverberant_image[c],
                small_scene.reverberant_image[c].astype(np.float32),
            )

    def test_second_round_trip_idempotent(self, tmp_path, small_scene):
        save_scene(small_scene, tmp_path / "a")
        first = load_scene(tmp_path / "a")
        save_scene(first, tmp_path / "b")
        second = load_scene(tmp_path / "b")
        np.testing.assert_array_equal(first.mixture, second.mixture)

    def test_metadata_survives(self, tmp_path, small_scene):
        save_scene(small_scene, tmp_path / "sc")
        loaded = load_scene(tmp_path / "sc")
        assert loaded.spec == small_scene.spec
        assert loaded.spec.seed == small_scene.spec.seed

    def test_rirs_survive(self, tmp_path, small_scene):
        save_scene(small_scene, tmp_path / "sc")
        loaded = load_scene(tmp_path / "sc")
        assert loaded.rirs is not None
        for a, b in zip(loaded.rirs, small_scene.rirs):
            assert a.direct_delay_samples == b.direct_delay_samples
            np.testing.assert_array_equal(a.taps, b.taps.astype(np.float32))

    def test_missing_component_named(self, tmp_path, small_scene):
        save_scene(small_scene, tmp_path / "sc")
        (tmp_path / "sc" / "noise.wav").unlink()
        with pytest.raises(FileNotFoundError, match="noise"):
            load_scene(tmp_path / "sc")

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_scene(tmp_path / "empty")

    def test_loaded_scene_still_consistent(self, tmp_path, small_scene):
        # Float32 quantization leaves the accounting identity intact to
        # float32 resolution.
        save_scene(small_scene, tmp_path / "sc")
        loaded = load_scene(tmp_path / "sc")
        resid = (
            loaded.mixture
            - np.sum(loaded.reverberant_image, axis=0)
            - loaded.noise
        )
        assert np.max(np.abs(resid)) <= 1e-6


class TestSceneSpecValidation:
    def test_bad_counts(self):
        with pytest.raises(ValueError):
            SceneSpec(num_speakers=0)
        with pytest.raises(ValueError):
            SceneSpec(duration_s=0.0)
        with pytest.raises(ValueError):
            SceneSpec(num_speakers=2, speaker_gains_db=(0.0,))

    def test_dict_round_trip_with_infinities(self):
        spec = SceneSpec(drr_db=np.inf, noise_snr_db=np.inf, seed=3)
        again = SceneSpec.from_dict(spec.to_dict())
        assert again == spec
