import numpy as np
import pytest

from data.audio import Waveform
from data.pitch import PitchContour, compute_speaker_pitch_stats, extract_pitch, normalize_pitch


def _impulses(period, n=16000):
    x = np.zeros(n)
    x[::period] = 1.0
    return Waveform(x, 16000)


class TestExtractPitch:
    def test_impulse_train(self, cfg):
        contour = extract_pitch(_impulses(80), cfg)
        assert contour.voiced.mean() > 0.9
        assert 196.0 <= np.median(contour.f0[contour.voiced]) <= 204.0

    @pytest.mark.parametrize('freq', [100.0, 110.0, 120.0])
    def test_sines(self, cfg, freq):
        t = np.arange(16000) / 16000
        contour = extract_pitch(Waveform(0.5 * np.sin(2 * np.pi * freq * t), 16000), cfg)
        assert contour.voiced.mean() > 0.9
        assert np.median(contour.f0[contour.voiced]) == pytest.approx(freq, rel=0.02)

    def test_noise_mostly_unvoiced(self, cfg):
        for seed in range(20):
            noise = np.random.default_rng(seed).normal(0.0, 0.3, 16000)
            assert extract_pitch(Waveform(noise, 16000), cfg).voiced.mean() < 0.2

    def test_range_and_unvoiced_zero(self, cfg):
        contour = extract_pitch(_impulses(80), cfg)
        f0 = contour.f0[contour.voiced]
        assert np.all((f0 >= 50.0) & (f0 <= 600.0))
        assert np.all(contour.f0[~contour.voiced] == 0)

    def test_silence(self, cfg):
        contour = extract_pitch(Waveform(np.zeros(8000), 16000), cfg)
        assert not contour.voiced.any()

    def test_shorter_than_window(self, cfg):
        assert extract_pitch(Waveform(np.zeros(500), 16000), cfg).n_frames == 0


class TestNormalizePitch:
    def test_zero_mean_unit_std(self, rng):
        contours = []
        for _ in range(3):
            voiced = rng.random(200) < 0.7
            contours.append(PitchContour(np.where(voiced, rng.uniform(90, 250, 200), 0).astype(np.float32),
                                         voiced))
        stats = compute_speaker_pitch_stats(contours, 'spk')
        z = np.concatenate([normalize_pitch(c, stats).f0[c.voiced] for c in contours]).astype(np.float64)
        assert abs(z.mean()) < 1e-6
        assert abs(z.std() - 1.0) < 1e-6

    def test_unvoiced_stay_zero(self, rng):
        voiced = np.array([True, False, True, False])
        contour = PitchContour(np.array([100, 0, 200, 0], np.float32), voiced)
        out = normalize_pitch(contour, compute_speaker_pitch_stats([contour], 'spk'))
        assert out.normalized
        np.testing.assert_allclose(out.f0, [-1, 0, 1, 0])

    def test_degenerate_speakers(self):
        silent = PitchContour(np.zeros(5, np.float32), np.zeros(5, bool))
        assert compute_speaker_pitch_stats([silent], 's') == compute_speaker_pitch_stats([], 's')
        stats = compute_speaker_pitch_stats([silent], 's')
        assert (stats.mean, stats.std, stats.n_voiced) == (0.0, 1.0, 0)
        flat = PitchContour(np.full(4, 120, np.float32), np.ones(4, bool))
        stats = compute_speaker_pitch_stats([flat], 's')
        assert stats.std == 1.0
        np.testing.assert_allclose(normalize_pitch(flat, stats).f0, 0.0)

    def test_double_normalization(self):
        contour = PitchContour(np.ones(3, np.float32), np.ones(3, bool), normalized=True)
        with pytest.raises(ValueError):
            normalize_pitch(contour, compute_speaker_pitch_stats([], 's'))
        with pytest.raises(ValueError):
            compute_speaker_pitch_stats([contour], 's')
