import numpy as np
import pytest

from data.audio import AudioFormatError, Waveform, read_wav, standardize_audio, write_wav


class TestStandardizeAudio:
    def test_stereo_to_mono(self):
        samples = np.stack([np.full(800, 0.2), np.full(800, 0.4)], axis=1)
        out = standardize_audio(Waveform(samples, 16000))
        assert out.samples.ndim == 1
        np.testing.assert_allclose(out.samples, 0.3)

    def test_resample_length(self):
        out = standardize_audio(Waveform(np.zeros(44100), 44100))
        assert out.sample_rate == 16000
        assert len(out.samples) == 16000

    def test_int_pcm_and_clipping(self):
        pcm = np.array([-32768, 0, 32767, 16384], dtype=np.int16)
        out = standardize_audio(Waveform(pcm, 16000))
        np.testing.assert_allclose(out.samples, [-1.0, 0.0, 32767 / 32768, 0.5])
        loud = standardize_audio(Waveform(np.array([2.0, -3.0]), 16000))
        assert loud.samples.max() <= 32767 / 32768 and loud.samples.min() >= -1.0

    @pytest.mark.parametrize('sr', [4000, 96000])
    def test_unsupported_rate(self, sr):
        with pytest.raises(AudioFormatError):
            standardize_audio(Waveform(np.zeros(100), sr))


def test_wav_io(tmp_path):
    x = 0.5 * np.sin(2 * np.pi * 220 * np.arange(1600) / 16000)
    path = write_wav(tmp_path / 'sub' / 'a.wav', Waveform(x, 16000))
    back = read_wav(path)
    assert back.sample_rate == 16000
    np.testing.assert_allclose(back.samples, x, atol=2 / 32768)
