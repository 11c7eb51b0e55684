"""
80-bin log-mel spectrogram front end

Framing is shared with the pitch tracker (no centering, frame k covers
samples [k*hop, k*hop + win)), so both produce the same number of frames.
"""

from dataclasses import dataclass
from functools import lru_cache

import librosa
import numpy as np
from scipy.signal import get_window

from data.audio import AudioFormatError


@dataclass(frozen=True)
class MelSpectrogram:
    """
    Attributes
    ----------
    frames : np.ndarray
        (T, n_mels) natural-log magnitudes, floored before the log
    hop : float
        frame shift in seconds
    sample_rate : int
    """

    frames: np.ndarray
    hop: float
    sample_rate: int

    @property
    def n_frames(self):
        return self.frames.shape[0]


def num_frames(n_samples, win_length, hop_length):
    if n_samples < win_length:
        return 0
    return (n_samples - win_length) // hop_length + 1


def frame_signal(x, win_length, hop_length):
    """(T, win_length) view of the signal"""
    return np.lib.stride_tricks.sliding_window_view(x, win_length)[::hop_length]


@lru_cache(maxsize=8)
def mel_basis(sample_rate, n_fft, n_mels, fmin, fmax):
    return librosa.filters.mel(sr=sample_rate, n_fft=n_fft, n_mels=n_mels,
                               fmin=fmin, fmax=fmax, htk=True)


def mel_center_frequencies(n_mels, fmin, fmax):
    """Filter centres from the HTK mel formula m = 2595 log10(1 + f/700)"""
    points = np.linspace(2595.0 * np.log10(1.0 + fmin / 700.0),
                         2595.0 * np.log10(1.0 + fmax / 700.0), n_mels + 2)
    return 700.0 * (10.0 ** (points[1:-1] / 2595.0) - 1.0)


def extract_mel(waveform, cfg):
    """
    Log-mel spectrogram of a standardized waveform

    Parameters
    ----------
    waveform : Waveform
        mono audio at FRONTEND.SAMPLE_RATE
    cfg : CfgNode
        run configuration (FRONTEND section is used)

    Returns
    -------
    MelSpectrogram

    Raises
    ------
    AudioFormatError
        If the waveform is shorter than one analysis window or has the
        wrong sample rate
    """
    fe = cfg.FRONTEND
    if waveform.sample_rate != fe.SAMPLE_RATE:
        raise AudioFormatError(f'Expected {fe.SAMPLE_RATE} Hz audio, got {waveform.sample_rate} Hz')
    x = np.asarray(waveform.samples, dtype=np.float64)
    if x.ndim != 1:
        raise AudioFormatError('extract_mel expects mono audio, standardize it first')
    if len(x) < fe.WIN_LENGTH:
        raise AudioFormatError(f'Waveform has {len(x)} samples, shorter than one '
                               f'{fe.WIN_LENGTH}-sample window')

    frames = frame_signal(x, fe.WIN_LENGTH, fe.HOP_LENGTH)
    window = get_window('hann', fe.WIN_LENGTH, fftbins=True)
    magnitude = np.abs(np.fft.rfft(frames * window, n=fe.WIN_LENGTH, axis=1))
    basis = mel_basis(fe.SAMPLE_RATE, fe.WIN_LENGTH, fe.N_MELS, fe.FMIN, fe.FMAX)
    mel = magnitude @ basis.T
    log_mel = np.log(np.maximum(mel, fe.MAG_FLOOR))
    return MelSpectrogram(log_mel.astype(np.float32), fe.HOP_LENGTH / fe.SAMPLE_RATE, fe.SAMPLE_RATE)
