"""
Waveform container and audio standardization (16 kHz, mono, 16-bit range)
"""

from dataclasses import dataclass
from math import gcd
from pathlib import Path

import numpy as np
import soundfile as sf
from scipy.signal import resample_poly

TARGET_SR = 16000
MIN_SR = 8000
MAX_SR = 48000
PCM16_MAX = 32767 / 32768


class AudioFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Waveform:
    """
    Audio samples with their sample rate

    Attributes
    ----------
    samples : np.ndarray
        (n,) for mono or (n, channels) for multi-channel audio
    sample_rate : int
    """

    samples: np.ndarray
    sample_rate: int

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate

    @property
    def n_channels(self):
        return 1 if self.samples.ndim == 1 else self.samples.shape[1]


def read_wav(path):
    samples, sr = sf.read(str(path), dtype='float64', always_2d=False)
    return Waveform(samples, int(sr))


def write_wav(path, waveform):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sf.write(str(path), waveform.samples, waveform.sample_rate, subtype='PCM_16')
    return path


def standardize_audio(waveform, target_sr=TARGET_SR):
    """
    Convert to mono float samples at `target_sr` within the 16-bit range

    Parameters
    ----------
    waveform : Waveform
        integer PCM or float input, mono (n,) or channels-last (n, c)
    target_sr : int
        output sample rate (default 16 kHz)

    Returns
    -------
    Waveform

    Raises
    ------
    AudioFormatError
        If the input sample rate is outside [8000, 48000] Hz
    """
    sr = int(waveform.sample_rate)
    if not MIN_SR <= sr <= MAX_SR:
        raise AudioFormatError(f'Unsupported sample rate {sr} Hz, expected {MIN_SR}-{MAX_SR} Hz')

    x = np.asarray(waveform.samples)
    if np.issubdtype(x.dtype, np.integer):
        x = x.astype(np.float64) / 32768.0
    else:
        x = x.astype(np.float64)
    if x.ndim == 2:
        x = x.mean(axis=1)
    elif x.ndim != 1:
        raise AudioFormatError(f'Expected (n,) or (n, channels) samples, got shape {x.shape}')

    if sr != target_sr:
        g = gcd(sr, target_sr)
        x = resample_poly(x, target_sr // g, sr // g)

    x = np.clip(x, -1.0, PCM16_MAX)
    return Waveform(x, target_sr)
