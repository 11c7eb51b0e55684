"""
YIN pitch tracking and per-speaker pitch normalization

The tracker uses the cumulative-mean-normalized difference function of
de Cheveigne & Kawahara on exactly the frames of the mel front end. A frame
is voiced when the first dip of the normalized difference below the
threshold exists inside the 50-600 Hz lag range.
"""

from dataclasses import dataclass, replace

import numpy as np

from data.mel import frame_signal, num_frames


@dataclass(frozen=True)
class PitchContour:
    """
    Attributes
    ----------
    f0 : np.ndarray
        (T,) Hz when unnormalized, z-units when normalized; 0 on unvoiced frames
    voiced : np.ndarray
        (T,) bool
    normalized : bool
    hop : float
        frame shift in seconds, identical to the paired MelSpectrogram
    """

    f0: np.ndarray
    voiced: np.ndarray
    normalized: bool = False
    hop: float = 0.016

    @property
    def n_frames(self):
        return len(self.f0)

    def as_channels(self):
        """(T, 2) encoder input: [f0, voiced]"""
        return np.stack([self.f0, self.voiced.astype(np.float32)], axis=1).astype(np.float32)


@dataclass(frozen=True)
class SpeakerPitchStats:
    speaker_id: str
    mean: float
    std: float
    n_voiced: int


def _difference_function(frames, tau_max):
    """
    YIN difference d(tau) for tau in [0, tau_max] over an integration window
    of len(frame) - tau_max samples, computed with FFT cross-correlation.
    """
    n_frames, win = frames.shape
    w = win - tau_max
    head = frames[:, :w]
    n_fft = 1 << int(np.ceil(np.log2(win + w)))
    spec_head = np.fft.rfft(head, n=n_fft, axis=1)
    spec_full = np.fft.rfft(frames, n=n_fft, axis=1)
    xcorr = np.fft.irfft(np.conj(spec_head) * spec_full, n=n_fft, axis=1)[:, :tau_max + 1]

    energy = np.cumsum(np.concatenate([np.zeros((n_frames, 1)), frames ** 2], axis=1), axis=1)
    e_head = energy[:, w] - energy[:, 0]
    taus = np.arange(tau_max + 1)
    e_lag = energy[:, taus + w] - energy[:, taus]
    diff = e_head[:, None] + e_lag - 2.0 * xcorr
    return np.maximum(diff, 0.0)


def _cumulative_mean_normalized(diff):
    cmnd = np.ones_like(diff)
    taus = np.arange(1, diff.shape[1])
    running = np.cumsum(diff[:, 1:], axis=1)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = diff[:, 1:] * taus / running
    cmnd[:, 1:] = np.where(running > 1e-12, ratio, 1.0)
    return cmnd


def extract_pitch(waveform, cfg):
    """
    Frame-level f0 with voicing decisions (unnormalized)

    Parameters
    ----------
    waveform : Waveform
        standardized mono audio
    cfg : CfgNode
        FRONTEND section: framing, f0 range and the voicing threshold

    Returns
    -------
    PitchContour
        aligned with extract_mel (same T, same hop); a signal shorter than one
        window yields an empty contour
    """
    fe = cfg.FRONTEND
    sr = fe.SAMPLE_RATE
    hop = fe.HOP_LENGTH / sr
    x = np.asarray(waveform.samples, dtype=np.float64)
    n_frames = num_frames(len(x), fe.WIN_LENGTH, fe.HOP_LENGTH)
    if n_frames == 0:
        return PitchContour(np.zeros(0, np.float32), np.zeros(0, bool), False, hop)

    tau_min = int(np.ceil(sr / fe.F0_MAX))
    tau_max = int(np.floor(sr / fe.F0_MIN))
    frames = frame_signal(x, fe.WIN_LENGTH, fe.HOP_LENGTH)
    cmnd = _cumulative_mean_normalized(_difference_function(frames, tau_max))

    f0 = np.zeros(n_frames)
    voiced = np.zeros(n_frames, dtype=bool)
    below = cmnd[:, tau_min:tau_max + 1] < fe.YIN_THRESHOLD
    has_dip = below.any(axis=1)
    for t in np.flatnonzero(has_dip):
        tau = tau_min + int(np.argmax(below[t]))
        # walk down to the bottom of the dip
        while tau + 1 <= tau_max and cmnd[t, tau + 1] < cmnd[t, tau]:
            tau += 1
        shift = 0.0
        if tau_min < tau < tau_max:
            a, b, c = cmnd[t, tau - 1], cmnd[t, tau], cmnd[t, tau + 1]
            denom = a - 2.0 * b + c
            if denom > 1e-12:
                shift = float(np.clip(0.5 * (a - c) / denom, -0.5, 0.5))
        f0[t] = np.clip(sr / (tau + shift), fe.F0_MIN, fe.F0_MAX)
        voiced[t] = True

    return PitchContour(f0.astype(np.float32), voiced, False, hop)


def compute_speaker_pitch_stats(contours, speaker_id):
    """
    Mean and population std of f0 over the voiced frames of all contours

    Degenerate speakers (fewer than two voiced frames or a constant f0) get
    std = 1 so that normalization never divides by zero; a speaker without
    voiced frames gets (0, 1, 0).
    """
    for c in contours:
        if c.normalized:
            raise ValueError('Pitch statistics must be computed on unnormalized contours')
    values = [np.asarray(c.f0, dtype=np.float64)[c.voiced] for c in contours]
    values = np.concatenate(values) if values else np.zeros(0)
    n_voiced = int(values.size)
    if n_voiced == 0:
        return SpeakerPitchStats(speaker_id, 0.0, 1.0, 0)
    mean = float(values.mean())
    std = float(values.std())
    if n_voiced < 2 or not std > 0:
        std = 1.0
    return SpeakerPitchStats(speaker_id, mean, std, n_voiced)


def normalize_pitch(contour, stats):
    """
    Z-normalize voiced frames with the speaker statistics

    Raises
    ------
    ValueError
        If the contour is already normalized
    """
    if contour.normalized:
        raise ValueError('Pitch contour is already normalized')
    f0 = np.asarray(contour.f0, dtype=np.float64)
    z = np.where(contour.voiced, (f0 - stats.mean) / stats.std, 0.0)
    return replace(contour, f0=z.astype(np.float32), normalized=True)
