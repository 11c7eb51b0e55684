import numpy as np
from scipy.interpolate import interp1d


def interp_along_time(data, n_out):
    """
    Linearly resample a (T, ...) sequence to n_out frames

    Output frame j sits at input position (j + 0.5) * T / n_out - 0.5 (frame
    centres are aligned), clipped to the valid range, so every output frame
    is a convex combination of two neighbouring input frames.
    """
    data = np.asarray(data)
    length = len(data)
    if n_out == length:
        return data.copy()
    if n_out == 0:
        return data[:0].copy()
    if length == 1:
        return np.repeat(data, n_out, axis=0)
    pos = (np.arange(n_out) + 0.5) * (length / n_out) - 0.5
    pos = np.clip(pos, 0, length - 1)
    return interp1d(np.arange(length), data, kind='linear', axis=0)(pos).astype(data.dtype)


def random_resample(seq, rng_seed, seg_range=(19, 32), alpha_range=(0.5, 1.5)):
    """
    Segment-wise random time stretching

    The sequence is cut into consecutive segments with lengths drawn
    uniformly from seg_range (inclusive); each segment is resampled by a
    factor drawn uniformly from alpha_range. Segment output lengths are taken
    from the ceiling of the cumulative scaled length, which keeps the total
    length at ceil(sum(alpha_i * L_i)).

    Parameters
    ----------
    seq : np.ndarray
        (T,) or (T, D) frame sequence, T >= 1
    rng_seed : int
        seed of the segment and factor draws
    seg_range : tuple of int
        minimum and maximum segment length in frames
    alpha_range : tuple of float
        minimum and maximum stretch factor

    Returns
    -------
    np.ndarray
        resampled sequence with the same trailing dimensions
    """
    seq = np.asarray(seq)
    if seq.ndim == 0 or len(seq) == 0:
        raise ValueError('random_resample needs a sequence with at least one frame')
    seg_min, seg_max = int(seg_range[0]), int(seg_range[1])
    a_min, a_max = float(alpha_range[0]), float(alpha_range[1])

    rng = np.random.default_rng(rng_seed)
    pieces = []
    start = 0
    scaled = 0.0
    produced = 0
    while start < len(seq):
        seg_len = int(rng.integers(seg_min, seg_max + 1))
        segment = seq[start:start + seg_len]
        start += seg_len
        alpha = rng.uniform(a_min, a_max)
        scaled += alpha * len(segment)
        target = int(np.ceil(scaled - 1e-9))
        n_out = target - produced
        produced = target
        if n_out > 0:
            pieces.append(interp_along_time(segment, n_out))
    return np.concatenate(pieces, axis=0)
