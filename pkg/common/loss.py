import numpy as np
import torch


def reconstruction_loss(target, predicted):
    """
    Squared l2 reconstruction error between two mel spectrograms

    Returns
    -------
    (float, float)
        total squared error and its per-entry mean
    """
    target = np.asarray(getattr(target, 'frames', target), dtype=np.float64)
    predicted = np.asarray(getattr(predicted, 'frames', predicted), dtype=np.float64)
    if target.shape != predicted.shape:
        raise ValueError(f'Shape mismatch: {target.shape} vs {predicted.shape}')
    diff = target - predicted
    total = float(np.sum(diff * diff))
    return total, total / max(diff.size, 1)


def masked_mse(predicted, target, lengths=None):
    """
    Per-entry mean squared error over a padded (B, T, D) batch; frames at or
    beyond `lengths[b]` are ignored
    """
    assert predicted.shape == target.shape
    sq = (predicted - target) ** 2
    if lengths is None:
        return torch.mean(sq)
    steps = torch.arange(sq.shape[1], device=sq.device)[None, :]
    mask = (steps < lengths[:, None]).to(sq.dtype)[..., None]
    return torch.sum(sq * mask) / (torch.sum(mask) * sq.shape[-1])


def mean_frame_baseline_mse(mels):
    """
    Per-entry MSE of the constant predictor that outputs the corpus mean frame
    for every frame of every utterance
    """
    frames = np.concatenate([np.asarray(getattr(m, 'frames', m), dtype=np.float64) for m in mels])
    mean_frame = frames.mean(axis=0, keepdims=True)
    return float(np.mean((frames - mean_frame) ** 2))


def corpus_mse(targets, predictions):
    """Per-entry MSE pooled over a list of utterance pairs"""
    total, count = 0.0, 0
    for t, p in zip(targets, predictions):
        err, _ = reconstruction_loss(t, p)
        total += err
        count += np.asarray(getattr(t, 'frames', t)).size
    return total / max(count, 1)
