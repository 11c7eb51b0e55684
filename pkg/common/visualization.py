import json
from pathlib import Path

import matplotlib
matplotlib.use('Agg')

import imageio.v2 as imageio
import matplotlib.pyplot as plt
import numpy as np
import seaborn as sns

from data.labels import LABEL_ORDER


def spectrogram_rgb(frames, vmin, vmax, cmap, scale=1):
    """
    (T, n_mels) log-mel -> (n_mels * scale, T * scale, 3) uint8 image with
    time on x and the lowest mel bin in the bottom row
    """
    frames = np.asarray(frames, dtype=np.float64)
    norm = np.clip((frames.T[::-1] - vmin) / (vmax - vmin), 0.0, 1.0)
    rgba = matplotlib.colormaps[cmap](norm)
    rgb = np.round(rgba[..., :3] * 255).astype(np.uint8)
    if scale > 1:
        rgb = np.repeat(np.repeat(rgb, scale, axis=0), scale, axis=1)
    return rgb


def render_spectrogram_image(mel, path, cfg):
    """
    Write a mel spectrogram as PNG with a fixed colour scale

    The colour range is [log(MAG_FLOOR), FRONTEND.IMAGE_VMAX] for every
    image; a JSON sidecar next to the PNG records range, colormap and the
    logical (unscaled) size.

    Parameters
    ----------
    mel : MelSpectrogram or np.ndarray
    path : str or Path
        PNG file; its directory must exist
    cfg : CfgNode

    Returns
    -------
    Path
        the PNG path

    Raises
    ------
    OSError
        If the target directory does not exist or is not writable
    """
    fe = cfg.FRONTEND
    path = Path(path)
    if not path.parent.is_dir():
        raise FileNotFoundError(f'Cannot write {path}: directory does not exist')
    frames = getattr(mel, 'frames', mel)
    vmin = float(np.log(fe.MAG_FLOOR))
    vmax = float(fe.IMAGE_VMAX)
    rgb = spectrogram_rgb(frames, vmin, vmax, fe.IMAGE_CMAP, fe.IMAGE_SCALE)
    imageio.imwrite(path, rgb)

    sidecar = {
        'vmin': vmin,
        'vmax': vmax,
        'colormap': fe.IMAGE_CMAP,
        'scale': int(fe.IMAGE_SCALE),
        'n_frames': int(frames.shape[0]),
        'n_mels': int(frames.shape[1]),
    }
    with path.with_suffix('.json').open('w', encoding='utf-8') as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
    return path


def render_confusion_heatmap(confusion, path, title='', cmap='Blues'):
    """Row-normalized confusion matrix (percent) on a fixed 0-100 scale"""
    names = [label.value for label in LABEL_ORDER]
    fig, ax = plt.subplots(figsize=(4, 3.5))
    sns.heatmap(confusion.normalized(), vmin=0, vmax=100, cmap=cmap, annot=True, fmt='.1f',
                xticklabels=names, yticklabels=names, square=True, cbar=True, ax=ax)
    ax.set_xlabel('prediction')
    ax.set_ylabel('ground truth')
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, metadata={'Software': None})
    plt.close(fig)
    return Path(path)
