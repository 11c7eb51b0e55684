"""
Model artifacts: a directory holding model.pth (state dict) and model.json
(sidecar with config section, config hash, seed, provenance and model hash)
"""

import json
import logging
from pathlib import Path

import torch

from common.utils import state_dict_hash

logger = logging.getLogger(__name__)

WEIGHTS_FILE = 'model.pth'
SIDECAR_FILE = 'model.json'


class ArtifactMismatchError(ValueError):
    pass


def save_artifact(out_dir, module, meta):
    """
    Store weights and sidecar; returns the model hash written to the sidecar
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_hash = state_dict_hash(module)
    torch.save(module.state_dict(), out_dir / WEIGHTS_FILE)
    sidecar = dict(meta, model_hash=model_hash)
    with (out_dir / SIDECAR_FILE).open('w', encoding='utf-8') as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
    logger.info(f'=> saved {meta.get("kind", "model")} artifact to {out_dir}')
    return model_hash


def read_sidecar(path):
    path = Path(path)
    sidecar = path / SIDECAR_FILE
    if not sidecar.exists():
        raise FileNotFoundError(f'No model artifact at {path} ({SIDECAR_FILE} missing)')
    with sidecar.open('r', encoding='utf-8') as fh:
        return json.load(fh)


def load_state(path):
    return torch.load(Path(path) / WEIGHTS_FILE, map_location=lambda storage, loc: storage)


def check_match(what, recorded, expected, force=False):
    """
    Compare a recorded provenance value with the current one

    Raises
    ------
    ArtifactMismatchError
        If they differ and `force` is not set
    """
    if recorded == expected:
        return
    msg = f'{what} mismatch: artifact has {recorded}, current run has {expected}'
    if force:
        logger.warning(f'{msg} (ignored, --force)')
        return
    raise ArtifactMismatchError(msg)


def check_kind(meta, kind):
    if meta.get('kind') != kind:
        raise ArtifactMismatchError(f'Expected a {kind} artifact, got {meta.get("kind")}')
