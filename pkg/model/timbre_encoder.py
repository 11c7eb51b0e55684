"""
d-vector speaker encoder

Frame-wise MLP, temporal average pooling, linear embedding layer and l2
normalization; a speaker-classification head is only used for training.
"""

import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from tqdm import tqdm
from yacs.config import CfgNode as CN

from common.artifacts import check_kind, check_match, load_state, read_sidecar, save_artifact
from common.config import section_dict, section_hash
from common.generators import CropGenerator
from common.utils import wrap
from model.training import check_finite

logger = logging.getLogger(__name__)

MIN_SPEAKERS = 4
MIN_UTTERANCES = 8


@dataclass(frozen=True)
class SpeakerVector:
    values: np.ndarray
    source_utterance: str = ''


class TimbreModel(nn.Module):
    def __init__(self, timbre_cfg, speakers, n_mels=80):
        super().__init__()
        self.speakers = list(speakers)
        self.dim = timbre_cfg.DIM
        layers = []
        in_dim = n_mels
        for _ in range(timbre_cfg.N_LAYERS):
            layers += [nn.Linear(in_dim, timbre_cfg.HIDDEN), nn.ReLU()]
            in_dim = timbre_cfg.HIDDEN
        self.frame_net = nn.Sequential(*layers)
        self.embedding = nn.Linear(in_dim, self.dim)
        self.classifier = nn.Linear(self.dim, max(len(self.speakers), 1))

        self.register_buffer('mel_mean', torch.zeros(n_mels))
        self.register_buffer('mel_std', torch.ones(n_mels))

    def fit_normalizer(self, mels):
        frames = np.concatenate([np.asarray(getattr(m, 'frames', m), np.float64) for m in mels])
        std = frames.std(axis=0)
        self.mel_mean.copy_(torch.as_tensor(frames.mean(axis=0), dtype=self.mel_mean.dtype))
        self.mel_std.copy_(torch.as_tensor(np.where(std > 1e-5, std, 1.0), dtype=self.mel_std.dtype))

    def embed(self, x):
        """(B, T, n_mels) -> (B, dim) unit vectors"""
        h = self.frame_net((x - self.mel_mean) / self.mel_std)
        return F.normalize(self.embedding(h.mean(dim=1)), dim=-1)

    def forward(self, x):
        return self.classifier(self.embed(x))


def timbre_encode(mel, model, source_utterance=''):
    """
    Speaker vector of one utterance; depends only on the mel frames and the
    model parameters

    Raises
    ------
    ValueError
        If the spectrogram has no frames
    """
    frames = np.asarray(getattr(mel, 'frames', mel), dtype=np.float32)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise ValueError(f'Cannot encode an empty spectrogram (shape {frames.shape})')
    model.eval()
    dtype = next(model.parameters()).dtype
    values = wrap(model.embed, torch.as_tensor(frames, dtype=dtype).unsqueeze(0))[0]
    return SpeakerVector(values.astype(np.float32), source_utterance)


def utterance_timbre_vectors(store, ids, model):
    """One vector per utterance id, each encoded from that utterance's own mel"""
    return {i: timbre_encode(store.load(i).mel, model, i) for i in ids}


def _eligible_speakers(manifest):
    counts = Counter(r.speaker_id for r in manifest.records)
    eligible = sorted(s for s, n in counts.items() if n >= MIN_UTTERANCES)
    if len(eligible) < MIN_SPEAKERS:
        raise ValueError(f'Timbre encoder needs at least {MIN_SPEAKERS} speakers with '
                         f'{MIN_UTTERANCES}+ utterances, got {len(eligible)} ({dict(counts)})')
    return eligible


def train_timbre_encoder(manifest, store, cfg, seed):
    """
    Train the speaker encoder with a plain cross-entropy objective

    Parameters
    ----------
    manifest : CorpusManifest
        training utterances
    store : FeatureStore
    cfg : CfgNode
        TIMBRE section
    seed : int

    Returns
    -------
    (TimbreModel, dict)
        the model and its training history
    """
    tc = cfg.TIMBRE
    speakers = _eligible_speakers(manifest)
    records = [r for r in manifest.records if r.speaker_id in speakers]
    missing = store.missing([r.id for r in records])
    if missing:
        raise ValueError(f'Missing features for {len(missing)} utterances: {missing}')
    mels = [store.load(r.id).mel.frames for r in records]
    targets = np.array([speakers.index(r.speaker_id) for r in records])

    torch.manual_seed(seed)
    model = TimbreModel(tc, speakers, cfg.FRONTEND.N_MELS)
    model.fit_normalizer(mels)
    optimizer = torch.optim.Adam(model.parameters(), lr=tc.LR)
    generator = CropGenerator(tc.BATCH_SIZE, mels, tc.CROP_FRAMES, extras=list(targets), random_seed=seed)
    history = {'loss': []}

    logger.info(f'=> training timbre encoder on {len(records)} utterances of {len(speakers)} speakers')
    model.train()
    for step in tqdm(range(tc.STEPS), desc='train-timbre'):
        _, (batch,), speaker_idx = generator.next_batch()
        logits = model(torch.from_numpy(batch))
        loss = F.cross_entropy(logits, torch.as_tensor(speaker_idx, dtype=torch.long))
        check_finite(loss.item(), step, 'Timbre encoder')
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        history['loss'].append(float(loss.item()))
        logger.debug(f'timbre step {step}: loss {loss.item():.4f}')
        if (step + 1) % tc.LOG_EVERY == 0:
            logger.info(f'=> timbre step {step + 1}/{tc.STEPS}: loss {loss.item():.4f}')
    model.eval()
    return model, history


def save_timbre_model(model, out_dir, cfg, **meta):
    sidecar = {
        'kind': 'timbre',
        'config': section_dict(cfg, 'TIMBRE'),
        'config_hash': section_hash(cfg, 'TIMBRE'),
        'speakers': model.speakers,
        'n_mels': int(model.mel_mean.shape[0]),
        **meta,
    }
    return save_artifact(out_dir, model, sidecar)


def load_timbre_model(path, cfg=None, force=False):
    meta = read_sidecar(path)
    check_kind(meta, 'timbre')
    if cfg is not None:
        check_match('Timbre config hash', meta['config_hash'], section_hash(cfg, 'TIMBRE'), force)
    model = TimbreModel(CN(meta['config']).TIMBRE, meta['speakers'], meta['n_mels'])
    model.load_state_dict(load_state(path))
    model.eval()
    logger.info(f'=> loaded timbre encoder {meta["model_hash"][:12]} from {path}')
    return model, meta
