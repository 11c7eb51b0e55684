"""
Attention-based convolutional recurrent emotion classifier

The input is a 3-channel (static, delta, delta-delta) log-mel image. A
frequency-pooled convolution and five further convolutions learn local
patterns, a full connection maps every frame to a vector, a single-layer
BiLSTM models the sequence, additive attention pools it, and a small head
produces the four-class posterior.
"""

import logging
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from tqdm import tqdm
from yacs.config import CfgNode as CN

from common.artifacts import (ArtifactMismatchError, check_kind, check_match, load_state,
                              read_sidecar, save_artifact)
from common.config import section_dict, section_hash
from common.generators import CropGenerator, SequenceGenerator
from common.metrics import uar
from data.labels import LABEL_ORDER, NUM_CLASSES
from model.training import check_finite, snapshot

logger = logging.getLogger(__name__)

N_CHANNELS = 3


@dataclass(frozen=True)
class EmotionPosterior:
    probs: np.ndarray
    attention: np.ndarray

    def predict(self):
        """argmax; ties go to the lowest class index (A < H < S < N)"""
        return LABEL_ORDER[int(np.argmax(self.probs))]


@dataclass(frozen=True)
class SerExample:
    utt_id: str
    mel: object
    label: object
    mask_tag: str = 'raw'

    @property
    def frames(self):
        return np.asarray(getattr(self.mel, 'frames', self.mel), dtype=np.float32)


def _forward_difference(x):
    d = np.diff(x, axis=0)
    return np.concatenate([d, d[-1:]], axis=0)


def make_acrnn_input(mel):
    """
    (3, T, n_mels) stack of the mel, its forward difference (last difference
    repeated) and the same difference applied to the first difference

    Raises
    ------
    ValueError
        If the spectrogram has fewer than 3 frames
    """
    frames = np.asarray(getattr(mel, 'frames', mel), dtype=np.float32)
    if frames.ndim != 2 or frames.shape[0] < 3:
        raise ValueError(f'ACRNN input needs at least 3 frames, got shape {frames.shape}')
    delta = _forward_difference(frames)
    delta2 = _forward_difference(delta)
    return np.stack([frames, delta, delta2]).astype(np.float32)


class AdditiveAttention(nn.Module):
    def __init__(self, in_dim, attn_dim):
        super().__init__()
        self.proj = nn.Linear(in_dim, attn_dim)
        self.query = nn.Linear(attn_dim, 1, bias=False)

    def forward(self, h):
        """(B, T, D) -> pooled (B, D), weights (B, T)"""
        weights = torch.softmax(self.query(torch.tanh(self.proj(h))).squeeze(-1), dim=1)
        return torch.sum(weights.unsqueeze(-1) * h, dim=1), weights


class AcrnnModel(nn.Module):
    def __init__(self, ser_cfg, n_mels=80, mask_tag='raw'):
        super().__init__()
        channels = list(ser_cfg.CONV_CHANNELS)
        assert len(channels) == 6, 'One pooled convolution plus five convolutions'
        kt, kf = ser_cfg.KERNEL
        self.n_mels = n_mels
        self.mask_tag = mask_tag

        convs = []
        in_ch = N_CHANNELS
        for out_ch in channels:
            convs.append(nn.Conv2d(in_ch, out_ch, (kt, kf), padding=(kt // 2, kf // 2)))
            in_ch = out_ch
        self.convs = nn.ModuleList(convs)
        self.pool = nn.MaxPool2d((1, ser_cfg.FREQ_POOL))
        pooled_bins = n_mels // ser_cfg.FREQ_POOL
        self.fc = nn.Linear(channels[-1] * pooled_bins, ser_cfg.FC_DIM)
        self.rnn = nn.LSTM(ser_cfg.FC_DIM, ser_cfg.RNN_HIDDEN, 1, batch_first=True, bidirectional=True)
        self.attention = AdditiveAttention(2 * ser_cfg.RNN_HIDDEN, ser_cfg.ATTN_DIM)
        self.head = nn.Sequential(
            nn.Linear(2 * ser_cfg.RNN_HIDDEN, ser_cfg.HEAD_DIM),
            nn.ReLU(),
            nn.Dropout(ser_cfg.DROPOUT),
            nn.Linear(ser_cfg.HEAD_DIM, NUM_CLASSES),
        )

        self.register_buffer('in_mean', torch.zeros(N_CHANNELS, n_mels))
        self.register_buffer('in_std', torch.ones(N_CHANNELS, n_mels))

    def fit_normalizer(self, inputs):
        """Per-channel, per-bin statistics over all frames of (3, T, n_mels) inputs"""
        stacked = np.concatenate([np.asarray(x, np.float64) for x in inputs], axis=1)
        std = stacked.std(axis=1)
        self.in_mean.copy_(torch.as_tensor(stacked.mean(axis=1), dtype=self.in_mean.dtype))
        self.in_std.copy_(torch.as_tensor(np.where(std > 1e-5, std, 1.0), dtype=self.in_std.dtype))

    def sequence(self, x):
        """(B, 3, T, n_mels) -> frame representations (B, T, 2 * hidden)"""
        assert x.dim() == 4 and x.shape[1] == N_CHANNELS and x.shape[3] == self.n_mels
        x = (x - self.in_mean[None, :, None, :]) / self.in_std[None, :, None, :]
        x = self.pool(F.leaky_relu(self.convs[0](x)))
        for conv in self.convs[1:]:
            x = F.leaky_relu(conv(x))
        b, c, t, f = x.shape
        x = x.permute(0, 2, 1, 3).reshape(b, t, c * f)
        x = F.leaky_relu(self.fc(x))
        h, _ = self.rnn(x)
        return h

    def forward(self, x):
        """Returns logits (B, 4) and attention weights (B, T)"""
        h = self.sequence(x)
        pooled, weights = self.attention(h)
        return self.head(pooled), weights


def _as_input(x, model):
    x = np.asarray(x)
    if x.ndim != 3 or x.shape[0] != N_CHANNELS or x.shape[2] != model.n_mels:
        raise ValueError(f'ACRNN input must be ({N_CHANNELS}, T, {model.n_mels}), got {x.shape}')
    return x


def acrnn_forward(x, model):
    """
    Posterior and attention weights of one input

    Raises
    ------
    ValueError
        If `x` is not a (3, T, n_mels) array
    """
    x = _as_input(x, model)
    model.eval()
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        logits, weights = model(torch.as_tensor(x, dtype=dtype)[None])
        probs = torch.softmax(logits, dim=-1)
    return EmotionPosterior(probs[0].cpu().numpy(), weights[0].cpu().numpy())


def _check_tags(examples, mask_tag):
    tags = sorted({e.mask_tag for e in examples})
    if len(tags) > 1:
        raise ValueError(f'Examples mix factor-mask tags {tags}')
    if tags and tags[0] != mask_tag:
        raise ValueError(f'Examples are tagged {tags[0]}, training was requested for {mask_tag}')


def evaluate_acrnn(model, examples):
    """
    Predicted labels and posteriors for a list of SerExample

    Raises
    ------
    ArtifactMismatchError
        If the examples were produced under another factor mask than the model
    """
    wrong = sorted({e.mask_tag for e in examples if e.mask_tag != model.mask_tag})
    if wrong:
        raise ArtifactMismatchError(f'Model was trained on {model.mask_tag} data, got examples tagged {wrong}')
    posteriors = []
    generator = SequenceGenerator([make_acrnn_input(e.frames) for e in examples])
    for x in generator.next_epoch():
        posteriors.append(acrnn_forward(x[0], model))
    return [p.predict() for p in posteriors], posteriors


def _class_weights(labels):
    counts = np.bincount([lab.class_index for lab in labels], minlength=NUM_CLASSES).astype(np.float64)
    present = counts > 0
    weights = np.ones(NUM_CLASSES)
    weights[present] = counts.sum() / (present.sum() * counts[present])
    return torch.as_tensor(weights, dtype=torch.float32)


def train_acrnn(train_examples, valid_examples, cfg, mask_tag, seed):
    """
    Train an ACRNN from scratch on one system's data

    Parameters
    ----------
    train_examples, valid_examples : list of SerExample
    cfg : CfgNode
        SER section
    mask_tag : str
        factor mask the data was produced under ('raw' for original features)
    seed : int

    Returns
    -------
    (AcrnnModel, dict)
        model with the best validation-UAR weights restored and its history

    Raises
    ------
    ValueError
        If the examples mix mask tags or carry a tag other than `mask_tag`
    """
    sc = cfg.SER
    if not train_examples:
        raise ValueError('ACRNN training needs at least one example')
    _check_tags(list(train_examples) + list(valid_examples), mask_tag)

    torch.manual_seed(seed)
    model = AcrnnModel(sc, cfg.FRONTEND.N_MELS, mask_tag)
    inputs = [make_acrnn_input(e.frames) for e in train_examples]
    model.fit_normalizer(inputs)
    optimizer = torch.optim.Adam(model.parameters(), lr=sc.LR)
    weights = _class_weights([e.label for e in train_examples]) if sc.CLASS_WEIGHTS else None

    # crops are taken along time, so the generator sees (T, 3, n_mels)
    sequences = [x.transpose(1, 0, 2) for x in inputs]
    targets = [e.label.class_index for e in train_examples]
    generator = CropGenerator(sc.BATCH_SIZE, sequences, sc.CROP_FRAMES, extras=targets, random_seed=seed)

    history = {'loss': [], 'valid_uar': [], 'best_uar': None, 'stopped_at': sc.STEPS}
    best_uar, best_state, bad_evals = -1.0, None, 0

    logger.info(f'=> training ACRNN ({mask_tag}) on {len(train_examples)} examples')
    for step in tqdm(range(sc.STEPS), desc=f'train-ser {mask_tag}'):
        model.train()
        _, (batch,), labels = generator.next_batch()
        logits, _ = model(torch.from_numpy(batch).permute(0, 2, 1, 3))
        loss = F.cross_entropy(logits, torch.as_tensor(labels, dtype=torch.long), weight=weights)
        check_finite(loss.item(), step, 'ACRNN')
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        history['loss'].append(float(loss.item()))
        logger.debug(f'ser step {step}: loss {loss.item():.4f}')
        if (step + 1) % sc.LOG_EVERY == 0:
            logger.info(f'=> ser step {step + 1}/{sc.STEPS}: loss {loss.item():.4f}')

        if valid_examples and (step + 1) % sc.EVAL_EVERY == 0:
            preds, _ = evaluate_acrnn(model, valid_examples)
            score = uar(preds, [e.label for e in valid_examples])
            history['valid_uar'].append((step + 1, score))
            logger.info(f'=> ser step {step + 1}: validation UAR {score:.2f}')
            if score > best_uar:
                best_uar, best_state, bad_evals = score, snapshot(model), 0
            else:
                bad_evals += 1
                if bad_evals >= sc.PATIENCE:
                    history['stopped_at'] = step + 1
                    logger.info(f'=> early stopping at step {step + 1} (best UAR {best_uar:.2f})')
                    break

    if best_state is not None:
        model.load_state_dict(best_state)
        history['best_uar'] = best_uar
    model.eval()
    return model, history


def save_acrnn(model, out_dir, cfg, **meta):
    sidecar = {
        'kind': 'acrnn',
        'config': section_dict(cfg, 'SER'),
        'config_hash': section_hash(cfg, 'SER'),
        'mask_tag': model.mask_tag,
        'n_mels': model.n_mels,
        **meta,
    }
    return save_artifact(out_dir, model, sidecar)


def load_acrnn(path, cfg=None, force=False, expected_mask=None):
    """
    Rebuild an ACRNN from its artifact directory

    Raises
    ------
    ArtifactMismatchError
        If `expected_mask` differs from the recorded mask tag, or the SER
        config hash differs and `force` is not set
    """
    meta = read_sidecar(path)
    check_kind(meta, 'acrnn')
    if expected_mask is not None and meta['mask_tag'] != expected_mask:
        raise ArtifactMismatchError(f'ACRNN at {path} was trained on {meta["mask_tag"]} data, '
                                    f'requested {expected_mask}')
    if cfg is not None:
        check_match('SER config hash', meta['config_hash'], section_hash(cfg, 'SER'), force)
    model = AcrnnModel(CN(meta['config']).SER, meta['n_mels'], meta['mask_tag'])
    model.load_state_dict(load_state(path))
    model.eval()
    logger.info(f'=> loaded ACRNN ({meta["mask_tag"]}) {meta["model_hash"][:12]} from {path}')
    return model, meta
