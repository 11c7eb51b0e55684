"""
Training of the factorized autoencoder and corpus reconstruction under a
factor mask
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from tqdm import tqdm

from common.generators import CropGenerator
from common.loss import masked_mse
from common.utils import derive_seed, state_dict_hash
from common.visualization import render_spectrogram_image
from data.mel import MelSpectrogram
from model.speechflow import FactorMask, build_speechflow, decode, encode, mask_inputs
from model.training import check_finite, snapshot

logger = logging.getLogger(__name__)

PANEL_TAGS = ('CRP', '-RP', 'C-P', 'CR-')
DATASET_FILE = 'dataset.json'


@dataclass(frozen=True)
class ReconstructedCorpus:
    mels: dict = field(default_factory=dict)
    mask_tag: str = 'CRP'
    model_hash: str = ''

    def __len__(self):
        return len(self.mels)


def _vector(timbre_vectors, utt_id):
    if utt_id not in timbre_vectors:
        raise ValueError(f'No timbre vector for utterance {utt_id}')
    v = timbre_vectors[utt_id]
    return np.asarray(getattr(v, 'values', v), dtype=np.float32)


def _check_ids(ids, store, timbre_vectors):
    missing = store.missing(ids)
    if missing:
        raise ValueError(f'Missing features for {len(missing)} utterances: {missing}')
    no_vector = [i for i in ids if i not in timbre_vectors]
    if no_vector:
        raise ValueError(f'Missing timbre vectors for {len(no_vector)} utterances: {no_vector}')


def validation_loss(model, feats, timbre_vectors):
    """Per-entry MSE over whole utterances, no random resampling"""
    model.eval()
    total, count = 0.0, 0
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        for f in feats:
            mel = torch.as_tensor(f.mel.frames, dtype=dtype)[None]
            pitch = torch.as_tensor(f.pitch_norm.as_channels(), dtype=dtype)[None]
            z_t = torch.as_tensor(_vector(timbre_vectors, f.utt_id), dtype=dtype)[None]
            out = model(mel, mel, pitch, z_t)
            total += float(torch.sum((out - mel) ** 2))
            count += mel.numel()
    return total / max(count, 1)


def train_speechflow(train_ids, valid_ids, store, timbre_vectors, cfg, seed):
    """
    Train the factorized autoencoder on the reconstruction loss

    Every step draws a minibatch of random crops; content and pitch inputs
    of each example get a fresh random-resampling draw. The validation loss
    is computed on whole utterances without resampling.

    Parameters
    ----------
    train_ids, valid_ids : list of str
    store : FeatureStore
    timbre_vectors : dict
        utterance id -> SpeakerVector
    cfg : CfgNode
    seed : int

    Returns
    -------
    (SpeechFlowModel, dict)
        model with the best-validation weights restored, and the history
        {'loss': per-step train losses, 'valid': [(step, loss), ...]}

    Raises
    ------
    TrainingDivergedError
        If the loss becomes NaN or infinite
    """
    fc = cfg.FLOW
    _check_ids(list(train_ids) + list(valid_ids), store, timbre_vectors)
    train_feats = store.load_many(train_ids)
    valid_feats = store.load_many(valid_ids)
    if not train_feats:
        raise ValueError('SpeechFlow training needs at least one utterance')

    torch.manual_seed(seed)
    model = build_speechflow(cfg)
    model.fit_normalizer([f.mel for f in train_feats])
    optimizer = torch.optim.Adam(model.parameters(), lr=fc.LR)

    sequences = [(f.mel.frames, f.pitch_norm.as_channels()) for f in train_feats]
    vectors = [_vector(timbre_vectors, f.utt_id) for f in train_feats]
    generator = CropGenerator(fc.BATCH_SIZE, sequences, fc.CROP_FRAMES, extras=vectors, random_seed=seed)
    rr_rng = np.random.default_rng(derive_seed(seed, 'rr'))

    history = {'loss': [], 'valid': []}
    best_loss, best_state = float('inf'), None

    def _validate(step):
        nonlocal best_loss, best_state
        if not valid_feats:
            return
        loss = validation_loss(model, valid_feats, timbre_vectors)
        check_finite(loss, step, 'SpeechFlow validation')
        history['valid'].append((step, loss))
        logger.info(f'=> flow step {step}: validation loss {loss:.4f}')
        if loss < best_loss:
            best_loss, best_state = loss, snapshot(model)

    logger.info(f'=> training SpeechFlow on {len(train_feats)} utterances for {fc.STEPS} steps')
    for step in tqdm(range(fc.STEPS), desc='train-flow'):
        _, (mel, pitch), z_t = generator.next_batch()
        s_c, p_f = [], []
        for b in range(len(mel)):
            c, f = model.resample_content_pitch(mel[b], pitch[b], int(rr_rng.integers(0, 2**31 - 1)))
            s_c.append(c)
            p_f.append(f)
        s_c = torch.from_numpy(np.stack(s_c).astype(np.float32))
        p_f = torch.from_numpy(np.stack(p_f).astype(np.float32))
        target = torch.from_numpy(mel)

        model.train()
        out = model(s_c, target, p_f, torch.from_numpy(np.stack(z_t)))
        loss = masked_mse(out, target)
        check_finite(loss.item(), step, 'SpeechFlow')
        optimizer.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(model.parameters(), fc.GRAD_CLIP)
        optimizer.step()

        history['loss'].append(float(loss.item()))
        logger.debug(f'flow step {step}: loss {loss.item():.4f}')
        if (step + 1) % fc.LOG_EVERY == 0:
            logger.info(f'=> flow step {step + 1}/{fc.STEPS}: loss {loss.item():.4f}')
        if (step + 1) % fc.VALID_EVERY == 0:
            _validate(step + 1)

    if not history['valid'] or history['valid'][-1][0] != fc.STEPS:
        _validate(fc.STEPS)
    if best_state is not None:
        model.load_state_dict(best_state)
        logger.info(f'=> restored best validation checkpoint (loss {best_loss:.4f})')
    model.eval()
    return model, history


def reconstruct_utterance(feats, timbre_vector, mask, model):
    inputs = mask_inputs(feats.mel, feats.pitch_norm, mask)
    bundle = encode(inputs, timbre_vector, model)
    return decode(bundle, feats.n_frames, model)


def reconstruct_corpus(ids, store, timbre_vectors, mask, model):
    """
    Reconstruct every utterance with the factors outside `mask` removed

    Raises
    ------
    ValueError
        If features or timbre vectors are missing for some ids (all listed)
    """
    if isinstance(mask, str):
        mask = FactorMask.from_tag(mask)
    _check_ids(list(ids), store, timbre_vectors)
    mels = {}
    for utt_id in tqdm(ids, desc=f'reconstruct {mask.tag}'):
        mels[utt_id] = reconstruct_utterance(store.load(utt_id), timbre_vectors[utt_id], mask, model)
    return ReconstructedCorpus(mels=mels, mask_tag=mask.tag, model_hash=state_dict_hash(model))


def dump_factor_panels(feats, timbre_vector, model, out_dir, cfg):
    """
    Render the original mel and its reconstructions with all factors kept
    and with each single factor removed; returns the PNG paths
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [render_spectrogram_image(feats.mel, out_dir / f'{feats.utt_id}_original.png', cfg)]
    for tag in PANEL_TAGS:
        mel = reconstruct_utterance(feats, timbre_vector, FactorMask.from_tag(tag), model)
        paths.append(render_spectrogram_image(mel, out_dir / f'{feats.utt_id}_{tag}.png', cfg))
    logger.info(f'=> wrote {len(paths)} panels for {feats.utt_id} to {out_dir}')
    return paths


def save_reconstructed(corpus, out_dir, **meta):
    """Store a ReconstructedCorpus as mels/<id>.npy plus dataset.json"""
    out_dir = Path(out_dir)
    (out_dir / 'mels').mkdir(parents=True, exist_ok=True)
    for utt_id, mel in corpus.mels.items():
        np.save(out_dir / 'mels' / f'{utt_id}.npy', mel.frames)
    info = {'mask_tag': corpus.mask_tag, 'model_hash': corpus.model_hash,
            'ids': sorted(corpus.mels), **meta}
    with (out_dir / DATASET_FILE).open('w', encoding='utf-8') as fh:
        json.dump(info, fh, indent=2, sort_keys=True)
    logger.info(f'=> wrote {len(corpus)} reconstructions ({corpus.mask_tag}) to {out_dir}')
    return out_dir


def load_reconstructed(path, hop=0.016, sample_rate=16000):
    path = Path(path)
    if not (path / DATASET_FILE).exists():
        raise FileNotFoundError(f'No reconstructed dataset at {path} ({DATASET_FILE} missing)')
    with (path / DATASET_FILE).open('r', encoding='utf-8') as fh:
        info = json.load(fh)
    mels = {i: MelSpectrogram(np.load(path / 'mels' / f'{i}.npy'), hop, sample_rate) for i in info['ids']}
    return ReconstructedCorpus(mels=mels, mask_tag=info['mask_tag'], model_hash=info['model_hash'])
