"""
Feature cache

One `.npz` per utterance (log-mel, raw f0, speaker-normalized f0, voicing)
plus an `index.json` with the front-end config hash, the speaker of every
utterance and the per-speaker pitch statistics with the manifest they were
computed over.
"""

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from tqdm import tqdm

from common.artifacts import ArtifactMismatchError
from common.config import frontend_hash
from data.audio import read_wav, standardize_audio
from data.mel import MelSpectrogram, extract_mel
from data.pitch import (PitchContour, SpeakerPitchStats, compute_speaker_pitch_stats,
                        extract_pitch, normalize_pitch)

logger = logging.getLogger(__name__)

INDEX_FILE = 'index.json'
FEATS_DIR = 'feats'
# the emotion classifier stacks two frame differences on the mel
MIN_FRAMES = 3


@dataclass(frozen=True)
class UtteranceFeatures:
    utt_id: str
    speaker_id: str
    mel: MelSpectrogram
    pitch: PitchContour
    pitch_norm: PitchContour

    @property
    def n_frames(self):
        return self.mel.n_frames


class FeatureStore:
    """Read access to a featurized directory"""

    def __init__(self, root):
        self.root = Path(root)
        index_path = self.root / INDEX_FILE
        if not index_path.exists():
            raise FileNotFoundError(f'No feature store at {self.root} ({INDEX_FILE} missing)')
        with index_path.open('r', encoding='utf-8') as fh:
            self.index = json.load(fh)
        self._cache = {}

    @property
    def config_hash(self):
        return self.index['config_hash']

    @property
    def ids(self):
        return sorted(self.index['utterances'])

    def __contains__(self, utt_id):
        return utt_id in self.index['utterances']

    def __len__(self):
        return len(self.index['utterances'])

    def missing(self, ids):
        return [i for i in ids if i not in self]

    def speaker_of(self, utt_id):
        return self.index['utterances'][utt_id]

    def pitch_stats(self, speaker_id):
        entry = dict(self.index['pitch_stats'][speaker_id])
        entry.pop('scope', None)
        return SpeakerPitchStats(**entry)

    def check_config(self, cfg, force=False):
        current = frontend_hash(cfg)
        if self.config_hash != current and not force:
            raise ArtifactMismatchError(f'Feature store {self.root} was extracted with front-end '
                                        f'config {self.config_hash[:12]}, current is {current[:12]}')

    def load(self, utt_id):
        if utt_id in self._cache:
            return self._cache[utt_id]
        if utt_id not in self:
            raise KeyError(f'No features for utterance {utt_id} in {self.root}')
        hop = self.index['hop']
        sr = self.index['sample_rate']
        with np.load(self.root / FEATS_DIR / f'{utt_id}.npz') as data:
            voiced = data['voiced'].astype(bool)
            feats = UtteranceFeatures(
                utt_id=utt_id,
                speaker_id=self.speaker_of(utt_id),
                mel=MelSpectrogram(data['mel'], hop, sr),
                pitch=PitchContour(data['f0'], voiced, False, hop),
                pitch_norm=PitchContour(data['f0_norm'], voiced, True, hop),
            )
        self._cache[utt_id] = feats
        return feats

    def load_many(self, ids):
        missing = self.missing(ids)
        if missing:
            raise ValueError(f'Missing features for {len(missing)} utterances: {missing}')
        return [self.load(i) for i in ids]


def _read_index(out_dir, config_hash, force):
    index_path = out_dir / INDEX_FILE
    if not index_path.exists():
        return None
    with index_path.open('r', encoding='utf-8') as fh:
        index = json.load(fh)
    if index.get('config_hash') != config_hash:
        if not force:
            raise ArtifactMismatchError(
                f'{out_dir} holds features of front-end config {index.get("config_hash", "?")[:12]}, '
                f'refusing to mix with {config_hash[:12]} (use --force to overwrite)')
        logger.warning(f'=> discarding features of a different front-end config in {out_dir}')
        return None
    return index


def featurize(manifest, out_dir, cfg, use_cache=False, force=False):
    """
    Extract mel and pitch features for every utterance of a manifest

    Pitch statistics are computed per speaker over the utterances of this
    manifest and used to normalize their contours.

    Parameters
    ----------
    manifest : CorpusManifest
    out_dir : str or Path
        feature store directory (created if needed)
    cfg : CfgNode
    use_cache : bool
        reuse raw features already present for the same front-end config
    force : bool
        overwrite a store extracted with a different front-end config

    Returns
    -------
    FeatureStore

    Raises
    ------
    ArtifactMismatchError
        If `out_dir` holds features of another front-end config and
        `force` is not set
    ValueError
        If some utterances yield fewer than MIN_FRAMES frames (all listed)
    """
    out_dir = Path(out_dir)
    config_hash = frontend_hash(cfg)
    index = _read_index(out_dir, config_hash, force)
    (out_dir / FEATS_DIR).mkdir(parents=True, exist_ok=True)
    fe = cfg.FRONTEND

    raw = {}
    for record in tqdm(manifest.records, desc='featurize'):
        npz_path = out_dir / FEATS_DIR / f'{record.id}.npz'
        if use_cache and index is not None and record.id in index['utterances'] and npz_path.exists():
            with np.load(npz_path) as data:
                raw[record.id] = (data['mel'], PitchContour(data['f0'], data['voiced'].astype(bool),
                                                            False, fe.HOP_LENGTH / fe.SAMPLE_RATE))
            continue
        waveform = standardize_audio(read_wav(record.audio_path), fe.SAMPLE_RATE)
        mel = extract_mel(waveform, cfg)
        pitch = extract_pitch(waveform, cfg)
        raw[record.id] = (mel.frames, pitch)

    too_short = sorted(i for i, (mel, _) in raw.items() if len(mel) < MIN_FRAMES)
    if too_short:
        raise ValueError(f'{len(too_short)} utterances are shorter than {MIN_FRAMES} frames: {too_short}')

    stats = {}
    for spk in manifest.speakers:
        contours = [raw[r.id][1] for r in manifest.records if r.speaker_id == spk]
        stats[spk] = compute_speaker_pitch_stats(contours, spk)

    for record in manifest.records:
        mel, pitch = raw[record.id]
        normed = normalize_pitch(pitch, stats[record.speaker_id])
        np.savez(out_dir / FEATS_DIR / f'{record.id}.npz', mel=mel.astype(np.float32),
                 f0=pitch.f0, f0_norm=normed.f0, voiced=pitch.voiced)

    scope = manifest.manifest_id()
    if index is None:
        index = {'config_hash': config_hash, 'utterances': {}, 'pitch_stats': {}}
    index.update(hop=fe.HOP_LENGTH / fe.SAMPLE_RATE, sample_rate=fe.SAMPLE_RATE, n_mels=fe.N_MELS)
    for record in manifest.records:
        index['utterances'][record.id] = record.speaker_id
    for spk, s in stats.items():
        index['pitch_stats'][spk] = dict(asdict(s), scope=scope)
    with (out_dir / INDEX_FILE).open('w', encoding='utf-8') as fh:
        json.dump(index, fh, indent=2, sort_keys=True)

    logger.info(f'=> featurized {len(manifest)} utterances of {len(stats)} speakers into {out_dir}')
    return FeatureStore(out_dir)
