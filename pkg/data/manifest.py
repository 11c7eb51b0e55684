"""
Corpus manifests

A manifest is a line-delimited JSON file, one utterance per line with
exactly the UtteranceRecord fields. Splits are assigned per speaker so that
no speaker appears in more than one of train/valid/test.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from data.labels import EmotionLabel, map_labels

logger = logging.getLogger(__name__)

RECORD_FIELDS = ('id', 'speaker_id', 'label', 'audio_path', 'duration', 'corpus', 'split')


class ManifestError(ValueError):
    pass


class Split(str, Enum):
    TRAIN = 'train'
    VALID = 'valid'
    TEST = 'test'
    UNASSIGNED = 'unassigned'


@dataclass(frozen=True)
class UtteranceRecord:
    id: str
    speaker_id: str
    label: EmotionLabel = None
    audio_path: str = ''
    duration: float = 0.0
    corpus: str = ''
    split: Split = Split.UNASSIGNED

    def __post_init__(self):
        if not self.duration > 0:
            raise ManifestError(f'Utterance {self.id}: duration must be > 0, got {self.duration}')

    def to_dict(self):
        return {
            'id': self.id,
            'speaker_id': self.speaker_id,
            'label': self.label.value if self.label is not None else None,
            'audio_path': self.audio_path,
            'duration': self.duration,
            'corpus': self.corpus,
            'split': self.split.value,
        }


@dataclass(frozen=True)
class CorpusManifest:
    records: tuple = field(default_factory=tuple)
    sample_rate: int = 16000
    bit_depth: int = 16

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def ids(self):
        return [r.id for r in self.records]

    @property
    def speakers(self):
        return sorted({r.speaker_id for r in self.records})

    @property
    def corpus(self):
        names = sorted({r.corpus for r in self.records})
        return '+'.join(names)

    def by_split(self, split):
        split = Split(split)
        return replace(self, records=tuple(r for r in self.records if r.split == split))

    def labelled(self):
        return replace(self, records=tuple(r for r in self.records if r.label is not None))

    def get(self, utt_id):
        for r in self.records:
            if r.id == utt_id:
                return r
        raise KeyError(utt_id)

    def manifest_id(self):
        """Content hash, used as provenance in artifact sidecars"""
        h = hashlib.sha256()
        for r in self.records:
            h.update(json.dumps(r.to_dict(), sort_keys=True).encode())
        return h.hexdigest()[:16]


def _parse_record(obj, lineno, scheme, merge):
    if not isinstance(obj, dict):
        raise ManifestError(f'line {lineno}: expected a JSON object')
    keys = set(obj)
    if keys != set(RECORD_FIELDS):
        missing = sorted(set(RECORD_FIELDS) - keys)
        extra = sorted(keys - set(RECORD_FIELDS))
        raise ManifestError(f'line {lineno}: bad field set (missing {missing}, unexpected {extra})')
    raw_label = obj['label']
    try:
        if scheme is not None:
            label = map_labels(raw_label, scheme, merge)
        elif raw_label is None:
            label = None
        else:
            label = EmotionLabel(raw_label)
        return UtteranceRecord(
            id=str(obj['id']),
            speaker_id=str(obj['speaker_id']),
            label=label,
            audio_path=str(obj['audio_path']),
            duration=float(obj['duration']),
            corpus=str(obj['corpus']),
            split=Split(obj['split']),
        )
    except ManifestError as e:
        raise ManifestError(f'line {lineno}: {e}') from e
    except (TypeError, ValueError) as e:
        raise ManifestError(f'line {lineno}: {e}') from e


def load_manifest(path, scheme=None, merge=None):
    """
    Read a line-delimited JSON manifest

    Parameters
    ----------
    path : str or Path
        manifest file
    scheme : str, optional
        label scheme used to map raw label strings; without a scheme labels
        must already be one of A/H/S/N or null
    merge : dict, optional
        extra label mappings passed on to map_labels

    Returns
    -------
    CorpusManifest

    Raises
    ------
    ManifestError
        On a malformed line (the message names the line number) or a
        duplicate utterance id (the message names the id)
    """
    records = []
    seen = {}
    with Path(path).open('r', encoding='utf-8') as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestError(f'line {lineno}: invalid JSON ({e.msg})') from e
            record = _parse_record(obj, lineno, scheme, merge)
            if record.id in seen:
                raise ManifestError(f'duplicate utterance id "{record.id}" '
                                    f'on lines {seen[record.id]} and {lineno}')
            seen[record.id] = lineno
            records.append(record)
    return CorpusManifest(records=tuple(records))


def save_manifest(manifest, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8') as fh:
        for r in manifest.records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + '\n')
    return path


def _split_sizes(n, ratios):
    _, r_valid, r_test = ratios
    n_valid = max(1, int(np.floor(n * r_valid + 0.5)))
    n_test = max(1, int(np.floor(n * r_test + 0.5)))
    while n - n_valid - n_test < 1:
        if n_valid >= n_test:
            n_valid -= 1
        else:
            n_test -= 1
    return n - n_valid - n_test, n_valid, n_test


def split_corpus(manifest, ratios=(0.8, 0.1, 0.1), seed=0):
    """
    Assign train/valid/test splits at speaker granularity

    Parameters
    ----------
    manifest : CorpusManifest
    ratios : tuple of 3 floats
        train, valid and test proportions (by speaker count), summing to 1
    seed : int
        seed of the speaker permutation

    Returns
    -------
    CorpusManifest
        same records in the same order with `split` filled in

    Raises
    ------
    ValueError
        If the ratios do not sum to 1 or there are fewer than 3 speakers
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-6:
        raise ValueError(f'Split ratios must be 3 non-negative numbers summing to 1, got {ratios}')
    speakers = manifest.speakers
    if len(speakers) < 3:
        raise ValueError(f'Need at least 3 speakers for a speaker-disjoint split, got {len(speakers)}')

    n_train, n_valid, n_test = _split_sizes(len(speakers), ratios)
    rng = np.random.default_rng(seed)
    order = [speakers[i] for i in rng.permutation(len(speakers))]
    assignment = {}
    for spk in order[:n_train]:
        assignment[spk] = Split.TRAIN
    for spk in order[n_train:n_train + n_valid]:
        assignment[spk] = Split.VALID
    for spk in order[n_train + n_valid:]:
        assignment[spk] = Split.TEST

    logger.info(f'=> split {len(speakers)} speakers into {n_train}/{n_valid}/{n_test}')
    records = tuple(replace(r, split=assignment[r.speaker_id]) for r in manifest.records)
    return replace(manifest, records=records)
