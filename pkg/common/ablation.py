"""
Nine-system factor ablation and cross-corpus evaluation

System 1 trains the emotion classifier on the original mel spectrograms;
systems 2-9 train it on SpeechFlow reconstructions with a subset of the
content/rhythm/pitch factors kept. Train, validation and test data of a
system are always processed the same way.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from common.artifacts import ArtifactMismatchError
from common.metrics import ConfusionMatrix, confusion_matrix, uar
from common.utils import derive_seed, state_dict_hash
from data.manifest import Split
from model.acrnn import SerExample, evaluate_acrnn, train_acrnn
from model.flow_trainer import reconstruct_corpus
from model.speechflow import FactorMask

logger = logging.getLogger(__name__)

RAW_TAG = 'raw'


class AblationError(RuntimeError):
    """Some systems failed; `rows` holds the results of the others"""

    def __init__(self, failures, rows):
        self.failures = failures
        self.rows = rows
        detail = '; '.join(f'system {k}: {v}' for k, v in sorted(failures.items()))
        super().__init__(f'{len(failures)} ablation system(s) failed: {detail}')


@dataclass(frozen=True)
class AblationSystem:
    system_no: int
    kind: str
    mask: FactorMask = None

    @property
    def tag(self):
        return RAW_TAG if self.kind == 'raw_baseline' else self.mask.tag

    def flags(self):
        """content/rhythm/pitch columns of the results table ('-' for the raw baseline)"""
        if self.mask is None:
            return '-', '-', '-'
        return tuple(int(v) for v in (self.mask.content, self.mask.rhythm, self.mask.pitch))


SYSTEM_TAGS = (None, 'CRP', '---', 'C--', '-R-', '--P', 'CR-', 'C-P', '-RP')


def enumerate_systems():
    systems = []
    for i, tag in enumerate(SYSTEM_TAGS, start=1):
        if tag is None:
            systems.append(AblationSystem(i, 'raw_baseline'))
        else:
            systems.append(AblationSystem(i, 'reconstructed', FactorMask.from_tag(tag)))
    return systems


def system_by_tag(tag):
    for s in enumerate_systems():
        if s.tag == tag:
            return s
    raise ValueError(f'No ablation system with tag {tag}')


@dataclass(frozen=True)
class ResultRow:
    system_no: int
    mask_tag: str
    content: object
    rhythm: object
    pitch: object
    train_corpus: str
    test_corpus: str
    uar: float
    confusion: ConfusionMatrix
    runs: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    model_hashes: list = field(default_factory=list)
    flow_hash: str = ''

    @property
    def uar_range(self):
        return (min(self.runs), max(self.runs)) if self.runs else (self.uar, self.uar)

    def to_dict(self):
        return {
            'system_no': self.system_no,
            'mask_tag': self.mask_tag,
            'content': self.content,
            'rhythm': self.rhythm,
            'pitch': self.pitch,
            'train_corpus': self.train_corpus,
            'test_corpus': self.test_corpus,
            'uar': self.uar,
            'runs': list(self.runs),
            'seeds': list(self.seeds),
            'model_hashes': list(self.model_hashes),
            'flow_hash': self.flow_hash,
            'confusion': self.confusion.to_dict(),
        }


def _make_row(system, train_corpus, test_corpus, runs, counts, seeds, hashes, flow_hash):
    score = float(np.mean(runs))
    if not 0.0 <= score <= 100.0:
        raise ValueError(f'UAR out of range: {score}')
    content, rhythm, pitch = system.flags()
    return ResultRow(system.system_no, system.tag, content, rhythm, pitch, train_corpus, test_corpus,
                     score, ConfusionMatrix(counts), list(runs), list(seeds), list(hashes), flow_hash)


def labelled_ids(manifest, split=None):
    if split is not None:
        manifest = manifest.by_split(split)
    return [r.id for r in manifest.records if r.label is not None]


def build_examples(system, ids, manifest, store, flow_model, timbre_vectors):
    """Raw or reconstructed SerExamples of one system for the given ids"""
    labels = {r.id: r.label for r in manifest.records}
    if system.kind == 'raw_baseline':
        mels = {i: store.load(i).mel for i in ids}
    else:
        mels = reconstruct_corpus(ids, store, timbre_vectors, system.mask, flow_model).mels
    return [SerExample(i, mels[i], labels[i], system.tag) for i in ids]


def _score(ser_model, examples):
    preds, _ = evaluate_acrnn(ser_model, examples)
    labels = [e.label for e in examples]
    return uar(preds, labels), confusion_matrix(preds, labels).counts


@dataclass(frozen=True)
class ExtraTest:
    """A test-only corpus scored with the classifiers of every system"""

    name: str
    manifest: object
    store: object
    timbre_vectors: dict

    def test_ids(self):
        ids = labelled_ids(self.manifest, Split.TEST)
        return ids if ids else labelled_ids(self.manifest)


def cross_corpus_eval(ser_model, flow_model, timbre_vectors, store, manifest, system,
                      train_corpus='', test_corpus=None, ids=None):
    """
    Score a trained classifier on another corpus processed like its training data

    The test utterances are reconstructed with the training side's
    SpeechFlow under the system's mask (raw features for system 1).

    Raises
    ------
    ArtifactMismatchError
        If the classifier was trained under another mask than `system`'s
    """
    if ser_model.mask_tag != system.tag:
        raise ArtifactMismatchError(f'Classifier was trained on {ser_model.mask_tag} data, '
                                    f'evaluation requested system {system.system_no} ({system.tag})')
    if ids is None:
        ids = labelled_ids(manifest, Split.TEST) or labelled_ids(manifest)
    test_corpus = test_corpus if test_corpus is not None else manifest.corpus
    examples = build_examples(system, ids, manifest, store, flow_model, timbre_vectors)
    score, counts = _score(ser_model, examples)
    flow_hash = state_dict_hash(flow_model) if system.mask is not None else ''
    return _make_row(system, train_corpus, test_corpus, [score], counts, [], [state_dict_hash(ser_model)],
                     flow_hash)


def run_system(system, manifest, store, flow_model, timbre_vectors, seeds, cfg, extra_tests=()):
    """Rows of one system: within-corpus first, then one per extra test corpus"""
    splits = {s: labelled_ids(manifest, s) for s in (Split.TRAIN, Split.VALID, Split.TEST)}
    if not splits[Split.TRAIN] or not splits[Split.TEST]:
        raise ValueError('Ablation needs labelled train and test splits')
    data = {s: build_examples(system, ids, manifest, store, flow_model, timbre_vectors)
            for s, ids in splits.items()}
    extra_data = [(t, build_examples(system, t.test_ids(), t.manifest, t.store, flow_model, t.timbre_vectors))
                  for t in extra_tests]

    corpus = manifest.corpus
    flow_hash = state_dict_hash(flow_model) if system.mask is not None else ''
    run_seeds, hashes, runs = [], [], []
    counts = np.zeros((4, 4), dtype=np.int64)
    extra_runs = [([], np.zeros((4, 4), dtype=np.int64)) for _ in extra_tests]
    for seed in seeds:
        for r in range(cfg.EVAL.REPEATS):
            run_seed = derive_seed(seed, 'ser', system.system_no, r)
            model, _ = train_acrnn(data[Split.TRAIN], data[Split.VALID], cfg, system.tag, run_seed)
            score, c = _score(model, data[Split.TEST])
            runs.append(score)
            counts += c
            run_seeds.append(run_seed)
            hashes.append(state_dict_hash(model))
            logger.info(f'=> system {system.system_no} ({system.tag}) seed {run_seed}: UAR {score:.2f}')
            for (t, examples), acc in zip(extra_data, extra_runs):
                s, c = _score(model, examples)
                acc[0].append(s)
                acc[1][...] += c

    rows = [_make_row(system, corpus, corpus, runs, counts, run_seeds, hashes, flow_hash)]
    for t, (t_runs, t_counts) in zip(extra_tests, extra_runs):
        rows.append(_make_row(system, corpus, t.name, t_runs, t_counts, run_seeds, hashes, flow_hash))
    return rows


def run_ablation(flow_model, timbre_vectors, store, manifest, seeds, cfg, out_dir=None,
                 extra_tests=(), systems=None):
    """
    Train and evaluate the classifier of every ablation system

    Parameters
    ----------
    flow_model : SpeechFlowModel
    timbre_vectors : dict
        utterance id -> SpeakerVector for all labelled utterances of `manifest`
    store : FeatureStore
    manifest : CorpusManifest
        with train/valid/test splits assigned
    seeds : list of int
        one classifier per seed (and per EVAL.REPEATS) and system
    cfg : CfgNode
    out_dir : str or Path, optional
        results are re-emitted here after every system
    extra_tests : iterable of ExtraTest
        test-only corpora scored with the same classifiers
    systems : list of AblationSystem, optional
        defaults to all nine

    Returns
    -------
    list of ResultRow

    Raises
    ------
    AblationError
        After all systems ran, if any of them failed; the rows of the other
        systems have been persisted by then
    """
    from common.report import emit_report

    if not seeds:
        raise ValueError('Ablation needs at least one seed')
    systems = enumerate_systems() if systems is None else systems
    extra_tests = list(extra_tests)
    rows, failures = [], {}
    for system in systems:
        logger.info(f'=> ablation system {system.system_no}: {system.tag}')
        try:
            rows.extend(run_system(system, manifest, store, flow_model, timbre_vectors, seeds, cfg,
                                   extra_tests))
        except (ValueError, KeyError, OSError, RuntimeError, FloatingPointError) as e:
            logger.error(f'=> system {system.system_no} ({system.tag}) failed: {e}')
            failures[system.system_no] = str(e)
            continue
        if out_dir is not None:
            emit_report(rows, out_dir, cfg)

    if out_dir is not None and rows and failures:
        emit_report(rows, out_dir, cfg)
    if failures:
        raise AblationError(failures, rows)
    return rows


def load_seeds(path):
    """Seeds file: integers separated by whitespace, commas or newlines ('#' starts a comment)"""
    seeds = []
    for line in Path(path).read_text(encoding='utf-8').splitlines():
        line = line.split('#', 1)[0]
        seeds += [int(tok) for tok in line.replace(',', ' ').split()]
    if not seeds:
        raise ValueError(f'No seeds in {path}')
    return seeds
