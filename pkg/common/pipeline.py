"""
Subcommand implementations

Every `cmd_*` function takes the parsed arguments and the frozen config and
writes only below `args.out` (the feature store for `featurize`).
"""

import json
import logging
from dataclasses import replace
from pathlib import Path

from common.ablation import (ExtraTest, cross_corpus_eval, labelled_ids, load_seeds, run_ablation,
                             system_by_tag)
from common.config import frontend_hash, section_dict
from common.metrics import uar
from common.report import emit_report, load_report
from common.utils import derive_seed, seed_everything, state_dict_hash
from data.audio import read_wav, standardize_audio, write_wav
from data.features import FeatureStore, featurize
from data.labels import merge_map_from_cfg
from data.manifest import Split, load_manifest, save_manifest, split_corpus
from data.toy_corpus import ToyCorpusSpec, synth_toy_corpus
from model.acrnn import SerExample, evaluate_acrnn, load_acrnn, save_acrnn, train_acrnn
from model.flow_trainer import (DATASET_FILE, dump_factor_panels, load_reconstructed, reconstruct_corpus,
                                save_reconstructed, train_speechflow)
from model.speechflow import FactorMask, load_speechflow, save_speechflow
from model.timbre_encoder import (load_timbre_model, save_timbre_model, timbre_encode, train_timbre_encoder,
                                  utterance_timbre_vectors)

logger = logging.getLogger(__name__)


def _open_store(path, cfg, force):
    store = FeatureStore(path)
    store.check_config(cfg, force)
    return store


def _features_dir(args, cfg):
    return args.features or cfg.PATHS.FEATURES_DIR


def _parse_ratios(text):
    try:
        ratios = [float(x) for x in text.split(',')]
    except ValueError as e:
        raise ValueError(f'Illegal split ratios "{text}"') from e
    if len(ratios) != 3:
        raise ValueError(f'Expected 3 split ratios, got "{text}"')
    return ratios


def cmd_prepare(args, cfg, seed):
    out = Path(args.out)
    merge = merge_map_from_cfg(cfg, args.label_scheme) if args.label_scheme else None
    manifest = load_manifest(args.manifest, scheme=args.label_scheme, merge=merge)
    rejected = sum(r.label is None for r in manifest.records)
    if rejected:
        logger.info(f'=> {rejected} utterances carry no target label and are kept unlabelled')

    if args.standardize:
        records = []
        for r in manifest.records:
            wav = standardize_audio(read_wav(r.audio_path), cfg.DATA.SAMPLE_RATE)
            path = write_wav(out / 'wav' / f'{r.id}.wav', wav)
            records.append(replace(r, audio_path=str(path.resolve()), duration=wav.duration))
        manifest = replace(manifest, records=tuple(records))

    ratios = _parse_ratios(args.ratios) if args.ratios else list(cfg.DATA.SPLIT_RATIOS)
    manifest = split_corpus(manifest, ratios, seed=derive_seed(seed, 'split'))
    path = save_manifest(manifest, out / 'manifest.jsonl')
    logger.info(f'=> wrote prepared manifest ({len(manifest)} utterances) to {path}')


def cmd_synth_toy(args, cfg, seed):
    spec = ToyCorpusSpec(coding_factor=args.factor, n_speakers=args.speakers,
                         n_utterances_per_class=args.per_class,
                         utterance_duration=args.duration or cfg.TOY.DURATION,
                         seed=seed, corpus=args.corpus, rate_scale=args.rate_scale,
                         speaker_prefix=args.speaker_prefix)
    synth_toy_corpus(spec, args.out, cfg)


def cmd_featurize(args, cfg, seed):
    out = args.out or cfg.PATHS.FEATURES_DIR
    featurize(load_manifest(args.manifest), out, cfg, use_cache=args.cache, force=args.force)


def cmd_train_timbre(args, cfg, seed):
    manifest = load_manifest(args.manifest)
    store = _open_store(_features_dir(args, cfg), cfg, args.force)
    train = manifest.by_split(Split.TRAIN)
    if not len(train):
        train = manifest
    seed = derive_seed(seed, 'timbre')
    model, history = train_timbre_encoder(train, store, cfg, seed)
    save_timbre_model(model, args.out, cfg, seed=seed, feature_config_hash=frontend_hash(cfg),
                      manifest_id=manifest.manifest_id(), train_corpus=manifest.corpus,
                      final_loss=history['loss'][-1] if history['loss'] else None)


def _timbre_vectors(path, store, ids, cfg, force):
    model, _ = load_timbre_model(path, cfg, force)
    return utterance_timbre_vectors(store, ids, model)


def cmd_train_flow(args, cfg, seed):
    manifest = load_manifest(args.manifest)
    store = _open_store(_features_dir(args, cfg), cfg, args.force)
    train_ids = manifest.by_split(Split.TRAIN).ids or manifest.ids
    valid_ids = manifest.by_split(Split.VALID).ids
    vectors = _timbre_vectors(args.timbre, store, train_ids + valid_ids, cfg, args.force)
    seed = derive_seed(seed, 'flow')
    model, history = train_speechflow(train_ids, valid_ids, store, vectors, cfg, seed)
    best_valid = min((loss for _, loss in history['valid']), default=None)
    save_speechflow(model, args.out, cfg, seed=seed, feature_config_hash=frontend_hash(cfg),
                    manifest_id=manifest.manifest_id(), train_corpus=manifest.corpus,
                    valid_loss=best_valid)


def cmd_reconstruct(args, cfg, seed):
    mask = FactorMask.from_tag(args.mask)
    manifest = load_manifest(args.manifest)
    store = _open_store(_features_dir(args, cfg), cfg, args.force)
    model, meta = load_speechflow(args.model, cfg, args.force)
    vectors = _timbre_vectors(args.timbre, store, manifest.ids, cfg, args.force)
    corpus = reconstruct_corpus(manifest.ids, store, vectors, mask, model)
    save_reconstructed(corpus, args.out, corpus_name=manifest.corpus, manifest_id=manifest.manifest_id(),
                       flow_train_corpus=meta.get('train_corpus', ''))


def cmd_panels(args, cfg, seed):
    store = _open_store(_features_dir(args, cfg), cfg, args.force)
    if args.utterance not in store:
        raise KeyError(f'No features for utterance {args.utterance} in {store.root}')
    model, _ = load_speechflow(args.model, cfg, args.force)
    timbre, _ = load_timbre_model(args.timbre, cfg, args.force)
    feats = store.load(args.utterance)
    dump_factor_panels(feats, timbre_encode(feats.mel, timbre, args.utterance), model, args.out, cfg)


def _split_examples(mels, manifest, mask_tag):
    out = {}
    for split in (Split.TRAIN, Split.VALID, Split.TEST):
        ids = labelled_ids(manifest, split)
        missing = [i for i in ids if i not in mels]
        if missing:
            raise ValueError(f'Dataset lacks {len(missing)} {split.value} utterances: {missing}')
        labels = {r.id: r.label for r in manifest.records}
        out[split] = [SerExample(i, mels[i], labels[i], mask_tag) for i in ids]
    return out


def cmd_train_ser(args, cfg, seed):
    manifest = load_manifest(args.manifest)
    dataset = Path(args.dataset)
    if (dataset / DATASET_FILE).exists():
        corpus = load_reconstructed(dataset, cfg.FRONTEND.HOP_LENGTH / cfg.FRONTEND.SAMPLE_RATE,
                                    cfg.FRONTEND.SAMPLE_RATE)
        dataset_tag, mels = corpus.mask_tag, corpus.mels
    else:
        store = _open_store(dataset, cfg, args.force)
        ids = [i for i in manifest.ids if i in store]
        dataset_tag, mels = 'raw', {i: store.load(i).mel for i in ids}
    if dataset_tag != args.mask_tag:
        raise ValueError(f'Dataset {dataset} holds {dataset_tag} data, --mask-tag is {args.mask_tag}')

    data = _split_examples(mels, manifest, args.mask_tag)
    seed = derive_seed(seed, 'ser', args.mask_tag)
    model, history = train_acrnn(data[Split.TRAIN], data[Split.VALID], cfg, args.mask_tag, seed)
    test_uar = None
    if data[Split.TEST]:
        preds, _ = evaluate_acrnn(model, data[Split.TEST])
        test_uar = uar(preds, [e.label for e in data[Split.TEST]])
        logger.info(f'=> test UAR ({args.mask_tag}): {test_uar:.2f}')
    save_acrnn(model, args.out, cfg, seed=seed, train_corpus=manifest.corpus,
               manifest_id=manifest.manifest_id(), best_valid_uar=history.get('best_uar'),
               test_uar=test_uar)


def _extra_test(spec, cfg, timbre_model, force):
    manifest_path, sep, features = spec.rpartition(':')
    if not sep or not manifest_path or not features:
        raise ValueError(f'Illegal --extra-test "{spec}", expected MANIFEST:FEATURES')
    manifest = load_manifest(manifest_path)
    store = _open_store(features, cfg, force)
    ids = labelled_ids(manifest)
    vectors = utterance_timbre_vectors(store, ids, timbre_model)
    return ExtraTest(manifest.corpus, manifest, store, vectors)


def cmd_ablate(args, cfg, seed):
    if args.repeats is not None:
        cfg = cfg.clone()
        cfg.defrost()
        cfg.EVAL.REPEATS = args.repeats
        cfg.freeze()
    seeds = load_seeds(args.seeds)
    manifest = load_manifest(args.manifest)
    store = _open_store(_features_dir(args, cfg), cfg, args.force)
    flow, flow_meta = load_speechflow(args.flow, cfg, args.force)
    timbre, timbre_meta = load_timbre_model(args.timbre, cfg, args.force)
    vectors = utterance_timbre_vectors(store, labelled_ids(manifest), timbre)
    extra = [_extra_test(s, cfg, timbre, args.force) for s in args.extra_test]

    provenance = {
        'manifest_id': manifest.manifest_id(),
        'feature_config_hash': store.config_hash,
        'flow_model_hash': flow_meta['model_hash'],
        'timbre_model_hash': timbre_meta['model_hash'],
        'seeds': seeds,
        'config': section_dict(cfg, 'SER', 'EVAL'),
        'extra_tests': [t.name for t in extra],
    }
    rows = run_ablation(flow, vectors, store, manifest, seeds, cfg, out_dir=args.out, extra_tests=extra)
    emit_report(rows, args.out, cfg, provenance)


def cmd_xeval(args, cfg, seed):
    ser, ser_meta = load_acrnn(args.ser, cfg, args.force)
    system = system_by_tag(ser.mask_tag)
    manifest = load_manifest(args.test_manifest)
    store = _open_store(_features_dir(args, cfg), cfg, args.force)
    ids = labelled_ids(manifest, Split.TEST) or labelled_ids(manifest)

    flow, vectors, flow_hash = None, {}, ''
    if system.mask is not None:
        if not args.flow or not args.timbre:
            raise ValueError(f'Classifier of system {system.system_no} ({system.tag}) needs --flow and --timbre')
        flow, _ = load_speechflow(args.flow, cfg, args.force)
        vectors = _timbre_vectors(args.timbre, store, ids, cfg, args.force)
        flow_hash = state_dict_hash(flow)

    row = cross_corpus_eval(ser, flow, vectors, store, manifest, system,
                            train_corpus=ser_meta.get('train_corpus', ''), ids=ids)
    emit_report([row], args.out, cfg, {'ser_model_hash': ser_meta['model_hash'], 'flow_model_hash': flow_hash,
                                       'test_manifest_id': manifest.manifest_id()})


def cmd_report(args, cfg, seed):
    rows, provenance = load_report(args.results)
    emit_report(rows, args.out, cfg, provenance)


COMMANDS = {
    'prepare': cmd_prepare,
    'synth-toy': cmd_synth_toy,
    'featurize': cmd_featurize,
    'train-timbre': cmd_train_timbre,
    'train-flow': cmd_train_flow,
    'reconstruct': cmd_reconstruct,
    'panels': cmd_panels,
    'train-ser': cmd_train_ser,
    'ablate': cmd_ablate,
    'xeval': cmd_xeval,
    'report': cmd_report,
}


def run_command(args, cfg):
    seed = cfg.SEED if args.seed is None else args.seed
    seed_everything(seed)
    logger.info(f'=> {args.command} (seed {seed})')
    logger.debug(json.dumps(section_dict(cfg, *cfg.keys()), sort_keys=True))
    return COMMANDS[args.command](args, cfg, seed)
