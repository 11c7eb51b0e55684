import numpy as np
import pytest
import torch

from common.utils import state_dict_hash
from data.manifest import CorpusManifest
from model.timbre_encoder import (TimbreModel, load_timbre_model, save_timbre_model, timbre_encode,
                                  train_timbre_encoder, utterance_timbre_vectors)


@pytest.fixture
def model(small_cfg):
    torch.manual_seed(0)
    return TimbreModel(small_cfg.TIMBRE, ['a', 'b', 'c', 'd'], 80)


class TestTimbreEncode:
    def test_unit_norm(self, model, rng):
        for n in (1, 7, 200):
            vector = timbre_encode(rng.normal(size=(n, 80)), model, 'u')
            assert vector.values.shape == (8,)
            assert np.linalg.norm(vector.values) == pytest.approx(1.0, abs=1e-5)
            assert vector.source_utterance == 'u'

    def test_duplication_invariant(self, model, rng):
        mel = rng.normal(size=(33, 80)).astype(np.float32)
        once = timbre_encode(mel, model).values
        twice = timbre_encode(np.concatenate([mel, mel]), model).values
        np.testing.assert_allclose(once, twice, atol=1e-5)

    def test_empty(self, model):
        with pytest.raises(ValueError):
            timbre_encode(np.zeros((0, 80)), model)


class TestTrainTimbreEncoder:
    def test_trains_and_round_trips(self, toy_corpus, small_cfg, tmp_path):
        manifest, store, _ = toy_corpus
        model, history = train_timbre_encoder(manifest, store, small_cfg, seed=2)
        again, _ = train_timbre_encoder(manifest, store, small_cfg, seed=2)
        assert state_dict_hash(model) == state_dict_hash(again)
        assert len(history['loss']) == small_cfg.TIMBRE.STEPS
        assert model.speakers == manifest.speakers

        save_timbre_model(model, tmp_path / 't', small_cfg)
        loaded, meta = load_timbre_model(tmp_path / 't', small_cfg)
        mel = store.load(manifest.ids[0]).mel
        np.testing.assert_array_equal(timbre_encode(mel, model).values, timbre_encode(mel, loaded).values)

    def test_zero_steps_still_unit_norm(self, toy_corpus, small_cfg):
        manifest, store, _ = toy_corpus
        cfg = small_cfg.clone()
        cfg.defrost()
        cfg.TIMBRE.STEPS = 0
        model, _ = train_timbre_encoder(manifest, store, cfg, seed=0)
        values = timbre_encode(store.load(manifest.ids[0]).mel, model).values
        assert np.linalg.norm(values) == pytest.approx(1.0, abs=1e-5)

    def test_too_few_speakers(self, toy_corpus, small_cfg):
        manifest, store, _ = toy_corpus
        three = CorpusManifest(records=tuple(r for r in manifest.records if r.speaker_id != manifest.speakers[0]))
        with pytest.raises(ValueError):
            train_timbre_encoder(three, store, small_cfg, seed=0)


def test_utterance_vectors_match_own_encoding(toy_corpus, model):
    manifest, store, _ = toy_corpus
    vectors = utterance_timbre_vectors(store, manifest.ids, model)
    subset = utterance_timbre_vectors(store, manifest.ids[:1], model)
    for utt in manifest.ids[:6]:
        expected = timbre_encode(store.load(utt).mel, model).values
        np.testing.assert_array_equal(vectors[utt].values, expected)
        assert vectors[utt].source_utterance == utt
    np.testing.assert_array_equal(subset[manifest.ids[0]].values, vectors[manifest.ids[0]].values)
