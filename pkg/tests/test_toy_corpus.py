from pathlib import Path

import numpy as np
import pytest
from sklearn.model_selection import StratifiedKFold, cross_val_score
from sklearn.tree import DecisionTreeClassifier

from data.toy_corpus import (ToyCorpusSpec, draw_speaker_params, draw_utterance_params, envelope_rate,
                             f0_track, load_generator_params, syllable_envelope, synthesize_utterance,
                             utterance_plan)

SR = 16000


def _params(cfg, factor, per_class=50, n_speakers=8, seed=0):
    spec = ToyCorpusSpec(factor, n_speakers=n_speakers, n_utterances_per_class=per_class, seed=seed)
    speakers = {s: draw_speaker_params(spec, s, cfg) for s in spec.speakers}
    return [draw_utterance_params(spec, utt_id, speakers[spk], c, cfg) for utt_id, spk, c in utterance_plan(spec)]


def _summary(p):
    """Statistics of every factor except the coding one"""
    stats = {
        'rhythm': [p.syllable_rate],
        'pitch': [p.f0_slope],
        'content': [np.mean(p.vowels), np.std(p.vowels)],
    }
    shared = [p.base_f0, p.formant_scale, p.tilt, p.onset]
    return shared + [v for factor, values in stats.items() if factor != p.coding_factor for v in values]


class TestToyCorpusSpec:
    @pytest.mark.parametrize('kwargs', [
        dict(coding_factor='loudness'), dict(coding_factor='rhythm', n_speakers=3),
        dict(coding_factor='rhythm', n_utterances_per_class=7), dict(coding_factor='pitch', rate_scale=0),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ToyCorpusSpec(**kwargs)

    def test_plan_balanced(self):
        plan = utterance_plan(ToyCorpusSpec('rhythm', n_speakers=4, n_utterances_per_class=8))
        assert len(plan) == 32
        assert len({u for u, _, _ in plan}) == 32
        for spk in ToyCorpusSpec('rhythm', n_speakers=4).speakers:
            assert sorted(c for _, s, c in plan if s == spk) == [0, 0, 1, 1, 2, 2, 3, 3]


class TestFactorCoding:
    def test_rhythm_recovered_from_envelope(self, cfg):
        params = _params(cfg, 'rhythm')
        rates = np.array(cfg.TOY.SYLLABLE_RATES)
        hits = 0
        for p in params:
            rate = envelope_rate(syllable_envelope(p, SR, cfg.TOY.DUTY_CYCLE), SR)
            hits += int(np.argmin(np.abs(rates - rate))) == p.class_index
        assert hits / len(params) >= 0.95

    def test_pitch_slopes_separated(self, cfg):
        params = _params(cfg, 'pitch')
        slopes = {c: [] for c in range(4)}
        for p in params:
            f0 = f0_track(p, SR)
            slopes[p.class_index].append(np.log2(f0[-1] / f0[0]) * SR / (len(f0) - 1))
        means = np.array([np.mean(slopes[c]) for c in range(4)])
        stds = np.array([np.std(slopes[c]) for c in range(4)])
        assert np.all(np.diff(means) >= 3 * stds.max())

    def test_content_vowels_coded(self, cfg):
        for p in _params(cfg, 'content', per_class=8):
            assert set(p.vowels) <= {2 * p.class_index, 2 * p.class_index + 1}

    @pytest.mark.parametrize('factor', ['rhythm', 'pitch', 'content'])
    def test_non_coding_statistics_uninformative(self, cfg, factor):
        params = _params(cfg, factor)
        x = np.array([_summary(p) for p in params])
        y = np.array([p.class_index for p in params])
        assert len(y) == 200
        stump = DecisionTreeClassifier(max_depth=1, random_state=0)
        scores = cross_val_score(stump, x, y, cv=StratifiedKFold(5, shuffle=True, random_state=0))
        assert scores.mean() <= 0.35


class TestSynthesis:
    def test_deterministic(self, cfg):
        p = _params(cfg, 'rhythm', per_class=8)[5]
        a, b = synthesize_utterance(p, cfg, SR), synthesize_utterance(p, cfg, SR)
        np.testing.assert_array_equal(a.samples, b.samples)
        assert a.duration == pytest.approx(p.duration)
        assert np.abs(a.samples).max() <= 1.0

    def test_corpus_on_disk(self, toy_corpus):
        manifest, _, params = toy_corpus
        assert len(manifest) == 32
        assert manifest.corpus == 'toy'
        assert all(r.label is not None for r in manifest.records)
        corpus_dir = Path(manifest.records[0].audio_path).parents[1]
        assert load_generator_params(corpus_dir / 'generator.jsonl') == params

    def test_speaker_prefix(self):
        spec = ToyCorpusSpec('pitch', corpus='other', speaker_prefix='zz')
        assert spec.speakers[0] == 'zz00'
        assert ToyCorpusSpec('pitch', corpus='other').speakers[1] == 'other-spk01'
