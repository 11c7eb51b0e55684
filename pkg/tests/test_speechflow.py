import numpy as np
import pytest
import torch

from common.artifacts import ArtifactMismatchError
from common.config import get_cfg
from common.loss import corpus_mse, mean_frame_baseline_mse, reconstruction_loss
from common.utils import state_dict_hash
from conftest import parameter_gradient_errors
from model.speechflow import (FactorMask, build_speechflow, decode, encode, load_speechflow, mask_inputs,
                              save_speechflow)

T = 128


@pytest.fixture
def model(small_cfg):
    torch.manual_seed(0)
    return build_speechflow(small_cfg)


@pytest.fixture
def utterance(rng):
    mel = rng.normal(-5.0, 2.0, size=(T, 80)).astype(np.float32)
    pitch = np.stack([rng.normal(size=T), rng.random(T) < 0.6], axis=1).astype(np.float32)
    return mel, pitch


class TestFactorMask:
    @pytest.mark.parametrize('tag', ['CRP', '---', 'C--', '-R-', '--P', 'CR-', 'C-P', '-RP'])
    def test_tags(self, tag):
        assert FactorMask.from_tag(tag).tag == tag

    @pytest.mark.parametrize('tag', ['CR', 'XRP', 'crpp', 'P--'])
    def test_bad_tags(self, tag):
        with pytest.raises(ValueError):
            FactorMask.from_tag(tag)


class TestMaskInputs:
    def test_zeroes_removed_factors(self, utterance):
        mel, pitch = utterance
        inputs = mask_inputs(mel, pitch, FactorMask.from_tag('-R-'))
        assert not inputs.s_c.any() and not inputs.p_f.any()
        np.testing.assert_array_equal(inputs.s_r, mel)
        assert inputs.s_c.shape == mel.shape and inputs.p_f.shape == pitch.shape

    def test_idempotent(self, utterance):
        mask = FactorMask.from_tag('C-P')
        once = mask_inputs(*utterance, mask)
        twice = once.masked(mask)
        for a, b in zip((once.s_c, once.s_r, once.p_f), (twice.s_c, twice.s_r, twice.p_f)):
            np.testing.assert_array_equal(a, b)

    def test_misaligned(self, utterance):
        mel, pitch = utterance
        with pytest.raises(ValueError):
            mask_inputs(mel, pitch[:-1], FactorMask())


class TestEncodeDecode:
    def test_code_lengths(self, model, utterance, small_cfg):
        bundle = encode(mask_inputs(*utterance, FactorMask()), np.ones(8, np.float32) / np.sqrt(8), model)
        assert bundle.z_c.shape == (T // 8, small_cfg.FLOW.DIM_CONTENT)
        assert bundle.z_r.shape == (T // 8, small_cfg.FLOW.DIM_RHYTHM)
        assert bundle.z_f.shape == (T // 8, small_cfg.FLOW.DIM_PITCH)
        assert bundle.n_frames == T

    def test_decode_lengths(self, model, utterance):
        bundle = encode(mask_inputs(*utterance, FactorMask()), np.zeros(8, np.float32), model)
        assert decode(bundle, T, model).frames.shape == (T, 80)
        assert decode(bundle, T + 13, model).frames.shape == (T + 13, 80)
        for bad in (0, -1):
            with pytest.raises(ValueError):
                decode(bundle, bad, model)

    def test_rr_is_seeded(self, model, utterance):
        inputs = mask_inputs(*utterance, FactorMask())
        z = np.zeros(8, np.float32)
        a, b = encode(inputs, z, model, rr_seed=3), encode(inputs, z, model, rr_seed=3)
        np.testing.assert_array_equal(a.z_c, b.z_c)
        np.testing.assert_array_equal(a.z_r, encode(inputs, z, model).z_r)

    def test_bad_timbre_width(self, model, utterance):
        with pytest.raises(ValueError):
            encode(mask_inputs(*utterance, FactorMask()), np.zeros(5, np.float32), model)

    def test_all_removed_ignores_utterance(self, model, utterance, rng):
        mask = FactorMask.from_tag('---')
        z = np.ones(8, np.float32) / np.sqrt(8)
        other = (rng.normal(size=(T, 80)).astype(np.float32), utterance[1][::-1].copy())
        a = decode(encode(mask_inputs(*utterance, mask), z, model), T, model).frames
        b = decode(encode(mask_inputs(*other, mask), z, model), T, model).frames
        np.testing.assert_allclose(a, b, atol=1e-6)

    def test_gradients(self, small_cfg):
        torch.manual_seed(1)
        model = build_speechflow(small_cfg).double().eval()
        s = torch.randn(1, 16, 80, dtype=torch.float64)
        p = torch.randn(1, 16, 2, dtype=torch.float64)
        z = torch.nn.functional.normalize(torch.randn(1, 8, dtype=torch.float64), dim=-1)

        def loss_fn():
            return torch.mean((model(s, s, p, z) - s) ** 2)

        groups = ['content_encoder', 'rhythm_encoder', 'pitch_encoder', 'decoder']
        errors = parameter_gradient_errors(model, loss_fn, groups)
        assert set(errors) == set(groups)
        assert max(errors.values()) < 1e-3, errors


class TestReconstructionLoss:
    def test_symmetric(self, rng):
        a, b = rng.normal(size=(10, 80)), rng.normal(size=(10, 80))
        assert reconstruction_loss(a, b) == pytest.approx(reconstruction_loss(b, a))
        total, mean = reconstruction_loss(a, b)
        assert mean == pytest.approx(total / 800)
        assert reconstruction_loss(a, a) == (0.0, 0.0)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            reconstruction_loss(rng.normal(size=(10, 80)), rng.normal(size=(9, 80)))

    def test_mean_frame_baseline(self, rng):
        mels = [rng.normal(size=(n, 80)) for n in (5, 9)]
        frames = np.concatenate(mels)
        baseline = [np.repeat(frames.mean(axis=0, keepdims=True), len(m), axis=0) for m in mels]
        assert mean_frame_baseline_mse(mels) == pytest.approx(corpus_mse(mels, baseline))


class TestArtifact:
    def test_round_trip(self, model, utterance, small_cfg, tmp_path):
        model_hash = save_speechflow(model, tmp_path / 'flow', small_cfg, seed=1)
        loaded, meta = load_speechflow(tmp_path / 'flow', small_cfg)
        assert meta['model_hash'] == model_hash == state_dict_hash(loaded)
        inputs = mask_inputs(*utterance, FactorMask.from_tag('C-P'))
        z = np.ones(8, np.float32) / np.sqrt(8)
        np.testing.assert_array_equal(decode(encode(inputs, z, model), T, model).frames,
                                      decode(encode(inputs, z, loaded), T, loaded).frames)

    def test_config_mismatch(self, model, small_cfg, tmp_path):
        save_speechflow(model, tmp_path / 'flow', small_cfg)
        other = get_cfg(opts=['RR.SEG_MAX', 40])
        with pytest.raises(ArtifactMismatchError):
            load_speechflow(tmp_path / 'flow', other)
        load_speechflow(tmp_path / 'flow', other, force=True)

    def test_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_speechflow(tmp_path)
