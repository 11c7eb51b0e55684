import numpy as np
import pytest
import torch

from common.config import get_cfg
from data.features import featurize
from data.manifest import split_corpus
from data.toy_corpus import ToyCorpusSpec, synth_toy_corpus

SMALL_OPTS = [
    'FLOW.DIM_TIMBRE', 8, 'TIMBRE.DIM', 8,
    'FLOW.CONV_DIM', 16, 'FLOW.N_CONVS', 1, 'FLOW.DEC_HIDDEN', 16, 'FLOW.DEC_LAYERS', 1,
    'FLOW.BATCH_SIZE', 2, 'FLOW.CROP_FRAMES', 32, 'FLOW.STEPS', 4, 'FLOW.VALID_EVERY', 2,
    'TIMBRE.HIDDEN', 16, 'TIMBRE.N_LAYERS', 1, 'TIMBRE.BATCH_SIZE', 4, 'TIMBRE.CROP_FRAMES', 16,
    'TIMBRE.STEPS', 3,
    'SER.CONV_CHANNELS', [4, 4, 4, 4, 4, 4], 'SER.FC_DIM', 8, 'SER.RNN_HIDDEN', 4, 'SER.ATTN_DIM', 4,
    'SER.HEAD_DIM', 4, 'SER.BATCH_SIZE', 4, 'SER.CROP_FRAMES', 32, 'SER.STEPS', 4, 'SER.EVAL_EVERY', 2,
]


@pytest.fixture(scope='session')
def cfg():
    return get_cfg()


@pytest.fixture(scope='session')
def small_cfg():
    """Tiny networks and a handful of steps, for plumbing tests"""
    return get_cfg(opts=SMALL_OPTS)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope='session')
def toy_corpus(tmp_path_factory, small_cfg):
    """4 speakers x 8 rhythm-coded utterances per class, 1 s each, split and featurized"""
    root = tmp_path_factory.mktemp('toy')
    spec = ToyCorpusSpec('rhythm', n_speakers=4, n_utterances_per_class=8, utterance_duration=1.0, seed=7)
    manifest, params = synth_toy_corpus(spec, root / 'corpus', small_cfg)
    manifest = split_corpus(manifest, (0.5, 0.25, 0.25), seed=0)
    store = featurize(manifest, root / 'features', small_cfg)
    return manifest, store, params


def parameter_gradient_errors(model, loss_fn, groups, per_tensor=3, eps=1e-6, seed=0):
    """
    Relative error between autograd and central differences for a few
    random entries of every parameter tensor of the named submodules

    `model` must be in double precision and deterministic (eval mode).
    Returns {group: worst relative error}.
    """
    rng = np.random.default_rng(seed)
    model.zero_grad()
    loss_fn().backward()
    worst = {}
    for group in groups:
        params = list(getattr(model, group).parameters())
        assert params, f'{group} has no parameters'
        errors = []
        for p in params:
            flat, grad = p.data.view(-1), p.grad.view(-1)
            for k in rng.choice(flat.numel(), size=min(per_tensor, flat.numel()), replace=False):
                orig = flat[k].item()
                with torch.no_grad():
                    flat[k] = orig + eps
                    up = loss_fn().item()
                    flat[k] = orig - eps
                    down = loss_fn().item()
                    flat[k] = orig
                numeric, analytic = (up - down) / (2 * eps), grad[k].item()
                # floor keeps roundoff on vanishing gradients from dominating
                errors.append(abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-5))
        worst[group] = max(errors)
    return worst
