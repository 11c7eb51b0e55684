"""
Run configuration

All defaults live in the module level node `_C`, one section per stage.
YAML files under model/configs/ override them and are merged by `get_cfg`.
"""

import hashlib
import json
import os

from yacs.config import CfgNode as CN

CACHE_DIR_ENV = 'FACTORSER_CACHE_DIR'

_C = CN()

_C.SEED = 1234

# default feature store; FACTORSER_CACHE_DIR overrides it
_C.PATHS = CN()
_C.PATHS.FEATURES_DIR = 'features'

# data ingestion
_C.DATA = CN()
_C.DATA.SAMPLE_RATE = 16000
_C.DATA.SPLIT_RATIOS = [0.8, 0.1, 0.1]
# per-scheme extra label mappings, e.g. LABEL_MERGE.iemocap = [['excited', 'H']]
_C.DATA.LABEL_MERGE = CN(new_allowed=True)

# synthetic factor-coded corpora
_C.TOY = CN()
_C.TOY.DURATION = 2.0
_C.TOY.SYLLABLE_RATES = [2.0, 3.0, 4.0, 5.5]    # Hz, class-coded rhythm
_C.TOY.RATE_RANGE = [2.0, 5.5]                  # Hz, rhythm when not coded
_C.TOY.RATE_JITTER = 0.04
_C.TOY.DUTY_CYCLE = 0.6
_C.TOY.F0_SLOPES = [-0.6, -0.2, 0.2, 0.6]       # octaves/s, class-coded pitch
_C.TOY.F0_SLOPE_STD = 0.03
_C.TOY.SPEAKER_F0_RANGE = [100.0, 200.0]
_C.TOY.FORMANT_SCALE_RANGE = [0.9, 1.1]
_C.TOY.TILT_RANGE = [0.90, 0.97]
_C.TOY.NOISE_LEVEL = 1e-3
_C.TOY.PEAK = 0.5
# vowel templates (F1, F2, F3) in Hz
_C.TOY.VOWELS = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [530.0, 1840.0, 2480.0],
    [300.0, 870.0, 2240.0],
    [660.0, 1720.0, 2410.0],
    [440.0, 1020.0, 2240.0],
    [570.0, 840.0, 2410.0],
    [390.0, 1990.0, 2550.0],
]
_C.TOY.FORMANT_BANDWIDTHS = [90.0, 110.0, 140.0]

# feature extraction
_C.FRONTEND = CN()
_C.FRONTEND.SAMPLE_RATE = 16000
_C.FRONTEND.WIN_LENGTH = 1024
_C.FRONTEND.HOP_LENGTH = 256
_C.FRONTEND.N_MELS = 80
_C.FRONTEND.FMIN = 90.0
_C.FRONTEND.FMAX = 7600.0
_C.FRONTEND.MAG_FLOOR = 1e-10
_C.FRONTEND.F0_MIN = 50.0
_C.FRONTEND.F0_MAX = 600.0
_C.FRONTEND.YIN_THRESHOLD = 0.3
_C.FRONTEND.IMAGE_VMAX = 5.0
_C.FRONTEND.IMAGE_CMAP = 'viridis'
_C.FRONTEND.IMAGE_SCALE = 4

# random resampling
_C.RR = CN()
_C.RR.SEG_MIN = 19
_C.RR.SEG_MAX = 32
_C.RR.ALPHA_MIN = 0.5
_C.RR.ALPHA_MAX = 1.5

# factorized autoencoder
_C.FLOW = CN()
_C.FLOW.DIM_CONTENT = 8
_C.FLOW.DIM_RHYTHM = 2
_C.FLOW.DIM_PITCH = 32
_C.FLOW.DIM_TIMBRE = 64
_C.FLOW.FREQ_CONTENT = 8
_C.FLOW.FREQ_RHYTHM = 8
_C.FLOW.FREQ_PITCH = 8
_C.FLOW.CONV_DIM = 256
_C.FLOW.N_CONVS = 3
_C.FLOW.GROUPS = 8
_C.FLOW.DEC_HIDDEN = 256
_C.FLOW.DEC_LAYERS = 2
_C.FLOW.LR = 1e-4
_C.FLOW.BATCH_SIZE = 8
_C.FLOW.GRAD_CLIP = 1.0
_C.FLOW.CROP_FRAMES = 128
_C.FLOW.STEPS = 100000
_C.FLOW.VALID_EVERY = 1000
_C.FLOW.LOG_EVERY = 100

# d-vector speaker encoder
_C.TIMBRE = CN()
_C.TIMBRE.HIDDEN = 256
_C.TIMBRE.N_LAYERS = 3
_C.TIMBRE.DIM = 64
_C.TIMBRE.LR = 1e-3
_C.TIMBRE.BATCH_SIZE = 32
_C.TIMBRE.CROP_FRAMES = 64
_C.TIMBRE.STEPS = 5000
_C.TIMBRE.LOG_EVERY = 100

# emotion classifier
_C.SER = CN()
_C.SER.CONV_CHANNELS = [64, 64, 64, 64, 64, 64]
_C.SER.KERNEL = [5, 3]
_C.SER.FREQ_POOL = 4
_C.SER.FC_DIM = 256
_C.SER.RNN_HIDDEN = 128
_C.SER.ATTN_DIM = 64
_C.SER.HEAD_DIM = 64
_C.SER.DROPOUT = 0.1
_C.SER.LR = 1e-3
_C.SER.BATCH_SIZE = 16
_C.SER.CROP_FRAMES = 300
_C.SER.STEPS = 3000
_C.SER.EVAL_EVERY = 100
_C.SER.PATIENCE = 10
_C.SER.CLASS_WEIGHTS = False
_C.SER.LOG_EVERY = 100

# evaluation harness
_C.EVAL = CN()
_C.EVAL.REPEATS = 1
_C.EVAL.HEATMAP_CMAP = 'Blues'


def get_defaults():
    return _C.clone()


def _validate(cfg):
    flow = cfg.FLOW
    widths = [(flow.DIM_CONTENT, flow.FREQ_CONTENT),
              (flow.DIM_RHYTHM, flow.FREQ_RHYTHM),
              (flow.DIM_PITCH, flow.FREQ_PITCH)]
    for dim, freq in widths:
        if dim <= 0 or dim % 2 != 0:
            raise ValueError(f'Code widths must be positive and even, got {dim}')
        if freq < 1:
            raise ValueError(f'Illegal downsampling factor: {freq}')
    per_frame = sum(dim / freq for dim, freq in widths)
    if per_frame >= cfg.FRONTEND.N_MELS:
        raise ValueError(
            f'Information bottleneck violated: {per_frame:.2f} latent values '
            f'per frame >= {cfg.FRONTEND.N_MELS} mel bins')
    if flow.DIM_TIMBRE != cfg.TIMBRE.DIM:
        raise ValueError(f'FLOW.DIM_TIMBRE ({flow.DIM_TIMBRE}) must equal '
                         f'TIMBRE.DIM ({cfg.TIMBRE.DIM})')
    if not 1 <= cfg.RR.SEG_MIN <= cfg.RR.SEG_MAX:
        raise ValueError('RR segment range must satisfy 1 <= SEG_MIN <= SEG_MAX')
    if not 0 < cfg.RR.ALPHA_MIN <= cfg.RR.ALPHA_MAX:
        raise ValueError('RR factor range must satisfy 0 < ALPHA_MIN <= ALPHA_MAX')
    if abs(sum(cfg.DATA.SPLIT_RATIOS) - 1.0) > 1e-6:
        raise ValueError(f'Split ratios must sum to 1, got {cfg.DATA.SPLIT_RATIOS}')
    if len(cfg.SER.CONV_CHANNELS) != 6:
        raise ValueError('SER.CONV_CHANNELS needs 6 entries (pooled conv + 5 convs)')


def get_cfg(config_file=None, opts=None, validate=True):
    """
    Build the run configuration

    Parameters
    ----------
    config_file : str or Path, optional
        YAML file merged over the defaults
    opts : list, optional
        flat [KEY, VALUE, ...] overrides, e.g. ['FLOW.LR', '1e-3']
    validate : bool
        run the consistency checks (bottleneck etc.) before freezing

    Returns
    -------
    CfgNode
        frozen configuration
    """
    cfg = get_defaults()
    if config_file:
        cfg.merge_from_file(str(config_file))
    if opts:
        cfg.merge_from_list(list(opts))
    cache_dir = os.environ.get(CACHE_DIR_ENV)
    if cache_dir:
        cfg.PATHS.FEATURES_DIR = cache_dir
    if validate:
        _validate(cfg)
    cfg.freeze()
    return cfg


def _to_plain(node):
    if isinstance(node, CN):
        return {k: _to_plain(v) for k, v in node.items()}
    if isinstance(node, (list, tuple)):
        return [_to_plain(v) for v in node]
    return node


def section_dict(cfg, *sections):
    return {name: _to_plain(cfg[name]) for name in sections}


def section_hash(cfg, *sections):
    """SHA-256 over the canonical JSON dump of the named config sections"""
    blob = json.dumps(section_dict(cfg, *sections), sort_keys=True)
    return hashlib.sha256(blob.encode('utf-8')).hexdigest()


def frontend_hash(cfg):
    return section_hash(cfg, 'FRONTEND')
