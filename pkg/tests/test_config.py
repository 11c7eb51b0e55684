from pathlib import Path

import pytest

from common.config import CACHE_DIR_ENV, get_cfg, section_hash

CONFIG_DIR = Path(__file__).resolve().parents[1] / 'model' / 'configs'


class TestGetCfg:
    def test_frozen_defaults(self):
        cfg = get_cfg()
        assert cfg.is_frozen()
        assert cfg.FRONTEND.N_MELS == 80
        assert cfg.FLOW.DIM_TIMBRE == cfg.TIMBRE.DIM

    def test_yaml_files(self):
        for name in ('default', 'toy'):
            cfg = get_cfg(CONFIG_DIR / f'{name}.yaml')
            assert len(cfg.SER.CONV_CHANNELS) == 6

    def test_bottleneck_violation(self):
        with pytest.raises(ValueError, match='bottleneck'):
            get_cfg(opts=['FLOW.FREQ_PITCH', 1, 'FLOW.DIM_PITCH', 80])

    def test_odd_code_width(self):
        with pytest.raises(ValueError):
            get_cfg(opts=['FLOW.DIM_RHYTHM', 3])

    def test_timbre_width_mismatch(self):
        with pytest.raises(ValueError):
            get_cfg(opts=['TIMBRE.DIM', 32])

    def test_cache_dir_env(self, monkeypatch):
        monkeypatch.setenv(CACHE_DIR_ENV, '/tmp/feats')
        assert get_cfg().PATHS.FEATURES_DIR == '/tmp/feats'


def test_section_hash():
    a, b = get_cfg(), get_cfg(opts=['SER.LR', 0.01])
    assert section_hash(a, 'FRONTEND') == section_hash(b, 'FRONTEND')
    assert section_hash(a, 'SER') != section_hash(b, 'SER')
