import numpy as np
import pytest

from data.timeseries_utils import interp_along_time, random_resample


class TestRandomResample:
    def test_length_bounds(self):
        seq = np.random.default_rng(0).normal(size=(100, 3))
        lengths = [len(random_resample(seq, seed)) for seed in range(10000)]
        assert min(lengths) >= 50
        assert max(lengths) <= 151

    def test_unit_factor_is_identity(self):
        seq = np.random.default_rng(1).normal(size=(77, 5))
        out = random_resample(seq, 3, alpha_range=(1.0, 1.0))
        np.testing.assert_array_equal(out, seq)

    def test_deterministic(self):
        seq = np.arange(60, dtype=np.float64)
        np.testing.assert_array_equal(random_resample(seq, 42), random_resample(seq, 42))

    def test_values_stay_in_hull(self):
        seq = np.random.default_rng(2).uniform(-1, 1, size=(90, 2))
        out = random_resample(seq, 5)
        assert out.shape[1] == 2
        assert out.min() >= seq.min() - 1e-12 and out.max() <= seq.max() + 1e-12

    def test_single_frame(self):
        out = random_resample(np.ones((1, 4)), 0)
        assert len(out) >= 1
        np.testing.assert_allclose(out, 1.0)

    def test_empty(self):
        with pytest.raises(ValueError):
            random_resample(np.zeros((0, 4)), 0)


def test_interp_endpoints():
    data = np.linspace(0.0, 1.0, 11)
    out = interp_along_time(data, 21)
    assert len(out) == 21
    assert out[0] == pytest.approx(0.0) and out[-1] == pytest.approx(1.0)
    assert np.all(np.diff(out) >= 0)
