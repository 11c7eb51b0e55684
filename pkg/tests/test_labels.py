import pytest

from data.labels import LABEL_ORDER, LABEL_SCHEMES, EmotionLabel, LabelSchemeError, map_labels


class TestMapLabels:
    @pytest.mark.parametrize('raw,expected', [
        ('ang', EmotionLabel.A), ('hap', EmotionLabel.H), ('sad', EmotionLabel.S), ('neu', EmotionLabel.N),
        ('Neutral', EmotionLabel.N), ('fru', None), ('exc', None), ('xxx', None),
    ])
    def test_iemocap(self, raw, expected):
        assert map_labels(raw, 'iemocap') is expected

    def test_savee_prefixes(self):
        assert map_labels('sa', 'savee') is EmotionLabel.S
        assert map_labels('su', 'savee') is None
        assert map_labels('d', 'savee') is None

    def test_merge_map(self):
        assert map_labels('exc', 'iemocap', {'exc': 'h'}) is EmotionLabel.H

    def test_total(self):
        for scheme in LABEL_SCHEMES:
            for raw in ('angry', 'happy', 'sad', 'neutral', 'surprise', '', None):
                out = map_labels(raw, scheme)
                assert out is None or out in LABEL_ORDER

    def test_unknown_scheme(self):
        with pytest.raises(LabelSchemeError):
            map_labels('ang', 'nope')
        with pytest.raises(KeyError):
            map_labels('ang', 'nope')


def test_class_order():
    assert [label.value for label in LABEL_ORDER] == ['A', 'H', 'S', 'N']
    assert [label.class_index for label in LABEL_ORDER] == [0, 1, 2, 3]
    assert EmotionLabel.from_index(2) is EmotionLabel.S
