import json

import pytest

from data.labels import EmotionLabel
from data.manifest import (CorpusManifest, ManifestError, Split, UtteranceRecord, load_manifest,
                           save_manifest, split_corpus)


def _record(i, speaker, label='A', corpus='c'):
    return {'id': f'u{i:03d}', 'speaker_id': speaker, 'label': label, 'audio_path': f'/x/u{i}.wav',
            'duration': 1.5, 'corpus': corpus, 'split': 'unassigned'}


def _write(path, objs):
    path.write_text(''.join(json.dumps(o) + '\n' for o in objs), encoding='utf-8')
    return path


def _manifest(n_speakers, per_speaker=3):
    records = [UtteranceRecord(f's{s}_{j}', f's{s}', EmotionLabel.N, '', 1.0, 'c')
               for s in range(n_speakers) for j in range(per_speaker)]
    return CorpusManifest(records=tuple(records))


class TestLoadManifest:
    def test_reads_records(self, tmp_path):
        path = _write(tmp_path / 'm.jsonl', [_record(0, 'a'), _record(1, 'b', 'N')])
        manifest = load_manifest(path)
        assert manifest.ids == ['u000', 'u001']
        assert manifest.records[1].label is EmotionLabel.N
        assert manifest.records[0].split is Split.UNASSIGNED

    def test_bad_json_names_line(self, tmp_path):
        path = tmp_path / 'm.jsonl'
        path.write_text(json.dumps(_record(0, 'a')) + '\n{oops\n', encoding='utf-8')
        with pytest.raises(ManifestError, match='line 2'):
            load_manifest(path)

    def test_duplicate_id_names_id(self, tmp_path):
        path = _write(tmp_path / 'm.jsonl', [_record(0, 'a'), _record(0, 'b')])
        with pytest.raises(ManifestError, match='u000'):
            load_manifest(path)

    def test_missing_field(self, tmp_path):
        obj = _record(0, 'a')
        del obj['duration']
        with pytest.raises(ManifestError, match='duration'):
            load_manifest(_write(tmp_path / 'm.jsonl', [obj]))

    def test_nonpositive_duration(self, tmp_path):
        obj = dict(_record(0, 'a'), duration=0)
        with pytest.raises(ManifestError):
            load_manifest(_write(tmp_path / 'm.jsonl', [obj]))

    def test_scheme_maps_and_rejects(self, tmp_path):
        path = _write(tmp_path / 'm.jsonl', [_record(0, 'a', 'ang'), _record(1, 'a', 'fru'),
                                             _record(2, 'a', 'exc')])
        plain = load_manifest(path, scheme='iemocap')
        assert [r.label for r in plain.records] == [EmotionLabel.A, None, None]
        merged = load_manifest(path, scheme='iemocap', merge={'exc': 'H'})
        assert merged.records[2].label is EmotionLabel.H

    def test_save_load(self, tmp_path):
        manifest = load_manifest(_write(tmp_path / 'm.jsonl', [_record(0, 'a'), _record(1, 'b')]))
        again = load_manifest(save_manifest(manifest, tmp_path / 'out' / 'm.jsonl'))
        assert again == manifest


class TestSplitCorpus:
    def test_speaker_disjoint(self):
        manifest = split_corpus(_manifest(10), seed=3)
        by_split = {}
        for r in manifest.records:
            by_split.setdefault(r.split, set()).add(r.speaker_id)
        assert set(by_split) == {Split.TRAIN, Split.VALID, Split.TEST}
        assert not by_split[Split.TRAIN] & by_split[Split.VALID]
        assert not by_split[Split.TRAIN] & by_split[Split.TEST]
        assert not by_split[Split.VALID] & by_split[Split.TEST]
        assert [len(by_split[s]) for s in (Split.TRAIN, Split.VALID, Split.TEST)] == [8, 1, 1]

    def test_deterministic(self):
        assert split_corpus(_manifest(7), seed=11) == split_corpus(_manifest(7), seed=11)

    def test_keeps_order(self):
        manifest = _manifest(5)
        assert split_corpus(manifest, seed=0).ids == manifest.ids

    def test_three_speakers_minimum(self):
        manifest = split_corpus(_manifest(3), seed=0)
        assert len({r.split for r in manifest.records}) == 3
        with pytest.raises(ValueError):
            split_corpus(_manifest(2))

    def test_bad_ratios(self):
        with pytest.raises(ValueError):
            split_corpus(_manifest(5), (0.5, 0.5, 0.5))
