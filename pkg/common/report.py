"""
Result tables, confusion matrices and the JSON provenance bundle
"""

import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from common.ablation import ResultRow
from common.metrics import ConfusionMatrix
from common.visualization import render_confusion_heatmap
from data.labels import LABEL_ORDER

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RESULT_COLUMNS = ['system_no', 'content', 'rhythm', 'pitch', 'train_corpus', 'test_corpus', 'uar']


def _row_stem(i, row):
    return f'{i:02d}_system{row.system_no}_{row.train_corpus}_to_{row.test_corpus}'


def results_frame(rows):
    return pd.DataFrame([{c: getattr(r, c) for c in RESULT_COLUMNS} for r in rows], columns=RESULT_COLUMNS)


def emit_report(rows, out_dir, cfg=None, provenance=None):
    """
    Write results.csv, one confusion CSV and heatmap per row, and results.json

    Parameters
    ----------
    rows : list of ResultRow
    out_dir : str or Path
    cfg : CfgNode, optional
        EVAL.HEATMAP_CMAP is taken from it
    provenance : dict, optional
        extra entries of the JSON bundle (artifact hashes, manifests, ...)

    Returns
    -------
    dict
        paths of the written files

    Raises
    ------
    ValueError
        If `rows` is empty
    OSError
        If the directory cannot be written
    """
    if not rows:
        raise ValueError('Cannot emit a report without result rows')
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cmap = cfg.EVAL.HEATMAP_CMAP if cfg is not None else 'Blues'
    names = [label.value for label in LABEL_ORDER]

    results_csv = out_dir / 'results.csv'
    results_frame(rows).to_csv(results_csv, index=False, float_format='%.2f', lineterminator='\n')

    confusion_files, heatmaps = [], []
    for i, row in enumerate(rows, start=1):
        stem = _row_stem(i, row)
        frame = pd.DataFrame(row.confusion.normalized(), index=names, columns=names)
        frame.index.name = 'truth'
        path = out_dir / f'confusion_{stem}.csv'
        frame.to_csv(path, lineterminator='\n')
        confusion_files.append(path)
        title = f'system {row.system_no} ({row.mask_tag}) {row.train_corpus} -> {row.test_corpus}'
        heatmaps.append(render_confusion_heatmap(row.confusion, out_dir / f'confusion_{stem}.png', title, cmap))

    bundle = {
        'schema_version': SCHEMA_VERSION,
        'columns': RESULT_COLUMNS,
        'rows': [r.to_dict() for r in rows],
        'provenance': provenance or {},
    }
    results_json = out_dir / 'results.json'
    with results_json.open('w', encoding='utf-8') as fh:
        json.dump(bundle, fh, indent=2, sort_keys=True)

    logger.info(f'=> wrote {len(rows)} result rows to {out_dir}')
    return {'csv': results_csv, 'json': results_json, 'confusion': confusion_files, 'heatmaps': heatmaps}


def row_from_dict(d):
    counts = np.asarray(d['confusion']['counts'], dtype=np.int64)
    return ResultRow(
        system_no=int(d['system_no']), mask_tag=d['mask_tag'],
        content=d['content'], rhythm=d['rhythm'], pitch=d['pitch'],
        train_corpus=d['train_corpus'], test_corpus=d['test_corpus'], uar=float(d['uar']),
        confusion=ConfusionMatrix(counts), runs=list(d.get('runs', [])), seeds=list(d.get('seeds', [])),
        model_hashes=list(d.get('model_hashes', [])), flow_hash=d.get('flow_hash', ''))


def load_report(path):
    """
    Read a results.json bundle back

    Returns
    -------
    (list of ResultRow, dict)
        rows and provenance

    Raises
    ------
    ValueError
        On an unknown schema version
    """
    with Path(path).open('r', encoding='utf-8') as fh:
        bundle = json.load(fh)
    version = bundle.get('schema_version')
    if version != SCHEMA_VERSION:
        raise ValueError(f'Unsupported results schema version {version}, expected {SCHEMA_VERSION}')
    return [row_from_dict(d) for d in bundle['rows']], bundle.get('provenance', {})
