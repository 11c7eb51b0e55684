"""
Four-class emotion labels and per-corpus label schemes

Every corpus names its emotions differently. The schemes below map the raw
strings to the four overlapping classes A(ngry), H(appy), S(ad), N(eutral);
anything else is rejected (None).
"""

from enum import Enum


class EmotionLabel(str, Enum):
    A = 'A'
    H = 'H'
    S = 'S'
    N = 'N'

    @property
    def class_index(self):
        return LABEL_ORDER.index(self)

    @classmethod
    def from_index(cls, idx):
        return LABEL_ORDER[int(idx)]


LABEL_ORDER = (EmotionLabel.A, EmotionLabel.H, EmotionLabel.S, EmotionLabel.N)
NUM_CLASSES = len(LABEL_ORDER)


class LabelSchemeError(KeyError):
    pass


_COMMON = {
    'a': EmotionLabel.A, 'angry': EmotionLabel.A, 'anger': EmotionLabel.A,
    'h': EmotionLabel.H, 'happy': EmotionLabel.H, 'happiness': EmotionLabel.H,
    's': EmotionLabel.S, 'sad': EmotionLabel.S, 'sadness': EmotionLabel.S,
    'n': EmotionLabel.N, 'neutral': EmotionLabel.N,
}

LABEL_SCHEMES = {
    'default': dict(_COMMON),
    # IEMOCAP evaluation codes; 'exc' (excited) is rejected unless merged
    'iemocap': {**_COMMON, 'ang': EmotionLabel.A, 'hap': EmotionLabel.H,
                'sad': EmotionLabel.S, 'neu': EmotionLabel.N},
    # SAVEE file prefixes: a, d, f, h, n, sa, su
    'savee': {**_COMMON, 'sa': EmotionLabel.S},
    'esdb': {**_COMMON, 'joy': EmotionLabel.H, 'calm': EmotionLabel.N},
    'toy': dict(_COMMON),
}


def registered_schemes():
    return sorted(LABEL_SCHEMES)


def map_labels(raw, scheme, merge=None):
    """
    Map a raw corpus label onto the four-class scheme

    Parameters
    ----------
    raw : str
        label as it appears in the corpus
    scheme : str
        registered corpus scheme name
    merge : dict, optional
        extra raw -> class letter mappings for this corpus (e.g. excited -> H)

    Returns
    -------
    EmotionLabel or None
        None marks a rejected label

    Raises
    ------
    LabelSchemeError
        If the scheme is not registered
    """
    if scheme not in LABEL_SCHEMES:
        raise LabelSchemeError(f'Unknown label scheme "{scheme}". '
                               f'Registered: {registered_schemes()}')
    if raw is None:
        return None
    if isinstance(raw, EmotionLabel):
        return raw
    key = str(raw).strip().lower()
    if merge:
        merged = {str(k).strip().lower(): v for k, v in merge.items()}
        if key in merged:
            return EmotionLabel(str(merged[key]).upper())
    return LABEL_SCHEMES[scheme].get(key)


def merge_map_from_cfg(cfg, scheme):
    """LABEL_MERGE entries are stored as [[raw, letter], ...] lists"""
    pairs = cfg.DATA.LABEL_MERGE.get(scheme, None)
    if not pairs:
        return None
    return {raw: letter for raw, letter in pairs}
