"""
Factor-coded synthetic corpora

Each utterance is a source-filter signal: an impulse train following an f0
track, a one-pole glottal/tilt low-pass, a cascade of three formant
resonators chosen per syllable, and a raised-cosine syllable envelope. The
class label is written into exactly one of rhythm (syllable rate), pitch (f0
slope) or content (vowel sequence); everything else is drawn independently
of the class.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter
from tqdm import tqdm

from common.utils import derive_seed
from data.audio import Waveform, write_wav
from data.labels import LABEL_ORDER, NUM_CLASSES
from data.manifest import CorpusManifest, UtteranceRecord, save_manifest

logger = logging.getLogger(__name__)

CODING_FACTORS = ('rhythm', 'pitch', 'content')
MIN_SPEAKERS = 4
MIN_PER_CLASS = 8


@dataclass(frozen=True)
class ToyCorpusSpec:
    coding_factor: str
    n_speakers: int = 8
    n_utterances_per_class: int = 32
    utterance_duration: float = 2.0
    seed: int = 0
    corpus: str = 'toy'
    rate_scale: float = 1.0
    speaker_prefix: str = None

    def __post_init__(self):
        if self.coding_factor not in CODING_FACTORS:
            raise ValueError(f'Illegal coding factor "{self.coding_factor}", '
                             f'expected one of {CODING_FACTORS}')
        if self.n_speakers < MIN_SPEAKERS:
            raise ValueError(f'Toy corpus needs at least {MIN_SPEAKERS} speakers, got {self.n_speakers}')
        if self.n_utterances_per_class < MIN_PER_CLASS:
            raise ValueError(f'Toy corpus needs at least {MIN_PER_CLASS} utterances per class, '
                             f'got {self.n_utterances_per_class}')
        if not self.utterance_duration > 0.1:
            raise ValueError(f'Utterance duration too short: {self.utterance_duration}')
        if not self.rate_scale > 0:
            raise ValueError(f'rate_scale must be positive, got {self.rate_scale}')

    @property
    def speakers(self):
        prefix = self.speaker_prefix if self.speaker_prefix is not None else f'{self.corpus}-spk'
        return [f'{prefix}{i:02d}' for i in range(self.n_speakers)]


@dataclass(frozen=True)
class SpeakerParams:
    speaker_id: str
    base_f0: float
    formant_scale: float
    tilt: float


@dataclass(frozen=True)
class UtteranceParams:
    """Everything the generator used for one utterance (written to generator.jsonl)"""

    utt_id: str
    speaker_id: str
    label: str
    class_index: int
    coding_factor: str
    duration: float
    syllable_rate: float
    onset: float
    f0_slope: float
    vowels: list = field(default_factory=list)
    base_f0: float = 150.0
    formant_scale: float = 1.0
    tilt: float = 0.95

    def to_dict(self):
        return asdict(self)


def draw_speaker_params(spec, speaker_id, cfg):
    rng = np.random.default_rng(derive_seed(spec.seed, spec.corpus, speaker_id))
    toy = cfg.TOY
    return SpeakerParams(
        speaker_id=speaker_id,
        base_f0=float(rng.uniform(*toy.SPEAKER_F0_RANGE)),
        formant_scale=float(rng.uniform(*toy.FORMANT_SCALE_RANGE)),
        tilt=float(rng.uniform(*toy.TILT_RANGE)),
    )


def utterance_plan(spec):
    """(utt_id, speaker_id, class_index) triples; class utterances are spread round-robin over speakers"""
    speakers = spec.speakers
    plan = []
    for c in range(NUM_CLASSES):
        label = LABEL_ORDER[c].value
        for j in range(spec.n_utterances_per_class):
            spk = speakers[j % len(speakers)]
            plan.append((f'{spec.corpus}_{spk}_{label}_{j:03d}', spk, c))
    return plan


def draw_utterance_params(spec, utt_id, speaker, class_index, cfg):
    """
    Draw the generator parameters of one utterance

    Only the coding factor depends on `class_index`; the remaining factors
    come from the per-utterance generator seeded by SHA-256(seed, id).
    """
    toy = cfg.TOY
    rng = np.random.default_rng(derive_seed(spec.seed, spec.corpus, utt_id))
    factor = spec.coding_factor

    # draw every factor unconditionally so the stream layout is class independent
    free_rate = rng.uniform(*toy.RATE_RANGE)
    jitter = rng.uniform(-toy.RATE_JITTER, toy.RATE_JITTER)
    free_slope = rng.uniform(min(toy.F0_SLOPES), max(toy.F0_SLOPES))
    slope_noise = rng.normal(0.0, toy.F0_SLOPE_STD)
    onset = rng.uniform(0.0, 0.2)
    max_syllables = int(np.ceil(spec.utterance_duration * max(toy.RATE_RANGE + toy.SYLLABLE_RATES)
                                * spec.rate_scale)) + 2
    free_vowels = rng.integers(0, len(toy.VOWELS), size=max_syllables)
    parity = int(rng.integers(0, 2))

    if factor == 'rhythm':
        rate = toy.SYLLABLE_RATES[class_index] * (1.0 + jitter)
    else:
        rate = free_rate
    rate *= spec.rate_scale

    slope = toy.F0_SLOPES[class_index] + slope_noise if factor == 'pitch' else free_slope

    if factor == 'content':
        vowels = [2 * class_index + (k + parity) % 2 for k in range(max_syllables)]
    else:
        vowels = [int(v) for v in free_vowels]

    return UtteranceParams(
        utt_id=utt_id,
        speaker_id=speaker.speaker_id,
        label=LABEL_ORDER[class_index].value,
        class_index=int(class_index),
        coding_factor=factor,
        duration=float(spec.utterance_duration),
        syllable_rate=float(rate),
        onset=float(onset),
        f0_slope=float(slope),
        vowels=vowels,
        base_f0=speaker.base_f0,
        formant_scale=speaker.formant_scale,
        tilt=speaker.tilt,
    )


def _syllable_phase(params, sample_rate):
    n = int(round(params.duration * sample_rate))
    t = np.arange(n) / sample_rate
    return t, (t - params.onset) * params.syllable_rate


def syllable_envelope(params, sample_rate, duty_cycle):
    """Raised-cosine bursts, one per syllable period, zero before the onset"""
    _, phase = _syllable_phase(params, sample_rate)
    frac = phase - np.floor(phase)
    active = (phase >= 0) & (frac < duty_cycle)
    return np.where(active, 0.5 - 0.5 * np.cos(2 * np.pi * frac / duty_cycle), 0.0)


def envelope_rate(envelope, sample_rate, threshold=0.5):
    """
    Syllable rate estimated from the up-crossings of `threshold` (relative
    to the envelope peak); NaN with fewer than two up-crossings
    """
    peak = np.max(envelope) if len(envelope) else 0.0
    if peak <= 0:
        return float('nan')
    above = envelope >= threshold * peak
    ups = np.flatnonzero(above[1:] & ~above[:-1]) + 1
    if len(ups) < 2:
        return float('nan')
    return (len(ups) - 1) * sample_rate / (ups[-1] - ups[0])


def f0_track(params, sample_rate):
    t, _ = _syllable_phase(params, sample_rate)
    return params.base_f0 * 2.0 ** (params.f0_slope * (t - params.duration / 2))


def _resonator(signal, freq, bandwidth, sample_rate):
    r = np.exp(-np.pi * bandwidth / sample_rate)
    theta = 2 * np.pi * freq / sample_rate
    a = [1.0, -2.0 * r * np.cos(theta), r * r]
    return lfilter([1.0 - r], a, signal)


def synthesize_utterance(params, cfg, sample_rate=16000):
    """
    Render one utterance

    Parameters
    ----------
    params : UtteranceParams
    cfg : CfgNode
        TOY section (vowels, bandwidths, duty cycle, noise level, peak)
    sample_rate : int

    Returns
    -------
    Waveform
        float samples peak-normalized to TOY.PEAK plus a low-level noise floor
    """
    toy = cfg.TOY
    f0 = f0_track(params, sample_rate)
    phase = np.cumsum(f0) / sample_rate
    source = np.diff(np.floor(phase), prepend=0.0)
    glottal = lfilter([1.0 - params.tilt], [1.0, -params.tilt], source)

    _, syl_phase = _syllable_phase(params, sample_rate)
    syllable = np.clip(np.floor(syl_phase), 0, len(params.vowels) - 1).astype(int)
    vowel_of_sample = np.asarray(params.vowels)[syllable]

    voiced = np.zeros_like(glottal)
    for v in np.unique(vowel_of_sample):
        y = glottal
        for formant, bw in zip(toy.VOWELS[v], toy.FORMANT_BANDWIDTHS):
            y = _resonator(y, formant * params.formant_scale, bw, sample_rate)
        voiced += np.where(vowel_of_sample == v, y, 0.0)

    x = voiced * syllable_envelope(params, sample_rate, toy.DUTY_CYCLE)
    peak = np.max(np.abs(x))
    if peak > 0:
        x = x * (toy.PEAK / peak)
    noise_rng = np.random.default_rng(derive_seed('noise', params.utt_id))
    x = x + noise_rng.normal(0.0, toy.NOISE_LEVEL, size=len(x))
    return Waveform(np.clip(x, -1.0, 32767 / 32768), sample_rate)


def synth_toy_corpus(spec, out_dir, cfg):
    """
    Generate a factor-coded corpus on disk

    Parameters
    ----------
    spec : ToyCorpusSpec
    out_dir : str or Path
        receives wav/<id>.wav, manifest.jsonl and generator.jsonl
    cfg : CfgNode

    Returns
    -------
    (CorpusManifest, list of UtteranceParams)
    """
    out_dir = Path(out_dir)
    wav_dir = out_dir / 'wav'
    wav_dir.mkdir(parents=True, exist_ok=True)
    sr = cfg.DATA.SAMPLE_RATE

    speakers = {s: draw_speaker_params(spec, s, cfg) for s in spec.speakers}
    records, all_params = [], []
    plan = utterance_plan(spec)
    logger.info(f'=> synthesizing {len(plan)} {spec.coding_factor}-coded utterances '
                f'for {spec.n_speakers} speakers into {out_dir}')
    for utt_id, spk, c in tqdm(plan, desc='synth-toy'):
        params = draw_utterance_params(spec, utt_id, speakers[spk], c, cfg)
        waveform = synthesize_utterance(params, cfg, sr)
        path = write_wav(wav_dir / f'{utt_id}.wav', waveform)
        records.append(UtteranceRecord(
            id=utt_id, speaker_id=spk, label=LABEL_ORDER[c],
            audio_path=str(path.resolve()), duration=waveform.duration,
            corpus=spec.corpus))
        all_params.append(params)

    manifest = CorpusManifest(records=tuple(records), sample_rate=sr)
    save_manifest(manifest, out_dir / 'manifest.jsonl')
    with (out_dir / 'generator.jsonl').open('w', encoding='utf-8') as fh:
        for p in all_params:
            fh.write(json.dumps(p.to_dict()) + '\n')
    return manifest, all_params


def load_generator_params(path):
    with Path(path).open('r', encoding='utf-8') as fh:
        return [UtteranceParams(**json.loads(line)) for line in fh if line.strip()]
