"""
Factorized speech autoencoder

Three bottlenecked encoders (content from the mel spectrogram, rhythm from
the mel spectrogram, pitch from the normalized f0 contour) and a decoder that
rebuilds the mel spectrogram from the up-sampled codes plus a timbre vector.
A factor is removed by zeroing its encoder input.
"""

import logging
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from yacs.config import CfgNode as CN

from common.artifacts import check_kind, check_match, load_state, read_sidecar, save_artifact
from common.config import section_dict, section_hash
from common.utils import fit_length, wrap
from data.mel import MelSpectrogram
from data.timeseries_utils import random_resample

logger = logging.getLogger(__name__)

FLOW_SECTIONS = ('FLOW', 'RR')
PITCH_CHANNELS = 2


@dataclass(frozen=True)
class FactorMask:
    content: bool = True
    rhythm: bool = True
    pitch: bool = True

    @property
    def tag(self):
        return ('C' if self.content else '-') + ('R' if self.rhythm else '-') + ('P' if self.pitch else '-')

    @classmethod
    def from_tag(cls, tag):
        tag = str(tag).upper()
        if len(tag) != 3 or tag[0] not in 'C-' or tag[1] not in 'R-' or tag[2] not in 'P-':
            raise ValueError(f'Illegal factor mask tag "{tag}", expected e.g. CRP, C--, -RP')
        return cls(tag[0] == 'C', tag[1] == 'R', tag[2] == 'P')

    def __str__(self):
        return self.tag


@dataclass(frozen=True)
class EncoderInputs:
    """
    Attributes
    ----------
    s_c : np.ndarray
        (T, n_mels) content encoder input
    s_r : np.ndarray
        (T, n_mels) rhythm encoder input
    p_f : np.ndarray
        (T, 2) pitch encoder input [normalized f0, voiced]
    """

    s_c: np.ndarray
    s_r: np.ndarray
    p_f: np.ndarray

    @property
    def n_frames(self):
        return self.s_c.shape[0]

    def masked(self, mask):
        return EncoderInputs(
            s_c=self.s_c if mask.content else np.zeros_like(self.s_c),
            s_r=self.s_r if mask.rhythm else np.zeros_like(self.s_r),
            p_f=self.p_f if mask.pitch else np.zeros_like(self.p_f),
        )


@dataclass(frozen=True)
class LatentBundle:
    z_r: np.ndarray
    z_f: np.ndarray
    z_c: np.ndarray
    z_t: np.ndarray
    n_frames: int
    hop: float = 0.016
    sample_rate: int = 16000


def mask_inputs(mel, pitch, mask):
    """
    Build the three encoder inputs and zero the removed factors

    Parameters
    ----------
    mel : MelSpectrogram or np.ndarray
        (T, n_mels)
    pitch : PitchContour or np.ndarray
        speaker-normalized contour, or its (T, 2) channel form
    mask : FactorMask

    Returns
    -------
    EncoderInputs
        shapes are preserved for removed factors

    Raises
    ------
    ValueError
        If mel and pitch are not frame aligned
    """
    frames = np.asarray(getattr(mel, 'frames', mel), dtype=np.float32)
    channels = pitch.as_channels() if hasattr(pitch, 'as_channels') else np.asarray(pitch, np.float32)
    if channels.ndim != 2 or channels.shape[1] != PITCH_CHANNELS:
        raise ValueError(f'Pitch input must be (T, {PITCH_CHANNELS}), got {channels.shape}')
    if frames.shape[0] != channels.shape[0]:
        raise ValueError(f'Mel ({frames.shape[0]} frames) and pitch ({channels.shape[0]} frames) '
                         f'are not aligned')
    return EncoderInputs(frames, frames.copy(), channels).masked(mask)


class ConvNorm(nn.Module):
    def __init__(self, in_channels, out_channels, kernel_size=5, w_init_gain='relu'):
        super().__init__()
        assert kernel_size % 2 == 1
        self.conv = nn.Conv1d(in_channels, out_channels, kernel_size, padding=kernel_size // 2)
        nn.init.xavier_uniform_(self.conv.weight, gain=nn.init.calculate_gain(w_init_gain))

    def forward(self, x):
        return self.conv(x)


class FactorEncoder(nn.Module):
    """
    Conv + GroupNorm stack followed by a BiLSTM whose forward states are
    sampled at the end and backward states at the start of every block of
    `freq` frames
    """

    def __init__(self, in_dim, conv_dim, n_convs, channels_per_group, code_dim, freq):
        super().__init__()
        assert code_dim % 2 == 0, 'Code width must be even'
        assert conv_dim % channels_per_group == 0
        self.freq = freq
        self.half = code_dim // 2
        layers = []
        for i in range(n_convs):
            layers.append(nn.Sequential(
                ConvNorm(in_dim if i == 0 else conv_dim, conv_dim),
                nn.GroupNorm(conv_dim // channels_per_group, conv_dim)))
        self.convolutions = nn.ModuleList(layers)
        self.lstm = nn.LSTM(conv_dim, self.half, 1, batch_first=True, bidirectional=True)

    def forward(self, x):
        """(B, T, in_dim) -> (B, ceil(T / freq), code_dim)"""
        assert x.dim() == 3
        pad = (-x.shape[1]) % self.freq
        if pad:
            x = F.pad(x, (0, 0, 0, pad))
        x = x.transpose(1, 2)
        for conv in self.convolutions:
            x = F.relu(conv(x))
        x = x.transpose(1, 2)
        outputs, _ = self.lstm(x)
        out_forward = outputs[:, :, :self.half]
        out_backward = outputs[:, :, self.half:]
        return torch.cat((out_forward[:, self.freq - 1::self.freq, :],
                          out_backward[:, ::self.freq, :]), dim=-1)


class FactorDecoder(nn.Module):
    def __init__(self, in_dim, hidden, n_layers, n_mels):
        super().__init__()
        self.lstm = nn.LSTM(in_dim, hidden, n_layers, batch_first=True, bidirectional=True)
        self.proj = nn.Linear(2 * hidden, n_mels)

    def forward(self, x):
        outputs, _ = self.lstm(x)
        return self.proj(outputs)


def upsample_codes(codes, freq, n_frames):
    """Repeat every code `freq` times; the last code is held when more frames are requested"""
    up = codes.repeat_interleave(freq, dim=1)
    if up.shape[1] < n_frames:
        up = torch.cat([up, up[:, -1:].expand(-1, n_frames - up.shape[1], -1)], dim=1)
    return up[:, :n_frames]


class SpeechFlowModel(nn.Module):
    """
    Parameters
    ----------
    flow_cfg : CfgNode
        FLOW section (code widths, downsampling, conv/recurrent sizes)
    rr_cfg : CfgNode
        RR section (segment and factor ranges of random resampling)
    n_mels : int
    """

    def __init__(self, flow_cfg, rr_cfg, n_mels=80):
        super().__init__()
        self.n_mels = n_mels
        self.freq_c = flow_cfg.FREQ_CONTENT
        self.freq_r = flow_cfg.FREQ_RHYTHM
        self.freq_f = flow_cfg.FREQ_PITCH
        self.dim_t = flow_cfg.DIM_TIMBRE
        self.seg_range = (rr_cfg.SEG_MIN, rr_cfg.SEG_MAX)
        self.alpha_range = (rr_cfg.ALPHA_MIN, rr_cfg.ALPHA_MAX)

        conv = (flow_cfg.CONV_DIM, flow_cfg.N_CONVS, flow_cfg.GROUPS)
        self.content_encoder = FactorEncoder(n_mels, *conv, flow_cfg.DIM_CONTENT, self.freq_c)
        self.rhythm_encoder = FactorEncoder(n_mels, *conv, flow_cfg.DIM_RHYTHM, self.freq_r)
        self.pitch_encoder = FactorEncoder(PITCH_CHANNELS, *conv, flow_cfg.DIM_PITCH, self.freq_f)
        dec_in = flow_cfg.DIM_CONTENT + flow_cfg.DIM_RHYTHM + flow_cfg.DIM_PITCH + self.dim_t
        self.decoder = FactorDecoder(dec_in, flow_cfg.DEC_HIDDEN, flow_cfg.DEC_LAYERS, n_mels)

        self.register_buffer('mel_mean', torch.zeros(n_mels))
        self.register_buffer('mel_std', torch.ones(n_mels))

    def fit_normalizer(self, mels):
        """Per-bin mean/std over all frames of the training mels"""
        frames = np.concatenate([np.asarray(getattr(m, 'frames', m), np.float64) for m in mels])
        std = frames.std(axis=0)
        std = np.where(std > 1e-5, std, 1.0)
        self.mel_mean.copy_(torch.as_tensor(frames.mean(axis=0), dtype=self.mel_mean.dtype))
        self.mel_std.copy_(torch.as_tensor(std, dtype=self.mel_std.dtype))

    def encode_codes(self, s_c, s_r, p_f):
        z_c = self.content_encoder((s_c - self.mel_mean) / self.mel_std)
        z_r = self.rhythm_encoder((s_r - self.mel_mean) / self.mel_std)
        z_f = self.pitch_encoder(p_f)
        return z_c, z_r, z_f

    def decode_codes(self, z_c, z_r, z_f, z_t, n_frames):
        parts = [upsample_codes(z_c, self.freq_c, n_frames),
                 upsample_codes(z_r, self.freq_r, n_frames),
                 upsample_codes(z_f, self.freq_f, n_frames),
                 z_t[:, None, :].expand(-1, n_frames, -1)]
        out = self.decoder(torch.cat(parts, dim=-1))
        return out * self.mel_std + self.mel_mean

    def forward(self, s_c, s_r, p_f, z_t):
        """All inputs batched (B, T, .); z_t is (B, d_t). Returns (B, T, n_mels)"""
        assert s_c.shape[:2] == s_r.shape[:2] == p_f.shape[:2]
        z_c, z_r, z_f = self.encode_codes(s_c, s_r, p_f)
        return self.decode_codes(z_c, z_r, z_f, z_t, s_c.shape[1])

    def resample_content_pitch(self, s_c, p_f, rr_seed):
        """One joint random-resampling draw on content and pitch inputs, cropped/padded back to T"""
        n_frames = s_c.shape[0]
        joint = np.concatenate([s_c, p_f], axis=1)
        joint = fit_length(random_resample(joint, rr_seed, self.seg_range, self.alpha_range), n_frames)
        return joint[:, :s_c.shape[1]], joint[:, s_c.shape[1]:]


def _param_dtype(model):
    return next(model.parameters()).dtype


def _timbre_values(timbre_vector):
    return np.asarray(getattr(timbre_vector, 'values', timbre_vector))


def encode(inputs, timbre_vector, model, rr_seed=None):
    """
    Compute the latent codes of one utterance

    Parameters
    ----------
    inputs : EncoderInputs
    timbre_vector : SpeakerVector or np.ndarray
        (d_t,) unit vector
    model : SpeechFlowModel
    rr_seed : int, optional
        random-resampling draw applied jointly to the content and pitch
        inputs; None leaves them untouched

    Returns
    -------
    LatentBundle
    """
    s_c, s_r, p_f = inputs.s_c, inputs.s_r, inputs.p_f
    if rr_seed is not None:
        s_c, p_f = model.resample_content_pitch(s_c, p_f, rr_seed)
    z_t = _timbre_values(timbre_vector)
    if z_t.shape != (model.dim_t,):
        raise ValueError(f'Timbre vector must have shape ({model.dim_t},), got {z_t.shape}')

    dtype = _param_dtype(model)
    model.eval()
    z_c, z_r, z_f = wrap(model.encode_codes,
                         *(torch.as_tensor(np.asarray(a), dtype=dtype).unsqueeze(0) for a in (s_c, s_r, p_f)))
    return LatentBundle(z_r=z_r[0], z_f=z_f[0], z_c=z_c[0], z_t=z_t.copy(), n_frames=inputs.n_frames)


def decode(bundle, target_length, model):
    """
    Rebuild a (target_length, n_mels) spectrogram from a latent bundle

    Raises
    ------
    ValueError
        If target_length is not positive
    """
    if target_length <= 0:
        raise ValueError(f'Illegal target length: {target_length}')
    dtype = _param_dtype(model)
    model.eval()

    def _decode(z_c, z_r, z_f, z_t):
        return model.decode_codes(z_c, z_r, z_f, z_t, target_length)

    frames = wrap(_decode, *(torch.as_tensor(np.asarray(a), dtype=dtype).unsqueeze(0)
                             for a in (bundle.z_c, bundle.z_r, bundle.z_f, bundle.z_t)))
    return MelSpectrogram(frames[0].astype(np.float32), bundle.hop, bundle.sample_rate)


def build_speechflow(cfg):
    return SpeechFlowModel(cfg.FLOW, cfg.RR, cfg.FRONTEND.N_MELS)


def save_speechflow(model, out_dir, cfg, **meta):
    sidecar = {
        'kind': 'speechflow',
        'config': section_dict(cfg, *FLOW_SECTIONS),
        'config_hash': section_hash(cfg, *FLOW_SECTIONS),
        'n_mels': model.n_mels,
        **meta,
    }
    return save_artifact(out_dir, model, sidecar)


def load_speechflow(path, cfg=None, force=False):
    """
    Rebuild a SpeechFlowModel from its artifact directory

    When `cfg` is given, its FLOW/RR hash must match the recorded one unless
    `force` is set.
    """
    meta = read_sidecar(path)
    check_kind(meta, 'speechflow')
    if cfg is not None:
        check_match('SpeechFlow config hash', meta['config_hash'], section_hash(cfg, *FLOW_SECTIONS), force)
    saved = CN(meta['config'])
    model = SpeechFlowModel(saved.FLOW, saved.RR, meta['n_mels'])
    model.load_state_dict(load_state(path))
    model.eval()
    logger.info(f'=> loaded SpeechFlow model {meta["model_hash"][:12]} from {path}')
    return model, meta
