import hashlib
import random

import numpy as np
import torch


def wrap(func, *args, unsqueeze=False):
    """
    Wrap a torch function so it can be called with NumPy arrays.
    Input and return types are seamlessly converted; with unsqueeze=True a
    batch axis is added to every array argument and removed from the results.
    """

    args = list(args)
    for i, arg in enumerate(args):
        if isinstance(arg, np.ndarray):
            args[i] = torch.from_numpy(np.ascontiguousarray(arg))
            if unsqueeze:
                args[i] = args[i].unsqueeze(0)

    with torch.no_grad():
        result = func(*args)

    if isinstance(result, tuple):
        result = list(result)
        for i, res in enumerate(result):
            if isinstance(res, torch.Tensor):
                if unsqueeze:
                    res = res.squeeze(0)
                result[i] = res.detach().cpu().numpy()
        return tuple(result)
    elif isinstance(result, torch.Tensor):
        if unsqueeze:
            result = result.squeeze(0)
        return result.detach().cpu().numpy()
    else:
        return result


def derive_seed(*parts):
    """Stable 31-bit seed from any number of str/int parts (SHA-256 based)"""
    data = '/'.join(str(p) for p in parts)
    digest = hashlib.sha256(data.encode()).digest()
    return int.from_bytes(digest[:4], byteorder='little', signed=False) & 0x7fffffff


def seed_everything(seed):
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)


def state_dict_hash(module):
    """SHA-256 over parameters and buffers in key order"""
    h = hashlib.sha256()
    for key, value in module.state_dict().items():
        h.update(key.encode())
        h.update(value.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def fit_length(seq, length):
    """Crop or zero-pad a (T, ...) array along time to exactly `length` frames"""
    if len(seq) >= length:
        return seq[:length]
    pad = [(0, length - len(seq))] + [(0, 0)] * (seq.ndim - 1)
    return np.pad(seq, pad)


def crop_or_pad(seq, length, rng):
    """Random crop of `length` frames, edge padding when the sequence is shorter"""
    if len(seq) > length:
        start = int(rng.integers(0, len(seq) - length + 1))
        return seq[start:start + length]
    if len(seq) < length:
        pad = [(0, length - len(seq))] + [(0, 0)] * (seq.ndim - 1)
        return np.pad(seq, pad, 'edge')
    return seq
