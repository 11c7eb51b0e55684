import numpy as np

from common.utils import crop_or_pad


class CropGenerator:
    """
    Batched data generator, used for training.
    Every example is a random fixed-length crop of one sequence; sequences
    shorter than the crop are edge padded. The sequence order is reshuffled
    every epoch and batches run on endlessly across epoch boundaries.

    Arguments:
    batch_size -- number of crops per batch
    sequences -- list of examples; an example is one (T, ...) array or a tuple
                 of frame-aligned arrays that are cropped at the same window
    crop_length -- frames per crop
    extras -- optional list of per-example values returned alongside (labels, vectors)
    random_seed -- seed of the shuffling and crop positions
    """

    def __init__(self, batch_size, sequences, crop_length, extras=None, random_seed=1234):
        assert len(sequences) > 0
        assert extras is None or len(extras) == len(sequences)
        self.sequences = [s if isinstance(s, tuple) else (s,) for s in sequences]
        for parts in self.sequences:
            assert all(len(p) == len(parts[0]) for p in parts), 'Example arrays must be frame aligned'
        self.extras = extras
        self.batch_size = batch_size
        self.crop_length = crop_length
        self.random = np.random.default_rng(random_seed)
        self.state = None

    def num_sequences(self):
        return len(self.sequences)

    def random_state(self):
        return self.random

    def _next_index(self):
        if self.state is None or self.state[0] >= len(self.state[1]):
            self.state = (0, self.random.permutation(len(self.sequences)))
        pos, order = self.state
        self.state = (pos + 1, order)
        return int(order[pos])

    def crop(self, parts):
        joint = np.concatenate([p.reshape(len(p), -1) for p in parts], axis=1)
        joint = crop_or_pad(joint, self.crop_length, self.random)
        out, offset = [], 0
        for p in parts:
            width = int(np.prod(p.shape[1:], dtype=int))
            out.append(joint[:, offset:offset + width].reshape((self.crop_length,) + p.shape[1:]))
            offset += width
        return out

    def next_batch(self):
        """(indices, tuple of stacked crops, extras or None)"""
        indices = [self._next_index() for _ in range(self.batch_size)]
        crops = [self.crop(self.sequences[i]) for i in indices]
        batch = tuple(np.stack(parts).astype(np.float32) for parts in zip(*crops))
        extras = None if self.extras is None else [self.extras[i] for i in indices]
        return indices, batch, extras


class SequenceGenerator:
    """
    Non-batched data generator, used for evaluation.
    Sequences are returned one at a time with a leading batch axis, uncropped.
    """

    def __init__(self, sequences):
        self.sequences = sequences

    def num_frames(self):
        return sum(s.shape[0] for s in self.sequences)

    def next_epoch(self):
        for seq in self.sequences:
            yield np.expand_dims(np.asarray(seq, dtype=np.float32), axis=0)
