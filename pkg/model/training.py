import copy
import math


class TrainingDivergedError(FloatingPointError):
    pass


def check_finite(value, step, what):
    if not math.isfinite(value):
        raise TrainingDivergedError(f'{what} loss diverged ({value}) at step {step}')


def snapshot(model):
    """Detached copy of the current state dict"""
    return copy.deepcopy(model.state_dict())
