"""Input validation helpers shared by the estimator and library entry points."""

from __future__ import annotations

import numpy as np

from .exceptions import ContractError


def check_finite_array(x, name="array", shape=None, dtype=np.float64):
    """Coerce to an ndarray, verify finiteness and (optionally) shape."""
    arr = np.asarray(x, dtype=dtype)
    if shape is not None:
        expected = tuple(shape)
        actual = arr.shape
        if len(expected) != len(actual) or any(
            e is not None and e != a for e, a in zip(expected, actual)
        ):
            raise ContractError(f"{name} must have shape {expected}, got {actual}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains non-finite values")
    return arr


def check_positive(value, name="value"):
    if not value > 0:
        raise ContractError(f"{name} must be positive, got {value}")
    return value


def check_probability(value, name="value"):
    if not 0.0 <= value <= 1.0:
        raise ContractError(f"{name} must lie in [0, 1], got {value}")
    return float(value)


def check_random_state(seed):
    """Accept an int seed, a Generator, or None (fresh entropy)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def check_sample_records(X, name="X"):
    """Verify a sequence of dataset records (duck-typed on the used fields)."""
    records = list(X)
    if not records:
        raise ContractError(f"{name} must contain at least one sample record")
    for i, rec in enumerate(records):
        for attr in ("rgb", "depth", "mask", "tactile_points", "gt_pose", "object_id"):
            if not hasattr(rec, attr):
                raise ContractError(f"{name}[{i}] lacks required field {attr!r}")
    return records
