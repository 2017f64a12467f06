"""Helper utility functions."""

import hashlib
import math
from typing import Mapping, Sequence

import numpy as np


def tensor_checksum(arrays: Mapping[str, np.ndarray]) -> str:
    """
    sha256 over named float64 arrays, in name order.

    Args:
        arrays: Name to array

    Returns:
        Hex digest; equal digests mean byte-identical weights
    """
    digest = hashlib.sha256()
    for name in sorted(arrays):
        array = np.ascontiguousarray(arrays[name], dtype='<f8')
        digest.update(name.encode('utf-8'))
        digest.update(str(array.shape).encode('ascii'))
        digest.update(array.tobytes())
    return digest.hexdigest()


def tokens_to_steps(tokens: int, batch_size: int, tokens_per_record: float) -> int:
    """
    Convert a token budget into optimizer steps.

    Args:
        tokens: Token budget
        batch_size: Records per step
        tokens_per_record: Mean tokens in one record of the stage's data

    Returns:
        At least one step
    """
    per_step = max(batch_size * tokens_per_record, 1.0)
    return max(1, math.ceil(tokens / per_step))


def truncate_text(text: str, max_length: int = 60, suffix: str = "...") -> str:
    """Shorten text for log lines and reports."""
    if len(text) <= max_length:
        return text
    return text[:max_length - len(suffix)] + suffix


def mean_or_zero(values: Sequence[float]) -> float:
    return float(np.mean(values)) if len(values) else 0.0
