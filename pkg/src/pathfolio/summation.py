"""Compensated (Neumaier) accumulation for long increment sums.

Sums of 2**N squared increments lose several digits with naive ``+=``; the
identity tests downstream need roughly 1e-12 absolute accuracy, so every
running sum in the package goes through :func:`running_sum`.
"""

from __future__ import annotations

import numpy as np


def running_sum(terms: np.ndarray) -> np.ndarray:
    """Cumulative sum of ``terms`` with a leading zero, Neumaier-compensated.

    Returns an array of length ``len(terms) + 1`` whose entry ``k`` is the
    sum of the first ``k`` terms.
    """
    terms = np.asarray(terms, dtype=float)
    if terms.ndim != 1:
        raise ValueError("running_sum expects a 1-d array")
    out = [0.0] * (terms.size + 1)
    total = 0.0
    carry = 0.0
    for k, x in enumerate(terms.tolist(), start=1):
        t = total + x
        if abs(total) >= abs(x):
            carry += (total - t) + x
        else:
            carry += (x - t) + total
        total = t
        out[k] = total + carry
    return np.array(out)


def running_sum_columns(terms: np.ndarray) -> np.ndarray:
    """Apply :func:`running_sum` to each column of a 2-d array."""
    terms = np.asarray(terms, dtype=float)
    if terms.ndim == 1:
        return running_sum(terms)
    return np.column_stack([running_sum(terms[:, j]) for j in range(terms.shape[1])])
