"""JSON helpers: matrices are written row-major as (re, im) pairs."""

from __future__ import annotations

import numpy as np


def matrix_to_json(m) -> list:
    m = np.asarray(m)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(data) -> np.ndarray:
    arr = np.asarray(data, float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValueError("matrix JSON must be rows of (re, im) pairs")
    return arr[..., 0] + 1j * arr[..., 1]
