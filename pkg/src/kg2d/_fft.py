"""Thin wrapper around scipy.fft with the package normalization.

The forward transform carries the factor 1/n**2, so the zero-frequency
coefficient is the mean of the samples. Worker count comes from
``KG2D_THREADS`` (default 1).
"""

from __future__ import annotations

import os

import numpy as np
import scipy.fft as sfft


def workers() -> int:
    try:
        return max(1, int(os.environ.get("KG2D_THREADS", "1")))
    except ValueError:
        return 1


def fft2(a: np.ndarray) -> np.ndarray:
    return sfft.fft2(a, norm="forward", workers=workers())


def ifft2(c: np.ndarray) -> np.ndarray:
    return sfft.ifft2(c, norm="forward", workers=workers())


def rfft2(a: np.ndarray) -> np.ndarray:
    return sfft.rfft2(a, norm="forward", workers=workers())


def irfft2(c: np.ndarray, n: int) -> np.ndarray:
    return sfft.irfft2(c, s=(n, n), norm="forward", workers=workers())


def fft_axis(a: np.ndarray, axis: int) -> np.ndarray:
    return sfft.fft(a, axis=axis, norm="forward", workers=workers())


def ifft_axis(c: np.ndarray, axis: int) -> np.ndarray:
    return sfft.ifft(c, axis=axis, norm="forward", workers=workers())
