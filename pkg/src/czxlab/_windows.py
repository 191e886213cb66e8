"""Summed-area tables and sliding maxima over rectangular cell windows."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def integral_image(v: np.ndarray) -> np.ndarray:
    S = np.zeros((v.shape[0] + 1, v.shape[1] + 1))
    S[1:, 1:] = v.cumsum(0).cumsum(1)
    return S


def window_sums(v: np.ndarray, b1: int, b2: int, wrap: bool = False) -> np.ndarray:
    """Sums over every b1 x b2 window, indexed by the window's first cell.

    Without wrap the windows stay inside the array; with wrap every start
    position is used and windows continue periodically.
    """
    if wrap:
        v = np.pad(v, ((0, b1 - 1), (0, b2 - 1)), mode="wrap")
    S = integral_image(v)
    P1 = v.shape[0] - b1 + 1
    P2 = v.shape[1] - b2 + 1
    return (S[b1:b1 + P1, b2:b2 + P2] - S[:P1, b2:b2 + P2]
            - S[b1:b1 + P1, :P2] + S[:P1, :P2])


def window_means(v: np.ndarray, b1: int, b2: int, wrap: bool = False) -> np.ndarray:
    return window_sums(v, b1, b2, wrap) / (b1 * b2)


def sliding_max(v: np.ndarray, w: int, axis: int) -> np.ndarray:
    """out[i] = max(v[i : i + w]) along ``axis``; length shrinks by w - 1."""
    if w == 1:
        return v
    return sliding_window_view(v, w, axis=axis).max(axis=-1)


def cover_max(P: np.ndarray, b1: int, b2: int, fill: float = -np.inf) -> np.ndarray:
    """For each cell, max of window values P over all windows (starts in P) containing it.

    P has shape (N - b1 + 1, N - b2 + 1); the result has shape (N, N).
    """
    Q = np.pad(P, ((b1 - 1, b1 - 1), (b2 - 1, b2 - 1)), constant_values=fill)
    return sliding_max(sliding_max(Q, b1, 0), b2, 1)


def dyadic_sides(N: int) -> list[int]:
    return [1 << i for i in range(N.bit_length()) if (1 << i) <= N]
