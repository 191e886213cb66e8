"""Operator norm estimation by power iteration on T*T."""

from __future__ import annotations

from typing import Callable

import numpy as np


def power_norm(apply: Callable[[np.ndarray], np.ndarray],
               apply_adjoint: Callable[[np.ndarray], np.ndarray],
               shape: tuple[int, ...], seed: int = 0, iters: int = 200,
               rtol: float = 1e-9, start: np.ndarray | None = None) -> float:
    """Largest singular value of a linear map given forward and adjoint actions.

    Plain Euclidean inner product on arrays of ``shape``; weighting is the
    caller's job (conjugate by the square root of the weight).
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape) if start is None else np.array(start, dtype=float)
    nx = np.linalg.norm(x)
    if nx == 0:
        return 0.0
    x /= nx
    est = 0.0
    for _ in range(iters):
        y = apply_adjoint(apply(x))
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0
        x = y / ny
        new = np.sqrt(ny)
        if abs(new - est) <= rtol * new:
            return float(new)
        est = new
    return float(est)


def weighted_power_norm(apply, apply_adjoint, weight: np.ndarray, seed: int = 0,
                        iters: int = 200, rtol: float = 1e-9) -> float:
    """Norm of T on L^2(w): the Euclidean norm of w^(1/2) T w^(-1/2)."""
    s = np.sqrt(weight)
    fwd = lambda x: s * apply(x / s)
    adj = lambda y: apply_adjoint(y * s) / s
    return power_norm(fwd, adj, weight.shape, seed, iters, rtol)
