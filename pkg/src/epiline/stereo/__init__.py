"""Stereo matching similarity between two intensity profiles.

The cost of a disparity assignment ``d`` is the truncated squared intensity
difference summed over samples plus a truncated quadratic penalty on
disparity jumps; the similarity of two lines is the minimum over ``d``,
found by dynamic programming.

The DP runs in a compiled extension when available and falls back to a
numpy implementation otherwise.  Set ``EPILINE_BACKEND=python`` to force the
fallback.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from ..errors import LengthMismatch
from . import _reference

try:
    from . import _dpcore as _compiled
except ImportError:  # extension not built
    _compiled = None

if os.environ.get("EPILINE_BACKEND", "").lower() == "python" or _compiled is None:
    _kernel = _reference
    BACKEND = "python"
else:
    _kernel = _compiled
    BACKEND = "compiled"

KERNELS = {"python": _reference}
if _compiled is not None:
    KERNELS["compiled"] = _compiled


@dataclass(frozen=True)
class StereoParams:
    r: float = 50.0**2
    lam: float = 2.0
    alpha: float = 3.0
    d_max: int = 32
    monotonic: bool = True

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("r must be positive")
        if self.lam < 0 or self.alpha < 0 or self.d_max < 0:
            raise ValueError("lam, alpha and d_max must be non-negative")

    def jump_table(self) -> tuple[np.ndarray, float]:
        """Exact smoothness costs for small jumps and the flat cost beyond them."""
        if self.lam == 0:
            return np.zeros(1), 0.0
        k = max(1, math.ceil(math.sqrt(self.alpha / self.lam)))
        while self.lam * k * k < self.alpha:
            k += 1
        psi = np.array([smooth_term(j, 0, self) for j in range(k)])
        return psi, float(self.alpha)


@dataclass(frozen=True)
class MatchCost:
    total: float
    normalized: float
    disparities: np.ndarray


def data_term(i1, i2, p: StereoParams) -> float:
    return min((i1 - i2) ** 2, p.r)


def smooth_term(di, dprev, p: StereoParams) -> float:
    return min(p.lam * (di - dprev) ** 2, p.alpha)


def _samples(prof) -> np.ndarray:
    s = getattr(prof, "samples", prof)
    return np.ascontiguousarray(s, dtype=np.float64)


def _check_pair(x, y):
    if x.shape[-1] != y.shape[-1]:
        raise LengthMismatch(f"profiles have {x.shape[-1]} and {y.shape[-1]} samples")
    if x.shape[-1] < 2:
        raise ValueError("profiles need at least two samples")


def total_cost(prof1, prof2, d, p: StereoParams) -> float:
    """Cost of a given disparity vector (independent of the DP)."""
    x, y = _samples(prof1), _samples(prof2)
    n = len(x)
    total = 0.0
    for i in range(n):
        j = min(max(i + int(d[i]), 0), n - 1)
        total += data_term(x[i], y[j], p)
        if i > 0:
            total += smooth_term(int(d[i]), int(d[i - 1]), p)
    return total


def line_match(prof1, prof2, p: StereoParams = StereoParams(), kernel=None) -> MatchCost:
    x, y = _samples(prof1), _samples(prof2)
    _check_pair(x, y)
    psi, far = p.jump_table()
    k = kernel or _kernel
    total, d = k.match_one(x, y, float(p.r), int(p.d_max), bool(p.monotonic), psi, far)
    return MatchCost(float(total), float(total) / len(x), np.asarray(d))


def line_match_cost_only(prof1, prof2, p: StereoParams = StereoParams(), kernel=None) -> float:
    x, y = _samples(prof1), _samples(prof2)
    _check_pair(x, y)
    return float(pair_costs(x[None, :], y[None, :], p, kernel=kernel)[0])


def pair_costs(X, Y, p: StereoParams = StereoParams(), both_orientations=False, threads=1, kernel=None):
    """Normalized costs for row-aligned profile stacks ``X[b]`` vs ``Y[b]``.

    With ``both_orientations`` the second profile is also matched reversed
    and the smaller cost is kept.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if X.shape != Y.shape:
        raise LengthMismatch(f"profile stacks differ: {X.shape} vs {Y.shape}")
    if X.size == 0:
        return np.empty(len(X))
    _check_pair(X, Y)
    psi, far = p.jump_table()
    k = kernel or _kernel
    args = (float(p.r), int(p.d_max), bool(p.monotonic), psi, far)
    out = k.cost_pairs(X, Y, *args, threads=threads)
    if both_orientations:
        out = np.minimum(out, k.cost_pairs(X, np.ascontiguousarray(Y[:, ::-1]), *args, threads=threads))
    return out / X.shape[1]


def grid_costs(X, Y, p: StereoParams = StereoParams(), both_orientations=False, threads=1, kernel=None):
    """Normalized costs for every pair ``(X[i], Y[j])``; shape ``(len(X), len(Y))``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if X.size == 0 or Y.size == 0:
        return np.empty((len(X), len(Y)))
    _check_pair(X, Y)
    psi, far = p.jump_table()
    k = kernel or _kernel
    args = (float(p.r), int(p.d_max), bool(p.monotonic), psi, far)
    out = k.cost_grid(X, Y, *args, threads=threads)
    if both_orientations:
        out = np.minimum(out, k.cost_grid(X, np.ascontiguousarray(Y[:, ::-1]), *args, threads=threads))
    return out / X.shape[1]


def warp(prof2, d) -> np.ndarray:
    """Second profile resampled through the disparities (for plotting)."""
    y = _samples(prof2)
    n = len(y)
    idx = np.clip(np.arange(n) + np.asarray(d), 0, n - 1)
    return y[idx]


__all__ = [
    "BACKEND",
    "KERNELS",
    "MatchCost",
    "StereoParams",
    "data_term",
    "grid_costs",
    "line_match",
    "line_match_cost_only",
    "pair_costs",
    "smooth_term",
    "total_cost",
    "warp",
]
