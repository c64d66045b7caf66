"""Candidate epipolar line pairs from pencils through corresponding points."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import stereo
from .errors import EmptyPencil
from .geometry import ImageBounds, hom, normalize_line
from .imaging import DEFAULT_MIN_TEXTURE, DEFAULT_SAMPLES, GrayImage, clip_lines, sample_segments

DEFAULT_ANGLES = 180


def uniform_angles(count=DEFAULT_ANGLES) -> np.ndarray:
    return np.arange(count) * (np.pi / count)


@dataclass(frozen=True)
class PencilSpec:
    center: np.ndarray
    angles: np.ndarray = field(default_factory=uniform_angles)
    min_chord: float = 128.0
    min_texture: float = DEFAULT_MIN_TEXTURE

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=float)
        if a.ndim != 1 or len(a) == 0:
            raise ValueError("a pencil needs at least one angle")
        if np.any(a < 0) or np.any(a >= np.pi) or np.any(np.diff(a) <= 0):
            raise ValueError("angles must be strictly increasing within [0, pi)")
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "center", hom(self.center))


@dataclass(frozen=True)
class Pencil:
    """Surviving lines of a pencil with their profiles (one row per line)."""

    center: np.ndarray
    lines: np.ndarray
    angles: np.ndarray
    ends: np.ndarray  # (m, 2, 2) clipped chord endpoints
    profiles: np.ndarray

    def __len__(self):
        return len(self.lines)


@dataclass(frozen=True)
class CandidatePair:
    l1: np.ndarray
    l2: np.ndarray
    cost: float
    rank1: int
    rank2: int
    index1: int
    index2: int


@dataclass(frozen=True)
class ScoreMatrix:
    costs: np.ndarray
    rows: Pencil
    cols: Pencil


def lines_at_angles(center, angles) -> np.ndarray:
    """Lines through ``center`` with directions ``(cos t, sin t)``, unit normals."""
    c = hom(center)
    dirs = np.column_stack([np.cos(angles), np.sin(angles), np.zeros(len(angles))])
    lines = np.cross(c[None, :], dirs)
    return lines / np.hypot(lines[:, 0], lines[:, 1])[:, None]


def profiles_for_lines(img: GrayImage, lines, min_chord=2.0, n=DEFAULT_SAMPLES, min_texture=0.0):
    """Clip, sample and texture-filter lines.

    Returns ``(keep, ends, profiles)`` where ``keep`` indexes the input rows
    that survived.
    """
    lines = np.atleast_2d(lines)
    a, b, ok = clip_lines(lines, img.bounds, max(min_chord, 2.0))
    keep = np.flatnonzero(ok)
    if len(keep) == 0:
        return keep, np.empty((0, 2, 2)), np.empty((0, n))
    prof = sample_segments(img, a[keep], b[keep], n)
    textured = prof.std(axis=1) >= min_texture
    keep = keep[textured]
    ends = np.stack([a[keep], b[keep]], axis=1)
    return keep, ends, prof[textured]


def pencil_lines(spec: PencilSpec, bounds: ImageBounds, img: GrayImage, n=DEFAULT_SAMPLES) -> Pencil:
    if (img.width, img.height) != (bounds.width, bounds.height):
        raise ValueError("bounds do not match the image")
    lines = lines_at_angles(spec.center, spec.angles)
    keep, ends, prof = profiles_for_lines(img, lines, spec.min_chord, n, spec.min_texture)
    if len(keep) == 0:
        raise EmptyPencil(f"no textured line survives through {spec.center[:2] / spec.center[2]}")
    return Pencil(spec.center, lines[keep], spec.angles[keep], ends, prof)


def score_all(pencil1: Pencil, pencil2: Pencil, params=stereo.StereoParams(), threads=1,
              both_orientations=True) -> ScoreMatrix:
    costs = stereo.grid_costs(pencil1.profiles, pencil2.profiles, params,
                              both_orientations=both_orientations, threads=threads)
    return ScoreMatrix(costs, pencil1, pencil2)


def _ranks(costs: np.ndarray, axis: int) -> np.ndarray:
    """1-based rank of each entry within its row (axis=1) or column (axis=0)."""
    order = np.argsort(costs, axis=axis, kind="stable")
    ranks = np.empty_like(order)
    idx = np.arange(costs.shape[axis])
    if axis == 1:
        np.put_along_axis(ranks, order, np.broadcast_to(idx, costs.shape), axis=1)
    else:
        np.put_along_axis(ranks, order, np.broadcast_to(idx[:, None], costs.shape), axis=0)
    return ranks + 1


def mutual_best(matrix: ScoreMatrix, k: int = 2) -> list[CandidatePair]:
    """Pairs where each line is among the ``k`` lowest-cost matches of the other."""
    if k < 1:
        raise ValueError("k must be at least 1")
    costs = np.asarray(matrix.costs)
    r1, r2 = _ranks(costs, 1), _ranks(costs, 0)
    ii, jj = np.nonzero((r1 <= k) & (r2 <= k) & np.isfinite(costs))
    out = [
        CandidatePair(matrix.rows.lines[i], matrix.cols.lines[j], float(costs[i, j]),
                      int(r1[i, j]), int(r2[i, j]), int(i), int(j))
        for i, j in zip(ii, jj)
    ]
    out.sort(key=lambda c: (c.cost, c.index1, c.index2))
    return out


def candidate_pairs(img1: GrayImage, img2: GrayImage, pt1, pt2, angles=None, params=stereo.StereoParams(),
                    k=2, min_chord=128.0, min_texture=DEFAULT_MIN_TEXTURE, n=DEFAULT_SAMPLES, threads=1):
    """Mutual-best line pairs through a point correspondence ``(pt1, pt2)``."""
    angles = uniform_angles() if angles is None else angles
    p1 = pencil_lines(PencilSpec(pt1, angles, min_chord, min_texture), img1.bounds, img1, n)
    p2 = pencil_lines(PencilSpec(pt2, angles, min_chord, min_texture), img2.bounds, img2, n)
    return mutual_best(score_all(p1, p2, params, threads), k)


def incidence(line, point) -> float:
    p = hom(point)
    return abs(float(normalize_line(line) @ (p / p[2])))
