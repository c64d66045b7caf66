"""Procedural two-view scenes with exact ground truth.

Two pinhole cameras look into a concave wedge: two vertical walls meeting
in a corner, plus a floor.  Most lines cross from one plane to another, so
line pairs related by a single plane's homography are rare.  Each plane's
albedo is multi-octave value noise laid out in camera-1 pixel coordinates
and carried onto the plane, so image 1 shows the noise at a uniform scale
and image 2 shows it warped by the plane-induced homographies.  Images are
ray cast with 2x2 supersampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import FundamentalMatrix, ImageBounds
from ..imaging import GrayImage
from .solvers import truth_f_from_cameras


@dataclass(frozen=True)
class Plane:
    normal: np.ndarray  # unit
    offset: float  # plane: normal . X = offset
    base: float  # mean brightness
    contrast: float


@dataclass(frozen=True)
class SyntheticScene:
    cams: tuple  # (P1, P2), each 3x4
    images: tuple  # (GrayImage, GrayImage)
    truth_F: FundamentalMatrix
    matches: tuple  # (x1 (N, 2), x2 (N, 2))
    bounds: ImageBounds
    seed: int


def _rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def _rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def camera_matrix(K, R, C) -> np.ndarray:
    return K @ np.column_stack([R, -R @ C])


class ValueNoise:
    """Seeded multi-octave lattice noise in ``[0, 1]``."""

    def __init__(self, rng: np.random.Generator, octaves=4, base_period=64.0, size=256):
        self.tables = [rng.random((size, size)) for _ in range(octaves)]
        self.shifts = rng.random((octaves, 2)) * size
        self.periods = [base_period / 2**k for k in range(octaves)]
        self.weights = np.array([0.75**k for k in range(octaves)])
        self.size = size

    def __call__(self, u, v):
        out = np.zeros_like(u)
        for tab, sh, per, w in zip(self.tables, self.shifts, self.periods, self.weights):
            x, y = u / per + sh[0], v / per + sh[1]
            x0, y0 = np.floor(x), np.floor(y)
            fx, fy = x - x0, y - y0
            fx, fy = fx * fx * (3 - 2 * fx), fy * fy * (3 - 2 * fy)
            i0 = x0.astype(np.int64) % self.size
            j0 = y0.astype(np.int64) % self.size
            i1, j1 = (i0 + 1) % self.size, (j0 + 1) % self.size
            top = tab[j0, i0] * (1 - fx) + tab[j0, i1] * fx
            bot = tab[j1, i0] * (1 - fx) + tab[j1, i1] * fx
            out += w * (top * (1 - fy) + bot * fy)
        out /= self.weights.sum()
        # stretch the central-limit narrowing back towards the full range
        return np.clip(0.5 + 2.2 * (out - 0.5), 0.0, 1.0)


def _wall(corner, direction, rng) -> Plane:
    ey = np.array([0.0, 1.0, 0.0])
    n = np.cross(ey, direction)
    n /= np.linalg.norm(n)
    return Plane(n, float(n @ corner), rng.uniform(90, 150), 160.0)


def _make_planes(rng) -> list[Plane]:
    """Left wall, right wall and floor; walls recede from a corner straight ahead."""
    corner = np.array([rng.uniform(-0.6, 0.6), 0.0, rng.uniform(9.0, 11.0)])
    a_left, a_right = np.deg2rad(rng.uniform(45.0, 60.0, size=2))
    floor_y = 1.9 + rng.uniform(-0.15, 0.15)
    return [
        _wall(corner, np.array([-np.sin(a_left), 0.0, -np.cos(a_left)]), rng),
        _wall(corner, np.array([np.sin(a_right), 0.0, -np.cos(a_right)]), rng),
        Plane(np.array([0.0, 1.0, 0.0]), floor_y, rng.uniform(80, 140), 150.0),
    ]


def _cast(planes, C, dirs):
    """Nearest hit distance along rays ``C + t * dirs`` and the plane index."""
    best_t = np.full(len(dirs), np.inf)
    best_k = np.full(len(dirs), -1)
    for k, pl in enumerate(planes):
        denom = dirs @ pl.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (pl.offset - pl.normal @ C) / denom
        ok = np.isfinite(t) & (t > 1e-6)
        closer = ok & (t < best_t)
        best_t[closer] = t[closer]
        best_k[closer] = k
    return best_t, best_k


def _shade(planes, textures, X, k, P1):
    out = np.full(len(X), 128.0)
    for idx, (pl, tex) in enumerate(zip(planes, textures)):
        m = k == idx
        if not np.any(m):
            continue
        uvw = np.column_stack([X[m], np.ones(int(m.sum()))]) @ P1.T
        val = tex(uvw[:, 0] / uvw[:, 2], uvw[:, 1] / uvw[:, 2])
        out[m] = pl.base + pl.contrast * (val - 0.5)
    return np.clip(out, 0.0, 255.0)


def _rays(K, R, xy):
    pix = np.column_stack([xy, np.ones(len(xy))])
    return (pix @ np.linalg.inv(K).T) @ R  # R^T K^-1 x, one row per ray


def _render(planes, textures, P1, K, R, C, bounds, supersample=2):
    w, h = bounds.width, bounds.height
    offs = (np.arange(supersample) + 0.5) / supersample - 0.5
    acc = np.zeros((h, w))
    ys, xs = np.mgrid[0:h, 0:w].astype(float)
    for oy in offs:
        for ox in offs:
            xy = np.column_stack([(xs + ox).ravel(), (ys + oy).ravel()])
            d = _rays(K, R, xy)
            t, k = _cast(planes, C, d)
            X = C + t[:, None] * d
            acc += _shade(planes, textures, X, k, P1).reshape(h, w)
    return GrayImage(acc / supersample**2)


def make_synthetic_scene(seed=0, bounds=ImageBounds(512, 512), n_matches=300, baseline=0.15,
                         forward=0.15, plane_count=3, supersample=2) -> SyntheticScene:
    """Deterministic two-view scene; ``plane_count`` in 1..3 (left wall, right wall, floor)."""
    if not 1 <= plane_count <= 3:
        raise ValueError("plane_count must be 1, 2 or 3")
    rng = np.random.default_rng(seed)
    w, h = bounds.width, bounds.height
    f = 0.98 * max(w, h)
    K = np.array([[f, 0.0, (w - 1) / 2.0], [0.0, f, (h - 1) / 2.0], [0.0, 0.0, 1.0]])

    planes = _make_planes(rng)[:int(plane_count)]
    textures = [ValueNoise(rng) for _ in planes]

    R1, C1 = np.eye(3), np.zeros(3)
    side = rng.choice([-1.0, 1.0])
    C2 = np.array([side * baseline * rng.uniform(0.85, 1.15), rng.uniform(-0.02, 0.02),
                   forward * rng.uniform(0.8, 1.2)])
    # yaw camera 2 towards a point at mid depth so both views share content;
    # no pitch keeps epipolar lines close to the image rows
    yaw = np.arctan2(-C2[0], 7.5 - C2[2])
    R2 = _rot_z(np.deg2rad(rng.uniform(-1.0, 1.0))) @ _rot_y(yaw).T

    P1, P2 = camera_matrix(K, R1, C1), camera_matrix(K, R2, C2)
    img1 = _render(planes, textures, P1, K, R1, C1, bounds, supersample)
    img2 = _render(planes, textures, P1, K, R2, C2, bounds, supersample)
    truth = truth_f_from_cameras(P1, P2)

    x1, x2 = _sample_matches(rng, planes, K, (R1, C1), (R2, C2), P2, bounds, n_matches)
    return SyntheticScene((P1, P2), (img1, img2), truth, (x1, x2), bounds, int(seed))


def _sample_matches(rng, planes, K, cam1, cam2, P2, bounds, n_matches):
    (R1, C1), (R2, C2) = cam1, cam2
    w, h = bounds.width, bounds.height
    got1, got2 = [], []
    total = 0
    while total < n_matches:
        xy = rng.uniform([2.0, 2.0], [w - 3.0, h - 3.0], size=(4 * n_matches, 2))
        d = _rays(K, R1, xy)
        t, k = _cast(planes, C1, d)
        X = C1 + t[:, None] * d
        proj = np.column_stack([X, np.ones(len(X))]) @ P2.T
        front = proj[:, 2] > 0
        x2 = proj[:, :2] / proj[:, 2:3]
        inside = front & (x2[:, 0] >= 2) & (x2[:, 0] <= w - 3) & (x2[:, 1] >= 2) & (x2[:, 1] <= h - 3)
        # visibility from camera 2: the first hit along its ray must be X itself
        d2 = X - C2
        t2, _ = _cast(planes, C2, d2 / np.linalg.norm(d2, axis=1)[:, None])
        visible = np.abs(t2 - np.linalg.norm(d2, axis=1)) < 1e-6
        keep = inside & visible & (k >= 0)
        got1.append(xy[keep])
        got2.append(x2[keep])
        total += int(keep.sum())
    return np.concatenate(got1)[:n_matches], np.concatenate(got2)[:n_matches]
