"""Seven- and eight-point fundamental matrix solvers and camera-derived ground truth."""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateConfiguration, DegenerateInput
from ..geometry import FundamentalMatrix, enforce_rank2, null_vector, skew


def _xy(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] not in (2, 3):
        raise ValueError(f"expected (N, 2) or (N, 3) points, got {p.shape}")
    if p.shape[1] == 3:
        p = p[:, :2] / p[:, 2:3]
    if not np.all(np.isfinite(p)):
        raise ValueError("points must be finite")
    return p


def normalize_points(pts):
    """Translate the centroid to the origin and scale to mean distance sqrt(2).

    Returns ``(T, homogeneous normalized points)``.
    """
    pts = _xy(pts)
    c = pts.mean(axis=0)
    mean_dist = np.mean(np.linalg.norm(pts - c, axis=1))
    if mean_dist == 0.0:
        raise DegenerateConfiguration("all points coincide")
    s = np.sqrt(2.0) / mean_dist
    T = np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])
    h = np.column_stack([pts, np.ones(len(pts))]) @ T.T
    return T, h


def _design(h1, h2) -> np.ndarray:
    # row k is kron(x2_k, x1_k) so that A @ F.ravel() = x2^T F x1
    return np.einsum("ni,nj->nij", h2, h1).reshape(len(h1), 9)


def eight_point(x1, x2) -> FundamentalMatrix:
    """Normalized 8-point estimate from ``N >= 8`` matches."""
    x1, x2 = _xy(x1), _xy(x2)
    if len(x1) < 8 or len(x1) != len(x2):
        raise ValueError("eight_point needs at least 8 matches in both images")
    T1, h1 = normalize_points(x1)
    T2, h2 = normalize_points(x2)
    A = _design(h1, h2)
    _, s, vt = np.linalg.svd(A)
    # a rank below 8 leaves no unique solution
    if s[7] <= 1e-10 * s[0]:
        raise DegenerateConfiguration("constraint matrix has rank below 8")
    Fn = enforce_rank2(vt[-1].reshape(3, 3))
    return FundamentalMatrix.from_matrix(T2.T @ Fn @ T1)


def _cubic_coeffs(F1, F2) -> np.ndarray:
    """Coefficients (highest first) of ``det(a F1 + (1 - a) F2)`` as a cubic in ``a``."""
    samples = np.array([-1.0, 0.0, 1.0, 2.0])
    vals = [np.linalg.det(a * F1 + (1 - a) * F2) for a in samples]
    return np.linalg.solve(np.vander(samples, 4), vals)


def seven_point(x1, x2) -> list[FundamentalMatrix]:
    """All rank-2 solutions (one or three) through exactly seven matches."""
    x1, x2 = _xy(x1), _xy(x2)
    if len(x1) != 7 or len(x2) != 7:
        raise ValueError("seven_point needs exactly 7 matches")
    T1, h1 = normalize_points(x1)
    T2, h2 = normalize_points(x2)
    A = _design(h1, h2)
    _, s, vt = np.linalg.svd(A, full_matrices=True)
    if s[6] <= 1e-10 * s[0]:
        raise DegenerateConfiguration("null space of the 7x9 system exceeds two dimensions")
    F1, F2 = vt[7].reshape(3, 3), vt[8].reshape(3, 3)
    coeffs = _cubic_coeffs(F1, F2)
    scale = np.max(np.abs(coeffs))
    coeffs = np.trim_zeros(np.where(np.abs(coeffs) < 1e-14 * scale, 0.0, coeffs), "f")
    roots = np.roots(coeffs)  # companion-matrix eigenvalues
    real = sorted(float(r.real) for r in roots if abs(r.imag) <= 1e-8 * max(abs(r.real), 1.0))
    out = []
    for a in real:
        Fn = a * F1 + (1 - a) * F2
        out.append(FundamentalMatrix.from_matrix(T2.T @ Fn @ T1))
    if not out:
        raise DegenerateConfiguration("cubic has no real root")
    return out


def camera_center(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.shape != (3, 4):
        raise ValueError("camera matrix must be 3x4")
    if np.linalg.matrix_rank(P) < 3:
        raise DegenerateInput("camera matrix must have rank 3")
    return null_vector(P)


def truth_f_from_cameras(P1, P2) -> FundamentalMatrix:
    """``F = [e2]_x P2 P1^+`` with ``e2`` the image of camera 1's centre."""
    P1, P2 = np.asarray(P1, dtype=float), np.asarray(P2, dtype=float)
    C1, C2 = camera_center(P1), camera_center(P2)
    e2 = P2 @ C1
    if np.linalg.norm(e2) <= 1e-12 * np.linalg.norm(P2):
        raise DegenerateInput("camera centres coincide")
    F = skew(e2) @ P2 @ np.linalg.pinv(P1)
    e1 = P1 @ C2
    return FundamentalMatrix.from_matrix(F, e1=e1, e2=e2)
