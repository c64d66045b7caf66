"""Homogeneous projective primitives and two-view measures.

Points and lines are plain ``numpy`` 3-vectors.  A point ``(x, y, w)`` with
``w == 0`` is an ideal point; such points are legal everywhere (an epipole
can sit at infinity) and nothing here dehomogenizes unless it has to report
a pixel quantity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, PencilViolation

# relative size of a cross product below which two 3-vectors are "equal up to scale"
_SAME_TOL = 1e-12


@dataclass(frozen=True)
class ImageBounds:
    width: int
    height: int

    def __post_init__(self):
        if int(self.width) < 2 or int(self.height) < 2:
            raise ValueError(f"image must be at least 2x2, got {self.width}x{self.height}")

    @property
    def area(self) -> float:
        return float(self.width * self.height)

    def frame(self) -> np.ndarray:
        """Similarity taking pixel coordinates to a centred frame of half-size ~1."""
        s = 2.0 / max(self.width, self.height)
        cx, cy = (self.width - 1) / 2.0, (self.height - 1) / 2.0
        return np.array([[s, 0.0, -s * cx], [0.0, s, -s * cy], [0.0, 0.0, 1.0]])


def hom(p) -> np.ndarray:
    """Promote a 2-vector to homogeneous form; 3-vectors pass through as float."""
    p = np.asarray(p, dtype=float)
    if p.shape == (2,):
        return np.array([p[0], p[1], 1.0])
    if p.shape != (3,):
        raise ValueError(f"expected a 2- or 3-vector, got shape {p.shape}")
    return p


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise DegenerateInput("zero vector is not a valid homogeneous entity")
    return v / n


def canonical_sign(v: np.ndarray) -> np.ndarray:
    """Flip ``v`` so that its largest-magnitude entry is positive."""
    flat = v.ravel()
    return -v if flat[np.argmax(np.abs(flat))] < 0 else v


def same_up_to_scale(u, v, tol=_SAME_TOL) -> bool:
    return bool(np.linalg.norm(np.cross(unit(u), unit(v))) <= tol)


def normalize_line(l) -> np.ndarray:
    """Scale a line so that its normal ``(a, b)`` is a unit vector."""
    l = np.asarray(l, dtype=float)
    n = np.hypot(l[0], l[1])
    if n == 0.0:
        raise DegenerateInput("line at infinity has no image normal")
    return l / n


def line_through(p, q) -> np.ndarray:
    p, q = hom(p), hom(q)
    if same_up_to_scale(p, q):
        raise DegenerateInput("cannot join a point with itself")
    return np.cross(p, q)


def intersect(l1, l2) -> np.ndarray:
    l1, l2 = np.asarray(l1, dtype=float), np.asarray(l2, dtype=float)
    if same_up_to_scale(l1, l2):
        raise DegenerateInput("coincident lines have no unique intersection")
    return np.cross(l1, l2)


def skew(e) -> np.ndarray:
    """Cross-product matrix: ``skew(e) @ x == np.cross(e, x)``."""
    x, y, z = hom(e)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def dehom(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return p[..., :2] / p[..., 2:3]


def point_line_distance(p, l) -> float:
    """Perpendicular pixel distance from a finite point to a line."""
    x = dehom(hom(p))
    l = normalize_line(l)
    return float(abs(l[0] * x[0] + l[1] * x[1] + l[2]))


def enforce_rank2(m) -> np.ndarray:
    """Closest rank-2 matrix in Frobenius norm."""
    u, s, vt = np.linalg.svd(np.asarray(m, dtype=float))
    s[2] = 0.0
    return (u * s) @ vt


def null_vector(a: np.ndarray) -> np.ndarray:
    """Right singular vector of the smallest singular value."""
    _, _, vt = np.linalg.svd(np.atleast_2d(a))
    return vt[-1]


def pencil_basis(e) -> np.ndarray:
    """Orthonormal 3x2 basis of all lines passing through ``e``."""
    _, _, vt = np.linalg.svd(unit(e)[None, :])
    return vt[1:].T


# ---------------------------------------------------------------------------
# Fundamental matrix container


@dataclass(frozen=True)
class FundamentalMatrix:
    F: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    @classmethod
    def from_matrix(cls, m, e1=None, e2=None, check=True) -> "FundamentalMatrix":
        """Normalize to unit Frobenius norm, fix the sign and attach epipoles.

        Epipoles default to the right/left null vectors of ``m``.
        """
        m = np.asarray(m, dtype=float)
        norm = np.linalg.norm(m)
        if norm == 0.0:
            raise DegenerateInput("zero matrix is not a fundamental matrix")
        f = canonical_sign(m / norm)
        if e1 is None or e2 is None:
            u, _, vt = np.linalg.svd(f)
            e1 = vt[2] if e1 is None else e1
            e2 = u[:, 2] if e2 is None else e2
        fm = cls(f, canonical_sign(unit(e1)), canonical_sign(unit(e2)))
        if check:
            fm.check()
        return fm

    def residuals(self) -> tuple[float, float, float]:
        """``(|det F|, |F e1|, |F^T e2|)`` for the stored, normalized entities."""
        return (
            abs(float(np.linalg.det(self.F))),
            float(np.linalg.norm(self.F @ self.e1)),
            float(np.linalg.norm(self.F.T @ self.e2)),
        )

    def check(self, det_tol=1e-9, epi_tol=1e-6) -> None:
        det, r1, r2 = self.residuals()
        if det > det_tol or r1 > epi_tol or r2 > epi_tol:
            raise PencilViolation(
                f"not a valid fundamental matrix: |det|={det:.3g}, |Fe1|={r1:.3g}, |F'e2|={r2:.3g}"
            )

    def epipolar_line(self, x1) -> np.ndarray:
        """Line in image 2 corresponding to point ``x1`` of image 1."""
        return self.F @ hom(x1)

    def to_dict(self) -> dict:
        return {
            "F": [float(v) for v in self.F.ravel()],
            "e1": [float(v) for v in self.e1],
            "e2": [float(v) for v in self.e2],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FundamentalMatrix":
        # stored values are taken verbatim so that load/dump round-trips exactly
        return cls(
            np.array(d["F"], dtype=float).reshape(3, 3),
            np.array(d["e1"], dtype=float),
            np.array(d["e2"], dtype=float),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "FundamentalMatrix":
        return cls.from_dict(json.loads(s))


def as_matrix(f) -> np.ndarray:
    return f.F if isinstance(f, FundamentalMatrix) else np.asarray(f, dtype=float)


def aligned_distance(a, b) -> float:
    """Frobenius distance between two matrices after unit scaling and sign alignment."""
    a, b = unit(as_matrix(a).ravel()), unit(as_matrix(b).ravel())
    return float(min(np.linalg.norm(a - b), np.linalg.norm(a + b)))


# ---------------------------------------------------------------------------
# Epipolar line homography


def line_homography_dlt(pairs, e1=None, e2=None, bounds: ImageBounds | None = None, tol=1e-6):
    """Fit the map taking a pencil of image-1 lines onto a pencil of image-2 lines.

    ``pairs`` holds three ``(l, l')`` line correspondences.  The 1D projective
    map between the pencils is solved by DLT in pencil coordinates (one
    equation per pair); the returned 3x3 matrix ``H`` acts as that map on
    lines through ``e1`` and sends the line-vector ``e1`` to ``e2`` so that it
    is invertible and ``H.T @ e2`` is parallel to ``e1``.

    Pencil centres are the least-squares common points of each triple unless
    given.  Raises ``PencilViolation`` when a pair or the pencil-to-pencil
    check misses ``tol`` (cross norm of unit vectors).
    """
    pairs = list(pairs)
    if len(pairs) != 3:
        raise ValueError(f"need exactly three line pairs, got {len(pairs)}")
    src = np.array([np.asarray(a, dtype=float) for a, _ in pairs])
    dst = np.array([np.asarray(b, dtype=float) for _, b in pairs])
    for lines, name in ((src, "source"), (dst, "target")):
        for i in range(3):
            for j in range(i + 1, 3):
                if same_up_to_scale(lines[i], lines[j], 1e-9):
                    raise DegenerateInput(f"{name} lines {i} and {j} coincide")

    t = bounds.frame() if bounds is not None else np.eye(3)
    t_inv_t = np.linalg.inv(t).T
    src_n = np.array([unit(t_inv_t @ l) for l in src])
    dst_n = np.array([unit(t_inv_t @ l) for l in dst])
    c1 = unit(t @ hom(e1)) if e1 is not None else unit(null_vector(src_n))
    c2 = unit(t @ hom(e2)) if e2 is not None else unit(null_vector(dst_n))

    b1, b2 = pencil_basis(c1), pencil_basis(c2)
    s, sp = src_n @ b1, dst_n @ b2
    rows = np.column_stack([-sp[:, 1] * s[:, 0], -sp[:, 1] * s[:, 1], sp[:, 0] * s[:, 0], sp[:, 0] * s[:, 1]])
    h = null_vector(rows).reshape(2, 2)
    if abs(np.linalg.det(h)) < 1e-12 * max(np.abs(h).max() ** 2, 1e-300):
        raise DegenerateInput("pencil correspondence is degenerate (singular 1D map)")
    hn = b2 @ h @ b1.T + np.outer(c2, c1)
    H = t.T @ hn @ t_inv_t
    H = H / np.linalg.norm(H)

    for k in range(3):
        r = np.linalg.norm(np.cross(unit(dst[k]), unit(H @ src[k])))
        if r > tol:
            raise PencilViolation(f"pair {k} transfer residual {r:.3g} exceeds {tol:.3g}")
    p1 = hom(e1) if e1 is not None else np.linalg.solve(t, c1)
    p2 = hom(e2) if e2 is not None else np.linalg.solve(t, c2)
    check_pencil_map(H, p1, p2, tol)
    return H


def check_pencil_map(H, e1, e2, tol=1e-6):
    """Raise unless ``H.T @ e2`` is parallel to ``e1``.

    ``e1``/``e2`` are points here (not line vectors), hence the transpose.
    """
    v = H.T @ hom(e2)
    if np.linalg.norm(v) == 0.0:
        return
    r = np.linalg.norm(np.cross(unit(v), unit(hom(e1))))
    if r > tol:
        raise PencilViolation(f"homography does not map pencil to pencil (residual {r:.3g})")


def fundamental_from_line_homography(H, e1, e2, tol=1e-6) -> FundamentalMatrix:
    """Assemble ``F = H [e1]_x`` from a line homography and its pencil centres."""
    H = np.asarray(H, dtype=float)
    F = H @ skew(unit(hom(e1)))
    fm = FundamentalMatrix.from_matrix(F, e1=hom(e1), e2=hom(e2), check=False)
    _, r1, r2 = fm.residuals()
    if r1 > tol or r2 > tol:
        raise PencilViolation(f"epipole residuals |Fe1|={r1:.3g}, |F'e2|={r2:.3g} exceed {tol:.3g}")
    return fm


# ---------------------------------------------------------------------------
# Measures


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] == 2:
        x = np.column_stack([x, np.ones(len(x))])
    return x


def symmetric_epipolar_errors(f, x1, x2) -> np.ndarray:
    """Per-match mean of the two point-to-epipolar-line pixel distances."""
    F = as_matrix(f)
    p1, p2 = _as_points(x1), _as_points(x2)
    if len(p1) == 0 or len(p1) != len(p2):
        raise ValueError("need the same, non-zero number of points in both images")
    l2 = p1 @ F.T  # F x1, row per match
    l1 = p2 @ F  # F^T x2
    n2, n1 = np.hypot(l2[:, 0], l2[:, 1]), np.hypot(l1[:, 0], l1[:, 1])
    if np.any(n1 == 0.0) or np.any(n2 == 0.0):
        raise DegenerateInput("transferred epipolar line is the line at infinity")
    q1, q2 = p1 / p1[:, 2:3], p2 / p2[:, 2:3]
    d2 = np.abs(np.sum(l2 * q2, axis=1)) / n2
    d1 = np.abs(np.sum(l1 * q1, axis=1)) / n1
    return 0.5 * (d1 + d2)


def symmetric_epipolar_distance(f, x1, x2) -> float:
    return float(np.mean(symmetric_epipolar_errors(f, x1, x2)))


def _rect(bounds: ImageBounds) -> list:
    w, h = float(bounds.width), float(bounds.height)
    return [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)]


def _clip_halfplane(poly, l, keep_positive):
    """Sutherland-Hodgman step for one half-plane ``+-(l . x) >= 0``."""
    sgn = 1.0 if keep_positive else -1.0
    out = []
    n = len(poly)
    for k in range(n):
        p, q = poly[k], poly[(k + 1) % n]
        fp = sgn * (l[0] * p[0] + l[1] * p[1] + l[2])
        fq = sgn * (l[0] * q[0] + l[1] * q[1] + l[2])
        if fp >= 0.0:
            out.append(p)
        if (fp >= 0.0) != (fq >= 0.0):
            t = fp / (fp - fq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def _shoelace(poly) -> float:
    if len(poly) < 3:
        return 0.0
    a = 0.0
    for k in range(len(poly)):
        x0, y0 = poly[k]
        x1, y1 = poly[(k + 1) % len(poly)]
        a += x0 * y1 - x1 * y0
    return abs(a) / 2.0


def _hits_rect(l, rect) -> bool:
    vals = [l[0] * x + l[1] * y + l[2] for x, y in rect]
    return min(vals) <= 0.0 <= max(vals)


def area_between_lines(l, lt, bounds: ImageBounds) -> float:
    """Image area (pixels^2) enclosed between two lines inside ``[0,W]x[0,H]``.

    The region is where the two (normal-aligned) lines disagree in sign; of it
    and its complement the smaller is reported, which keeps the measure
    symmetric and well defined for lines crossing inside the image.  Returns
    ``inf`` when either line misses the image.
    """
    a, b = normalize_line(l), normalize_line(lt)
    # canonical argument order makes the result bit-identical under swapping
    if tuple(b + 0.0) < tuple(a + 0.0):  # + 0.0 folds -0.0 into 0.0
        a, b = b, a
    if a[0] * b[0] + a[1] * b[1] < 0.0:
        b = -b
    rect = _rect(bounds)
    if not (_hits_rect(a, rect) and _hits_rect(b, rect)):
        return float("inf")
    if np.array_equal(a, b):
        return 0.0
    inside = _shoelace(_clip_halfplane(_clip_halfplane(rect, a, True), b, False))
    inside += _shoelace(_clip_halfplane(_clip_halfplane(rect, a, False), b, True))
    return float(min(inside, bounds.area - inside))


# ---------------------------------------------------------------------------
# Pencils through a (possibly ideal) point


def _pencil_frame(e, bounds: ImageBounds):
    t = bounds.frame()
    en = unit(t @ hom(e))
    return t, en, pencil_basis(en)


def pencil_arc(e, bounds: ImageBounds, margin=0.0) -> tuple[float, float]:
    """Parameter interval ``[t0, t0 + span)`` of pencil lines through ``e`` hitting the image.

    Lines are ``cos(t) m1 + sin(t) m2`` in the centred frame of ``bounds``; the
    rectangle used is ``[margin, W-1-margin] x [margin, H-1-margin]``.
    """
    t, en, basis = _pencil_frame(e, bounds)
    w, h = bounds.width - 1.0 - margin, bounds.height - 1.0 - margin
    corners = np.array([[margin, margin, 1.0], [w, margin, 1.0], [w, h, 1.0], [margin, h, 1.0]]) @ t.T
    # inside test in pixel space
    p = hom(e)
    if p[2] != 0.0:
        x, y = p[0] / p[2], p[1] / p[2]
        if margin <= x <= w and margin <= y <= h:
            return 0.0, np.pi
    ang = np.sort(np.mod(np.arctan2(-(corners @ basis[:, 0]), corners @ basis[:, 1]), np.pi))
    gaps = np.diff(np.concatenate([ang, [ang[0] + np.pi]]))
    # the missing lines fill the one gap whose mid line leaves every corner on one side
    mids = ang + 0.5 * gaps
    side = (np.cos(mids)[:, None] * (corners @ basis[:, 0]) + np.sin(mids)[:, None] * (corners @ basis[:, 1]))
    misses = np.all(side > 0, axis=1) | np.all(side < 0, axis=1)
    k = int(np.argmax(np.where(misses, gaps, -1.0)))
    start = ang[(k + 1) % 4]
    return float(start), float(np.pi - gaps[k])


def pencil_lines_through(e, bounds: ImageBounds, count: int, margin=0.0) -> np.ndarray:
    """``count`` lines through ``e`` spread uniformly over the image-hitting arc.

    Returns a ``(count, 3)`` array of pixel-frame lines with unit normals.
    """
    t, _, basis = _pencil_frame(e, bounds)
    t0, span = pencil_arc(e, bounds, margin)
    ts = t0 + (np.arange(count) + 0.5) / count * span
    ln = np.cos(ts)[:, None] * basis[:, 0] + np.sin(ts)[:, None] * basis[:, 1]
    lines = ln @ t  # pixel frame: l = T^T l_n
    return lines / np.hypot(lines[:, 0], lines[:, 1])[:, None]
