"""Image-pair datasets with cameras and ground-truth point correspondences.

The canonical input is a JSON manifest::

    {"pairs": [{"left": "a.png", "right": "b.png",
                "camera_left": "a.P", "camera_right": "b.P",
                "points_left": "a.pts", "points_right": "b.pts"}]}

Relative paths are resolved against the manifest's directory.  A directory
holding the VGG house layout (``name.NNN.pgm``, ``name.NNN.P``,
``name.NNN.corners`` and optionally ``name.nview-corners``) is discovered
automatically and split into consecutive pairs.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from ..errors import MissingFile, ParseError
from ..imaging import load_image
from .protocol import PairData

IMAGE_SUFFIXES = (".pgm", ".png", ".ppm", ".jpg", ".jpeg", ".tif", ".tiff")


def _read_lines(path):
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"file not found: {path}")
    with open(path) as fh:
        return fh.read().splitlines()


def _floats(path, lineno, text, count=None):
    parts = text.split()
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ParseError(path, lineno, f"expected numbers, got {text.strip()!r}") from None
    if count is not None and len(vals) != count:
        raise ParseError(path, lineno, f"expected {count} values, got {len(vals)}")
    if not all(np.isfinite(vals)):
        raise ParseError(path, lineno, "non-finite value")
    return vals


def read_camera(path) -> np.ndarray:
    """3x4 camera matrix from three whitespace-separated rows of four numbers."""
    rows = []
    last = 0
    for lineno, text in enumerate(_read_lines(path), start=1):
        if not text.strip():
            continue
        if len(rows) == 3:
            raise ParseError(path, lineno, "more than 3 rows")
        rows.append(_floats(path, lineno, text, 4))
        last = lineno
    if len(rows) != 3:
        raise ParseError(path, last, f"expected 3 rows, found {len(rows)}")
    P = np.array(rows)
    if np.linalg.matrix_rank(P) < 3:
        raise ParseError(path, last, "camera matrix has rank below 3")
    return P


def read_points(path) -> np.ndarray:
    """``(N, 2)`` array from one ``x y`` pair per line."""
    pts = [_floats(path, lineno, text, 2) for lineno, text in enumerate(_read_lines(path), start=1)
           if text.strip()]
    return np.array(pts, dtype=float).reshape(-1, 2)


def read_nview(path) -> list:
    """Rows of per-view corner indices; ``*`` marks a view where the point is absent."""
    rows = []
    for lineno, text in enumerate(_read_lines(path), start=1):
        if not text.strip():
            continue
        row = []
        for tok in text.split():
            if tok == "*":
                row.append(None)
            elif tok.isdigit():
                row.append(int(tok))
            else:
                raise ParseError(path, lineno, f"bad index {tok!r}")
        if rows and len(row) != len(rows[0]):
            raise ParseError(path, lineno, f"expected {len(rows[0])} views, got {len(row)}")
        rows.append(row)
    return rows


def write_camera(path, P) -> None:
    with open(path, "w") as fh:
        for row in np.asarray(P, dtype=float):
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def write_points(path, pts) -> None:
    with open(path, "w") as fh:
        for x, y in np.asarray(pts, dtype=float):
            fh.write(f"{float(x)!r} {float(y)!r}\n")


def _resolve(base: Path, p):
    if p is None:
        return None
    p = Path(p)
    return p if p.is_absolute() else base / p


def load_manifest(path) -> list:
    path = Path(path)
    try:
        data = json.loads("\n".join(_read_lines(path)))
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, exc.msg) from None
    if not isinstance(data, dict) or not isinstance(data.get("pairs"), list):
        raise ParseError(path, 1, 'manifest must be an object with a "pairs" list')
    base = path.parent
    pairs = []
    for k, entry in enumerate(data["pairs"]):
        need = ("left", "right", "points_left", "points_right")
        missing = [key for key in need if not entry.get(key)]
        if missing:
            raise ParseError(path, 1, f"pair {k} lacks {missing}")
        x1 = read_points(_resolve(base, entry["points_left"]))
        x2 = read_points(_resolve(base, entry["points_right"]))
        if len(x1) != len(x2):
            raise ParseError(_resolve(base, entry["points_right"]), len(x2),
                             f"{len(x2)} points but the left view has {len(x1)}")
        cl, cr = entry.get("camera_left"), entry.get("camera_right")
        P1 = read_camera(_resolve(base, cl)) if cl else None
        P2 = read_camera(_resolve(base, cr)) if cr else None
        pairs.append(PairData(str(entry.get("name", k)), load_image(_resolve(base, entry["left"])),
                              load_image(_resolve(base, entry["right"])), x1, x2, P1, P2))
    return pairs


_NUMBERED = re.compile(r"^(?P<stem>.+)\.(?P<num>\d{3})$")


def discover_vgg(directory) -> list:
    """Consecutive pairs from a VGG-style numbered sequence in ``directory``."""
    d = Path(directory)
    if not d.is_dir():
        raise MissingFile(f"not a directory: {d}")
    views = {}
    for f in sorted(d.iterdir()):
        m = _NUMBERED.match(f.stem)
        if m and f.suffix.lower() in IMAGE_SUFFIXES:
            views[int(m["num"])] = (m["stem"], f)
    if len(views) < 2:
        raise MissingFile(f"no numbered image sequence in {d}")
    nums = sorted(views)
    stem = views[nums[0]][0]
    cams = [d / f"{stem}.{n:03d}.P" for n in nums]
    corners = [d / f"{stem}.{n:03d}.corners" for n in nums]
    nview_path = d / f"{stem}.nview-corners"
    nview = read_nview(nview_path) if nview_path.is_file() else None
    pts = [read_points(c) for c in corners]
    images = [load_image(views[n][1]) for n in nums]

    pairs = []
    for a in range(len(nums) - 1):
        b = a + 1
        if nview is not None:
            rows = [r for r in nview if r[a] is not None and r[b] is not None]
            ia, ib = [r[a] for r in rows], [r[b] for r in rows]
            for idx, p, path in ((ia, pts[a], corners[a]), (ib, pts[b], corners[b])):
                if idx and max(idx) >= len(p):
                    raise ParseError(nview_path, 0, f"index {max(idx)} beyond {len(p)} points in {path.name}")
            x1, x2 = pts[a][ia], pts[b][ib]
        else:
            m = min(len(pts[a]), len(pts[b]))
            x1, x2 = pts[a][:m], pts[b][:m]
        P1 = read_camera(cams[a]) if cams[a].is_file() else None
        P2 = read_camera(cams[b]) if cams[b].is_file() else None
        pairs.append(PairData(f"{nums[a]:03d}-{nums[b]:03d}", images[a], images[b], x1, x2, P1, P2))
    return pairs


def load_vgg_dataset(path) -> list:
    """Pairs from a manifest file, or by discovery when ``path`` is a directory."""
    path = Path(path)
    if path.is_dir():
        manifest = path / "manifest.json"
        return load_manifest(manifest) if manifest.is_file() else discover_vgg(path)
    return load_manifest(path)
