"""Static renderings: epipolar lines over images and profile plots."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from .imaging import GrayImage, clip_lines, to_uint8  # noqa: E402

TRUTH_COLOR = "#00c000"
ESTIMATE_COLOR = "#1e50ff"


def draw_lines(img: GrayImage, groups, path, dpi=100) -> int:
    """Write ``img`` as an RGB PNG with 1-px anti-aliased lines drawn on top.

    ``groups`` is a sequence of ``(lines, color)``; lines missing the image
    are skipped.  Returns the number of lines drawn.
    """
    w, h = img.width, img.height
    fig = Figure(figsize=(w / dpi, h / dpi), dpi=dpi)
    ax = fig.add_axes([0, 0, 1, 1])
    ax.imshow(to_uint8(img), cmap="gray", vmin=0, vmax=255, interpolation="nearest")
    drawn = 0
    for lines, color in groups:
        lines = np.atleast_2d(np.asarray(lines, dtype=float))
        if lines.size == 0:
            continue
        a, b, ok = clip_lines(lines, img.bounds, 0.0)
        for k in np.flatnonzero(ok):
            ax.plot([a[k, 0], b[k, 0]], [a[k, 1], b[k, 1]], color=color, linewidth=72.0 / dpi,
                    antialiased=True, solid_capstyle="butt")
            drawn += 1
    ax.set_xlim(-0.5, w - 0.5)
    ax.set_ylim(h - 0.5, -0.5)
    ax.set_axis_off()
    fig.savefig(path, dpi=dpi, format="png", metadata={"Software": None})
    return drawn


def plot_profiles(x, y, warped, path) -> None:
    """Two intensity profiles before (top) and after (bottom) disparity warping."""
    fig = Figure(figsize=(8, 4.5), dpi=100)
    top, bottom = fig.subplots(2, 1, sharex=True)
    idx = np.arange(len(x))
    top.plot(idx, x, color=TRUTH_COLOR, label="line 1")
    top.plot(idx, y, color=ESTIMATE_COLOR, label="line 2")
    top.set_title("intensity profiles")
    top.legend(loc="upper right")
    bottom.plot(idx, x, color=TRUTH_COLOR, label="line 1")
    bottom.plot(idx, warped, color=ESTIMATE_COLOR, label="line 2 warped")
    bottom.set_title("after disparity warping")
    bottom.set_xlabel("sample")
    bottom.legend(loc="upper right")
    for ax in (top, bottom):
        ax.set_ylabel("intensity")
        ax.set_ylim(0, 255)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})


__all__ = ["ESTIMATE_COLOR", "TRUTH_COLOR", "draw_lines", "plot_profiles"]
