"""Repeated-draw evaluation of F estimators on image pairs with known matches.

Every (pair, method, iteration) draws its own points from a generator seeded
by ``(seed, pair, iteration)``, so results do not depend on execution order
or worker count.  Errors are symmetric epipolar distances on the matches
that were not drawn.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import EpilineError, InsufficientPoints
from ..estimator import EstimateConfig, three_point_accelerated, two_point_estimate
from ..geometry import symmetric_epipolar_distance
from .solvers import eight_point, seven_point

METHODS = ("two-point", "three-point", "7pt", "8pt")
POINTS_NEEDED = {"two-point": 2, "three-point": 3, "7pt": 7, "8pt": 8}


@dataclass(frozen=True)
class PairData:
    """One stereo pair with ground-truth matches (and optional cameras)."""

    name: str
    left: object  # GrayImage
    right: object
    x1: np.ndarray  # (N, 2)
    x2: np.ndarray
    P1: np.ndarray | None = None
    P2: np.ndarray | None = None


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)  # (pair, method, iteration, error_px)
    meta: dict = field(default_factory=dict)

    def errors(self, pair, method) -> list:
        return [e for p, m, _, e in self.rows if p == pair and m == method]

    def pairs(self) -> list:
        return list(dict.fromkeys(r[0] for r in self.rows))

    def methods(self) -> list:
        return list(dict.fromkeys(r[1] for r in self.rows))

    def median(self, pair, method) -> float:
        return float(np.median(self.errors(pair, method)))

    def overall_median(self, method) -> float:
        return float(np.median([e for _, m, _, e in self.rows if m == method]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pair", "method", "iteration", "error_px"])
        for p, m, i, e in self.rows:
            w.writerow([p, m, i, repr(float(e))])
        return buf.getvalue()

    def summary(self) -> dict:
        def num(x):
            return float(x) if math.isfinite(x) else None

        out = {"meta": self.meta, "pairs": {}, "overall": {}}
        for p in self.pairs():
            out["pairs"][p] = {}
            for m in self.methods():
                errs = self.errors(p, m)
                if errs:
                    out["pairs"][p][m] = {"median": num(float(np.median(errs))), "mean": num(float(np.mean(errs)))}
        for m in self.methods():
            out["overall"][m] = {"median": num(self.overall_median(m))}
        return out

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)

    def table(self) -> str:
        methods = self.methods()
        width = max([len("pair")] + [len(str(p)) for p in self.pairs()])
        lines = ["  ".join([f"{'pair':<{width}}"] + [f"{m:>12}" for m in methods])]
        for p in self.pairs():
            cells = [f"{self.median(p, m):12.3f}" for m in methods]
            lines.append("  ".join([f"{str(p):<{width}}"] + cells))
        lines.append("  ".join([f"{'median':<{width}}"] + [f"{self.overall_median(m):12.3f}" for m in methods]))
        return "\n".join(lines)

    def write(self, csv_path, json_path) -> None:
        with open(csv_path, "w", newline="") as fh:
            fh.write(self.to_csv())
        with open(json_path, "w") as fh:
            fh.write(self.to_json() + "\n")


def sample_separated(rng: np.random.Generator, x1, x2, count: int, separation=30.0, attempts=2000) -> np.ndarray:
    """Indices of ``count`` matches pairwise at least ``separation`` px apart in both images."""
    n = len(x1)
    if n < count:
        raise InsufficientPoints(f"need {count} matches, have {n}")
    for _ in range(attempts):
        chosen = []
        for i in rng.permutation(n):
            if all(np.hypot(*(x1[i] - x1[j])) >= separation and np.hypot(*(x2[i] - x2[j])) >= separation
                   for j in chosen):
                chosen.append(int(i))
                if len(chosen) == count:
                    return np.array(chosen)
    raise InsufficientPoints(f"cannot draw {count} matches {separation} px apart")


def _held_out(F, x1, x2, idx) -> float:
    mask = np.ones(len(x1), dtype=bool)
    mask[idx] = False
    if not mask.any():
        raise InsufficientPoints("no held-out matches left to score")
    return symmetric_epipolar_distance(F, x1[mask], x2[mask])


def evaluate_once(pair: PairData, method: str, idx, cfg=None, inputs=None) -> float:
    """Held-out error of ``method`` fitted to the matches ``idx``; ``inf`` on failure.

    ``inputs`` optionally replaces the drawn coordinates (e.g. with noisy
    copies); scoring always uses the exact held-out matches.
    """
    x1, x2 = pair.x1, pair.x2
    a, b = inputs if inputs is not None else (x1[idx], x2[idx])
    try:
        if method == "8pt":
            return _held_out(eight_point(a, b), x1, x2, idx)
        if method == "7pt":
            # best root by held-out error
            return min(_held_out(F, x1, x2, idx) for F in seven_point(a, b))
        cfg = cfg or EstimateConfig()
        pts = list(zip(a, b))
        if method == "two-point":
            res = two_point_estimate(pair.left, pair.right, pts[0], pts[1], cfg)
        elif method == "three-point":
            res = three_point_accelerated(pair.left, pair.right, pts[0], pts[1], pts[2], cfg)
        else:
            raise ValueError(f"unknown method {method!r}; valid: {', '.join(METHODS)}")
        return _held_out(res.F, x1, x2, idx)
    except InsufficientPoints:
        raise
    except EpilineError:
        return math.inf


def _task(args):
    k, pair, method, it, seed, separation, noise, cfg = args
    rng = np.random.default_rng(np.random.SeedSequence([seed, k, it]))
    idx = sample_separated(rng, pair.x1, pair.x2, POINTS_NEEDED[method], separation)
    inputs = None
    if noise > 0:
        inputs = (pair.x1[idx] + rng.normal(0.0, noise, (len(idx), 2)),
                  pair.x2[idx] + rng.normal(0.0, noise, (len(idx), 2)))
    return pair.name, method, it, evaluate_once(pair, method, idx, cfg, inputs)


def run_protocol(pairs, methods=("two-point", "7pt", "8pt"), iterations=10, separation=30.0, seed=0,
                 cfg=None, workers=1, point_noise=0.0) -> EvalReport:
    """Evaluate every method on every pair for ``iterations`` draws.

    ``point_noise`` adds Gaussian noise (px) to the drawn input points only.
    """
    if iterations < 1:
        raise InsufficientPoints("iterations must be at least 1")
    bad = [m for m in methods if m not in POINTS_NEEDED]
    if bad:
        raise ValueError(f"unknown method(s) {bad}; valid: {', '.join(METHODS)}")
    pairs = list(pairs)
    if not pairs:
        raise InsufficientPoints("dataset has no pairs")
    # the generator ignores the method, so methods needing equally many points see the same draw
    tasks = [(k, p, m, it, int(seed), float(separation), float(point_noise), cfg)
             for k, p in enumerate(pairs) for m in methods for it in range(iterations)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_task, tasks))
    else:
        rows = [_task(t) for t in tasks]
    meta = {"seed": int(seed), "iterations": int(iterations), "separation": float(separation),
            "point_noise": float(point_noise), "methods": list(methods), "pairs": [p.name for p in pairs]}
    return EvalReport(rows, meta)
