"""Fundamental matrix from corresponding epipolar lines.

``two_point_estimate`` needs two point correspondences: candidate epipolar
lines through each point are paired by stereo similarity, pairs of
candidates hypothesize the epipoles, a third line pair is searched through
the epipoles, and the best epipolar line homography after screening and
full validation gives ``F``.  ``three_point_accelerated`` takes the third
line pair from a third correspondence, and ``line_ransac_estimate`` works
without any point correspondence.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import stereo
from .candidates import (
    CandidatePair,
    candidate_pairs,
    lines_at_angles,
    mutual_best,
    profiles_for_lines,
    uniform_angles,
    Pencil,
    ScoreMatrix,
)
from .errors import DegenerateInput, DomainError, EmptyPencil, NoCandidates, NoValidHypothesis, PencilViolation
from .geometry import (
    FundamentalMatrix,
    ImageBounds,
    area_between_lines,
    dehom,
    fundamental_from_line_homography,
    hom,
    intersect,
    line_homography_dlt,
    line_through,
    normalize_line,
    pencil_lines_through,
    same_up_to_scale,
    unit,
)
from .imaging import DEFAULT_MIN_TEXTURE, DEFAULT_SAMPLES, GrayImage, clip_lines


@dataclass(frozen=True)
class EstimateConfig:
    stereo: stereo.StereoParams = field(default_factory=stereo.StereoParams)
    angles: int = 180
    samples: int = DEFAULT_SAMPLES
    min_chord: float = 128.0
    min_texture: float = DEFAULT_MIN_TEXTURE
    k_mutual: int = 2
    max_hypotheses: int = 2000
    screen_lines: int = 9
    validation_lines: int = 100
    top_fraction: float = 0.05
    inlier_area: float | None = None  # pixels^2; None means 3 * image width
    min_generating_angle: float = 2.0  # degrees
    min_epipole_distance: float = 1.0  # pixels
    dlt_tol: float = 10.0
    ransac_trials: int = 300
    ransac_grid: int = 3
    ransac_angles: int = 24
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if not 0 < self.top_fraction <= 1:
            raise ValueError("top_fraction must be in (0, 1]")
        for name in ("angles", "samples", "k_mutual", "max_hypotheses", "screen_lines", "validation_lines",
                     "ransac_trials", "ransac_grid", "ransac_angles", "threads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.screen_lines < 3:
            raise ValueError("screen_lines counts the three defining lines, so it must be >= 3")

    def area_threshold(self, bounds: ImageBounds) -> float:
        return 3.0 * bounds.width if self.inlier_area is None else float(self.inlier_area)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = {g.name: getattr(v, g.name) for g in fields(v)} if f.name == "stereo" else v
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "EstimateConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "stereo" in d:
            s = d["stereo"]
            bad = set(s) - {g.name for g in fields(stereo.StereoParams)}
            if bad:
                raise ValueError(f"unknown stereo keys: {sorted(bad)}")
            d["stereo"] = stereo.StereoParams(**s)
        return cls(**d)


@dataclass
class Hypothesis:
    index: int
    pair_p: CandidatePair
    pair_q: CandidatePair
    e1: np.ndarray
    e2: np.ndarray
    third: tuple  # (line in image 1, line in image 2)
    H: np.ndarray
    G: np.ndarray | None = None
    screen_score: float = math.inf
    full_score: float | None = None

    @property
    def cost_sum(self) -> float:
        return self.pair_p.cost + self.pair_q.cost

    @property
    def line_pairs(self) -> list:
        return [(self.pair_p.l1, self.pair_p.l2), (self.pair_q.l1, self.pair_q.l2), self.third]


@dataclass
class EstimateResult:
    F: FundamentalMatrix
    hypothesis: Hypothesis
    diagnostics: dict
    timings: dict = field(default_factory=dict)
    ranked: list = field(default_factory=list, repr=False)  # validated hypotheses, best first

    def to_dict(self) -> dict:
        h = self.hypothesis
        return {
            "fundamental": self.F.to_dict(),
            "epipoles": {"e1": _vec(unit(h.e1)), "e2": _vec(unit(h.e2))},
            "lines": [[_vec(normalize_line(a)), _vec(normalize_line(b))] for a, b in h.line_pairs],
            "scores": {"screen": _num(h.screen_score), "full": _num(h.full_score)},
            "diagnostics": dict(self.diagnostics),
        }


def _vec(v) -> list:
    return [float(x) for x in v]


def _num(x):
    if x is None or not math.isfinite(x):
        return None
    return float(x)


# ---------------------------------------------------------------------------
# Small pieces


def ransac_trials(inlier_ratio: float, confidence: float, sample_size: int) -> int:
    """Trials needed to draw one all-inlier sample with the given confidence."""
    if not 0 < inlier_ratio <= 1 or not 0 < confidence < 1 or sample_size < 1:
        raise DomainError("need 0 < inlier_ratio <= 1, 0 < confidence < 1, sample_size >= 1")
    if inlier_ratio == 1:
        return 1
    return math.ceil(math.log(1 - confidence) / math.log(1 - inlier_ratio**sample_size))


def _chord_midpoint(line, bounds):
    a, b, ok = clip_lines(np.asarray(line)[None, :], bounds)
    if not ok[0]:
        raise DegenerateInput("generating line misses the image")
    return 0.5 * (a[0] + b[0])


def _direction_from(e, line, towards):
    """Unit direction of ``line`` oriented from ``e`` towards the point ``towards``."""
    l = normalize_line(line)
    d = np.array([-l[1], l[0]])
    ex, ey, ew = hom(e)
    s = 1.0 if ew >= 0 else -1.0
    v = s * (towards * ew - np.array([ex, ey]))
    return -d if d @ v < 0 else d


def bisector_line(e, la, lb, bounds: ImageBounds) -> np.ndarray:
    """Line through ``e`` halving the angle between ``la`` and ``lb``.

    Both lines are oriented from ``e`` towards the midpoints of their image
    chords before their unit directions are summed.
    """
    if same_up_to_scale(la, lb, 1e-9):
        raise DegenerateInput("bisector of a line with itself")
    e = hom(e)
    da = _direction_from(e, la, _chord_midpoint(la, bounds))
    db = _direction_from(e, lb, _chord_midpoint(lb, bounds))
    u = da + db
    if np.hypot(*u) < 1e-12:
        raise DegenerateInput("generating lines point in opposite directions")
    out = np.cross(e, np.array([u[0], u[1], 0.0]))
    if np.hypot(out[0], out[1]) < 1e-12 * np.linalg.norm(out):
        # e at infinity: both lines are parallel, take the mid-line instead
        mid = 0.5 * (_chord_midpoint(la, bounds) + _chord_midpoint(lb, bounds))
        out = np.cross(e, hom(mid))
    return normalize_line(out)


def _line_profile(img: GrayImage, line, cfg: EstimateConfig, textured=True):
    keep, _, prof = profiles_for_lines(img, line, cfg.min_chord, cfg.samples,
                                       cfg.min_texture if textured else 0.0)
    return prof[0] if len(keep) else None


def best_line_through_epipole(e, target, img: GrayImage, cfg: EstimateConfig):
    """Pencil member through ``e`` with the lowest stereo cost against ``target``."""
    lines = pencil_lines_through(e, img.bounds, cfg.validation_lines)
    keep, _, prof = profiles_for_lines(img, lines, cfg.min_chord, cfg.samples, cfg.min_texture)
    if len(keep) == 0:
        raise EmptyPencil("no textured line through the epipole")
    target = np.asarray(getattr(target, "samples", target), dtype=float)
    costs = stereo.pair_costs(np.broadcast_to(target, prof.shape), prof, cfg.stereo,
                              both_orientations=True, threads=cfg.threads)
    k = int(np.argmin(costs))
    return lines[keep[k]], float(costs[k])


def screen_hypothesis(h: Hypothesis, bounds: ImageBounds, cfg: EstimateConfig) -> float:
    """Mean area between image-1 epipolar lines and their forward-backward transfer."""
    if h.G is None:
        raise ValueError("screening needs both H and G")
    extra = pencil_lines_through(h.e1, bounds, cfg.screen_lines - 3) if cfg.screen_lines > 3 else np.empty((0, 3))
    lines = [h.pair_p.l1, h.pair_q.l1, h.third[0], *extra]
    GH = h.G @ h.H
    total = 0.0
    for l in lines:
        a = area_between_lines(l, GH @ l, bounds)
        if not math.isfinite(a):
            return math.inf
        total += a
    return total / len(lines)


def full_validate(h: Hypothesis, img1: GrayImage, img2: GrayImage, cfg: EstimateConfig) -> float:
    """Mean normalized stereo cost over epipolar lines through ``e1`` and their transfers.

    Lines too short or too flat in image 1 are skipped, as are transfers
    whose chord in image 2 is too short.  When fewer than half of the
    image-1 lines have a usable transfer the hypothesis scores ``inf``.
    """
    lines = pencil_lines_through(h.e1, img1.bounds, cfg.validation_lines)
    keep, _, prof1 = profiles_for_lines(img1, lines, cfg.min_chord, cfg.samples, cfg.min_texture)
    if len(keep) == 0:
        return math.inf
    moved = lines[keep] @ h.H.T
    keep2, _, prof2 = profiles_for_lines(img2, moved, cfg.min_chord, cfg.samples, 0.0)
    if 2 * len(keep2) < len(keep):
        return math.inf
    costs = stereo.pair_costs(prof1[keep2], prof2, cfg.stereo, both_orientations=True, threads=cfg.threads)
    return float(costs.mean())


# ---------------------------------------------------------------------------
# Hypothesis construction


class _Reject(Exception):
    pass


def _epipoles(cp: CandidatePair, cq: CandidatePair, pts1, pts2, cfg: EstimateConfig):
    for la, lb in ((cp.l1, cq.l1), (cp.l2, cq.l2)):
        na, nb = normalize_line(la), normalize_line(lb)
        sin = abs(na[0] * nb[1] - na[1] * nb[0])
        if sin < math.sin(math.radians(cfg.min_generating_angle)):
            raise _Reject("generating lines nearly parallel")
    try:
        e1, e2 = intersect(cp.l1, cq.l1), intersect(cp.l2, cq.l2)
    except DegenerateInput as exc:
        raise _Reject(str(exc)) from exc
    for e, pts in ((e1, pts1), (e2, pts2)):
        if abs(e[2]) > 0:
            x = e[:2] / e[2]
            for p in pts:
                if np.hypot(*(x - dehom(hom(p)))) < cfg.min_epipole_distance:
                    raise _Reject("epipole coincides with a given point")
    return e1, e2


def _fit(pairs, e_src, e_dst, bounds, cfg):
    try:
        return line_homography_dlt(pairs, e_src, e_dst, bounds, tol=cfg.dlt_tol)
    except (DegenerateInput, PencilViolation) as exc:
        raise _Reject(str(exc)) from exc


def _third_line(e_src, la, lb, img_src, e_dst, img_dst, cfg):
    try:
        bis = bisector_line(e_src, la, lb, img_src.bounds)
    except DegenerateInput as exc:
        raise _Reject(str(exc)) from exc
    prof = _line_profile(img_src, bis, cfg)
    if prof is None:
        raise _Reject("bisector too short or too flat")
    try:
        match, _ = best_line_through_epipole(e_dst, prof, img_dst, cfg)
    except EmptyPencil as exc:
        raise _Reject(str(exc)) from exc
    return bis, match


def build_hypothesis(index, cp, cq, img1, img2, pts1, pts2, cfg: EstimateConfig) -> Hypothesis:
    """Steps 2a-2d for one pair of candidates; raises ``_Reject`` when degenerate."""
    e1, e2 = _epipoles(cp, cq, pts1, pts2, cfg)
    b1, m2 = _third_line(e1, cp.l1, cq.l1, img1, e2, img2, cfg)
    H = _fit([(cp.l1, cp.l2), (cq.l1, cq.l2), (b1, m2)], e1, e2, img1.bounds, cfg)
    b2, m1 = _third_line(e2, cp.l2, cq.l2, img2, e1, img1, cfg)
    G = _fit([(cp.l2, cp.l1), (cq.l2, cq.l1), (b2, m1)], e2, e1, img2.bounds, cfg)
    h = Hypothesis(index, cp, cq, e1, e2, (b1, m2), H, G)
    h.screen_score = screen_hypothesis(h, img1.bounds, cfg)
    return h


def hypothesis_from_lines(index, line_pairs, img1: GrayImage, img2: GrayImage, cfg: EstimateConfig,
                          cost=0.0) -> Hypothesis:
    """Hypothesis from three known epipolar line pairs (used for injection tests and tools)."""
    (a1, a2), (b1, b2), third = line_pairs
    e1, e2 = intersect(a1, b1), intersect(a2, b2)
    H = line_homography_dlt([(a1, a2), (b1, b2), third], e1, e2, img1.bounds, tol=cfg.dlt_tol)
    cp = CandidatePair(a1, a2, cost, 0, 0, -1, -1)
    cq = CandidatePair(b1, b2, cost, 0, 0, -1, -1)
    h = Hypothesis(index, cp, cq, e1, e2, tuple(third), H, np.linalg.inv(H))
    h.screen_score = 0.0
    return h


def _combos(cands_p, cands_q, cap):
    order = sorted(
        ((cp.cost + cq.cost, i, j) for i, cp in enumerate(cands_p) for j, cq in enumerate(cands_q)),
    )
    return [(i, j) for _, i, j in order[:cap]]


def _select_and_validate(hyps, img1, img2, cfg, inject=()):
    """Top fraction by screen score plus injected hypotheses, ranked by full validation."""
    finite = [h for h in hyps if math.isfinite(h.screen_score)]
    if not finite and not inject:
        raise NoValidHypothesis("every hypothesis failed screening")
    finite.sort(key=lambda h: (h.screen_score, h.cost_sum, h.index))
    count = max(1, math.ceil(cfg.top_fraction * len(finite))) if finite else 0
    chosen = finite[:count] + list(inject)
    for h in chosen:
        h.full_score = full_validate(h, img1, img2, cfg)
    ranked = sorted(chosen, key=lambda h: (h.full_score, h.index))
    if not math.isfinite(ranked[0].full_score):
        raise NoValidHypothesis("no hypothesis survived full validation")
    return ranked, count


def _finish(best: Hypothesis) -> FundamentalMatrix:
    return fundamental_from_line_homography(best.H, best.e1, best.e2)


def two_point_estimate(img1: GrayImage, img2: GrayImage, p, q, cfg: EstimateConfig = EstimateConfig(),
                       inject=()) -> EstimateResult:
    """Fundamental matrix from two point correspondences ``p = (p1, p2)`` and ``q = (q1, q2)``.

    ``inject`` adds ready-made hypotheses that skip screening and always
    enter full validation.
    """
    t0 = time.perf_counter()
    (p1, p2), (q1, q2) = p, q
    cands_p, cands_q = _candidates(img1, img2, p1, p2, cfg), _candidates(img1, img2, q1, q2, cfg)
    t1 = time.perf_counter()

    hyps, rejected = [], 0
    for idx, (i, j) in enumerate(_combos(cands_p, cands_q, cfg.max_hypotheses)):
        try:
            hyps.append(build_hypothesis(idx, cands_p[i], cands_q[j], img1, img2, (p1, q1), (p2, q2), cfg))
        except _Reject:
            rejected += 1
    t2 = time.perf_counter()

    ranked, validated = _select_and_validate(hyps, img1, img2, cfg, inject)
    best = ranked[0]
    F = _finish(best)
    t3 = time.perf_counter()
    diag = {
        "candidates_p": len(cands_p),
        "candidates_q": len(cands_q),
        "hypotheses": len(hyps) + rejected,
        "rejected": rejected,
        "screened": sum(math.isfinite(h.screen_score) for h in hyps),
        "validated": validated + len(inject),
        "ranking": [h.index for h in ranked],
    }
    timings = {"candidates": t1 - t0, "hypotheses": t2 - t1, "validation": t3 - t2}
    return EstimateResult(F, best, diag, timings, ranked)


def _candidates(img1, img2, pt1, pt2, cfg):
    try:
        cands = candidate_pairs(img1, img2, pt1, pt2, uniform_angles(cfg.angles), cfg.stereo, cfg.k_mutual,
                                cfg.min_chord, cfg.min_texture, cfg.samples, cfg.threads)
    except EmptyPencil as exc:
        raise NoCandidates(str(exc)) from exc
    if not cands:
        raise NoCandidates("no mutual-best line pairs")
    return cands


def three_point_accelerated(img1: GrayImage, img2: GrayImage, p, q, r, cfg: EstimateConfig = EstimateConfig()):
    """Like ``two_point_estimate`` with the third line pair joining ``r`` to the epipoles.

    The forward-backward screen is meaningless here (the third pair is
    shared), so hypotheses are screened by the stereo cost of that pair.
    """
    t0 = time.perf_counter()
    (p1, p2), (q1, q2), (r1, r2) = p, q, r
    for a, b, c in ((p1, q1, r1), (p2, q2, r2)):
        m = np.array([hom(a), hom(b), hom(c)])
        if abs(np.linalg.det(m / np.linalg.norm(m, axis=1, keepdims=True))) < 1e-9:
            raise DegenerateInput("the three points are collinear")
    cands_p, cands_q = _candidates(img1, img2, p1, p2, cfg), _candidates(img1, img2, q1, q2, cfg)
    t1 = time.perf_counter()

    hyps, rejected, collinear = [], 0, 0
    for idx, (i, j) in enumerate(_combos(cands_p, cands_q, cfg.max_hypotheses)):
        cp, cq = cands_p[i], cands_q[j]
        try:
            e1, e2 = _epipoles(cp, cq, (p1, q1, r1), (p2, q2, r2), cfg)
            t1_line, t2_line = line_through(r1, e1), line_through(r2, e2)
            if any(same_up_to_scale(t1_line, l, 1e-9) for l in (cp.l1, cq.l1)) or any(
                same_up_to_scale(t2_line, l, 1e-9) for l in (cp.l2, cq.l2)
            ):
                collinear += 1
                raise _Reject("third point lies on a generating line")
            H = _fit([(cp.l1, cp.l2), (cq.l1, cq.l2), (t1_line, t2_line)], e1, e2, img1.bounds, cfg)
        except (_Reject, DegenerateInput):
            rejected += 1
            continue
        h = Hypothesis(idx, cp, cq, e1, e2, (t1_line, t2_line), H)
        pa, pb = _line_profile(img1, t1_line, cfg, textured=False), _line_profile(img2, t2_line, cfg, textured=False)
        if pa is None or pb is None:
            rejected += 1
            continue
        h.screen_score = float(stereo.pair_costs(pa[None], pb[None], cfg.stereo, both_orientations=True)[0])
        hyps.append(h)
    if not hyps and collinear:
        raise DegenerateInput("third point lies on the epipolar lines of the others")
    t2 = time.perf_counter()
    ranked, validated = _select_and_validate(hyps, img1, img2, cfg)
    best = ranked[0]
    F = _finish(best)
    t3 = time.perf_counter()
    diag = {
        "candidates_p": len(cands_p),
        "candidates_q": len(cands_q),
        "hypotheses": len(hyps) + rejected,
        "rejected": rejected,
        "screened": len(hyps),
        "validated": validated,
        "ranking": [h.index for h in ranked],
    }
    return EstimateResult(F, best, diag, {"candidates": t1 - t0, "hypotheses": t2 - t1, "validation": t3 - t2},
                          ranked)


# ---------------------------------------------------------------------------
# Point-free variant


def _grid_pencil(img: GrayImage, grid: int, count: int, cfg: EstimateConfig) -> Pencil:
    w, h = img.width, img.height
    xs = (np.arange(grid) + 0.5) / grid * (w - 1)
    ys = (np.arange(grid) + 0.5) / grid * (h - 1)
    angles = uniform_angles(count)
    lines, angs = [], []
    for y in ys:
        for x in xs:
            lines.append(lines_at_angles((x, y), angles))
            angs.append(angles)
    lines = np.concatenate(lines)
    keep, ends, prof = profiles_for_lines(img, lines, cfg.min_chord, cfg.samples, cfg.min_texture)
    if len(keep) == 0:
        raise NoCandidates("image has no textured lines")
    return Pencil(np.array([0.0, 0.0, 1.0]), lines[keep], np.concatenate(angs)[keep], ends, prof)


def consensus(H, candidates, bounds: ImageBounds, threshold: float) -> int:
    """Number of candidate pairs ``(l, l')`` with ``area(l', H l)`` below ``threshold``."""
    return sum(area_between_lines(c.l2, H @ c.l1, bounds) < threshold for c in candidates)


def line_ransac_estimate(img1: GrayImage, img2: GrayImage, cfg: EstimateConfig = EstimateConfig()) -> EstimateResult:
    """Point-free estimate: weighted RANSAC over globally matched line pairs."""
    t0 = time.perf_counter()
    g1 = _grid_pencil(img1, cfg.ransac_grid, cfg.ransac_angles, cfg)
    g2 = _grid_pencil(img2, cfg.ransac_grid + 1, cfg.ransac_angles, cfg)
    scores = stereo.grid_costs(g1.profiles, g2.profiles, cfg.stereo, both_orientations=True, threads=cfg.threads)
    cands = mutual_best(ScoreMatrix(scores, g1, g2), 1)
    if len(cands) < 2:
        raise NoCandidates("fewer than two mutually best line pairs")
    t1 = time.perf_counter()

    weights = 1.0 / np.arange(1, len(cands) + 1)  # candidates are sorted by cost
    weights /= weights.sum()
    rng = np.random.default_rng(cfg.seed)
    threshold = cfg.area_threshold(img2.bounds)
    best, best_key, tried = None, None, 0
    for trial in range(cfg.ransac_trials):
        i, j = rng.choice(len(cands), size=2, replace=False, p=weights)
        cp, cq = cands[i], cands[j]
        try:
            e1, e2 = _epipoles(cp, cq, (), (), cfg)
            b1, m2 = _third_line(e1, cp.l1, cq.l1, img1, e2, img2, cfg)
            H = _fit([(cp.l1, cp.l2), (cq.l1, cq.l2), (b1, m2)], e1, e2, img1.bounds, cfg)
        except _Reject:
            continue
        tried += 1
        score = consensus(H, cands, img2.bounds, threshold)
        key = (-score, trial)
        if best_key is None or key < best_key:
            best_key = key
            best = Hypothesis(trial, cp, cq, e1, e2, (b1, m2), H, screen_score=float(score))
    if best is None:
        raise NoValidHypothesis("every RANSAC trial was degenerate")
    best.full_score = full_validate(best, img1, img2, cfg)
    F = _finish(best)
    diag = {"candidates": len(cands), "trials": cfg.ransac_trials, "valid_trials": tried,
            "inliers": int(-best_key[0])}
    return EstimateResult(F, best, diag, {"candidates": t1 - t0, "ransac": time.perf_counter() - t1})


__all__ = [
    "EstimateConfig",
    "EstimateResult",
    "Hypothesis",
    "best_line_through_epipole",
    "bisector_line",
    "build_hypothesis",
    "consensus",
    "full_validate",
    "hypothesis_from_lines",
    "line_ransac_estimate",
    "ransac_trials",
    "screen_hypothesis",
    "three_point_accelerated",
    "two_point_estimate",
]
