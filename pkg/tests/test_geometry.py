import math

import numpy as np
import pytest
from hypothesis import assume, example, given
from hypothesis import strategies as st

from epiline.errors import DegenerateInput, PencilViolation
from epiline.geometry import (
    FundamentalMatrix,
    ImageBounds,
    aligned_distance,
    area_between_lines,
    enforce_rank2,
    fundamental_from_line_homography,
    hom,
    intersect,
    line_homography_dlt,
    line_through,
    normalize_line,
    pencil_arc,
    pencil_lines_through,
    point_line_distance,
    same_up_to_scale,
    skew,
    symmetric_epipolar_distance,
    symmetric_epipolar_errors,
    unit,
)
from epiline.imaging import clip_lines
from scenario import project, random_fundamental, random_points

coord = st.floats(-1000, 1000, allow_nan=False)
point = st.tuples(coord, coord)
unit_f = st.floats(-1, 1, allow_nan=False)


def _line(a, b, c):
    return np.array([a, b, c], dtype=float)


# line_through / intersect


def test_line_through_axis():
    l = line_through([0, 0, 1], [1, 0, 1])
    assert same_up_to_scale(l, [0, 1, 0])


def test_line_through_incidence_exact():
    p, q = np.array([1.0, 2, 1]), np.array([3.0, 4, 1])
    l = line_through(p, q)
    assert l @ p == 0 and l @ q == 0


@given(point, point)
def test_line_through_random_incidence(p, q):
    assume(np.hypot(p[0] - q[0], p[1] - q[1]) > 1e-3)
    l = normalize_line(line_through(p, q))
    assert abs(l @ hom(p)) < 1e-9 * max(1.0, np.abs(p).max())
    assert abs(l @ hom(q)) < 1e-9 * max(1.0, np.abs(q).max())


def test_line_through_same_point_raises():
    with pytest.raises(DegenerateInput):
        line_through([1, 2], [2, 4, 2])


def test_intersect_axes_is_origin():
    assert same_up_to_scale(intersect([0, 1, 0], [1, 0, 0]), [0, 0, 1])


def test_intersect_parallel_is_ideal():
    e = intersect([1, 0, 0], [1, 0, -5])
    assert e[2] == 0 and same_up_to_scale(e, [0, 1, 0])


def test_intersect_coincident_raises():
    with pytest.raises(DegenerateInput):
        intersect([1, 2, 3], [2, 4, 6])


def test_intersect_recovers_pencil_centre(rng):
    e = np.array([123.4, -56.7, 1.0])
    for _ in range(20):
        t = rng.uniform(0, np.pi, 2)
        l1 = np.cross(e, [np.cos(t[0]), np.sin(t[0]), 0])
        l2 = np.cross(e, [np.cos(t[1]), np.sin(t[1]), 0])
        if abs(t[0] - t[1]) < 1e-3:
            continue
        x = intersect(l1, l2)
        assert np.allclose(x[:2] / x[2], e[:2], atol=1e-9)


@given(point, point, unit_f)
def test_join_meet_duality(p, q, s):
    assume(np.hypot(p[0] - q[0], p[1] - q[1]) > 1.0)
    l = line_through(p, q)
    m = np.array([p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])])
    other = line_through(m, m + np.array([1.0, 2.0]))
    assume(not same_up_to_scale(l, other, 1e-6))
    x = intersect(l, other)
    assert abs(normalize_line(other) @ (x / np.linalg.norm(x))) < 1e-9


# skew, rank-2


def test_skew_of_origin():
    S = skew([0, 0, 1])
    assert np.array_equal(S, [[0, -1, 0], [1, 0, 0], [0, 0, 0]])


@given(st.tuples(unit_f, unit_f, unit_f), st.tuples(unit_f, unit_f, unit_f))
def test_skew_matches_cross(e, x):
    assume(np.linalg.norm(e) > 0)
    assert np.allclose(skew(e) @ np.array(x), np.cross(e, x), atol=1e-15)
    assert np.allclose(skew(e) @ np.array(e), 0, atol=1e-15)
    assert np.allclose(skew(e), -skew(e).T)


def test_enforce_rank2_keeps_rank2(rng):
    m = enforce_rank2(rng.normal(size=(3, 3)))
    assert np.allclose(enforce_rank2(m), m, atol=1e-12)


def test_enforce_rank2_identity():
    m = enforce_rank2(np.eye(3))
    s = np.linalg.svd(m, compute_uv=False)
    assert np.allclose(s, [1, 1, 0], atol=1e-15)


def test_enforce_rank2_random_det(rng):
    for _ in range(20):
        m = enforce_rank2(rng.normal(size=(3, 3)))
        assert abs(np.linalg.det(m / np.linalg.norm(m))) < 1e-12


# FundamentalMatrix


def test_fundamental_invariants_and_json(rng):
    F, _, _ = random_fundamental(rng)
    det, r1, r2 = F.residuals()
    assert det <= 1e-9 and r1 <= 1e-6 and r2 <= 1e-6
    again = FundamentalMatrix.from_json(F.to_json())
    assert again.to_json() == F.to_json()
    flat = F.F.ravel()
    assert flat[np.argmax(np.abs(flat))] > 0


def test_fundamental_rejects_rank3():
    with pytest.raises(PencilViolation):
        FundamentalMatrix.from_matrix(np.eye(3), e1=[0, 0, 1], e2=[0, 0, 1])


# line homography


def _epipolar_pairs(F, pts):
    return [(line_through(F.e1, hom(p)), F.F @ hom(p)) for p in pts]


def test_dlt_identity_pencil():
    e = np.array([10.0, 20.0, 1.0])
    lines = [np.cross(e, [np.cos(t), np.sin(t), 0]) for t in (0.1, 0.9, 2.0)]
    H = line_homography_dlt([(l, l) for l in lines], e, e)
    for l in lines:
        assert same_up_to_scale(H @ l, l, 1e-9)


def test_dlt_exact_epipolar_lines(rng):
    F, P1, _ = random_fundamental(rng)
    pts = project(P1, random_points(rng, 4))
    pairs = _epipolar_pairs(F, pts)
    H = line_homography_dlt(pairs[:3], F.e1, F.e2, tol=1e-8)
    for l1, l2 in pairs:  # includes a held-out fourth pencil member
        assert np.linalg.norm(np.cross(normalize_line(l2) / 1.0, normalize_line(H @ l1))) < 1e-8


def test_dlt_estimates_centres_when_not_given(rng):
    F, P1, _ = random_fundamental(rng)
    pairs = _epipolar_pairs(F, project(P1, random_points(rng, 3)))
    H = line_homography_dlt(pairs, tol=1e-7)
    v = H.T @ F.e2
    assert np.linalg.norm(np.cross(v / np.linalg.norm(v), F.e1)) < 1e-6


def test_dlt_noisy_pairs(rng):
    F, P1, _ = random_fundamental(rng)
    b = ImageBounds(512, 512)
    pairs = []
    for p in project(P1, random_points(rng, 3)):
        l2 = F.F @ hom(p)
        a, c, _ = clip_lines(l2, b, 0.0)
        noisy = line_through(a[0] + rng.normal(0, 1, 2), c[0] + rng.normal(0, 1, 2))
        pairs.append((line_through(F.e1, hom(p)), noisy))
    with pytest.raises(PencilViolation):
        line_homography_dlt(pairs, F.e1, F.e2, b, tol=1e-9)
    H = line_homography_dlt(pairs, F.e1, F.e2, b, tol=10.0)
    res = [np.linalg.norm(np.cross(unit(l2), unit(H @ l1))) for l1, l2 in pairs]
    assert 0 < max(res) < 0.05


def test_dlt_coincident_lines_raise():
    e = np.array([0.0, 0.0, 1.0])
    l = np.cross(e, [1, 0, 0])
    m = np.cross(e, [0, 1, 0])
    with pytest.raises(DegenerateInput):
        line_homography_dlt([(l, l), (l, m), (m, l)], e, e)


def test_fundamental_round_trip(rng):
    F, P1, _ = random_fundamental(rng)
    pairs = _epipolar_pairs(F, project(P1, random_points(rng, 3)))
    H = line_homography_dlt(pairs, F.e1, F.e2, tol=1e-8)
    G = fundamental_from_line_homography(H, F.e1, F.e2)
    assert aligned_distance(G, F) < 1e-6
    assert np.linalg.norm(G.F @ G.e1) < 1e-12
    assert np.linalg.matrix_rank(G.F, tol=1e-9) == 2


def test_fundamental_transfer_matches_homography(rng):
    F, P1, _ = random_fundamental(rng)
    pairs = _epipolar_pairs(F, project(P1, random_points(rng, 3)))
    H = line_homography_dlt(pairs, F.e1, F.e2, tol=1e-8)
    G = fundamental_from_line_homography(H, F.e1, F.e2)
    x = np.array([37.0, 250.0, 1.0])
    assert same_up_to_scale(G.F @ x, H @ line_through(F.e1, x), 1e-8)


# symmetric epipolar distance


def test_sed_zero_on_truth(rng):
    F, P1, P2 = random_fundamental(rng)
    X = random_points(rng, 50)
    assert symmetric_epipolar_distance(F, project(P1, X), project(P2, X)) < 1e-9


def test_sed_matches_per_point_formula(rng):
    M = rng.normal(size=(3, 3))
    x1, x2 = rng.uniform(0, 500, (30, 2)), rng.uniform(0, 500, (30, 2))
    expected = []
    for a, b in zip(x1, x2):
        d2 = point_line_distance(b, M @ hom(a))
        d1 = point_line_distance(a, M.T @ hom(b))
        expected.append(0.5 * (d1 + d2))
    assert np.allclose(symmetric_epipolar_errors(M, x1, x2), expected, rtol=0, atol=1e-12)


@given(st.floats(-1e6, 1e6).filter(lambda s: abs(s) > 1e-6))
def test_sed_scale_invariant(s):
    rng = np.random.default_rng(5)
    M = rng.normal(size=(3, 3))
    x1, x2 = rng.uniform(0, 500, (10, 2)), rng.uniform(0, 500, (10, 2))
    a = symmetric_epipolar_distance(M, x1, x2)
    assert math.isclose(symmetric_epipolar_distance(s * M, x1, x2), a, rel_tol=1e-9)


def test_sed_line_at_infinity_raises():
    M = np.zeros((3, 3))
    M[2, 2] = 1.0
    with pytest.raises(DegenerateInput):
        symmetric_epipolar_distance(M, [[1.0, 2.0]], [[3.0, 4.0]])


# area between lines

B768 = ImageBounds(768, 576)


def test_area_identical_is_zero():
    l = _line(0.3, 1.0, -100)
    assert area_between_lines(l, l, B768) == 0.0
    assert area_between_lines(l, -2.5 * l, B768) == 0.0


def test_area_three_pixel_strip_equals_threshold():
    a = area_between_lines(_line(0, 1, -10), _line(0, 1, -13), B768)
    assert a == pytest.approx(3 * 768, abs=1e-9)


def test_area_missing_line_is_inf():
    assert math.isinf(area_between_lines(_line(0, 1, 10), _line(0, 1, -13), B768))


def _monte_carlo_area(l1, l2, bounds, n, rng):
    xy = rng.uniform([0, 0], [bounds.width, bounds.height], (n, 2))
    s1 = np.sign(xy @ l1[:2] + l1[2])
    s2 = np.sign(xy @ l2[:2] + l2[2])
    frac = np.mean(s1 != s2)
    between = frac * bounds.area
    return min(between, bounds.area - between)


def test_area_matches_monte_carlo(rng):
    b = ImageBounds(200, 150)
    for _ in range(10):
        p, q = rng.uniform([0, 0], [200, 150], (2, 2))
        r, s = rng.uniform([0, 0], [200, 150], (2, 2))
        l1, l2 = normalize_line(line_through(p, q)), normalize_line(line_through(r, s))
        if l1[:2] @ l2[:2] < 0:
            l2 = -l2
        exact = area_between_lines(l1, l2, b)
        mc = _monte_carlo_area(l1, l2, b, 400_000, rng)
        assert exact == pytest.approx(mc, rel=0.01, abs=0.002 * b.area)


@given(st.tuples(unit_f, unit_f, st.floats(-300, 300)), st.tuples(unit_f, unit_f, st.floats(-300, 300)))
@example((0.0, -1.0, 4.0868642726804865e-23), (4.0868642726804865e-23, -1.0, 0.0))  # distinct only below 1e-15
def test_area_symmetric(l, m):
    assume(np.hypot(l[0], l[1]) > 1e-3 and np.hypot(m[0], m[1]) > 1e-3)
    b = ImageBounds(320, 240)
    assert area_between_lines(l, m, b) == area_between_lines(m, l, b)
    assert area_between_lines(l, l, b) in (0.0, math.inf)


# pencils


@given(st.floats(-5000, 5000), st.floats(-5000, 5000), st.sampled_from([0.0, 1.0]))
def test_pencil_lines_hit_image_and_pass_through_centre(x, y, w):
    e = np.array([x, y, w])
    assume(np.hypot(x, y) > 1e-3 or w == 1.0)
    b = ImageBounds(512, 384)
    lines = pencil_lines_through(e, b, 50)
    _, _, ok = clip_lines(lines, b, 0.0)
    assert ok.all()
    en = e / np.linalg.norm(e)
    assert np.all(np.abs(lines @ en) < 1e-9 * np.maximum(1, np.abs(lines[:, 2])))
    t0, span = pencil_arc(e, b)
    assert 0 < span <= np.pi + 1e-12


def test_pencil_arc_far_epipole_is_narrow():
    b = ImageBounds(512, 512)
    _, span = pencil_arc([3072.7, 174.6, 1.0], b)
    lines = pencil_lines_through([3072.7, 174.6, 1.0], b, 100)
    _, _, ok = clip_lines(lines, b, 0.0)
    assert ok.all() and span < np.pi
