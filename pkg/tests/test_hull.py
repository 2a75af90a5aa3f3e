import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mmbundle import ContractViolation, Halfspace, SimplexWeights, min_norm_point, project_halfspace
from mmbundle.hull import project_simplex, wolfe_gap

from _grid import grid_min


def test_single_point():
    alpha, s = min_norm_point([[3.0, 4.0]])
    assert alpha.weights.tolist() == [1.0]
    assert s.tolist() == [3.0, 4.0]


def test_symmetric_pair():
    alpha, s = min_norm_point([[1.0, 0.0], [-1.0, 0.0]])
    np.testing.assert_allclose(s, [0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(alpha.weights, [0.5, 0.5], atol=1e-12)


def test_three_points_matches_grid():
    pts = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
    _, s = min_norm_point(pts)
    np.testing.assert_allclose(s, [0.5, 0.5], atol=1e-12)
    # frozen from the step-1e-3 grid oracle
    assert grid_min(pts) == pytest.approx(0.5, abs=1e-12)
    assert s @ s == pytest.approx(0.5, abs=1e-12)


def test_empty_input_rejected():
    with pytest.raises(ContractViolation):
        min_norm_point([])


def test_index_set_labels():
    alpha, _ = min_norm_point([[1.0], [-2.0]], index_set=[7, 9])
    assert alpha.index_set == (7, 9)
    np.testing.assert_allclose(alpha.weights, [2 / 3, 1 / 3])


def test_warm_start_reaches_same_point():
    rng = np.random.default_rng(4)
    pts = rng.standard_normal((40, 5)) + 0.3
    _, cold = min_norm_point(pts)
    _, warm = min_norm_point(pts, warm_start=([3, 5, 8], [0.2, 0.3, 0.5]))
    np.testing.assert_allclose(warm, cold, atol=1e-12)


def test_stop_below_returns_short_hull_point():
    pts = np.array([[1.0, 0.0], [-1.0, 0.1], [0.0, -1.0]])
    alpha, s = min_norm_point(pts, stop_below=0.5)
    assert np.linalg.norm(s) <= 0.5
    np.testing.assert_allclose(alpha.weights @ pts, s)


def test_origin_interior_full_dimension():
    # 0 strictly inside the hull; affinely dependent corrals appear on the way
    rng = np.random.default_rng(0)
    pts = rng.standard_normal((400, 10))
    _, s = min_norm_point(pts)
    assert s @ s <= 1e-20


@settings(max_examples=200, deadline=None)
@given(
    arrays(
        np.float64,
        st.tuples(st.integers(1, 12), st.integers(1, 6)),
        elements=st.floats(-100, 100, allow_nan=False, width=64),
    )
)
def test_wolfe_criterion_and_simplex(points):
    alpha, s = min_norm_point(points)
    w = alpha.weights
    assert np.all(w >= 0) and abs(w.sum() - 1.0) <= 1e-9
    np.testing.assert_allclose(w @ points, s, atol=1e-9 * (1 + np.abs(points).max()))
    assert wolfe_gap(points, s) <= 1e-9 * (1.0 + s @ s) * max(1.0, np.abs(points).max() ** 2)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 4)), elements=st.floats(-10, 10)))
def test_no_vertex_is_shorter(points):
    _, s = min_norm_point(points)
    assert s @ s <= np.einsum("ij,ij->i", points, points).min() + 1e-9


def test_simplex_weights_validation():
    with pytest.raises(ContractViolation):
        SimplexWeights([0.5, 0.6], (0, 1))
    with pytest.raises(ContractViolation):
        SimplexWeights([-0.1, 1.1], (0, 1))
    with pytest.raises(ContractViolation):
        SimplexWeights([1.0], (0, 1))
    assert SimplexWeights.vertex(1, (4, 5, 6)).weights.tolist() == [0.0, 1.0, 0.0]


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 20), elements=st.floats(-50, 50)))
def test_project_simplex(v):
    p = project_simplex(v)
    assert np.all(p >= 0) and abs(p.sum() - 1) <= 1e-9
    # optimality: p - v is constant on the support and no smaller off it
    g = p - v
    support = p > 1e-12
    assert np.ptp(g[support]) <= 1e-9 * (1 + np.abs(v).max())
    assert np.all(g[~support] >= g[support].max() - 1e-9 * (1 + np.abs(v).max()))


@pytest.mark.parametrize(
    "x, y, v, expected",
    [
        ((0, 2), (0, 0), (0, 1), (0, 0)),
        ((1, 1), (0, 0), (1, 0), (0, 1)),
        ((2, 2), (1, 0), (1, 1), (0.5, 0.5)),
    ],
)
def test_project_halfspace_examples(x, y, v, expected):
    out = project_halfspace(np.array(x, float), Halfspace(np.array(y, float), np.array(v, float)))
    np.testing.assert_allclose(out, expected, atol=1e-15)


def test_halfspace_kkt_example_by_grid():
    # minimise |z - (2, 2)|^2 over <z - (1, 0), (1, 1)> <= 0 on a grid
    g = np.linspace(-1, 3, 4001)
    zx, zy = np.meshgrid(g, g)
    feasible = (zx - 1) + zy <= 1e-12
    d = np.where(feasible, (zx - 2) ** 2 + (zy - 2) ** 2, np.inf)
    i = np.unravel_index(np.argmin(d), d.shape)
    assert (zx[i], zy[i]) == pytest.approx((0.5, 0.5), abs=1e-3)


def test_halfspace_zero_normal():
    with pytest.raises(ContractViolation):
        Halfspace(np.zeros(2), np.zeros(2))


@settings(max_examples=200, deadline=None)
@given(
    arrays(np.float64, 3, elements=st.floats(-10, 10)),
    arrays(np.float64, 3, elements=st.floats(-10, 10)),
    arrays(np.float64, 3, elements=st.floats(-10, 10)),
)
def test_project_halfspace_properties(x, y, v):
    if np.linalg.norm(v) < 1e-3:
        return
    h = Halfspace(y, v)
    p = project_halfspace(x, h)
    nv = np.linalg.norm(v)
    assert abs((p - y) @ v) <= 1e-9 * nv * max(1.0, np.linalg.norm(x - y))
    # the correction is parallel to v
    r = p - x
    assert np.linalg.norm(r - (r @ v) / (v @ v) * v) <= 1e-9 * max(1.0, np.linalg.norm(r))
