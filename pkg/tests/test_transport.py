import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmbundle import (
    Affine,
    ContractViolation,
    MaxAffineSubdiff,
    ScaledL1Subdiff,
    Triplet,
    enlargement_residual,
    eps_bound,
    eval_oracle,
    sample_graph,
    transport,
)
from mmbundle.oracle import sample_ball
from mmbundle.transport import enlargement_residuals


def test_single_triplet():
    z, w = np.array([1.0, 2.0]), np.array([3.0, -1.0])
    el = transport([Triplet(0.3, z, w)], [1.0])
    np.testing.assert_array_equal(el.xhat, z)
    np.testing.assert_array_equal(el.uhat, w)
    assert el.epshat == pytest.approx(0.3)


def test_identical_points():
    z = np.array([1.0, 1.0])
    el = transport([Triplet(0.0, z, np.array([1.0, 0.0])), Triplet(0.0, z, np.array([0.0, 1.0]))], [0.5, 0.5])
    np.testing.assert_array_equal(el.xhat, z)
    np.testing.assert_allclose(el.uhat, [0.5, 0.5])
    assert el.epshat == 0.0


def _two():
    return [Triplet(0.0, np.zeros(2), np.array([1.0, 0.0])), Triplet(0.0, np.array([1.0, 0.0]), np.array([3.0, 0.0]))]


def test_two_triplets_hand_value():
    el = transport(_two(), [0.5, 0.5])
    np.testing.assert_allclose(el.xhat, [0.5, 0.0])
    np.testing.assert_allclose(el.uhat, [2.0, 0.0])
    assert el.epshat == pytest.approx(0.5, abs=1e-15)
    # independent recomputation of the displayed formula
    eps = sum(0.5 * (t.w - el.uhat) @ (t.z - el.xhat) for t in _two())
    assert eps == pytest.approx(0.5, abs=1e-15)


def test_eps_bound_examples():
    bound, holds = eps_bound(_two(), [0.5, 0.5], np.zeros(2), 1.0)
    assert bound == 6.0 and holds
    bound, holds = eps_bound([Triplet(0.0, np.zeros(2), np.ones(2))], [1.0], np.zeros(2), 0.3)
    assert holds
    zero = [Triplet(0.0, np.zeros(2), np.zeros(2)), Triplet(0.0, np.ones(2) * 0.1, np.zeros(2))]
    bound, holds = eps_bound(zero, [0.5, 0.5], np.zeros(2), 1.0)
    assert bound == 0.0 and holds


def test_eps_bound_preconditions():
    with pytest.raises(ContractViolation):
        eps_bound([Triplet(0.1, np.zeros(2), np.ones(2))], [1.0], np.zeros(2), 1.0)
    with pytest.raises(ContractViolation):
        eps_bound([Triplet(0.0, np.array([5.0, 0.0]), np.ones(2))], [1.0], np.zeros(2), 1.0)


def test_weight_count_mismatch():
    with pytest.raises(ContractViolation):
        transport(_two(), [1.0])
    with pytest.raises(ContractViolation):
        transport([], [])


def test_negative_eps_means_bad_triplets():
    # w values swapped against monotonicity: not graph points of a monotone map
    bad = [Triplet(0.0, np.zeros(1), np.array([3.0])), Triplet(0.0, np.ones(1), np.array([1.0]))]
    with pytest.raises(ContractViolation):
        transport(bad, [0.5, 0.5])


def test_residual_at_graph_point():
    spec = Affine(np.diag([1.0, 3.0]), [0.2, -0.1])
    sample = sample_graph(spec, np.zeros(2), 2.0, 500, seed=1)
    x = np.array([0.3, -0.4])
    assert enlargement_residual(x, eval_oracle(spec, x), 0.0, sample) >= -1e-12


def test_residual_detects_non_member():
    spec = Affine(np.diag([1.0, 3.0]), [0.0, 0.0])
    sample = sample_graph(spec, np.zeros(2), 2.0, 500, seed=1)
    y0 = sample.points[0]
    u = -10.0 * eval_oracle(spec, y0)
    # direct evaluation at -y0 already certifies non-membership
    assert (eval_oracle(spec, -y0) - u) @ (-y0 - 0.0) < 0
    assert enlargement_residual(np.zeros(2), u, 0.0, sample) < 0


def test_batched_residuals_match():
    spec = MaxAffineSubdiff.from_pieces([((1.0, 0.0), 0.0), ((-1.0, 0.5), 0.1), ((0.0, -1.0), 0.0)])
    sample = sample_graph(spec, np.zeros(2), 1.5, 300, seed=4)
    rng = np.random.default_rng(0)
    xs, us, eps = rng.standard_normal((6, 2)), rng.standard_normal((6, 2)), rng.uniform(0, 1, 6)
    single = [enlargement_residual(x, u, e, sample) for x, u, e in zip(xs, us, eps)]
    np.testing.assert_allclose(enlargement_residuals(xs, us, eps, sample), single, atol=1e-12)


SPECS = [
    Affine([[2.0, 1.0], [-1.0, 0.5]], [0.3, -0.2]),
    MaxAffineSubdiff.from_pieces([((1.0, 0.0), 0.0), ((-1.0, 0.0), 0.0), ((0.0, 2.0), -0.3)]),
    ScaledL1Subdiff([1.0, 0.5]),
]


@settings(max_examples=150, deadline=None)
@given(st.integers(0, len(SPECS) - 1), st.integers(1, 6), st.integers(0, 2**31 - 1), st.floats(0.01, 2.0))
def test_transport_theorem_properties(which, m, seed, rho):
    spec = SPECS[which]
    rng = np.random.default_rng(seed)
    center = rng.uniform(-1, 1, 2)
    zs = sample_ball(center, rho, m, seed)
    trip = [Triplet(0.0, z, eval_oracle(spec, z)) for z in zs]
    alpha = rng.dirichlet(np.ones(m))
    el = transport(trip, alpha)
    assert el.epshat >= 0.0
    bound, holds = eps_bound(trip, alpha, center, rho)
    assert holds and el.epshat <= bound + 1e-9
    sample = sample_graph(spec, el.xhat, 2.0 * rho, 400, seed + 1)
    assert enlargement_residual(el.xhat, el.uhat, el.epshat, sample) >= -1e-9
