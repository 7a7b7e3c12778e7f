import numpy as np
import pytest

from fedsim import algorithms as alg
from fedsim.data import Partition, load_bundled, uniform_partition
from fedsim.errors import ConfigurationError, OracleError
from fedsim.numeric import rng_stream
from fedsim.objectives import LogisticClient, LogisticObjective, QuadraticObjective, make_quadratic_suite
from fedsim.oracle import (OracleMethod, compute_oracle, fedavg_fixed_point_quadratic, fednova_fixed_point_quadratic,
                           optimum_long_gd, optimum_quadratic, theorem1_bias_bound)

PAIR = QuadraticObjective.identity([[0.0], [10.0]])
HALF = [0.5, 0.5]


def test_symmetric_pair_optimum():
    r = optimum_quadratic(PAIR, HALF)
    assert r.x_star.tolist() == [5.0] and r.f_star == 12.5 and r.method is OracleMethod.CLOSED_FORM


def test_identity_curvature_optimum_is_weighted_center():
    rng = np.random.default_rng(0)
    centers = rng.normal(size=(5, 3))
    w = rng.dirichlet(np.ones(5))
    w = w / w.sum()
    r = optimum_quadratic(QuadraticObjective.identity(centers), w)
    np.testing.assert_allclose(r.x_star, w @ centers, rtol=0, atol=1e-12)


def test_single_client_optimum():
    r = optimum_quadratic(QuadraticObjective.identity([[3.0, -1.0]]), [1.0])
    assert r.x_star.tolist() == [3.0, -1.0] and r.f_star == 0.0


def test_fedavg_fixed_point_value():
    x = fedavg_fixed_point_quadratic([[0.0], [10.0]], HALF, 0.1, (1, 20))
    s1, s2 = 0.1, 1 - 0.9 ** 20
    assert x[0] == pytest.approx(10 * s2 / (s1 + s2), abs=1e-12)
    assert x[0] == pytest.approx(8.97795, abs=1e-5)


def test_fixed_points_homogeneous_and_iid():
    assert fedavg_fixed_point_quadratic([[0.0], [10.0]], HALF, 0.1, (7, 7))[0] == pytest.approx(5.0, abs=1e-12)
    assert fedavg_fixed_point_quadratic([[2.0], [2.0]], HALF, 0.3, (1, 50))[0] == pytest.approx(2.0, abs=1e-12)
    assert fednova_fixed_point_quadratic([[0.0], [10.0]], HALF, 0.1, (4, 4))[0] == pytest.approx(5.0, abs=1e-12)


def test_fednova_small_eta_limit():
    x = fednova_fixed_point_quadratic([[0.0], [10.0]], HALF, 1e-4, (1, 20))
    assert abs(x[0] - 5.0) <= 1e-2


@pytest.mark.parametrize("eta", [0.0, 1.0, -0.1, 1.5])
def test_fixed_point_eta_range(eta):
    with pytest.raises(ConfigurationError):
        fedavg_fixed_point_quadratic([[0.0], [10.0]], HALF, eta, (1, 2))


def test_bias_bound_examples():
    xs = np.array([5.0])
    assert theorem1_bias_bound(PAIR, HALF, (1, 20), xs) == pytest.approx(118.75)
    assert theorem1_bias_bound(PAIR, HALF, (6, 6), xs) == 0.0
    same = QuadraticObjective.identity([[1.0], [1.0]])
    assert theorem1_bias_bound(same, HALF, (1, 20), np.array([1.0])) == 0.0


def test_long_gd_matches_closed_form():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        q = make_quadratic_suite(int(rng.integers(1, 6)), int(rng.integers(1, 6)), rng, mu=0.2, L=2.0)
        w = uniform_partition(q.num_clients).weights
        exact = optimum_quadratic(q, w)
        gd = optimum_long_gd(q, w, tolerance=1e-11)
        np.testing.assert_allclose(gd.x_star, exact.x_star, rtol=0, atol=1e-8)


def test_long_gd_symmetric_logistic_is_zero():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(15, 4))
    y = np.where(rng.random(15) < 0.5, -1.0, 1.0)
    obj = LogisticObjective([LogisticClient(np.vstack([X, X]), np.concatenate([y, -y]), 1e-3)])
    r = optimum_long_gd(obj, [1.0], tolerance=1e-10)
    assert np.max(np.abs(r.x_star)) <= 1e-8


def test_bundled_oracle_residual():
    data = load_bundled()
    part = Partition((np.arange(data.n),))
    obj = LogisticObjective.from_dataset(data, part, l2_reg=1e-3)
    r = compute_oracle(obj, part.weights, tolerance=1e-10)
    assert r.method is OracleMethod.LONG_GD and r.residual <= 1e-10


def test_iteration_cap():
    q = make_quadratic_suite(2, 3, np.random.default_rng(0), mu=0.01, L=1.0)
    with pytest.raises(OracleError):
        optimum_long_gd(q, HALF, tolerance=1e-12, max_iterations=3)


def _simulate_fedavg(centers, w, eta, steps, rounds=2000):
    q = QuadraticObjective.identity(centers)
    x = np.zeros(q.dim)
    for t in range(rounds):
        reports = [alg.local_update_fedavg(x, k, eta, q, i, rng_stream(0, 0, i, t)) for i, k in enumerate(steps)]
        x = alg.server_round_fedavg(x, reports, w)
    return x


def test_fixed_point_matches_simulation():
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        m = int(rng.integers(2, 5))
        centers = rng.normal(scale=4.0, size=(m, 2))
        w = rng.dirichlet(np.ones(m))
        w = w / w.sum()
        eta = float(rng.uniform(0.05, 0.5))
        steps = tuple(int(k) for k in rng.integers(1, 9, size=m))
        x_inf = fedavg_fixed_point_quadratic(centers, w, eta, steps)
        np.testing.assert_allclose(_simulate_fedavg(centers, w, eta, steps), x_inf, rtol=0, atol=1e-8)


@pytest.mark.parametrize("steps, same_centers, biased", [
    ((3, 3, 3), False, False),
    ((1, 4, 9), True, False),
    ((1, 4, 9), False, True),
    ((2, 2, 2), True, False),
])
def test_bias_vanishes_exactly_when_expected(steps, same_centers, biased):
    centers = [[1.0]] * 3 if same_centers else [[-3.0], [1.0], [6.0]]
    w = [0.2, 0.3, 0.5]
    x_star = np.dot(w, np.asarray(centers)[:, 0])
    bias = abs(_simulate_fedavg(centers, w, 0.2, steps)[0] - x_star)
    assert (bias > 1e-6) == biased
    if not biased:
        assert bias <= 1e-12
