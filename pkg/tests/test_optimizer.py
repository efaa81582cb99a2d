import numpy as np
import pytest

from renyichain import entropy, linalg, states
from renyichain.errors import DimTooLarge, RenyiError
from renyichain.optimizer import OptimizerConfig, brute_force_oracle, optimize_density
from renyichain.states import SeededSampler


def linear(m):
    return lambda sigma: float(np.trace(sigma @ m).real)


def purity(sigma):
    return float(np.vdot(sigma, sigma).real)


def _assert_feasible(sigma):
    assert np.linalg.eigvalsh(sigma).min() >= -1e-12
    assert abs(np.trace(sigma).real - 1) <= 1e-12


class TestConfig:
    @pytest.mark.parametrize("kwargs", [
        {"mode": "max"}, {"restarts": 0}, {"rel_tol": 0.0}, {"method": "newton"},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(RenyiError):
            OptimizerConfig(**kwargs)

    def test_from_dict(self):
        cfg = OptimizerConfig.from_dict({"restarts": 2, "method": "local_search"})
        assert cfg.restarts == 2 and cfg.max_iters == 2000
        with pytest.raises(RenyiError):
            OptimizerConfig.from_dict({"restart": 2})


class TestOptimizeDensity:
    @pytest.mark.parametrize("method", ["parametrized_descent", "local_search"])
    def test_linear_extreme_point(self, method):
        out = optimize_density(linear(np.diag([1.0, 2.0])), 2, OptimizerConfig(restarts=3, method=method))
        assert out.value == pytest.approx(1.0, abs=1e-9)
        assert abs(out.argopt[0, 0] - 1) <= 1e-6
        _assert_feasible(out.argopt)

    def test_linear_sup(self):
        cfg = OptimizerConfig(mode="sup", restarts=3)
        out = optimize_density(linear(np.diag([1.0, 2.0, 5.0])), 3, cfg)
        assert out.value == pytest.approx(5.0, abs=1e-9)

    def test_purity_minimum(self):
        out = optimize_density(purity, 2, OptimizerConfig(restarts=3), SeededSampler(1))
        assert out.value == pytest.approx(0.5, abs=1e-10)
        np.testing.assert_allclose(out.argopt, np.eye(2) / 2, atol=1e-5)
        _assert_feasible(out.argopt)

    def test_variational_instance(self):
        x = states.random_density(SeededSampler(2), 2).matrix * 2
        root = linalg.mat_pow_support(x, 0.5)
        f = linalg.TensorFactorization(("Y",), (2,))
        obj = entropy.PowerTraceObjective(root, f, "Y", 0.5, 1.0, 1.0)
        out = optimize_density(obj, 2, OptimizerConfig(mode="sup", restarts=3))
        value = np.trace(linalg.mat_pow_support(out.argopt, 0.5) @ x).real
        assert abs(value - linalg.schatten(x, 2)) <= 1e-6

    def test_value_matches_argopt(self):
        obj = linear(np.diag([3.0, 1.0, 2.0]))
        out = optimize_density(obj, 3, OptimizerConfig(restarts=2))
        assert abs(obj(out.argopt) - out.value) <= 1e-10

    def test_deterministic(self):
        rho = states.random_density(SeededSampler(3), linalg.TensorFactorization(("A", "B"), (2, 2)))
        a = entropy.cond_entropy(rho, 2, "B", config=OptimizerConfig(restarts=3), sampler=SeededSampler(4))
        b = entropy.cond_entropy(rho, 2, "B", config=OptimizerConfig(restarts=3), sampler=SeededSampler(4))
        assert a.value == b.value
        np.testing.assert_array_equal(a.optimizer_state, b.optimizer_state)

    def test_restart_agreement_flag(self):
        out = optimize_density(purity, 3, OptimizerConfig(restarts=4), SeededSampler(5))
        assert out.converged and len(out.restart_values) == 4
        best = sorted(out.restart_values)[:2]
        assert abs(best[1] - best[0]) <= 1e-6 * max(1, abs(best[0]))

    def test_trivial_dimension(self):
        out = optimize_density(linear(np.eye(1) * 3), 1)
        assert out.value == 3 and out.iterations == 0


class TestOracle:
    def test_linear(self):
        out = brute_force_oracle(linear(np.diag([2.0, 1.0])), 2, resolution=6)
        assert out.value == pytest.approx(1.0, abs=1e-9)

    def test_maximally_entangled_entropy(self):
        f = linalg.TensorFactorization(("A", "B"), (2, 2))
        rho = states.maximally_entangled(f, "A", "B").density()
        root = linalg.mat_pow_support(rho.matrix, 0.5)
        obj = entropy.PowerTraceObjective(root, f, "B", -0.5, 2.0, 1.0)
        assert -brute_force_oracle(obj, 2, resolution=6).value == pytest.approx(-1, abs=1e-4)

    def test_agrees_with_descent(self):
        f = linalg.TensorFactorization(("A", "B"), (2, 2))
        rho = states.random_density(SeededSampler(7), f)
        root = linalg.mat_pow_support(rho.matrix, 0.5)
        obj = entropy.PowerTraceObjective(root, f, "B", -0.5, 2.0, 1.0)
        main = optimize_density(obj, 2, OptimizerConfig(restarts=3))
        oracle = brute_force_oracle(obj, 2, resolution=8)
        assert abs(main.value - oracle.value) <= 1e-4

    def test_grid_plus_local_method(self):
        out = optimize_density(purity, 2, OptimizerConfig(method="grid_plus_local"))
        assert out.value == pytest.approx(0.5, abs=1e-8)

    def test_dimension_limit(self):
        with pytest.raises(DimTooLarge):
            brute_force_oracle(purity, 4)


def test_objective_gradient_matches_finite_difference():
    f = linalg.TensorFactorization(("A", "B"), (2, 2))
    rho = states.random_density(SeededSampler(8), f)
    root = linalg.mat_pow_support(rho.matrix, 0.5)
    obj = entropy.PowerTraceObjective(root, f, "B", -1 / 3, 1.5, 2.0)
    sigma = states.random_density(SeededSampler(9), 2).matrix
    h = states.random_density(SeededSampler(10), 2).matrix - sigma
    val, grad = obj.value_and_grad(sigma)
    assert val == pytest.approx(obj(sigma))
    eps = 1e-6
    fd = (obj(sigma + eps * h) - obj(sigma - eps * h)) / (2 * eps)
    assert np.trace(grad @ h).real == pytest.approx(fd, rel=1e-5)
