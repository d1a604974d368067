import numpy as np
import pytest

from shdp.errors import NumericalError
from shdp.optim import OptimizerConfig, minimize


def quadratic(target, scale=None):
    target = np.asarray(target, dtype=np.float64)
    scale = np.ones_like(target) if scale is None else np.asarray(scale, float)

    def f(x):
        r = x - target
        return 0.5 * float(r @ (scale * r)), scale * r

    return f


class TestMinimize:
    def test_identity_quadratic_exact(self):
        f = quadratic([3.0, -1.0])
        res = minimize(f, np.zeros(2))
        assert res.converged
        assert res.iterations <= 3
        np.testing.assert_allclose(res.x, [3.0, -1.0], atol=1e-10)

    def test_ill_conditioned_quadratic(self):
        f = quadratic([0.0, 0.0], scale=[1.0, 100.0])
        res = minimize(f, np.array([1.0, 1.0]), OptimizerConfig(grad_tol=1e-8))
        assert res.converged
        np.testing.assert_allclose(res.x, [0.0, 0.0], atol=1e-8)

    def test_condition_number_1e4(self):
        n = 6
        scale = np.logspace(0, 4, n)
        f = quadratic(np.arange(1.0, n + 1.0), scale=scale)
        res = minimize(f, np.zeros(n), OptimizerConfig(grad_tol=1e-8, max_iters=200))
        assert res.converged
        assert res.iterations <= 200
        assert res.grad_norm < 1e-8

    def test_already_optimal_returns_immediately(self):
        f = quadratic([2.0, 2.0])
        res = minimize(f, np.array([2.0, 2.0]))
        assert res.iterations == 0
        assert res.converged
        np.testing.assert_array_equal(res.x, [2.0, 2.0])

    def test_monotone_decrease(self):
        values = []

        def rosenbrock(x):
            a, b = 1.0, 100.0
            f = (a - x[0]) ** 2 + b * (x[1] - x[0] ** 2) ** 2
            g = np.array(
                [
                    -2 * (a - x[0]) - 4 * b * x[0] * (x[1] - x[0] ** 2),
                    2 * b * (x[1] - x[0] ** 2),
                ]
            )
            values.append(f)
            return f, g

        res = minimize(rosenbrock, np.array([-1.2, 1.0]), OptimizerConfig(grad_tol=1e-6))
        assert res.converged
        np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-5)
        assert res.fun <= values[0]

    def test_objective_never_worse_than_start(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            n = rng.integers(2, 6)
            A = rng.standard_normal((n, n))
            H = A @ A.T + np.eye(n)
            b = rng.standard_normal(n)

            def f(x, H=H, b=b):
                return 0.5 * float(x @ H @ x) - float(b @ x), H @ x - b

            x0 = rng.standard_normal(n)
            res = minimize(f, x0)
            assert res.converged
            assert res.fun <= f(x0)[0]
            np.testing.assert_allclose(res.x, np.linalg.solve(H, b), atol=1e-6)

    def test_permutation_equivariance(self):
        scale = np.array([1.0, 7.0, 30.0])
        target = np.array([2.0, -3.0, 0.5])
        res = minimize(quadratic(target, scale), np.zeros(3))
        perm = [2, 0, 1]
        res_p = minimize(quadratic(target[perm], scale[perm]), np.zeros(3))
        np.testing.assert_allclose(res_p.x, res.x[perm], atol=1e-10)

    def test_nonfinite_start_raises(self):
        def f(x):
            return np.inf, x

        with pytest.raises(NumericalError):
            minimize(f, np.zeros(2))

    def test_max_iters_reported_not_raised(self):
        f = quadratic([1.0, 1.0], scale=[1.0, 1000.0])
        res = minimize(f, np.zeros(2), OptimizerConfig(max_iters=1, grad_tol=1e-14))
        assert not res.converged
        assert res.iterations == 1

    def test_config_validation(self):
        with pytest.raises(ValueError):
            OptimizerConfig(c1=0.5, c2=0.1)
        with pytest.raises(ValueError):
            OptimizerConfig(memory=0)
