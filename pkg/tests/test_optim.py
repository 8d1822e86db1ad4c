import numpy as np

from prefbo.optim import maximize_with_restarts, nelder_mead_batch
from prefbo.stats import BoxDomain, RandomSource


def sphere(X, _sim=None):
    return np.sum((X - 0.3) ** 2, axis=1)


def rosenbrock(X, _sim=None):
    return 100.0 * (X[:, 1] - X[:, 0] ** 2) ** 2 + (1.0 - X[:, 0]) ** 2


class TestNelderMeadBatch:
    def test_minimizes_sphere_from_several_starts(self):
        x0 = np.array([[0.0, 0.0], [1.0, -1.0], [-2.0, 2.0]])
        xs, fs = nelder_mead_batch(sphere, x0, step=0.5, max_evals=400)
        assert fs.min() < 1e-10
        assert np.allclose(xs[np.argmin(fs)], [0.3, 0.3], atol=1e-4)

    def test_rosenbrock_progress(self):
        x0 = np.array([[-1.2, 1.0]])
        xs, fs = nelder_mead_batch(rosenbrock, x0, step=0.5, max_evals=800)
        assert fs[0] < 1e-4

    def test_respects_bounds(self):
        lo, hi = np.array([0.0, 0.0]), np.array([1.0, 1.0])
        seen = []

        def f(X, _sim):
            seen.append(X.copy())
            return np.sum((X + 1.0) ** 2, axis=1)  # pulls toward -1 outside the box

        xs, fs = nelder_mead_batch(f, np.array([[0.5, 0.5]]), step=0.2,
                                   bounds=(lo, hi), max_evals=200)
        allpts = np.vstack(seen)
        assert np.all(allpts >= lo - 1e-12) and np.all(allpts <= hi + 1e-12)
        assert np.allclose(xs[0], [0.0, 0.0], atol=1e-6)

    def test_eval_budget_respected(self):
        counts = {"n": 0}

        def f(X, _sim):
            counts["n"] += X.shape[0]
            return sphere(X)

        nelder_mead_batch(f, np.zeros((1, 3)), step=0.1, max_evals=50)
        assert counts["n"] <= 50

    def test_deterministic(self):
        x0 = np.array([[1.0, 2.0], [0.5, -0.5]])
        a = nelder_mead_batch(sphere, x0, step=0.3, max_evals=150)
        b = nelder_mead_batch(sphere, x0, step=0.3, max_evals=150)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_matches_scipy_quality(self):
        from scipy.optimize import minimize

        x0 = np.array([[2.0, -1.5]])
        ours, f_ours = nelder_mead_batch(sphere, x0, step=0.5, max_evals=300)
        ref = minimize(lambda x: sphere(x[None, :])[0], x0[0], method="Nelder-Mead",
                       options={"maxfev": 300})
        assert f_ours[0] <= ref.fun * 10 + 1e-12


class TestMaximizeWithRestarts:
    def test_finds_global_peak_of_multimodal(self):
        dom = BoxDomain([0.0], [10.0])

        def f(X):
            x = X[:, 0]
            return np.sin(x) + 0.6 * np.sin(3.1 * x) + 0.05 * x

        x, v = maximize_with_restarts(f, dom, RandomSource(0))
        grid = np.linspace(0, 10, 100_001)[:, None]
        assert v >= f(grid).max() - 1e-6

    def test_deterministic(self):
        dom = BoxDomain([-1.0, -1.0], [1.0, 1.0])
        f = lambda X: -np.sum(X**2, axis=1)
        a = maximize_with_restarts(f, dom, RandomSource(5))
        b = maximize_with_restarts(f, dom, RandomSource(5))
        assert np.array_equal(a[0], b[0]) and a[1] == b[1]

    def test_result_beats_every_raw_start(self):
        dom = BoxDomain([-2.0], [2.0])
        f = lambda X: np.cos(3 * X[:, 0]) - 0.1 * X[:, 0] ** 2
        _, v = maximize_with_restarts(f, dom, RandomSource(3), n_raw=64, n_starts=4)
        from prefbo.stats import sobol_sample

        raw = sobol_sample(64, dom, RandomSource(3).child(0))
        assert v >= f(raw).max() - 1e-12
