import numpy as np
import pytest
from hypothesis import given, strategies as st

from trapforge.errors import NonFiniteObjectiveError, ValidationError
from trapforge.neldermead import nelder_mead


def test_quadratic_4d():
    res = nelder_mead(lambda x: np.sum((x - 3) ** 2), np.zeros(4), scale=1.0, tol=1e-12)
    assert np.all(np.abs(res.x_best - 3) <= 1e-4)
    assert res.converged


def test_rosenbrock():
    f = lambda x: 100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2
    res = nelder_mead(f, [-1.2, 1.0], scale=0.1, tol=1e-14, max_evals=5000)
    assert res.f_best < 1e-6
    assert res.nfev <= 5000


def test_box_projection():
    res = nelder_mead(lambda x: np.sum((x - 3) ** 2), np.zeros(2), scale=0.5, bounds=(-1, 1), tol=1e-12)
    assert np.allclose(res.x_best, 1.0)


def test_points_never_leave_box():
    seen = []

    def f(x):
        seen.append(x.copy())
        return float(np.sum((x + 5) ** 2))

    nelder_mead(f, np.full(3, 0.9), scale=0.5, bounds=(-1, 1), max_evals=300)
    assert np.all(np.abs(np.array(seen)) <= 1)


def test_non_finite_reports_point():
    with pytest.raises(NonFiniteObjectiveError) as exc:
        nelder_mead(lambda x: np.nan if x[0] > 0.5 else x[0] ** 2, [0.0], scale=1.0)
    assert exc.value.point[0] > 0.5


def test_budget_respected():
    calls = []
    res = nelder_mead(lambda x: calls.append(1) or float(np.sum(np.cos(3 * x) + x ** 2)),
                      np.ones(6), scale=0.3, tol=1e-300, max_evals=57)
    assert len(calls) == res.nfev <= 57
    assert not res.converged


def test_argument_validation():
    with pytest.raises(ValidationError):
        nelder_mead(lambda x: 0.0, np.zeros(3), max_evals=3)
    with pytest.raises(ValidationError):
        nelder_mead(lambda x: 0.0, np.zeros(1), tol=0)


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=6), st.floats(0.1, 3))
def test_trace_non_increasing_and_deterministic(center, scale):
    c = np.array(center)
    f = lambda x: float(np.sum((x - c) ** 2 * np.arange(1, c.size + 1)) + np.sin(x).sum())
    a = nelder_mead(f, np.zeros(c.size), scale=scale, max_evals=400)
    b = nelder_mead(f, np.zeros(c.size), scale=scale, max_evals=400)
    assert np.all(np.diff(a.trace) <= 0)
    assert a.trace == b.trace and np.array_equal(a.x_best, b.x_best)
    assert a.f_best == min(a.trace)
