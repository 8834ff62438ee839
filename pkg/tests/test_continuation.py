import math

import numpy as np
import pytest
import scipy.sparse as sp

from klshell.continuation import (
    VARIANTS, ArcLengthSolver, ContinuationSettings, Problem, adapt_arc_length, linear_analysis,
    newton_raphson, trace,
)


class Cubic(Problem):
    """One degree of freedom with equilibrium ``lam = c (q - q^3)``; limit at q = 1/sqrt(3)."""

    def __init__(self, c=1.0):
        self.c = c

    def initial_state(self):
        return np.zeros(1)

    def tangent(self, s):
        return sp.csc_matrix([[self.c * (1 - 3 * s[0] ** 2)]])

    def internal(self, s):
        return self.c * (s - s ** 3)

    def load(self):
        return np.ones(1)

    def update(self, s, dq):
        return s + dq

    def displacement(self, s):
        return s

    def monitors(self, s):
        return {"q": float(s[0])}


class Linear(Problem):
    def __init__(self, k):
        self.k = np.asarray(k, dtype=float)

    def initial_state(self):
        return np.zeros(self.k.shape[0])

    def tangent(self, s):
        return sp.csc_matrix(self.k)

    def internal(self, s):
        return self.k @ s

    def load(self):
        return np.ones(self.k.shape[0])

    def update(self, s, dq):
        return s + dq

    def displacement(self, s):
        return s

    def monitors(self, s):
        return {"q0": float(s[0])}


def past_limit(variant, c=1.0, scale=True):
    settings = ContinuationSettings(variant=variant, target_lpf=None, max_increments=60, scale=scale,
                                    stop=lambda m, lam: m["q"] > 1.2)
    return ArcLengthSolver(Cubic(c), settings).run()


@pytest.mark.parametrize("variant", VARIANTS)
def test_arc_length_follows_cubic_through_limit_point(variant):
    res = past_limit(variant)
    q, lam = res.monitor("q"), res.lpf
    assert res.status == "stopped"
    np.testing.assert_allclose(lam, q - q ** 3, atol=1e-9)
    assert lam.max() <= 2 / (3 * math.sqrt(3)) + 1e-12
    assert np.all(np.diff(q) > 0)
    # load factor rises then falls
    assert lam[-1] < lam.max() and q[-1] > 1 / math.sqrt(3)
    # one negative pivot beyond the limit point
    inertia = np.array([p.inertia for p in res.points])
    np.testing.assert_array_equal(inertia, (q > 1 / math.sqrt(3)).astype(int))


def _cubic_path(c, scale):
    settings = ContinuationSettings(target_lpf=None, max_increments=200, scale=scale, initial_lpf_step=0.05 * c,
                                    stop=lambda m, lam: m["q"] > 1.2)
    solver = ArcLengthSolver(Cubic(c), settings)
    return solver, solver.run()


def test_scaled_path_is_invariant_to_stiffness():
    s1, a = _cubic_path(1.0, True)
    s50, b = _cubic_path(50.0, True)
    assert a.status == b.status == "stopped"
    assert s50.scale == pytest.approx(1 / 50)
    np.testing.assert_allclose(b.monitor("q"), a.monitor("q"), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(b.lpf, 50 * a.lpf, rtol=1e-10, atol=1e-10)
    # without scaling the same problem is traced identically only when stiffness is unity
    _, c = _cubic_path(1.0, False)
    np.testing.assert_allclose(c.monitor("q"), a.monitor("q"), rtol=1e-12)


def test_predictor_of_unit_problem():
    solver = ArcLengthSolver(Cubic(), ContinuationSettings(scale=False))
    dlam, dq = solver.predictor(np.ones(1), 0.1, None, None)
    assert dlam == pytest.approx(0.1 / math.sqrt(2))
    assert dq[0] == pytest.approx(0.1 / math.sqrt(2))
    dlam, _ = solver.predictor(np.ones(1), 0.1, -np.ones(1), -0.1)
    assert dlam < 0


def test_adapt_arc_length():
    assert adapt_arc_length(1.0, 4, 4) == 1.0
    assert adapt_arc_length(1.0, 1, 4) == pytest.approx(2.0)
    assert adapt_arc_length(1.0, 16, 4) == pytest.approx(0.5)
    assert adapt_arc_length(1.0, 1, 100, dl_max=3.0) == 3.0
    with pytest.raises(ValueError):
        adapt_arc_length(1.0, 0, 4)


def test_target_lpf_is_hit_exactly():
    res = ArcLengthSolver(Cubic(), ContinuationSettings(target_lpf=0.3)).run()
    assert res.status == "complete"
    assert res.points[-1].lpf == 0.3
    q = res.points[-1].monitors["q"]
    assert q - q ** 3 == pytest.approx(0.3, abs=1e-9)


def test_newton_on_linear_problem_converges_in_one_iteration():
    k = np.array([[4.0, 1.0], [1.0, 3.0]])
    res = newton_raphson(Linear(k), 1.0, steps=2)
    # the displacement criterion needs a second, vanishing correction
    assert [p.iterations for p in res.points[1:]] == [2, 2]
    np.testing.assert_allclose(res.final_state, np.linalg.solve(k, np.ones(2)), rtol=1e-12)


def test_newton_hardening_problem():
    res = newton_raphson(Cubic(-1.0), -2.0, steps=4)
    q = res.final_state[0]
    assert -(q - q ** 3) == pytest.approx(-2.0, abs=1e-8)


class Saturating(Cubic):
    def tangent(self, s):
        return sp.csc_matrix([[1 / np.cosh(s[0]) ** 2]])

    def internal(self, s):
        return np.tanh(s)


def test_newton_reports_failure_without_equilibrium():
    res = newton_raphson(Saturating(), 2.0, steps=4)
    assert res.status == "failed"
    assert res.points[-1].lpf < 1.0


def test_linear_analysis_and_dispatch():
    k = np.diag([2.0, 5.0])
    res = linear_analysis(Linear(k), 3.0)
    np.testing.assert_allclose(res.final_state, [1.5, 0.6])
    assert trace(Linear(k), "linear", ContinuationSettings(target_lpf=3.0)).points[-1].lpf == 3.0
    with pytest.raises(ValueError):
        trace(Linear(k), "bogus")


def test_settings_validation():
    with pytest.raises(ValueError):
        ContinuationSettings(variant="spherical")
    with pytest.raises(ValueError):
        ContinuationSettings(force_tolerance=0)
