import numpy as np
import pytest
import scipy.sparse as sp

from klshell.solver import Factorization, SingularMatrixError, linear_solve


def spd(n, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


@pytest.mark.parametrize("backend", ["qdldl", "splu"])
def test_solution_matches_dense(backend):
    k = spd(30)
    b = np.arange(30.0)
    x, _ = linear_solve(sp.csc_matrix(k), b, backend)
    np.testing.assert_allclose(x, np.linalg.solve(k, b), rtol=1e-10)


def test_inertia_counts_negative_eigenvalues():
    rng = np.random.default_rng(4)
    qm, _ = np.linalg.qr(rng.standard_normal((12, 12)))
    eig = np.array([3.0, -1.0, 2.0, -0.5, 1.0, 4.0, -2.0, 1.5, 2.5, 0.7, 0.9, 1.1])
    k = qm @ np.diag(eig) @ qm.T
    fac = Factorization(sp.csc_matrix(k))
    assert fac.inertia == 3
    b = rng.standard_normal(12)
    np.testing.assert_allclose(fac.solve(b), np.linalg.solve(k, b), rtol=1e-9)


def test_lu_fallback_has_no_inertia():
    assert Factorization(sp.csc_matrix(spd(5)), "splu").inertia is None


def test_singular_matrix_raises():
    k = sp.csc_matrix(np.diag([1.0, 0.0, 2.0]))
    with pytest.raises(SingularMatrixError):
        Factorization(k).solve(np.ones(3))


def test_bad_backend():
    with pytest.raises(ValueError):
        Factorization(sp.eye(2), "magic")
