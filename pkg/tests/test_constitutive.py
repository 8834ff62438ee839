import numpy as np
import pytest

from conftest import warped_patch
from oracles import numerical_constitutive, plane_stress
from klshell.constitutive import (
    Material, UnknownModelError, closed_form_integrals, constitutive_matrix, arctangent_integrals,
    quadrature_integrals, thickness_integrals,
)
from klshell.metric import compute_metric
from klshell.nurbs import gauss_points


def random_states(n, seed=0, kh_range=(0.05, 1.5)):
    """Random (T, b, h) with real principal curvatures and g0 > 0 through the thickness."""
    rng = np.random.default_rng(seed)
    out = []
    while sum(len(o[0]) for o in out) < n:
        t = rng.uniform(-3, 3, n) * rng.choice([1.0, 1e-3, 1e3], n)
        kh = rng.uniform(*kh_range, n)
        h = kh / np.abs(t)
        k1 = rng.uniform(-1.9, 1.9, n) / h
        k2 = t - k1
        ok = np.abs(k2) * h / 2 < 0.95
        out.append((t[ok], (k1 * k2)[ok], h[ok]))
    t, b, h = (np.concatenate(x)[:n] for x in zip(*out))
    return t, b, h


@pytest.fixture(scope="module")
def curved_metric():
    s = warped_patch(amplitude=0.4)
    m = gauss_points(s)
    _, x1, x2 = m.geometry(s.coords)
    return compute_metric(x1, x2)


def test_plane_stress_tensor_orthonormal():
    mat = Material(E=2.0, nu=0.25)
    d = constitutive_matrix(compute_metric(np.eye(3)[:, :2], np.zeros((3, 3))), mat, 1.0, "D0")
    c = mat.E / (1 - mat.nu**2)
    expected = c * np.array([[1, mat.nu, 0], [mat.nu, 1, 0], [0, 0, (1 - mat.nu) / 2]])
    assert np.allclose(d[:3, :3], expected)
    assert np.allclose(d[3:, 3:], expected / 12)


def test_closed_form_integrals_vs_quadrature():
    t, b, h = random_states(1000, seed=1)
    cf = closed_form_integrals(t, b, h)
    q = quadrature_integrals(t, b, h, 64)
    assert np.abs(cf / q - 1).max() <= 1e-9


def test_closed_form_covers_all_root_configurations():
    h = 0.2
    cases = [(3.0, 0.0), (3.0, 2.25), (0.4, -4.0), (2.0, 1.0 + 1e-9), (2.0, 1.5), (-5.0, 6.0)]
    for t, b in cases:
        cf = closed_form_integrals(t, b, h)
        q = quadrature_integrals(t, b, h, 128)
        assert np.abs(cf / q - 1).max() <= 1e-11, (t, b)


def test_switch_is_continuous():
    h = 1.0
    for t, b in [(0.05, 0.0), (0.05, 6.25e-4), (-0.05, -1e-3)]:
        assert np.allclose(closed_form_integrals(t, b, h), quadrature_integrals(t, b, h, 16), rtol=1e-7, atol=0)
        below = thickness_integrals(t * (1 - 1e-9), b, h)
        above = thickness_integrals(t * (1 + 1e-9), b, h)
        assert np.allclose(below, above, rtol=1e-7, atol=0)


def test_arctangent_formulas_in_their_regime():
    rng = np.random.default_rng(2)
    t = rng.uniform(0.5, 2, 200)
    b = t**2 / 4 * rng.uniform(1.5, 3, 200)
    h = rng.uniform(0.2, 1.0, 200) / t
    ref = quadrature_integrals(t, b, h, 128)
    pub = arctangent_integrals(t, b, h)
    assert np.abs(pub / ref - 1).max() <= 1e-5


def test_analytic_matrix_matches_numerical_integration(curved_metric):
    mat = Material(3.0, 0.3)
    h = 0.08
    assert (np.abs(curved_metric.trace) * h).max() > 1.0
    da = constitutive_matrix(curved_metric, mat, h, "Da")
    ref = numerical_constitutive(curved_metric, mat, h)
    scale = np.abs(ref).max(axis=(0, 1))
    assert np.abs(da - ref).max(axis=(0, 1)).max() <= 1e-8 * scale.max()
    for blk in (np.s_[..., :3, :3], np.s_[..., :3, 3:], np.s_[..., 3:, 3:]):
        assert np.abs((da - ref)[blk]).max() <= 1e-8 * np.abs(ref[blk]).max()


@pytest.mark.parametrize("model", ["Da", "D0", "D1", "D2"])
def test_constitutive_matrix_symmetric(curved_metric, model):
    d = constitutive_matrix(curved_metric, Material(1.0, 0.3), 0.05, model)
    assert np.allclose(d, np.swapaxes(d, -1, -2), rtol=0, atol=1e-14 * np.abs(d).max())


def test_reduced_models_approach_analytic_when_thin(curved_metric):
    mat = Material(1.0, 0.3)
    h = 1e-3
    da = constitutive_matrix(curved_metric, mat, h, "Da")
    for model in ("D0", "D1", "D2"):
        d = constitutive_matrix(curved_metric, mat, h, model)
        assert np.abs(d - da)[..., :3, :3].max() <= 1e-4 * np.abs(da[..., :3, :3]).max()


def test_d2_is_first_order_accurate_in_coupling(curved_metric):
    mat = Material(1.0, 0.3)
    errs = {}
    for h in (0.01, 0.005):
        da = constitutive_matrix(curved_metric, mat, h, "Da")[..., :3, 3:]
        d2 = constitutive_matrix(curved_metric, mat, h, "D2")[..., :3, 3:]
        d1 = constitutive_matrix(curved_metric, mat, h, "D1")[..., :3, 3:]
        errs[h] = (np.abs(d2 - da).max() / np.abs(da).max(), np.abs(d1 - da).max() / np.abs(da).max())
    # D2 error shrinks with h (second order), D1 misses a first-order term
    assert errs[0.005][0] < 0.3 * errs[0.01][0]
    assert errs[0.005][1] > 0.8 * errs[0.01][1]


def test_unknown_model(curved_metric):
    with pytest.raises(UnknownModelError):
        constitutive_matrix(curved_metric, Material(1.0, 0.3), 0.1, "D3")


def test_material_validation():
    with pytest.raises(ValueError):
        Material(-1.0, 0.3)
    with pytest.raises(ValueError):
        Material(1.0, 0.5)


def test_oracle_plane_stress_matches(curved_metric):
    from klshell.constitutive import plane_stress_tensor
    mat = Material(2.0, 0.2)
    assert np.allclose(plane_stress_tensor(curved_metric.metric_inv, mat), plane_stress(curved_metric.metric_inv, mat))
