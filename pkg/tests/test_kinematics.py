import numpy as np
import pytest

from conftest import warped_patch
from klshell.kinematics import (
    b_matrix, equidistant_strain, geometric_matrix, metric_difference, physical_strain,
    strain_operator, transfer_tensors,
)
from klshell.metric import compute_metric, shift_state
from klshell.nurbs import gauss_points

STEP = 1e-30


def _metric_at(mesh, coords):
    _, x1, x2 = mesh.geometry(coords)
    return compute_metric(x1, x2)


def _complex_step_strain(mesh, coords, dq):
    """Exact directional derivative of [g/2, b] via complex step."""
    met = _metric_at(mesh, coords + 1j * STEP * dq)
    g, b = met.metric_voigt, met.curv_voigt
    return np.concatenate([0.5 * g[..., :2], g[..., 2:], b[..., :2], 2 * b[..., 2:]], -1).imag / STEP


def _local(mesh, q):
    return q.reshape(-1, 3)[mesh.conn].reshape(mesh.n_elements, 1, -1)


def test_strain_operator_matches_metric_derivative(patch):
    mesh = gauss_points(patch)
    rng = np.random.default_rng(1)
    coords = patch.coords + 0.05 * rng.standard_normal(patch.coords.shape)
    met = _metric_at(mesh, coords)
    bl = strain_operator(met, mesh.dR, mesh.d2R)
    dq = rng.standard_normal(coords.size)
    e = np.einsum("epij,epj->epi", bl, np.broadcast_to(_local(mesh, dq), bl.shape[:2] + (bl.shape[-1],)))
    ref = _complex_step_strain(mesh, coords, dq.reshape(-1, 3))
    assert np.abs(e - ref).max() <= 1e-10 * np.abs(ref).max()


@pytest.mark.parametrize("seed", [0, 1])
def test_geometric_matrix_is_the_second_variation(seed):
    surf = warped_patch(seed=seed)
    mesh = gauss_points(surf)
    rng = np.random.default_rng(seed + 10)
    coords = surf.coords + 0.05 * rng.standard_normal(surf.coords.shape)
    f = rng.standard_normal((mesh.n_elements, mesh.n_points, 6))
    v = rng.standard_normal(coords.size)
    u = rng.standard_normal(coords.size)
    met = _metric_at(mesh, coords)
    big_b = b_matrix(mesh.dR, mesh.d2R)
    g = geometric_matrix(met, f)
    wv = np.einsum("epij,ej->epi", big_b, _local(mesh, v)[:, 0])
    wu = np.einsum("epij,ej->epi", big_b, _local(mesh, u)[:, 0])
    quad = np.einsum("epi,epij,epj->ep", wv, g, wu)
    # d/dt of f . B_L(x + t u) v, exact through the complex step
    met_c = _metric_at(mesh, coords + 1j * STEP * u.reshape(-1, 3))
    bl_c = strain_operator(met_c, mesh.dR, mesh.d2R)
    ref = (np.einsum("epi,epij,ej->ep", f, bl_c, _local(mesh, v)[:, 0])).imag / STEP
    assert np.abs(quad - ref).max() <= 1e-10 * np.abs(ref).max()
    assert np.abs(g - np.swapaxes(g, -1, -2)).max() == 0.0 or np.allclose(g, np.swapaxes(g, -1, -2), atol=1e-13)


def test_rigid_motion_gives_zero_strain(patch):
    mesh = gauss_points(patch)
    met = _metric_at(mesh, patch.coords)
    bl = strain_operator(met, mesh.dR, mesh.d2R)
    omega = np.array([0.3, -1.1, 0.7])
    x = patch.coords
    for vel in (np.tile([1.0, -2.0, 0.5], (x.shape[0], 1)), np.cross(omega, x)):
        e = np.einsum("epij,ej->epi", bl, _local(mesh, vel)[:, 0])
        assert np.abs(e).max() <= 1e-10


def test_metric_difference_vanishes_for_finite_rotation(patch):
    mesh = gauss_points(patch)
    c, s = np.cos(0.9), np.sin(0.9)
    rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]]) @ np.array([[1, 0, 0], [0, c, s], [0, -s, c]])
    old = _metric_at(mesh, patch.coords)
    new = _metric_at(mesh, patch.coords @ rot.T + [3.0, -1.0, 2.0])
    assert np.abs(metric_difference(old, new)).max() <= 1e-12


def _equidistant_metric_rate(mesh, coords, dq, zeta):
    """Brute-force 3D strain rate at distance zeta: half the rate of g_ab(zeta)."""
    def gbar(x):
        _, x1, x2 = mesh.geometry(x)
        # normal derivatives straight from the cross product, d(a3/|a3|)
        g1, g2 = x1[..., 0], x1[..., 1]
        g11, g22, g12 = x2[..., 0], x2[..., 1], x2[..., 2]
        a3 = np.cross(g1, g2)
        norm = np.sqrt(np.sum(a3 * a3, -1))[..., None]
        n = a3 / norm
        cols = []
        for da3 in (np.cross(g11, g2) + np.cross(g1, g12), np.cross(g12, g2) + np.cross(g1, g22)):
            cols.append((da3 - n * np.sum(n * da3, -1)[..., None]) / norm)
        gb = x1 + zeta * np.stack(cols, -1)
        return np.einsum("...ia,...ib->...ab", gb, gb)
    return 0.5 * gbar(coords + 1j * STEP * dq).imag / STEP


@pytest.mark.parametrize("zeta", [0.0, 0.04, -0.09])
def test_equidistant_strain_matches_3d_oracle(patch, zeta):
    mesh = gauss_points(patch)
    rng = np.random.default_rng(4)
    dq = rng.standard_normal(patch.coords.shape)
    met = _metric_at(mesh, patch.coords)
    bl = strain_operator(met, mesh.dR, mesh.d2R)
    e = np.einsum("epij,ej->epi", bl, _local(mesh, dq.ravel())[:, 0])
    d_bar = equidistant_strain(e, met, zeta, "exact")
    ref = _equidistant_metric_rate(mesh, patch.coords, dq, zeta)
    assert np.abs(d_bar - ref).max() <= 1e-10 * np.abs(ref).max()


def test_linear_mode_drops_quadratic_terms(patch):
    mesh = gauss_points(patch)
    met = _metric_at(mesh, patch.coords)
    e = np.random.default_rng(2).standard_normal(met.trace.shape + (6,))
    assert np.allclose(equidistant_strain(e, met, 0.0, "exact"), equidistant_strain(e, met, 0.0, "linear"))
    diff = [np.abs(equidistant_strain(e, met, z, "exact") - equidistant_strain(e, met, z, "linear")).max()
            for z in (1e-3, 2e-3)]
    assert diff[1] / diff[0] == pytest.approx(4.0, rel=1e-3)


def test_expanded_form_of_equidistant_strain(patch):
    mesh = gauss_points(patch)
    met = _metric_at(mesh, patch.coords)
    e = np.random.default_rng(3).standard_normal(met.trace.shape + (6,))
    zeta = 0.07
    d = np.stack([np.stack([e[..., 0], e[..., 2] / 2], -1), np.stack([e[..., 2] / 2, e[..., 1]], -1)], -2)
    k = np.stack([np.stack([e[..., 3], e[..., 5] / 2], -1), np.stack([e[..., 5] / 2, e[..., 4]], -1)], -2)
    cb = shift_state(met, zeta).shifter
    p = np.eye(2) + zeta * met.curv_mixed
    left = np.einsum("...ma,...nb,...mn->...ab", cb, p, d) - zeta * np.einsum("...ma,...mb->...ab", cb, k)
    expanded = 0.5 * (left + np.swapaxes(left, -1, -2))
    assert np.allclose(equidistant_strain(e, met, zeta), expanded, rtol=0, atol=1e-13)


def test_transfer_tensors_reduce_at_midsurface(patch):
    mesh = gauss_points(patch)
    met = _metric_at(mesh, patch.coords)
    a_t, b_t = transfer_tensors(met, 0.0)
    ident = np.einsum("ma,nb->mnab", np.eye(2), np.eye(2))
    assert np.allclose(a_t, ident)
    assert np.allclose(b_t, np.einsum("na,mb->mnab", np.eye(2), np.eye(2)))


def test_physical_strain_on_stretched_metric():
    g = np.array([[4.0, 1.0], [1.0, 9.0]])
    d = np.array([[2.0, 3.0], [3.0, 18.0]])
    assert np.allclose(physical_strain(d, g), [[0.5, 0.5], [0.5, 2.0]])
