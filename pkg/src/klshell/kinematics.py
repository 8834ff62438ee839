"""Reference and equidistant strain rates of a Kirchhoff-Love shell.

The generalized strain vector is ``e = [d11, d22, 2 d12, k11, k22, 2 k12]``
and the conjugate force vector ``f = [N11, N22, N12, M11, M22, M12]``.  The
per-component derivative vector is ``w_m = [v_m,1 v_m,2 v_m,11 v_m,22 v_m,12]``.
"""

from __future__ import annotations

import numpy as np

from .metric import MidsurfaceMetric, ShiftState, shift_state

_PAIRS = ((0, 0), (1, 1), (0, 1))


def derivative_stack(dR: np.ndarray, d2R: np.ndarray) -> np.ndarray:
    """``Phi`` of shape (..., 5, ns): rows ``,1 ,2 ,11 ,22 ,12``."""
    return np.concatenate([dR, d2R], axis=-2)


def h_matrix(metric: MidsurfaceMetric) -> np.ndarray:
    """Strain-from-derivative map, shape (..., 3, 6, 5) indexed ``[m, row, slot]``."""
    g1, g2 = metric.base[..., 0], metric.base[..., 1]
    n = metric.normal
    ch = metric.christoffel  # (..., 2, 3)
    shape = n.shape[:-1]
    h = np.zeros(shape + (3, 6, 5), dtype=n.dtype)
    h[..., 0, 0] = g1
    h[..., 1, 1] = g2
    h[..., 2, 0] = g2
    h[..., 2, 1] = g1
    for row, k, fac in ((3, 0, 1.0), (4, 1, 1.0), (5, 2, 2.0)):
        h[..., row, 0] = -fac * ch[..., 0, k, None] * n
        h[..., row, 1] = -fac * ch[..., 1, k, None] * n
        h[..., row, 2 + k] = fac * n
    return h


def strain_operator(metric: MidsurfaceMetric, dR: np.ndarray, d2R: np.ndarray) -> np.ndarray:
    """``B_L`` of shape (..., 6, 3 ns) with columns ordered ``3 a + m``."""
    h = h_matrix(metric)
    phi = derivative_stack(dR, d2R)
    bl = np.einsum("...mrs,...sa->...ram", h, phi)
    return bl.reshape(bl.shape[:-2] + (-1,))


def b_matrix(dR: np.ndarray, d2R: np.ndarray) -> np.ndarray:
    """``B`` of shape (..., 15, 3 ns): ``w = B q`` with rows ``5 m + slot``."""
    phi = derivative_stack(dR, d2R)
    ns = phi.shape[-1]
    out = np.zeros(phi.shape[:-2] + (3, 5, ns, 3))
    for m in range(3):
        out[..., m, :, :, m] = phi
    return out.reshape(phi.shape[:-2] + (15, 3 * ns))


def reference_strain_rate(metric, dR, d2R, q_dot) -> np.ndarray:
    """``e = B_L q_dot`` for element-local velocities ``q_dot`` (..., 3 ns)."""
    return np.einsum("...ij,...j->...i", strain_operator(metric, dR, d2R), q_dot)


def curvature_change_rate(metric, dR, d2R, q_dot) -> np.ndarray:
    """``[k11, k22, 2 k12]``."""
    return reference_strain_rate(metric, dR, d2R, q_dot)[..., 3:]


def metric_difference(old: MidsurfaceMetric, new: MidsurfaceMetric) -> np.ndarray:
    """Finite strain increment ``[dg11/2, dg22/2, dg12, db11, db22, 2 db12]``.

    Its linearization at ``old`` is ``B_L dq``; unlike ``B_L dq`` it vanishes
    exactly for any rigid motion.
    """
    dg = new.metric_voigt - old.metric_voigt
    db = new.curv_voigt - old.curv_voigt
    return np.concatenate([0.5 * dg[..., :2], dg[..., 2:], db[..., :2], 2.0 * db[..., 2:]], axis=-1)


def geometric_matrix(metric: MidsurfaceMetric, f: np.ndarray) -> np.ndarray:
    """Resultant-force matrix ``G`` (..., 15, 15) with ``w(v).G.w(u) = f . e''[v, u]``."""
    n = metric.normal
    rec = metric.recip  # (..., 3, 2)
    ginv = metric.metric_inv
    ch = metric.christoffel
    shape = n.shape[:-1]
    N = np.stack([np.stack([f[..., 0], f[..., 2]], -1), np.stack([f[..., 2], f[..., 1]], -1)], -2)
    m_slot = np.stack([f[..., 3], f[..., 4], 2.0 * f[..., 5]], -1)
    gamma_m = np.einsum("...ks,...s->...k", ch, m_slot)  # Gamma^mu_M
    mb = np.einsum("...s,...s->...", m_slot, metric.curv_voigt)
    eye = np.eye(3)

    g = np.zeros(shape + (3, 5, 3, 5), dtype=np.result_type(n, f))
    # membrane: delta_mn N^ab
    g[..., :, :2, :, :2] += np.einsum("mn,...ab->...manb", eye, N)
    # christoffel coupling of tangential and normal derivatives
    t = np.einsum("...u,...m,...nv->...mvnu", gamma_m, n, rec)
    g[..., :, :2, :, :2] += t + np.swapaxes(np.swapaxes(t, -4, -2), -3, -1)
    # normal-normal curvature term
    g[..., :, :2, :, :2] -= mb[..., None, None, None, None] * np.einsum("...vl,...m,...n->...mvnl", ginv, n, n)
    # second derivatives against slopes
    a = np.einsum("...s,...mv,...n->...msnv", m_slot, rec, n)
    g[..., :, 2:, :, :2] -= a
    g[..., :, :2, :, 2:] -= np.swapaxes(np.swapaxes(a, -4, -2), -3, -1)
    return g.reshape(shape + (15, 15))


# -- equidistant strain --------------------------------------------------------

def _tensor(e3):
    """Voigt ``[x11, x22, 2 x12]`` -> symmetric 2x2 tensor."""
    return np.stack([
        np.stack([e3[..., 0], 0.5 * e3[..., 2]], -1),
        np.stack([0.5 * e3[..., 2], e3[..., 1]], -1),
    ], -2)


def transfer_tensors(metric: MidsurfaceMetric, zeta: float, shift: ShiftState | None = None):
    """``A[mu, nu, a, b]`` and ``B[mu, nu, a, b]`` with ``d_ab = A d_mn - zeta B k_mn``."""
    if shift is None:
        shift = shift_state(metric, zeta)
    b = metric.curv_mixed
    cbar = shift.shifter
    eye = np.eye(2)
    a_t = np.einsum("ma,nb->mnab", eye, eye) - zeta**2 * np.einsum("...ma,...nb->...mnab", b, b)
    b_t = 0.5 * (np.einsum("na,...mb->...mnab", eye, cbar) + np.einsum("mb,...na->...mnab", eye, cbar))
    return a_t, b_t


def equidistant_strain(e: np.ndarray, metric: MidsurfaceMetric, zeta: float, mode: str = "exact") -> np.ndarray:
    """Covariant strain (..., 2, 2) on the surface at distance ``zeta``.

    ``mode="exact"`` keeps the full shifter; ``mode="linear"`` uses
    ``d - zeta k``.
    """
    d = _tensor(e[..., :3])
    k = _tensor(e[..., 3:])
    if mode == "linear":
        return d - zeta * k
    if mode != "exact":
        raise ValueError(f"unknown strain mode {mode!r}")
    a_t, b_t = transfer_tensors(metric, zeta)
    return np.einsum("...mnab,...mn->...ab", a_t, d) - zeta * np.einsum("...mnab,...mn->...ab", b_t, k)


def physical_components(t: np.ndarray, metric_cov: np.ndarray) -> np.ndarray:
    """Physical components ``t_ab / sqrt(g_aa g_bb)`` of a covariant tensor."""
    diag = np.sqrt(np.stack([metric_cov[..., 0, 0], metric_cov[..., 1, 1]], -1))
    return t / (diag[..., :, None] * diag[..., None, :])


def physical_strain(d: np.ndarray, metric_cov: np.ndarray) -> np.ndarray:
    return physical_components(d, metric_cov)


def voigt(t: np.ndarray, shear_factor: float = 1.0) -> np.ndarray:
    return np.stack([t[..., 0, 0], t[..., 1, 1], shear_factor * t[..., 0, 1]], -1)
