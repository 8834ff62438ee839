"""Mid-surface metric, curvature and through-thickness shift tensors.

Every function broadcasts over leading batch dimensions.  Mixed tensors are
stored with the upper index first, e.g. ``curv_mixed[..., mu, a]`` is
``b^mu_a``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateSurfaceError(ValueError):
    pass


class SelfPenetrationError(ValueError):
    def __init__(self, curviness, zeta):
        self.curviness = curviness
        self.zeta = zeta
        super().__init__(f"shift determinant g0 <= 0 at zeta={zeta:g} (Kh={curviness:g})")


@dataclass
class MidsurfaceMetric:
    base: np.ndarray  # (..., 3, 2) covariant base vectors g_1, g_2 as columns
    normal: np.ndarray  # (..., 3) unit normal g_3
    metric: np.ndarray  # (..., 2, 2) g_ab
    metric_inv: np.ndarray  # (..., 2, 2) g^ab
    sqrt_det: np.ndarray  # (...) sqrt(det g_ab)
    recip: np.ndarray  # (..., 3, 2) contravariant base g^1, g^2 as columns
    christoffel: np.ndarray  # (..., 2, 3) Gamma^n_ab for n = 1, 2, columns ab = 11, 22, 12
    curv: np.ndarray  # (..., 2, 2) b_ab
    curv_mixed: np.ndarray  # (..., 2, 2) b^mu_a

    @property
    def trace(self) -> np.ndarray:
        b = self.curv_mixed
        return b[..., 0, 0] + b[..., 1, 1]

    @property
    def curv_det(self) -> np.ndarray:
        b = self.curv_mixed
        return b[..., 0, 0] * b[..., 1, 1] - b[..., 0, 1] * b[..., 1, 0]

    @property
    def curv_voigt(self) -> np.ndarray:
        """``[b11, b22, b12]``."""
        b = self.curv
        return np.stack([b[..., 0, 0], b[..., 1, 1], b[..., 0, 1]], axis=-1)

    @property
    def metric_voigt(self) -> np.ndarray:
        g = self.metric
        return np.stack([g[..., 0, 0], g[..., 1, 1], g[..., 0, 1]], axis=-1)


def compute_metric(x1, x2, tol: float = 1e-14) -> MidsurfaceMetric:
    """Metric quantities from first (..., 3, 2) and second (..., 3, 3) derivatives.

    The second derivative columns are ordered ``,11 ,22 ,12``.
    """
    x1 = np.asarray(x1)
    x2 = np.asarray(x2)
    g1, g2 = x1[..., 0], x1[..., 1]
    cross = np.cross(g1, g2)
    # written without abs() so that complex-step differentiation goes through
    area = np.sqrt(np.einsum("...i,...i->...", cross, cross))
    scale = np.maximum(np.einsum("...i,...i->...", g1, g1).real, np.einsum("...i,...i->...", g2, g2).real)
    if np.any(area.real <= tol * scale) or not np.all(np.isfinite(area)):
        raise DegenerateSurfaceError("tangent vectors are (nearly) parallel or vanish")
    n = cross / area[..., None]
    g = np.einsum("...ia,...ib->...ab", x1, x1)
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    ginv = np.stack([
        np.stack([g[..., 1, 1], -g[..., 0, 1]], -1),
        np.stack([-g[..., 1, 0], g[..., 0, 0]], -1),
    ], -2) / det[..., None, None]
    recip = np.einsum("...ib,...ab->...ia", x1, ginv)
    chris = np.einsum("...ia,...ik->...ak", recip, x2)
    bv = np.einsum("...i,...ik->...k", n, x2)
    b = np.stack([np.stack([bv[..., 0], bv[..., 2]], -1), np.stack([bv[..., 2], bv[..., 1]], -1)], -2)
    bmix = np.einsum("...mn,...na->...ma", ginv, b)
    return MidsurfaceMetric(
        base=x1, normal=n, metric=g, metric_inv=ginv, sqrt_det=np.sqrt(det), recip=recip,
        christoffel=chris, curv=b, curv_mixed=bmix,
    )


def curviness(metric: MidsurfaceMetric, h) -> np.ndarray:
    """Dimensionless curviness ``|T| h`` with ``T`` the trace of the mixed curvature."""
    return np.abs(metric.trace) * h


@dataclass
class ShiftState:
    zeta: float
    g0: np.ndarray  # (...)
    shifter: np.ndarray  # (..., 2, 2) C-bar^nu_a = delta - zeta b
    shifter_inv: np.ndarray  # (..., 2, 2) C^a_nu

    def equidistant_metric(self, metric: MidsurfaceMetric) -> np.ndarray:
        c = self.shifter
        return np.einsum("...ma,...mn,...nb->...ab", c, metric.metric, c)

    def equidistant_metric_inv(self, metric: MidsurfaceMetric) -> np.ndarray:
        c = self.shifter_inv
        return np.einsum("...am,...mn,...bn->...ab", c, metric.metric_inv, c)


def shift_state(metric: MidsurfaceMetric, zeta: float, h=None) -> ShiftState:
    """Shift tensor and its inverse at normal distance ``zeta``."""
    t = metric.trace
    bdet = metric.curv_det
    b = metric.curv_mixed
    eye = np.eye(2)
    g0 = 1.0 - zeta * t + zeta**2 * bdet
    if np.any(np.real(g0) <= 0.0):
        k = int(np.argmin(np.ravel(np.real(g0))))
        kh = float(np.ravel(np.abs(t))[k] * (h if h is not None else 2 * abs(zeta)))
        raise SelfPenetrationError(kh, zeta)
    shifter = eye - zeta * b
    inv = ((1.0 - zeta * t)[..., None, None] * eye + zeta * b) / g0[..., None, None]
    return ShiftState(zeta=zeta, g0=g0, shifter=shifter, shifter_inv=inv)
