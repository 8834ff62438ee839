"""Through-thickness integrated constitutive matrices.

Four models relate ``f = [N11, N22, N12, M11, M22, M12]`` to
``e = [d11, d22, 2 d12, k11, k22, 2 k12]``:

* ``"Da"`` full analytic integration of the shifted plane-stress law,
* ``"D0"`` plate model (no shifter),
* ``"D1"`` first-order coupling ``T`` only,
* ``"D2"`` first-order coupling with the curvature tensor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metric import MidsurfaceMetric

MODELS = ("Da", "D0", "D1", "D2")
PAIRS = ((0, 0), (1, 1), (0, 1))
DEFAULT_SWITCH = 0.05


class UnknownModelError(ValueError):
    pass


@dataclass(frozen=True)
class Material:
    E: float
    nu: float

    def __post_init__(self):
        if self.E <= 0.0:
            raise ValueError("Young's modulus must be positive")
        if not -1.0 < self.nu < 0.5:
            raise ValueError("Poisson's ratio must lie in (-1, 0.5)")

    @property
    def mu(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def lam(self) -> float:
        return self.E * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))


def plane_stress_tensor(metric_inv: np.ndarray, material: Material) -> np.ndarray:
    """Contravariant plane-stress tensor ``D[a, b, c, d]`` for a given ``g^ab``."""
    g = metric_inv
    mu = material.mu
    c = 2.0 * mu * material.nu / (1.0 - material.nu)
    return (mu * (np.einsum("...ac,...bd->...abcd", g, g) + np.einsum("...ad,...bc->...abcd", g, g))
            + c * np.einsum("...ab,...cd->...abcd", g, g))


def to_voigt(t: np.ndarray) -> np.ndarray:
    """4-index tensor -> 3x3 block acting on ``[x11, x22, 2 x12]``."""
    out = np.empty(t.shape[:-4] + (3, 3), dtype=t.dtype)
    for i, (a, b) in enumerate(PAIRS):
        for j, (c, d) in enumerate(PAIRS):
            out[..., i, j] = 0.5 * (t[..., a, b, c, d] + t[..., a, b, d, c])
    return out


def assemble_blocks(dm, dmb, db) -> np.ndarray:
    """6x6 matrix from membrane, coupling (membrane row, bending column) and bending blocks."""
    top = np.concatenate([to_voigt(dm), to_voigt(dmb)], axis=-1)
    dbm = np.swapaxes(np.swapaxes(dmb, -4, -2), -3, -1)
    bot = np.concatenate([to_voigt(dbm), to_voigt(db)], axis=-1)
    return np.concatenate([top, bot], axis=-2)


# -- thickness integrals -----------------------------------------------------

def quadrature_integrals(T, bdet, h, n_points: int = 64, n_max: int = 4) -> np.ndarray:
    """``I_n = int zeta^n / g0`` by Gauss-Legendre quadrature; shape (..., n_max+1)."""
    T, bdet, h = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (T, bdet, h)))
    x, w = np.polynomial.legendre.leggauss(n_points)
    z = 0.5 * h[..., None] * x
    g0 = 1.0 - T[..., None] * z + bdet[..., None] * z**2
    wz = 0.5 * h[..., None] * w / g0
    return np.stack([np.sum(wz * z**n, axis=-1) for n in range(n_max + 1)], axis=-1)


def _unit_moments(n_max):
    """``int s^n`` over [-1, 1]."""
    return np.array([2.0 / (n + 1) if n % 2 == 0 else 0.0 for n in range(n_max + 1)])


def _linear_factor_moments(k, n_max):
    """``int s^n / (1 - k s)`` over [-1, 1] for complex ``k``; shape (n_max+1, ...)."""
    small = np.abs(k) < 0.3
    jm = _unit_moments(n_max + 48)
    out = np.empty((n_max + 1,) + k.shape, dtype=complex)
    # Taylor series in k for nearly flat factors
    kk = np.where(small, k, 0.0)
    for n in range(n_max + 1):
        acc = np.zeros(k.shape, dtype=complex)
        for j in range(48):
            acc = acc + kk**j * jm[n + j]
        out[n] = acc
    # logarithmic closed form otherwise, raised by M_{n+1} = (M_n - J_n) / k
    kb = np.where(small, 0.5, k)
    m = 2.0 * np.arctanh(kb) / kb
    for n in range(n_max + 1):
        out[n] = np.where(small, out[n], m)
        m = (m - jm[n]) / kb
    return out


def _near_umbilic(a, c, n_max):
    """Expansion of ``1/((1 - a s)^2 - c s^2)`` in powers of ``c`` over [-1, 1]."""
    r = float(np.max(np.abs(a))) if a.size else 0.0
    n_terms = int(min(4000, np.ceil(np.log(1e-19) / np.log(max(r, 1e-3))) + 60))
    n_c = 7
    jm = _unit_moments(n_max + 2 * n_c + n_terms)
    out = np.zeros((n_max + 1,) + a.shape, dtype=complex)
    for j in range(n_c):
        p = 2 * j + 2
        for n in range(n_max + 1):
            m = n + 2 * j
            coef = 1.0
            acc = np.zeros(a.shape, dtype=complex)
            ai = np.ones(a.shape, dtype=complex)
            for i in range(n_terms):
                acc = acc + coef * ai * jm[m + i]
                ai = ai * a
                coef = coef * (p + i) / (i + 1)
            out[n] = out[n] + c**j * acc
    return out


def closed_form_integrals(T, bdet, h, n_max: int = 4) -> np.ndarray:
    """``I_n = int zeta^n / (1 - T zeta + b zeta^2)`` in closed form, shape (..., n_max+1).

    ``g0`` is factored as ``(1 - k1 zeta)(1 - k2 zeta)`` with ``k1, k2`` the
    principal curvatures (complex conjugate if ``4 b > T^2``).  Each factor
    integrates to a logarithm (an arctangent in the complex case).  Nearly
    equal roots, including the umbilic case ``4 b = T^2``, use an expansion
    around the double root instead of the partial fraction split.  Work is
    done in the unit variable ``s = 2 zeta / h``.
    """
    T, bdet, h = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (T, bdet, h)))
    half = h / 2
    a = T * half / 2
    c = a * a - bdet * half**2
    root = np.sqrt(c.astype(complex))
    k1, k2 = a + root, a - root
    near = np.abs(root) < 0.01
    out = np.empty((n_max + 1,) + T.shape)
    if np.any(~near):
        sel = ~near
        m1 = _linear_factor_moments(k1[sel], n_max)
        m2 = _linear_factor_moments(k2[sel], n_max)
        out[:, sel] = ((k1[sel] * m1 - k2[sel] * m2) / (k1[sel] - k2[sel])).real
    if np.any(near):
        sel = near
        out[:, sel] = _near_umbilic(a[sel].astype(complex), c[sel].astype(complex), n_max).real
    scale = np.array([half ** (n + 1) for n in range(n_max + 1)])
    return np.moveaxis(out * scale, 0, -1)


def thickness_integrals(T, bdet, h, switch: float = DEFAULT_SWITCH, n_points: int = 16) -> np.ndarray:
    """``I_0..I_4``: closed form above the curviness ``switch``, quadrature below."""
    T, bdet, h = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (T, bdet, h)))
    kh = np.abs(T) * h
    out = np.empty(T.shape + (5,))
    hi = kh >= switch
    if np.any(hi):
        out[hi] = closed_form_integrals(T[hi], bdet[hi], h[hi])
    if np.any(~hi):
        out[~hi] = quadrature_integrals(T[~hi], bdet[~hi], h[~hi], n_points)
    return out


def arctangent_integrals(T, bdet, h) -> np.ndarray:
    """Arctangent closed forms (valid for ``4 b > T^2``, ``b != 0``).

    Kept as a reference implementation.  The second moment carries an inverse
    hyperbolic tangent and the fourth moment uses ``6 (2 b T - T^3)`` for the
    coefficient of ``ln r``; both forms agree with high-precision quadrature.
    The ``1/b^k`` prefactors cancel badly as ``b -> 0``, which is why
    :func:`closed_form_integrals` is used in production.
    """
    T, b, h = (np.asarray(x, dtype=float) for x in (T, bdet, h))
    p = np.sqrt(4 * b - T**2)
    m = (b * h - T) / p
    n = (b * h + T) / p
    r = 4 + b * h**2 + 2 * h * T
    s = 4 + b * h**2 - 2 * h * T
    at = np.arctan(m) + np.arctan(n)
    i0 = 2 / p * at
    i1 = (2 * T * at + p * np.log((8 + 2 * b * h**2) / r - 1)) / (2 * b * p)
    i2 = (b * h * p - (2 * b - T**2) * at - T * p * np.arctanh(2 * h * T / (4 + b * h**2))) / (b**2 * p)
    i3 = ((6 * b * T - 2 * T**3) * np.arctan(-n) + (2 * T**3 - 6 * b * T) * np.arctan(m)
          + p * (2 * b * h * T + (T**2 - b) * np.log(s) + (b - T**2) * np.log(r))) / (2 * b**3 * p)
    c4 = 2 * b**2 - 4 * b * T**2 + T**4
    i4 = (-12 * c4 * np.arctan(-n) + 12 * c4 * np.arctan(m)
          + p * (b * h * (-12 * b + b**2 * h**2 + 12 * T**2) + 6 * T * (T**2 - 2 * b) * np.log(s)
                 + 6 * (2 * b * T - T**3) * np.log(r))) / (12 * b**4 * p)
    return np.stack([i0, i1, i2, i3, i4], axis=-1)


# -- constitutive tensors ------------------------------------------------------

def _on(p, d, slot):
    """Contract the mixed tensor ``p`` (upper index first) into index ``slot`` of ``d``."""
    dd = np.moveaxis(d, slot - 4, -4)
    out = (p[..., :, 0, None, None, None] * dd[..., 0:1, :, :, :]
           + p[..., :, 1, None, None, None] * dd[..., 1:2, :, :, :])
    return np.moveaxis(out, -4, slot - 4)


def _s(x):
    return np.asarray(x)[..., None, None, None, None]


def analytic_blocks(metric: MidsurfaceMetric, material: Material, h, integrals=None):
    """``(D_M, D_MB, D_B)`` 4-index blocks of the fully integrated model."""
    d = plane_stress_tensor(metric.metric_inv, material)
    b = metric.curv_mixed
    bb = b @ b
    t = metric.trace
    if integrals is None:
        integrals = thickness_integrals(t, metric.curv_det, h)
    i0, i1, i2, i3, i4 = np.moveaxis(integrals, -1, 0)
    k1m = 2 * i1 - 3 * t * i2 + t**2 * i3
    k2m = i2 - t * i3
    k3m = 4 * i2 - 4 * t * i3 + t**2 * i4
    k4m = 2 * i3 - t * i4
    k1mb = 2 * i2 - 3 * t * i3 + t**2 * i4
    k2mb = i3 - t * i4
    k3mb = 2 * i3 - t * i4

    def coef(x):
        return np.asarray(x)[..., None, None]

    # membrane block
    pm = coef(k1m) * b + coef(k2m) * bb
    dm = _s(i0 - 2 * t * i1 + t**2 * i2) * d
    dm = dm + 0.5 * (_on(pm, d, 1) + _on(pm, d, 3) + _on(pm, d, 2) + _on(pm, d, 0))
    for sa in (1, 0):
        for sb in (3, 2):
            x = _on(b, _on(b, d, sb), sa)
            y = _on(bb, _on(b, d, sb), sa) + _on(b, _on(bb, d, sb), sa)
            z = _on(bb, _on(bb, d, sb), sa)
            dm = dm + 0.25 * (_s(k3m) * x + _s(k4m) * y + _s(i4) * z)

    # coupling block, first index pair acts on curvature changes
    pmb = coef(k1mb) * b + coef(k2mb) * bb
    q = coef(k3mb) * b + coef(i4) * bb
    neg = _s(i1 - 2 * t * i2 + t**2 * i3) * d
    neg = neg + 0.5 * _s(k2m) * (_on(b, d, 1) + _on(b, d, 0))
    neg = neg + 0.5 * (_on(pmb, d, 3) + _on(pmb, d, 2))
    for sa in (1, 0):
        for sb in (3, 2):
            neg = neg + 0.25 * _on(b, _on(q, d, sb), sa)
    dbm = -neg
    dmb = np.swapaxes(np.swapaxes(dbm, -4, -2), -3, -1)

    # bending block
    dbb = _s(i2 - 2 * t * i3 + t**2 * i4) * d
    dbb = dbb + 0.5 * _s(i3 - t * i4) * (_on(b, d, 0) + _on(b, d, 1) + _on(b, d, 2) + _on(b, d, 3))
    for sa in (0, 1):
        for sb in (2, 3):
            dbb = dbb + 0.25 * _s(i4) * _on(b, _on(b, d, sb), sa)
    return dm, dmb, dbb


def reduced_blocks(metric: MidsurfaceMetric, material: Material, h, model: str):
    d = plane_stress_tensor(metric.metric_inv, material)
    h = np.asarray(h, dtype=float)
    bend = h**3 / 12
    dm = _s(h) * d
    dbb = _s(bend) * d
    if model == "D0":
        return dm, np.zeros_like(d), dbb
    t = metric.trace
    neg = -_s(bend * t) * d
    if model == "D2":
        b = metric.curv_mixed
        neg = neg + _s(h**3 / 24) * (_on(b, d, 1) + _on(b, d, 0) + 2 * _on(b, d, 3) + 2 * _on(b, d, 2))
    elif model != "D1":
        raise UnknownModelError(model)
    dbm = -neg
    return dm, np.swapaxes(np.swapaxes(dbm, -4, -2), -3, -1), dbb


def constitutive_matrix(metric: MidsurfaceMetric, material: Material, h, model: str = "Da",
                        switch: float = DEFAULT_SWITCH) -> np.ndarray:
    """6x6 constitutive matrix of ``model`` at every point of ``metric``."""
    if model == "Da":
        ints = thickness_integrals(metric.trace, metric.curv_det, h, switch)
        blocks = analytic_blocks(metric, material, h, ints)
    elif model in MODELS:
        blocks = reduced_blocks(metric, material, h, model)
    else:
        raise UnknownModelError(f"unknown constitutive model {model!r}; expected one of {MODELS}")
    return assemble_blocks(*blocks)
