"""NURBS surfaces: basis evaluation, refinement, serialization and element meshes.

Control nets are stored as arrays of shape ``(n_u, n_v, 4)`` holding
``[x, y, z, w]`` with Cartesian (not weighted) coordinates.  The flat control
point index is ``i * n_v + j`` and the displacement DOF of component ``m`` is
``3 * index + m``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class InvalidKnotVectorError(ValueError):
    pass


class GeometryInputError(ValueError):
    pass


def validate_knots(knots, degree: int, n_ctrl: int | None = None) -> np.ndarray:
    """Check that ``knots`` is a clamped, non-decreasing knot vector."""
    knots = np.asarray(knots, dtype=float)
    if degree < 1:
        raise InvalidKnotVectorError(f"degree must be >= 1, got {degree}")
    if knots.ndim != 1 or knots.size < 2 * (degree + 1):
        raise InvalidKnotVectorError("knot vector too short for degree %d" % degree)
    if np.any(np.diff(knots) < 0):
        raise InvalidKnotVectorError("knot vector is not non-decreasing")
    if not (np.all(knots[: degree + 1] == knots[0]) and np.all(knots[-degree - 1 :] == knots[-1])):
        raise InvalidKnotVectorError("knot vector must be open (end multiplicity p+1)")
    if knots[-1] <= knots[0]:
        raise InvalidKnotVectorError("knot vector spans an empty interval")
    _, counts = np.unique(knots[degree + 1 : -degree - 1], return_counts=True)
    if counts.size and counts.max() > degree:
        raise InvalidKnotVectorError("interior knot multiplicity exceeds the degree")
    if n_ctrl is not None and knots.size - degree - 1 != n_ctrl:
        raise InvalidKnotVectorError(
            f"{knots.size} knots and degree {degree} need {knots.size - degree - 1} "
            f"control points, got {n_ctrl}"
        )
    return knots


def find_span(knots: np.ndarray, degree: int, t: float) -> int:
    """Index ``i`` with ``knots[i] <= t < knots[i+1]``; the last span owns the end point."""
    n = knots.size - degree - 2
    if t >= knots[n + 1]:
        return n
    if t <= knots[degree]:
        return degree
    return int(np.searchsorted(knots, t, side="right") - 1)


def basis_derivatives(knots: np.ndarray, degree: int, span: int, t: float, n_der: int = 2) -> np.ndarray:
    """Non-zero B-spline basis functions and their derivatives at ``t``.

    Returns an array of shape ``(n_der + 1, degree + 1)``; row ``k`` holds the
    ``k``-th derivatives of ``N_{span-degree} .. N_{span}``.
    """
    p = degree
    ndu = np.zeros((p + 1, p + 1))
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = t - knots[span + 1 - j]
        right[j] = knots[span + j] - t
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((n_der + 1, p + 1))
    ders[0] = ndu[:, p]
    a = np.zeros((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, n_der + 1):
            d = 0.0
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1
    fac = p
    for k in range(1, n_der + 1):
        ders[k] *= fac
        fac *= p - k
    return ders


def _curve_eval_homogeneous(knots, degree, pw, ts):
    """Evaluate a B-spline curve with (homogeneous) coefficients ``pw`` at ``ts``."""
    out = np.empty((len(ts),) + pw.shape[1:])
    for k, t in enumerate(ts):
        span = find_span(knots, degree, t)
        n = basis_derivatives(knots, degree, span, t, 0)[0]
        out[k] = np.tensordot(n, pw[span - degree : span + 1], axes=(0, 0))
    return out


def _collocation_matrix(knots, degree, ts):
    n_ctrl = knots.size - degree - 1
    mat = np.zeros((len(ts), n_ctrl))
    for k, t in enumerate(ts):
        span = find_span(knots, degree, t)
        mat[k, span - degree : span + 1] = basis_derivatives(knots, degree, span, t, 0)[0]
    return mat


def greville(knots: np.ndarray, degree: int) -> np.ndarray:
    n_ctrl = knots.size - degree - 1
    return np.array([knots[i + 1 : i + degree + 1].mean() for i in range(n_ctrl)])


def insert_knot(knots, degree, pw, t):
    """Boehm insertion of a single knot into a curve with homogeneous coefficients."""
    k = find_span(knots, degree, t)
    n = pw.shape[0]
    new = np.empty((n + 1,) + pw.shape[1:])
    new[: k - degree + 1] = pw[: k - degree + 1]
    new[k + 1 :] = pw[k:]
    for i in range(k - degree + 1, k + 1):
        alpha = (t - knots[i]) / (knots[i + degree] - knots[i])
        new[i] = alpha * pw[i] + (1.0 - alpha) * pw[i - 1]
    return np.insert(knots, k + 1, t), new


def elevate_degree(knots, degree, pw, times=1):
    """Raise the degree of a curve by ``times`` keeping its shape exactly.

    The elevated coefficients are obtained by collocation at the Greville
    abscissae of the elevated basis, which reproduces the (piecewise
    polynomial) homogeneous curve exactly up to round-off.
    """
    if times <= 0:
        return knots, pw
    new_degree = degree + times
    uniq, counts = np.unique(knots, return_counts=True)
    new_knots = np.repeat(uniq, counts + times)
    ts = greville(new_knots, new_degree)
    values = _curve_eval_homogeneous(knots, degree, pw, ts)
    mat = _collocation_matrix(new_knots, new_degree, ts)
    flat = values.reshape(len(ts), -1)
    coef = np.linalg.solve(mat, flat)
    return new_knots, coef.reshape((mat.shape[1],) + pw.shape[1:])


@dataclass
class NurbsSurface:
    degree_u: int
    degree_v: int
    knots_u: np.ndarray
    knots_v: np.ndarray
    control_points: np.ndarray  # (n_u, n_v, 4) -> x, y, z, w

    def __post_init__(self):
        cp = np.asarray(self.control_points, dtype=float)
        if cp.ndim != 3 or cp.shape[2] != 4:
            raise GeometryInputError("control_points must have shape (n_u, n_v, 4)")
        if np.any(cp[..., 3] <= 0.0):
            raise GeometryInputError("weights must be positive")
        self.control_points = cp
        self.knots_u = validate_knots(self.knots_u, self.degree_u, cp.shape[0])
        self.knots_v = validate_knots(self.knots_v, self.degree_v, cp.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.control_points.shape[:2]

    @property
    def n_ctrl(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def coords(self) -> np.ndarray:
        """Flat ``(n_ctrl, 3)`` control point coordinates."""
        return self.control_points[..., :3].reshape(-1, 3)

    @property
    def weights(self) -> np.ndarray:
        return self.control_points[..., 3].reshape(-1)

    def homogeneous(self) -> np.ndarray:
        cp = self.control_points
        return np.concatenate([cp[..., :3] * cp[..., 3:], cp[..., 3:]], axis=-1)

    @classmethod
    def from_homogeneous(cls, degree_u, degree_v, knots_u, knots_v, pw) -> "NurbsSurface":
        w = pw[..., 3:]
        return cls(degree_u, degree_v, knots_u, knots_v, np.concatenate([pw[..., :3] / w, w], axis=-1))

    def copy(self) -> "NurbsSurface":
        return NurbsSurface(self.degree_u, self.degree_v, self.knots_u.copy(), self.knots_v.copy(),
                            self.control_points.copy())

    # -- point evaluation -------------------------------------------------

    def basis(self, xi: float, eta: float):
        """Rational basis at one parametric point.

        Returns ``(indices, R, dR, d2R)`` where ``dR`` has rows ``[,1 ,2]`` and
        ``d2R`` rows ``[,11 ,22 ,12]``.
        """
        p, q = self.degree_u, self.degree_v
        su = find_span(self.knots_u, p, xi)
        sv = find_span(self.knots_v, q, eta)
        nu = basis_derivatives(self.knots_u, p, su, xi, 2)
        nv = basis_derivatives(self.knots_v, q, sv, eta, 2)
        iu = np.arange(su - p, su + 1)
        iv = np.arange(sv - q, sv + 1)
        w = self.control_points[np.ix_(iu, iv)][..., 3]
        r, dr, d2r = _rationalize(nu[None], nv[None], w[None])
        idx = (iu[:, None] * self.shape[1] + iv[None, :]).reshape(-1)
        return idx, r[0], dr[0], d2r[0]

    def evaluate(self, xi: float, eta: float, coords=None):
        """Point, first and second derivatives at ``(xi, eta)``.

        ``coords`` optionally replaces the control point coordinates (e.g. a
        deformed configuration).  Returns ``(x, x1, x2)`` with ``x1`` of shape
        ``(3, 2)`` and ``x2`` of shape ``(3, 3)`` (columns ``,11 ,22 ,12``).
        """
        coords = self.coords if coords is None else np.asarray(coords)
        idx, r, dr, d2r = self.basis(xi, eta)
        xc = coords[idx]
        return r @ xc, (dr @ xc).T, (d2r @ xc).T

    # -- refinement ---------------------------------------------------------

    def elevate(self, degree_u: int, degree_v: int) -> "NurbsSurface":
        if degree_u < self.degree_u or degree_v < self.degree_v:
            raise GeometryInputError("degree elevation cannot lower the degree")
        pw = self.homogeneous()
        ku, pw = elevate_degree(self.knots_u, self.degree_u, pw, degree_u - self.degree_u)
        kv, pwt = elevate_degree(self.knots_v, self.degree_v, pw.transpose(1, 0, 2), degree_v - self.degree_v)
        return NurbsSurface.from_homogeneous(degree_u, degree_v, ku, kv, pwt.transpose(1, 0, 2))

    def insert_knots(self, knots_u=(), knots_v=()) -> "NurbsSurface":
        pw = self.homogeneous()
        ku, kv = self.knots_u, self.knots_v
        for t in knots_u:
            ku, pw = insert_knot(ku, self.degree_u, pw, t)
        pwt = pw.transpose(1, 0, 2)
        for t in knots_v:
            kv, pwt = insert_knot(kv, self.degree_v, pwt, t)
        return NurbsSurface.from_homogeneous(self.degree_u, self.degree_v, ku, kv, pwt.transpose(1, 0, 2))

    def refine(self, elements_u: int, elements_v: int, degree_u: int | None = None,
               degree_v: int | None = None, continuity: int | None = None) -> "NurbsSurface":
        """Elevate to the requested degrees, then split into a uniform element grid.

        New interior knots get multiplicity ``p - continuity`` (default: maximal
        continuity ``p - 1``).  Parameter values that are already knots of the
        coarse surface are left untouched, so geometric kinks survive.
        """
        p = self.degree_u if degree_u is None else degree_u
        q = self.degree_v if degree_v is None else degree_v
        surf = self.elevate(p, q)
        ins = []
        for knots, deg, nel in ((surf.knots_u, p, elements_u), (surf.knots_v, q, elements_v)):
            if nel < 1:
                raise GeometryInputError("element counts must be positive")
            k = deg - 1 if continuity is None else continuity
            if not 0 <= k <= deg - 1:
                raise GeometryInputError(f"continuity C{k} not valid for degree {deg}")
            a, b = knots[0], knots[-1]
            existing = np.unique(knots)
            new = []
            for t in a + (b - a) * np.arange(1, nel) / nel:
                if np.any(np.isclose(existing, t, rtol=0, atol=1e-12 * (b - a))):
                    continue
                new.extend([t] * (deg - k))
            ins.append(new)
        return surf.insert_knots(ins[0], ins[1])

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "degree_u": int(self.degree_u),
            "degree_v": int(self.degree_v),
            "knots_u": self.knots_u.tolist(),
            "knots_v": self.knots_v.tolist(),
            "control_points": self.control_points.reshape(-1, 4).tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NurbsSurface":
        try:
            p, q = int(data["degree_u"]), int(data["degree_v"])
            ku = np.asarray(data["knots_u"], dtype=float)
            kv = np.asarray(data["knots_v"], dtype=float)
            cp = np.asarray(data["control_points"], dtype=float)
        except KeyError as exc:
            raise GeometryInputError(f"missing surface field {exc}") from None
        n_u, n_v = ku.size - p - 1, kv.size - q - 1
        if cp.ndim != 2 or cp.shape[1] != 4 or cp.shape[0] != n_u * n_v:
            raise GeometryInputError(
                f"expected {n_u * n_v} control points [x, y, z, w], got array of shape {cp.shape}"
            )
        return cls(p, q, ku, kv, cp.reshape(n_u, n_v, 4))


def load_surface(path) -> NurbsSurface:
    return NurbsSurface.from_dict(json.loads(Path(path).read_text()))


def save_surface(surface: NurbsSurface, path) -> None:
    Path(path).write_text(json.dumps(surface.to_dict(), indent=1))


def _rationalize(nu, nv, w):
    """Tensor-product rational basis and derivatives.

    ``nu``: (..., 3, p+1) univariate values/derivatives in u, ``nv`` likewise in
    v, ``w``: (..., p+1, q+1) weights.  Returns flattened ``R`` (..., ns),
    ``dR`` (..., 2, ns), ``d2R`` (..., 3, ns).
    """
    def prod(a, b):
        return np.einsum("...a,...b,...ab->...ab", nu[..., a, :], nv[..., b, :], w).reshape(w.shape[:-2] + (-1,))

    a0, au, av = prod(0, 0), prod(1, 0), prod(0, 1)
    auu, avv, auv = prod(2, 0), prod(0, 2), prod(1, 1)
    wsum = a0.sum(-1, keepdims=True)
    wu, wv = au.sum(-1, keepdims=True), av.sum(-1, keepdims=True)
    wuu, wvv, wuv = auu.sum(-1, keepdims=True), avv.sum(-1, keepdims=True), auv.sum(-1, keepdims=True)
    r = a0 / wsum
    ru = (au - r * wu) / wsum
    rv = (av - r * wv) / wsum
    ruu = (auu - 2 * ru * wu - r * wuu) / wsum
    rvv = (avv - 2 * rv * wv - r * wvv) / wsum
    ruv = (auv - ru * wv - rv * wu - r * wuv) / wsum
    return r, np.stack([ru, rv], axis=-2), np.stack([ruu, rvv, ruv], axis=-2)


def gauss_legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


@dataclass
class ElementMesh:
    """Per-element basis data at a fixed set of local sample points.

    Arrays are indexed ``[element, point, ...]``.  ``weights`` already include
    the parametric Jacobian, so a parametric-area integral is
    ``sum(weights * integrand)`` (the surface Jacobian is applied by callers).
    """

    surface: NurbsSurface
    spans: np.ndarray  # (n_el, 2) span indices (u, v)
    bounds: np.ndarray  # (n_el, 4) xi0, xi1, eta0, eta1
    conn: np.ndarray  # (n_el, ns)
    params: np.ndarray  # (n_el, n_pt, 2)
    weights: np.ndarray  # (n_el, n_pt)
    R: np.ndarray  # (n_el, n_pt, ns)
    dR: np.ndarray  # (n_el, n_pt, 2, ns)
    d2R: np.ndarray  # (n_el, n_pt, 3, ns)
    local: np.ndarray = field(default=None)  # (n_pt, 2) local coordinates in [-1, 1]

    @property
    def n_elements(self) -> int:
        return self.conn.shape[0]

    @property
    def n_points(self) -> int:
        return self.R.shape[1]

    @classmethod
    def build(cls, surface: NurbsSurface, points_u=None, points_v=None, weights_u=None, weights_v=None):
        """Mesh of all non-empty knot spans.

        ``points_*`` are local abscissae in [-1, 1]; by default a Gauss rule with
        ``p + 1`` (``q + 1``) points per direction.
        """
        p, q = surface.degree_u, surface.degree_v
        if points_u is None:
            points_u, weights_u = gauss_legendre(p + 1)
        if points_v is None:
            points_v, weights_v = gauss_legendre(q + 1)
        points_u, points_v = np.asarray(points_u, float), np.asarray(points_v, float)
        weights_u = np.ones_like(points_u) if weights_u is None else np.asarray(weights_u, float)
        weights_v = np.ones_like(points_v) if weights_v is None else np.asarray(weights_v, float)

        def univariate(knots, deg, pts):
            spans = [i for i in range(deg, knots.size - deg - 1) if knots[i + 1] > knots[i]]
            vals = np.empty((len(spans), pts.size, 3, deg + 1))
            ts = np.empty((len(spans), pts.size))
            jac = np.empty(len(spans))
            for s, i in enumerate(spans):
                a, b = knots[i], knots[i + 1]
                jac[s] = 0.5 * (b - a)
                for k, loc in enumerate(pts):
                    t = 0.5 * (a + b) + loc * jac[s]
                    ts[s, k] = t
                    vals[s, k] = basis_derivatives(knots, deg, i, t, 2)
            return np.array(spans), vals, ts, jac

        su, nu, tu, ju = univariate(surface.knots_u, p, points_u)
        sv, nv, tv, jv = univariate(surface.knots_v, q, points_v)
        n_v = surface.shape[1]
        eu, ev = np.meshgrid(np.arange(su.size), np.arange(sv.size), indexing="ij")
        eu, ev = eu.ravel(), ev.ravel()
        n_el, npu, npv = eu.size, points_u.size, points_v.size

        iu = su[eu][:, None] - p + np.arange(p + 1)[None, :]  # (n_el, p+1)
        iv = sv[ev][:, None] - q + np.arange(q + 1)[None, :]
        conn = (iu[:, :, None] * n_v + iv[:, None, :]).reshape(n_el, -1)
        w = surface.control_points[..., 3][iu[:, :, None], iv[:, None, :]]  # (n_el, p+1, q+1)

        # broadcast to (n_el, npu, npv, ...)
        nu_e = nu[eu][:, :, None]  # (n_el, npu, 1, 3, p+1)
        nv_e = nv[ev][:, None, :]  # (n_el, 1, npv, 3, q+1)
        nu_b = np.broadcast_to(nu_e, (n_el, npu, npv, 3, p + 1))
        nv_b = np.broadcast_to(nv_e, (n_el, npu, npv, 3, q + 1))
        w_b = np.broadcast_to(w[:, None, None], (n_el, npu, npv, p + 1, q + 1))
        r, dr, d2r = _rationalize(nu_b, nv_b, w_b)
        ns = (p + 1) * (q + 1)
        npt = npu * npv

        params = np.stack(np.broadcast_arrays(tu[eu][:, :, None], tv[ev][:, None, :]), axis=-1).reshape(n_el, npt, 2)
        wts = (ju[eu] * jv[ev])[:, None] * np.outer(weights_u, weights_v).reshape(1, -1)
        bounds = np.stack([
            surface.knots_u[su[eu]], surface.knots_u[su[eu] + 1],
            surface.knots_v[sv[ev]], surface.knots_v[sv[ev] + 1],
        ], axis=1)
        local = np.stack(np.meshgrid(points_u, points_v, indexing="ij"), axis=-1).reshape(-1, 2)
        return cls(
            surface=surface,
            spans=np.stack([su[eu], sv[ev]], axis=1),
            bounds=bounds,
            conn=conn,
            params=params,
            weights=wts,
            R=r.reshape(n_el, npt, ns),
            dR=dr.reshape(n_el, npt, 2, ns),
            d2R=d2r.reshape(n_el, npt, 3, ns),
            local=local,
        )

    def geometry(self, coords: np.ndarray):
        """Position, first and second derivatives at every sample point."""
        xe = coords[self.conn]  # (n_el, ns, 3)
        x = np.einsum("eps,esi->epi", self.R, xe)
        x1 = np.einsum("epas,esi->epia", self.dR, xe)
        x2 = np.einsum("epas,esi->epia", self.d2R, xe)
        return x, x1, x2


def gauss_points(surface: NurbsSurface, rule: str = "p+1") -> ElementMesh:
    """Element mesh with a Gauss rule of ``p+1`` (default) or ``p`` points per direction."""
    if rule not in ("p+1", "p"):
        raise GeometryInputError(f"unknown Gauss rule {rule!r}")
    extra = 1 if rule == "p+1" else 0
    pu, wu = gauss_legendre(surface.degree_u + extra)
    pv, wv = gauss_legendre(surface.degree_v + extra)
    return ElementMesh.build(surface, pu, pv, wu, wv)
