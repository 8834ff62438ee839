"""Global model: constraints, loads, state updates and system assembly."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .constitutive import DEFAULT_SWITCH, MODELS, Material, UnknownModelError, constitutive_matrix
from .kinematics import b_matrix, geometric_matrix, metric_difference, strain_operator
from .metric import MidsurfaceMetric, SelfPenetrationError, compute_metric
from .nurbs import ElementMesh, NurbsSurface, gauss_points

EDGES = ("u0", "u1", "v0", "v1")
STRAIN_UPDATES = ("metric", "linear")


class ModelInputError(ValueError):
    pass


# -- constraints --------------------------------------------------------------

def edge_points(shape, edge: str, row: int) -> np.ndarray:
    """Flat control point indices of row ``row`` (0 = boundary) counted from ``edge``."""
    n_u, n_v = shape
    if edge == "u0":
        ij = [(row, j) for j in range(n_v)]
    elif edge == "u1":
        ij = [(n_u - 1 - row, j) for j in range(n_v)]
    elif edge == "v0":
        ij = [(i, row) for i in range(n_u)]
    elif edge == "v1":
        ij = [(i, n_v - 1 - row) for i in range(n_u)]
    else:
        raise ModelInputError(f"unknown edge {edge!r}; expected one of {EDGES}")
    return np.array([i * n_v + j for i, j in ij])


class DofMap:
    """Fixed DOFs plus equality couplings, reduced to independent unknowns.

    Every full DOF maps to at most one reduced DOF (``-1`` when fixed), so
    ``q = T q_r`` with a 0/1 matrix ``T`` and ``K_r = T^T K T``.
    """

    def __init__(self, n_dof: int, fixed=(), couples=()):
        parent = np.arange(n_dof)

        def find(i):
            root = i
            while parent[root] != root:
                root = parent[root]
            while parent[i] != root:
                parent[i], i = root, parent[i]
            return root

        for a, b in couples:
            ra, rb = find(int(a)), find(int(b))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        roots = np.array([find(i) for i in range(n_dof)])
        fixed_roots = set(int(roots[i]) for i in fixed)
        free_roots = sorted(set(roots.tolist()) - fixed_roots)
        index = {r: k for k, r in enumerate(free_roots)}
        self.n_dof = n_dof
        self.n_free = len(free_roots)
        self.map = np.array([index.get(int(r), -1) for r in roots], dtype=np.int64)

    def reduce(self, vec: np.ndarray) -> np.ndarray:
        mask = self.map >= 0
        return np.bincount(self.map[mask], weights=vec[mask], minlength=self.n_free)

    def expand(self, vec_r: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n_dof)
        mask = self.map >= 0
        out[mask] = vec_r[self.map[mask]]
        return out


def resolve_constraints(shape, specs) -> tuple[list[int], list[tuple[int, int]]]:
    """Translate constraint specs into fixed DOFs and equality pairs."""
    fixed: list[int] = []
    couples: list[tuple[int, int]] = []
    for spec in specs:
        kind = spec.get("type")
        edge = spec.get("edge")
        if kind in ("fix", "diaphragm"):
            comps = spec.get("components", [0, 1, 2])
            rows = spec.get("rows", [0])
            pts = np.concatenate([edge_points(shape, edge, r) for r in rows]) if edge else np.asarray(spec["points"])
            fixed += [3 * int(p) + c for p in pts for c in comps]
        elif kind == "clamp":
            pts = np.concatenate([edge_points(shape, edge, r) for r in (0, 1)])
            fixed += [3 * int(p) + c for p in pts for c in range(3)]
        elif kind == "symmetry":
            axis = int(spec["axis"])
            p0, p1 = edge_points(shape, edge, 0), edge_points(shape, edge, 1)
            fixed += [3 * int(p) + axis for p in p0]
            for c in range(3):
                if c != axis:
                    couples += [(3 * int(a) + c, 3 * int(b) + c) for a, b in zip(p0, p1)]
        elif kind == "couple":
            rows = spec.get("rows", [0, 1])
            pa, pb = edge_points(shape, edge, rows[0]), edge_points(shape, edge, rows[1])
            for c in spec.get("components", [0, 1, 2]):
                couples += [(3 * int(a) + c, 3 * int(b) + c) for a, b in zip(pa, pb)]
        else:
            raise ModelInputError(f"unknown constraint type {kind!r}")
        if kind != "fix" and edge is None:
            raise ModelInputError(f"constraint {kind!r} needs an edge")
    return fixed, couples


# -- state --------------------------------------------------------------------

@dataclass
class State:
    """Configuration at the sample points plus the stored generalized forces."""

    q: np.ndarray  # full displacement vector
    metric: MidsurfaceMetric
    f: np.ndarray  # (n_el, n_pt, 6) resultants per unit current area
    _dmat: np.ndarray | None = field(default=None, repr=False)


@dataclass
class PointSampler:
    """Basis data of one parametric point, for monitors and point loads."""

    params: tuple[float, float]
    indices: np.ndarray
    R: np.ndarray
    dR: np.ndarray
    d2R: np.ndarray

    def dofs(self) -> np.ndarray:
        return (3 * self.indices[:, None] + np.arange(3)[None, :]).ravel()

    def displacement(self, q: np.ndarray) -> np.ndarray:
        return self.R @ q.reshape(-1, 3)[self.indices]


class Model:
    """Discrete Kirchhoff-Love shell on a single NURBS patch."""

    def __init__(self, surface: NurbsSurface, material: Material, thickness: float,
                 constitutive: str = "Da", constraints=(), loads=(), gauss_rule: str = "p+1",
                 switch: float = DEFAULT_SWITCH, strain_update: str = "metric"):
        if constitutive not in MODELS:
            raise UnknownModelError(f"unknown constitutive model {constitutive!r}; expected one of {MODELS}")
        if strain_update not in STRAIN_UPDATES:
            raise ModelInputError(f"strain_update must be one of {STRAIN_UPDATES}")
        if thickness <= 0:
            raise ModelInputError("thickness must be positive")
        self.surface = surface
        self.material = material
        self.thickness = float(thickness)
        self.constitutive = constitutive
        self.switch = switch
        self.strain_update = strain_update
        self.mesh: ElementMesh = gauss_points(surface, gauss_rule)
        self.X = surface.coords.copy()
        self.n_dof = 3 * surface.n_ctrl
        fixed, couples = resolve_constraints(surface.shape, constraints)
        self.dofmap = DofMap(self.n_dof, fixed, couples)
        self._edofs = (3 * self.mesh.conn[:, :, None] + np.arange(3)).reshape(self.mesh.n_elements, -1)
        self._build_pattern()
        self._samplers: dict = {}
        self.load = self._assemble_loads(loads)

    # -- bookkeeping -------------------------------------------------------

    def _build_pattern(self):
        rmap = self.dofmap.map[self._edofs]  # (n_el, nd)
        n_el, nd = rmap.shape
        rows = np.broadcast_to(rmap[:, :, None], (n_el, nd, nd)).ravel()
        cols = np.broadcast_to(rmap[:, None, :], (n_el, nd, nd)).ravel()
        valid = (rows >= 0) & (cols >= 0)
        n = self.dofmap.n_free
        keys = rows[valid].astype(np.int64) * n + cols[valid]
        uniq, inverse = np.unique(keys, return_inverse=True)
        self._valid = valid
        self._inverse = inverse
        r, c = np.divmod(uniq, n)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, r + 1, 1)
        self._indptr = np.cumsum(indptr)
        self._indices = c
        self._nnz = uniq.size

    def sampler(self, xi: float, eta: float) -> PointSampler:
        key = (float(xi), float(eta))
        if key not in self._samplers:
            idx, r, dr, d2r = self.surface.basis(*key)
            self._samplers[key] = PointSampler(key, idx, r, dr, d2r)
        return self._samplers[key]

    def _assemble_loads(self, loads) -> np.ndarray:
        q = np.zeros(self.n_dof)
        for load in loads:
            kind = load.get("type", "point")
            if kind == "point":
                s = self.sampler(*load["at"])
                force = np.asarray(load["force"], dtype=float)
                if force.shape != (3,):
                    raise ModelInputError("point load force must have three components")
                np.add.at(q, s.dofs(), np.outer(s.R, force).ravel())
            elif kind == "traction":
                p = np.asarray(load["traction"], dtype=float)
                met = self.reference_metric
                w = self.mesh.weights * met.sqrt_det
                vals = np.einsum("eps,ep,i->esi", self.mesh.R, w, p).reshape(self.mesh.n_elements, -1)
                np.add.at(q, self._edofs, vals)
            else:
                raise ModelInputError(f"unknown load type {kind!r}")
        return q

    @property
    def reference_metric(self) -> MidsurfaceMetric:
        if not hasattr(self, "_ref_metric"):
            _, x1, x2 = self.mesh.geometry(self.X)
            self._ref_metric = compute_metric(x1, x2)
        return self._ref_metric

    # -- configurations ------------------------------------------------------

    def initial_state(self) -> State:
        met = self.reference_metric
        f = np.zeros(met.trace.shape + (6,))
        return State(q=np.zeros(self.n_dof), metric=met, f=f)

    def metric_of(self, q: np.ndarray) -> MidsurfaceMetric:
        _, x1, x2 = self.mesh.geometry(self.X + q.reshape(-1, 3))
        return compute_metric(x1, x2)

    def constitutive_matrix(self, state: State) -> np.ndarray:
        if state._dmat is None:
            met = state.metric
            if self.constitutive == "Da":
                check_penetration(met, self.thickness)
            state._dmat = constitutive_matrix(met, self.material, self.thickness, self.constitutive, self.switch)
        return state._dmat

    def element_values(self, vec: np.ndarray) -> np.ndarray:
        return vec[self._edofs]

    def strain_operator(self, state: State) -> np.ndarray:
        return strain_operator(state.metric, self.mesh.dR, self.mesh.d2R)

    def update_state(self, state: State, dq: np.ndarray) -> State:
        """Move from ``state`` by ``dq`` and advance the stored resultants.

        Resultants are carried to the new metric by ``sqrt(g_old / g_new)`` and
        incremented by ``D e`` with ``D`` taken at ``state``.  The strain
        increment ``e`` is the exact change of ``[g/2, b]`` (default) or its
        linearization ``B_L dq``.
        """
        q = state.q + dq
        met = self.metric_of(q)
        d = self.constitutive_matrix(state)
        if self.strain_update == "metric":
            e = metric_difference(state.metric, met)
        else:
            bl = self.strain_operator(state)
            e = np.einsum("epij,ej->epi", bl, self.element_values(dq))
        ratio = (state.metric.sqrt_det / met.sqrt_det)[..., None]
        f = state.f * ratio + np.einsum("epij,epj->epi", d, e)
        return State(q=q, metric=met, f=f)

    # -- assembly ------------------------------------------------------------

    def _area_weights(self, state: State) -> np.ndarray:
        return self.mesh.weights * state.metric.sqrt_det

    def internal_forces(self, state: State) -> np.ndarray:
        bl = self.strain_operator(state)
        fe = np.einsum("epij,epi,ep->ej", bl, state.f, self._area_weights(state))
        out = np.zeros(self.n_dof)
        np.add.at(out, self._edofs, fe)
        return out

    def element_stiffness(self, state: State, geometric: bool = True, chunk: int = 400) -> np.ndarray:
        """Element matrices ``sum Z^T diag(D, G) Z da`` with ``Z = [B_L; B]``."""
        w = self._area_weights(state)
        d = self.constitutive_matrix(state) * w[..., None, None]
        g = geometric_matrix(state.metric, state.f) * w[..., None, None] if geometric else None
        n_el = self.mesh.n_elements
        nd = self._edofs.shape[1]
        out = np.empty((n_el, nd, nd))
        for lo in range(0, n_el, chunk):
            sl = slice(lo, lo + chunk)
            met = _slice_metric(state.metric, sl)
            bl = strain_operator(met, self.mesh.dR[sl], self.mesh.d2R[sl])
            if geometric:
                z = np.concatenate([bl, b_matrix(self.mesh.dR[sl], self.mesh.d2R[sl])], axis=-2)
                m = np.zeros(z.shape[:-2] + (21, 21))
                m[..., :6, :6] = d[sl]
                m[..., 6:, 6:] = g[sl]
            else:
                z, m = bl, d[sl]
            mz = m @ z
            ne, npt, nr, _ = z.shape
            out[sl] = np.matmul(z.reshape(ne, npt * nr, nd).transpose(0, 2, 1), mz.reshape(ne, npt * nr, nd))
        return out

    def tangent(self, state: State, geometric: bool = True) -> sp.csr_matrix:
        """Reduced tangent stiffness (constrained DOFs eliminated)."""
        ke = self.element_stiffness(state, geometric)
        data = np.bincount(self._inverse, weights=ke.ravel()[self._valid], minlength=self._nnz)
        n = self.dofmap.n_free
        return sp.csr_matrix((data, self._indices, self._indptr), shape=(n, n))

    def tangent_full(self, state: State, geometric: bool = True) -> sp.csr_matrix:
        ke = self.element_stiffness(state, geometric)
        n_el, nd, _ = ke.shape
        rows = np.broadcast_to(self._edofs[:, :, None], ke.shape).ravel()
        cols = np.broadcast_to(self._edofs[:, None, :], ke.shape).ravel()
        return sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(self.n_dof, self.n_dof)).tocsr()

    def reduced_load(self) -> np.ndarray:
        return self.dofmap.reduce(self.load)

    def with_constitutive(self, constitutive: str) -> "Model":
        other = object.__new__(Model)
        other.__dict__.update(self.__dict__)
        if constitutive not in MODELS:
            raise UnknownModelError(constitutive)
        other.constitutive = constitutive
        other._samplers = dict(self._samplers)
        return other


def _slice_metric(met: MidsurfaceMetric, sl) -> MidsurfaceMetric:
    return MidsurfaceMetric(**{k: getattr(met, k)[sl] for k in met.__dataclass_fields__})


def check_penetration(metric: MidsurfaceMetric, h: float) -> None:
    t, b = metric.trace, metric.curv_det
    for z in (-h / 2, h / 2):
        g0 = 1 - z * t + z * z * b
        if np.any(g0 <= 0):
            k = int(np.argmin(g0.ravel()))
            raise SelfPenetrationError(float(np.abs(t).ravel()[k] * h), z)


def surface_jacobian(state: State) -> np.ndarray:
    return state.metric.sqrt_det


__all__ = [
    "DofMap", "Model", "ModelInputError", "PointSampler", "State", "check_penetration",
    "edge_points", "resolve_constraints", "replace",
]
