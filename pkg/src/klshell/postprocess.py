"""Derived fields: curviness maps, reference strains at points, outer-fiber strains and stresses."""

from __future__ import annotations

import json

import numpy as np

from .constitutive import plane_stress_tensor
from .kinematics import _tensor, equidistant_strain, metric_difference, physical_components, strain_operator
from .metric import compute_metric, curviness, shift_state
from .nurbs import ElementMesh

FIBER_MODES = ("exact", "linear")


def nodal_average(params: np.ndarray, values: np.ndarray, decimals: int = 12) -> np.ndarray:
    """Replace every sample by the mean over samples at the same parametric point."""
    params = np.asarray(params).reshape(-1, 2)
    values = np.asarray(values)
    flat = values.reshape(params.shape[0], -1)
    keys = np.round(params, decimals)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    sums = np.zeros((counts.size, flat.shape[1]))
    np.add.at(sums, inverse, flat)
    return (sums / counts[:, None])[inverse].reshape(values.shape)


def sample_mesh(model, grid: int = 5) -> ElementMesh:
    """Element-wise sample grid (``grid`` x ``grid`` points per element, boundaries included)."""
    pts = np.linspace(-1.0, 1.0, grid)
    return ElementMesh.build(model.surface, pts, pts)


def field_samples(model, state=None, grid: int = 5, threshold: float = 0.25, lpf: float | None = None,
                  average: bool = True) -> list[dict]:
    """Curviness and total reference strains on the sample grid.

    ``Kh`` is the raw value; ``Kh_display`` is clamped at ``threshold``.
    Strains are physical components relative to the reference metric:
    membrane ``(g - G)/2`` and bending ``b - B``.
    """
    mesh = sample_mesh(model, grid)
    q = np.zeros(model.n_dof) if state is None else state.q
    x0, x1, x2 = mesh.geometry(model.X)
    ref = compute_metric(x1, x2)
    xc, y1, y2 = mesh.geometry(model.X + q.reshape(-1, 3))
    cur = compute_metric(y1, y2)
    kh = curviness(cur, model.thickness)
    eps = physical_components(0.5 * (cur.metric - ref.metric), ref.metric)
    kap = physical_components(cur.curv - ref.curv, ref.metric)
    cols = {
        "Kh": kh,
        "eps11": eps[..., 0, 0], "eps22": eps[..., 1, 1], "eps12": eps[..., 0, 1],
        "kappa11": kap[..., 0, 0], "kappa22": kap[..., 1, 1], "kappa12": kap[..., 0, 1],
    }
    if average:
        cols = {k: nodal_average(mesh.params, v) for k, v in cols.items()}
    params = mesh.params.reshape(-1, 2)
    pos = xc.reshape(-1, 3)
    flat = {k: v.ravel() for k, v in cols.items()}
    out = []
    for i in range(params.shape[0]):
        rec = {"xi": float(params[i, 0]), "eta": float(params[i, 1]),
               "x": float(pos[i, 0]), "y": float(pos[i, 1]), "z": float(pos[i, 2])}
        rec.update({k: float(v[i]) for k, v in flat.items()})
        rec["Kh_display"] = min(rec["Kh"], threshold)
        if lpf is not None:
            rec["lpf"] = float(lpf)
        out.append(rec)
    return out


def curviness_field(model, state=None, grid: int = 5, threshold: float = 0.25) -> np.ndarray:
    """Raw ``Kh`` on the element sample grid, shape (n_el, grid*grid)."""
    mesh = sample_mesh(model, grid)
    q = np.zeros(model.n_dof) if state is None else state.q
    _, x1, x2 = mesh.geometry(model.X + q.reshape(-1, 3))
    return curviness(compute_metric(x1, x2), model.thickness)


def write_field_dump(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


class PointTracker:
    """Follows one material point along a path; use as the ``on_point`` callback.

    Per converged point it stores the curviness, the total membrane strain
    (metric difference, path independent), the bending strain as the sum of
    per-increment linearized curvature changes, the alternative ``b - B``,
    and equidistant strains/stresses at ``zeta`` for the exact and linear
    through-thickness distributions.  Physical strain components refer to the
    reference metric, physical stresses to the current one.
    """

    def __init__(self, model, xi: float, eta: float, zeta: float | None = None):
        self.model = model
        self.sampler = model.sampler(xi, eta)
        self.zeta = 0.5 * model.thickness if zeta is None else float(zeta)
        self.ref = self._metric(np.zeros(model.n_dof))
        self.ref_fiber = shift_state(self.ref, self.zeta, model.thickness).equidistant_metric(self.ref)
        self.records: list[dict] = []
        self._prev_metric = self.ref
        self._prev_q = np.zeros(model.n_dof)
        self._kappa = np.zeros(3)
        self._strain = {m: np.zeros((2, 2)) for m in FIBER_MODES}
        self._stress = {m: np.zeros((2, 2)) for m in FIBER_MODES}

    def _metric(self, q):
        s = self.sampler
        xc = (self.model.X + q.reshape(-1, 3))[s.indices]
        return compute_metric((s.dR @ xc).T, (s.d2R @ xc).T)

    def __call__(self, point, state) -> None:
        self.update(point.lpf, state.q)

    def update(self, lpf: float, q: np.ndarray) -> dict:
        s = self.sampler
        model = self.model
        met = self._metric(q)
        prev = self._prev_metric
        dq = (q - self._prev_q).reshape(-1, 3)[s.indices].ravel()
        e_lin = strain_operator(prev, s.dR, s.d2R) @ dq
        e_inc = metric_difference(prev, met)
        self._kappa += e_lin[3:]

        sh_prev = shift_state(prev, self.zeta, model.thickness)
        sh_new = shift_state(met, self.zeta, model.thickness)
        gbar_prev = sh_prev.equidistant_metric(prev)
        gbar_new = sh_new.equidistant_metric(met)
        ratio = np.sqrt(np.linalg.det(gbar_prev) / np.linalg.det(gbar_new))
        d_bar = plane_stress_tensor(sh_prev.equidistant_metric_inv(prev), model.material)
        for mode in FIBER_MODES:
            de = equidistant_strain(e_inc, prev, self.zeta, mode)
            self._strain[mode] = self._strain[mode] + de
            self._stress[mode] = self._stress[mode] * ratio + np.einsum("abcd,cd->ab", d_bar, de)

        self._prev_metric, self._prev_q = met, q.copy()
        eps = physical_components(0.5 * (met.metric - self.ref.metric), self.ref.metric)
        kap = physical_components(_tensor(self._kappa), self.ref.metric)
        alt = physical_components(met.curv - self.ref.curv, self.ref.metric)
        rec = {
            "lpf": float(lpf),
            "Kh": float(curviness(met, model.thickness)),
            "eps11": eps[0, 0], "eps22": eps[1, 1], "eps12": eps[0, 1],
            "kappa11": kap[0, 0], "kappa22": kap[1, 1], "kappa12": kap[0, 1],
            "kappa11_cov": self._kappa[0], "kappa22_cov": self._kappa[1], "kappa12_cov": 0.5 * self._kappa[2],
            "bdiff11": alt[0, 0], "bdiff22": alt[1, 1], "bdiff12": alt[0, 1],
        }
        diag = np.sqrt(np.diag(gbar_new))
        for mode in FIBER_MODES:
            ef = physical_components(self._strain[mode], self.ref_fiber)
            sf = self._stress[mode] * np.outer(diag, diag)
            rec.update({f"eps_out11_{mode}": ef[0, 0], f"eps_out22_{mode}": ef[1, 1], f"eps_out12_{mode}": ef[0, 1],
                        f"sig_out11_{mode}": sf[0, 0], f"sig_out22_{mode}": sf[1, 1], f"sig_out12_{mode}": sf[0, 1]})
        rec = {k: float(v) for k, v in rec.items()}
        self.records.append(rec)
        return rec

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.records])


def accumulated_reference_strain(model, path_q, xi: float, eta: float, lpfs=None) -> PointTracker:
    """Replay a stored path of full displacement vectors through a tracker."""
    tracker = PointTracker(model, xi, eta)
    lpfs = range(len(path_q)) if lpfs is None else lpfs
    for lam, q in zip(lpfs, path_q):
        tracker.update(lam, np.asarray(q))
    return tracker


def outer_fiber_state(model, path_q, xi: float, eta: float, mode: str = "exact", zeta: float | None = None,
                      lpfs=None) -> dict:
    """Physical outer-fiber strain and stress histories for one distribution mode."""
    if mode not in FIBER_MODES:
        raise ValueError(f"mode must be one of {FIBER_MODES}")
    tracker = PointTracker(model, xi, eta, zeta)
    lpfs = range(len(path_q)) if lpfs is None else lpfs
    for lam, q in zip(lpfs, path_q):
        tracker.update(lam, np.asarray(q))
    keys = [f"{f}{c}_{mode}" for f in ("eps_out", "sig_out") for c in ("11", "22", "12")]
    return {k.rsplit("_", 1)[0]: tracker.column(k) for k in keys}


__all__ = [
    "FIBER_MODES", "PointTracker", "accumulated_reference_strain", "curviness_field", "field_samples",
    "nodal_average", "outer_fiber_state", "sample_mesh", "write_field_dump",
]
