"""Equilibrium path tracing: arc-length continuation, load-controlled Newton, linear."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .metric import DegenerateSurfaceError, SelfPenetrationError
from .solver import Factorization, SingularMatrixError

log = logging.getLogger(__name__)

VARIANTS = ("linearized", "cylindrical", "modified_riks")


class PathTracingError(RuntimeError):
    pass


class IncrementFailure(RuntimeError):
    pass


class BifurcationError(PathTracingError):
    pass


_RECOVERABLE = (IncrementFailure, SingularMatrixError, SelfPenetrationError, DegenerateSurfaceError,
                FloatingPointError)


# -- problem interface ---------------------------------------------------------

class Problem:
    """What the path tracers need from a discrete model (reduced unknowns)."""

    def initial_state(self):
        raise NotImplementedError

    def tangent(self, state):
        raise NotImplementedError

    def internal(self, state) -> np.ndarray:
        raise NotImplementedError

    def load(self) -> np.ndarray:
        raise NotImplementedError

    def update(self, state, dq: np.ndarray):
        """New state displaced by ``dq`` from the converged ``state``."""
        raise NotImplementedError

    def displacement(self, state) -> np.ndarray:
        raise NotImplementedError

    def monitors(self, state) -> dict:
        return {}


class ShellProblem(Problem):
    def __init__(self, model):
        self.model = model
        self._load = model.reduced_load()

    def initial_state(self):
        return self.model.initial_state()

    def tangent(self, state):
        return self.model.tangent(state)

    def internal(self, state):
        return self.model.dofmap.reduce(self.model.internal_forces(state))

    def load(self):
        return self._load

    def update(self, state, dq):
        return self.model.update_state(state, self.model.dofmap.expand(dq))

    def displacement(self, state):
        return state.q[self._representatives()]

    def _representatives(self):
        if not hasattr(self, "_rep"):
            m = self.model.dofmap.map
            rep = np.zeros(self.model.dofmap.n_free, dtype=np.int64)
            rep[m[m >= 0]] = np.nonzero(m >= 0)[0]
            self._rep = rep
        return self._rep

    def monitors(self, state):
        out = {}
        for mon in getattr(self.model, "monitors", []):
            s = self.model.sampler(*mon["at"])
            out[mon["name"]] = float(s.displacement(state.q) @ np.asarray(mon["direction"], dtype=float))
        return out


# -- settings and records --------------------------------------------------------

@dataclass
class ContinuationSettings:
    variant: str = "linearized"
    initial_lpf_step: float = 0.05
    initial_arc_length: float | None = None
    desired_iterations: int = 4
    max_increments: int = 200
    max_iterations: int = 20
    force_tolerance: float = 1e-6
    displacement_tolerance: float = 1e-8
    target_lpf: float | None = 1.0
    scale: bool = True
    min_arc_factor: float = 1e-5
    max_arc_factor: float = 1e3
    max_cuts: int = 12
    stop: Callable[[dict, float], bool] | None = None
    keep_states: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown arc-length variant {self.variant!r}; expected one of {VARIANTS}")
        if self.force_tolerance <= 0 or self.displacement_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.desired_iterations < 1:
            raise ValueError("desired_iterations must be at least 1")


@dataclass
class PathPoint:
    increment: int
    lpf: float
    monitors: dict
    iterations: int
    arc_length: float
    inertia: int | None
    seconds: float
    q: np.ndarray = field(repr=False)
    state: Any = field(default=None, repr=False)


@dataclass
class PathResult:
    points: list
    status: str = "complete"
    message: str = ""
    final_state: Any = None

    @property
    def lpf(self) -> np.ndarray:
        return np.array([p.lpf for p in self.points])

    def monitor(self, name: str) -> np.ndarray:
        return np.array([p.monitors[name] for p in self.points])

    @property
    def total_iterations(self) -> int:
        return sum(p.iterations for p in self.points)


def adapt_arc_length(dl_prev: float, iterations_used: int, desired: int,
                     dl_min: float = 0.0, dl_max: float = math.inf) -> float:
    """Scale the arc length by ``sqrt(J_des / J)`` and clamp."""
    if iterations_used < 1:
        raise ValueError("iterations_used must be at least 1")
    return float(np.clip(dl_prev * math.sqrt(desired / iterations_used), dl_min, dl_max))


def _residual_norms(lam, load, fint):
    r = lam * load - fint
    denom = max(np.linalg.norm(lam * load), np.linalg.norm(fint), 1e-300)
    return r, np.linalg.norm(r) / denom


def _factor(problem, state):
    return Factorization(problem.tangent(state))


# -- arc length ----------------------------------------------------------------

class ArcLengthSolver:
    """Arc-length path tracer with displacement scaling and adaptive steps."""

    def __init__(self, problem: Problem, settings: ContinuationSettings | None = None,
                 on_point: Callable | None = None):
        self.problem = problem
        self.settings = settings or ContinuationSettings()
        self.on_point = on_point
        self.scale = 1.0

    def predictor(self, q_tangent, dl, prev_dq, prev_dlam):
        """Predictor ``(dlam0, dq0)``; the sign keeps the path moving forward."""
        qt = q_tangent / self.scale
        if self.settings.variant == "cylindrical":
            dlam = dl / math.sqrt(qt @ qt)
        else:
            dlam = dl / math.sqrt(qt @ qt + 1.0)
        if prev_dq is not None:
            if dlam * (qt @ (prev_dq / self.scale) + prev_dlam) < 0:
                dlam = -dlam
        return dlam, dlam * q_tangent

    def _corrector_dlam(self, dq, dlam, dq0, dlam0, d_psi, d_t, dl):
        s = self.scale
        variant = self.settings.variant
        if variant == "linearized":
            a, b = dq0 / s, dlam0
        elif variant == "modified_riks":
            a, b = dq / s, dlam
        else:
            # cylindrical constraint |dq + d_psi + x d_t|^2 = dl^2
            u = (dq + d_psi) / s
            t = d_t / s
            c2, c1, c0 = t @ t, 2 * (u @ t), u @ u - dl * dl
            disc = c1 * c1 - 4 * c2 * c0
            if disc < 0:
                raise IncrementFailure("cylindrical constraint has no real root")
            roots = [(-c1 + sgn * math.sqrt(disc)) / (2 * c2) for sgn in (1.0, -1.0)]
            ref = dq / s
            return max(roots, key=lambda x: ((dq + d_psi + x * d_t) / s) @ ref + (dlam + x) * dlam)
        return -(a @ (d_psi / s)) / (a @ (d_t / s) + b)

    def _increment(self, committed, lam, q_tangent, dl, prev_dq, prev_dlam):
        st = self.settings
        prob = self.problem
        load = prob.load()
        dlam0, dq0 = self.predictor(q_tangent, dl, prev_dq, prev_dlam)
        dq, dlam = dq0.copy(), dlam0
        state = prob.update(committed, dq)
        for it in range(1, st.max_iterations + 1):
            fint = prob.internal(state)
            r, rel = _residual_norms(lam + dlam, load, fint)
            if not np.isfinite(rel):
                raise IncrementFailure("non-finite residual")
            fac_j = _factor(prob, state)
            d_psi = fac_j.solve(r)
            d_t = fac_j.solve(load)
            dl_corr = self._corrector_dlam(dq, dlam, dq0, dlam0, d_psi, d_t, dl)
            delta = d_psi + dl_corr * d_t
            dq = dq + delta
            dlam = dlam + dl_corr
            state = prob.update(committed, dq)
            fint = prob.internal(state)
            _, rel = _residual_norms(lam + dlam, load, fint)
            qtot = max(np.linalg.norm(prob.displacement(state)), 1e-300)
            if rel <= st.force_tolerance and np.linalg.norm(delta) <= st.displacement_tolerance * qtot:
                return state, dq, dlam, it
        raise IncrementFailure(f"no convergence in {st.max_iterations} iterations")

    def run(self) -> PathResult:
        st = self.settings
        prob = self.problem
        t0 = time.perf_counter()
        state = prob.initial_state()
        lam = 0.0
        load = prob.load()
        fac = _factor(prob, state)
        q_tangent = fac.solve(load)
        self.scale = float(np.max(np.abs(q_tangent))) if st.scale else 1.0
        if self.scale == 0:
            raise PathTracingError("load produces no displacement")
        qt = q_tangent / self.scale
        if st.initial_arc_length is not None:
            dl0 = st.initial_arc_length
        elif st.variant == "cylindrical":
            dl0 = st.initial_lpf_step * math.sqrt(qt @ qt)
        else:
            dl0 = st.initial_lpf_step * math.sqrt(qt @ qt + 1.0)
        dl_min, dl_max = dl0 * st.min_arc_factor, dl0 * st.max_arc_factor
        points = [self._record(0, state, lam, 0, 0.0, fac.inertia, t0)]
        dl = dl0
        prev_dq, prev_dlam = None, None
        result = PathResult(points)
        for inc in range(1, st.max_increments + 1):
            cuts = 0
            while True:
                try:
                    new_state, dq, dlam, iters = self._increment(state, lam, q_tangent, dl, prev_dq, prev_dlam)
                    new_fac = _factor(prob, new_state)
                    break
                except _RECOVERABLE as exc:
                    cuts += 1
                    dl *= 0.5
                    log.info("increment %d failed (%s); arc length cut to %.3e", inc, exc, dl)
                    if cuts > st.max_cuts or dl < dl_min:
                        result.status = "failed"
                        result.message = f"increment {inc}: {exc}"
                        result.final_state = state
                        return result
            lam_new = lam + dlam
            if st.target_lpf is not None and (lam - st.target_lpf) * (lam_new - st.target_lpf) <= 0 and lam_new != lam:
                landed = self._land(state, lam, new_state, lam_new, t0, inc, iters, dl)
                if landed is not None:
                    points.append(landed)
                    result.final_state = landed.state if landed.state is not None else self._last_state
                    if not st.keep_states:
                        landed.state = None
                    return result
            state, lam, fac = new_state, lam_new, new_fac
            prev_dq, prev_dlam = dq, dlam
            q_tangent = fac.solve(load)
            point = self._record(inc, state, lam, iters, dl, fac.inertia, t0)
            points.append(point)
            log.info("increment %d: lpf=%.6g iterations=%d dl=%.3e inertia=%s", inc, lam, iters, dl, fac.inertia)
            if st.stop is not None and st.stop(point.monitors, lam):
                result.status = "stopped"
                result.message = f"stop rule met at increment {inc}"
                break
            dl = adapt_arc_length(dl, max(iters, 1), st.desired_iterations, dl_min, dl_max)
        else:
            if st.target_lpf is not None:
                result.status = "incomplete"
                result.message = f"target lpf not reached in {st.max_increments} increments"
        result.final_state = state
        return result

    def _land(self, state_a, lam_a, state_b, lam_b, t0, inc, iters, dl):
        """Load-controlled finish at the target from the nearer converged point."""
        target = self.settings.target_lpf
        order = [(state_b, lam_b), (state_a, lam_a)]
        if abs(lam_a - target) < abs(lam_b - target):
            order.reverse()
        for start, lam0 in order:
            try:
                state, n_it = newton_step(self.problem, start, target, self.settings)
                fac = _factor(self.problem, state)
            except _RECOVERABLE:
                continue
            self._last_state = state
            return self._record(inc, state, target, iters + n_it, dl, fac.inertia, t0, force_state=True)
        return None

    def _record(self, inc, state, lam, iters, dl, inertia, t0, force_state=False):
        point = PathPoint(
            increment=inc, lpf=float(lam), monitors=self.problem.monitors(state), iterations=iters,
            arc_length=float(dl), inertia=inertia, seconds=time.perf_counter() - t0,
            q=np.array(self.problem.displacement(state), copy=True),
            state=state if (self.settings.keep_states or force_state) else None,
        )
        if self.on_point is not None:
            self.on_point(point, state)
        return point


# -- load control ----------------------------------------------------------------

def newton_step(problem: Problem, committed, lam: float, settings: ContinuationSettings):
    """Full Newton iteration at fixed load factor ``lam`` from a converged state."""
    load = problem.load()
    dq = np.zeros_like(load)
    state = committed
    fint = problem.internal(state)
    r, rel = _residual_norms(lam, load, fint)
    if rel <= settings.force_tolerance:
        return state, 0
    for it in range(1, settings.max_iterations + 1):
        delta = _factor(problem, state).solve(r)
        dq = dq + delta
        state = problem.update(committed, dq)
        fint = problem.internal(state)
        r, rel = _residual_norms(lam, load, fint)
        if not np.isfinite(rel):
            raise IncrementFailure("non-finite residual")
        qtot = max(np.linalg.norm(problem.displacement(state)), 1e-300)
        if rel <= settings.force_tolerance and np.linalg.norm(delta) <= settings.displacement_tolerance * qtot:
            return state, it
    raise IncrementFailure(f"Newton did not converge in {settings.max_iterations} iterations")


def newton_raphson(problem: Problem, lam_target: float = 1.0, steps: int = 10,
                   settings: ContinuationSettings | None = None, on_point=None) -> PathResult:
    """Load-controlled path in ``steps`` equal increments (halved on failure)."""
    settings = settings or ContinuationSettings()
    t0 = time.perf_counter()
    state = problem.initial_state()
    fac = _factor(problem, state)

    def record(inc, st, lam, it, inertia):
        p = PathPoint(inc, float(lam), problem.monitors(st), it, 0.0, inertia, time.perf_counter() - t0,
                      np.array(problem.displacement(st), copy=True), st if settings.keep_states else None)
        if on_point is not None:
            on_point(p, st)
        return p

    points = [record(0, state, 0.0, 0, fac.inertia)]
    lam, step = 0.0, lam_target / steps
    inc = 0
    while abs(lam_target - lam) > 1e-14 * max(1.0, abs(lam_target)):
        step = math.copysign(min(abs(step), abs(lam_target - lam)), lam_target - lam)
        try:
            new_state, it = newton_step(problem, state, lam + step, settings)
            fac = _factor(problem, new_state)
        except _RECOVERABLE as exc:
            step *= 0.5
            if abs(step) < abs(lam_target) * 1e-6:
                return PathResult(points, "failed", f"Newton diverged near lpf={lam:.6g}: {exc}", state)
            continue
        inc += 1
        state, lam = new_state, lam + step
        points.append(record(inc, state, lam, it, fac.inertia))
        if inc >= settings.max_increments:
            return PathResult(points, "incomplete", "max increments reached", state)
    return PathResult(points, "complete", "", state)


def linear_analysis(problem: Problem, lam: float = 1.0) -> PathResult:
    t0 = time.perf_counter()
    state0 = problem.initial_state()
    fac = _factor(problem, state0)
    dq = fac.solve(lam * problem.load())
    state = problem.update(state0, dq)
    p0 = PathPoint(0, 0.0, problem.monitors(state0), 0, 0.0, fac.inertia, 0.0, np.zeros_like(dq))
    p1 = PathPoint(1, float(lam), problem.monitors(state), 1, 0.0, fac.inertia, time.perf_counter() - t0, dq)
    return PathResult([p0, p1], "complete", "", state)


def trace(problem: Problem, method: str = "arc_length", settings: ContinuationSettings | None = None,
          steps: int = 10, on_point=None) -> PathResult:
    settings = settings or ContinuationSettings()
    if method == "arc_length":
        return ArcLengthSolver(problem, settings, on_point).run()
    if method == "newton":
        return newton_raphson(problem, settings.target_lpf or 1.0, steps, settings, on_point)
    if method == "linear":
        return linear_analysis(problem, settings.target_lpf or 1.0)
    raise ValueError(f"unknown method {method!r}")
