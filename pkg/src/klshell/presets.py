"""Named benchmark models as model-file documents.

Geometry, material and load data follow the classical benchmark definitions
(Belytschko obstacle course pinched cylinder and the Sze-Liu-Lo nonlinear
shell suite).  The pinched semi-cylinder is stored in centimetres so that the
thickness variants read 3, 6, 12, 24.
"""

from __future__ import annotations

import copy
import math

import numpy as np

from .nurbs import NurbsSurface


class UnknownPresetError(KeyError):
    pass


def cylinder_arc(radius, theta0, theta1, s0, s1, axes=(0, 1, 2)) -> NurbsSurface:
    """Exact circular cylinder patch: ``u`` runs along the arc, ``v`` along the axis.

    The arc lies in the plane of coordinates ``axes[0]`` (cos) and
    ``axes[1]`` (sin); ``axes[2]`` is the cylinder axis.
    """
    half = 0.5 * (theta1 - theta0)
    if not 0 < abs(half) < math.pi / 2:
        raise ValueError("a single quadratic segment needs an opening angle below 180 degrees")
    mid = 0.5 * (theta0 + theta1)
    arc = [
        (radius * math.cos(theta0), radius * math.sin(theta0), 1.0),
        (radius / math.cos(half) * math.cos(mid), radius / math.cos(half) * math.sin(mid), math.cos(half)),
        (radius * math.cos(theta1), radius * math.sin(theta1), 1.0),
    ]
    cp = np.zeros((3, 2, 4))
    for i, (a, b, w) in enumerate(arc):
        for j, s in enumerate((s0, s1)):
            cp[i, j, axes[0]] = a
            cp[i, j, axes[1]] = b
            cp[i, j, axes[2]] = s
            cp[i, j, 3] = w
    return NurbsSurface(2, 1, [0, 0, 0, 1, 1, 1], [0, 0, 1, 1], cp)


def _doc(name, surface, thickness, E, nu, refinement, constraints, loads, monitors, solver, points,
         curviness, constitutive="Da"):
    return {
        "name": name,
        "geometry": surface.to_dict(),
        "thickness": thickness,
        "material": {"E": E, "nu": nu},
        "refinement": refinement,
        "constraints": constraints,
        "loads": loads,
        "constitutive": constitutive,
        "solver": solver,
        "monitors": monitors,
        "points": points,
        "initial_curviness": curviness,
        "outputs": ["path", "report"],
    }


def pinched_cylinder_linear(thickness=3.0, elements=36, degree=3, continuity=1):
    # R = 300, L = 600, E = 3e6, nu = 0.3, total P = 1; one eighth, load P/4
    r, length = 300.0, 600.0
    surf = cylinder_arc(r, 0.0, math.pi / 2, 0.0, length / 2)
    return _doc(
        "pinched_cylinder_linear", surf, thickness, 3.0e6, 0.3,
        {"elements_u": elements, "elements_v": elements, "degree": degree, "continuity": continuity},
        [
            {"type": "symmetry", "edge": "u0", "axis": 1},
            {"type": "symmetry", "edge": "u1", "axis": 0},
            {"type": "symmetry", "edge": "v0", "axis": 2},
            {"type": "diaphragm", "edge": "v1", "components": [0, 1]},
        ],
        [{"type": "point", "at": [1.0, 0.0], "force": [0.0, -0.25, 0.0]}],
        [{"name": "w_A", "at": [1.0, 0.0], "direction": [0.0, -1.0, 0.0]}],
        {"method": "linear"},
        {"A": [1.0, 0.0]},
        thickness / r,
    )


def shallow_shell(thickness=12.7):
    # hinged roof: R = 2540, straight edges 508 long, half angle 0.1 rad,
    # E = 3102.75, nu = 0.3; quarter model, load P/4 at the crown
    r, half_length, angle = 2540.0, 254.0, 0.1
    p_max = {12.7: 3000.0, 6.35: 600.0}.get(float(thickness), 3000.0 * (thickness / 12.7) ** 3)
    surf = cylinder_arc(r, math.pi / 2, math.pi / 2 - angle, 0.0, half_length)
    return _doc(
        "shallow_shell", surf, thickness, 3102.75, 0.3,
        {"elements_u": 4, "elements_v": 4, "degree": 4, "continuity": 3},
        [
            {"type": "symmetry", "edge": "u0", "axis": 0},
            {"type": "fix", "edge": "u1", "components": [0, 1, 2]},
            {"type": "symmetry", "edge": "v0", "axis": 2},
        ],
        [{"type": "point", "at": [0.0, 0.0], "force": [0.0, -p_max / 4, 0.0]}],
        [
            {"name": "w_A", "at": [0.0, 0.0], "direction": [0.0, -1.0, 0.0]},
            {"name": "w_B", "at": [0.0, 1.0], "direction": [0.0, -1.0, 0.0]},
        ],
        {"method": "arc_length", "variant": "linearized", "initial_lpf_step": 0.1, "desired_iterations": 4,
         "target_lpf": None, "max_increments": 200, "stop": {"monitor": "w_A", "max": 30.0}},
        {"A": [0.0, 0.0], "B": [0.0, 1.0]},
        thickness / r,
    )


SEMI_CYLINDER_VARIANTS = {3.0: 2000.0, 6.0: 14000.0, 12.0: 48000.0, 24.0: 190000.0}


def semi_cylinder(thickness=3.0, load=None, elements=20):
    # R = 1.016 m, L = 3.048 m, h = 0.03 m, E = 2.0685e7, nu = 0.3, P = 2000 (in cm:
    # R = 101.6, L = 304.8, h = 3, E = 2068.5); half model, load P/2
    r, length = 101.6, 304.8
    p = SEMI_CYLINDER_VARIANTS.get(float(thickness)) if load is None else load
    if p is None:
        raise ValueError(f"no reference load for thickness {thickness}; pass load=")
    surf = cylinder_arc(r, 0.0, math.pi / 2, 0.0, length, axes=(0, 2, 1))
    return _doc(
        "semi_cylinder", surf, thickness, 2068.5, 0.3,
        {"elements_u": elements, "elements_v": elements, "degree": 2, "continuity": 1},
        [
            {"type": "symmetry", "edge": "u0", "axis": 2},
            {"type": "symmetry", "edge": "u1", "axis": 0},
            {"type": "clamp", "edge": "v0"},
        ],
        [{"type": "point", "at": [1.0, 1.0], "force": [0.0, 0.0, -p / 2]}],
        [{"name": "w_A", "at": [1.0, 1.0], "direction": [0.0, 0.0, -1.0]}],
        {"method": "arc_length", "variant": "linearized", "initial_lpf_step": 0.05, "desired_iterations": 5,
         "target_lpf": 1.0, "max_increments": 300},
        {"A": [1.0, 1.0]},
        thickness / r,
    )


def pullout_cylinder(elements=60, degree=3, continuity=2):
    # R = 4.953, L = 10.35, h = 0.094, E = 10.5e6, nu = 0.3125, P = 40000;
    # one eighth, load P/4 pulling outward at A
    r, length, h = 4.953, 10.35, 0.094
    surf = cylinder_arc(r, 0.0, math.pi / 2, 0.0, length / 2)
    return _doc(
        "pullout_cylinder", surf, h, 10.5e6, 0.3125,
        {"elements_u": elements, "elements_v": elements, "degree": degree, "continuity": continuity},
        [
            {"type": "symmetry", "edge": "u0", "axis": 1},
            {"type": "symmetry", "edge": "u1", "axis": 0},
            {"type": "symmetry", "edge": "v0", "axis": 2},
        ],
        [{"type": "point", "at": [0.0, 0.0], "force": [10000.0, 0.0, 0.0]}],
        [
            {"name": "w_A", "at": [0.0, 0.0], "direction": [1.0, 0.0, 0.0]},
            {"name": "u_end0", "at": [0.0, 1.0], "direction": [1.0, 0.0, 0.0]},
            {"name": "u_end90", "at": [1.0, 1.0], "direction": [0.0, 1.0, 0.0]},
        ],
        {"method": "arc_length", "variant": "linearized", "initial_lpf_step": 0.02, "desired_iterations": 5,
         "target_lpf": 1.0, "max_increments": 400},
        {"A": [0.0, 0.0], "B": [1.0, 1.0], "D": [0.0, 0.5]},
        h / r,
    )


def pinched_cylinder_nl(elements=50, degree=2, continuity=1):
    # R = 100, L = 200, h = 1, E = 30000, nu = 0.3, P = 12000; one eighth, load P/4
    r, length, h = 100.0, 200.0, 1.0
    surf = cylinder_arc(r, 0.0, math.pi / 2, 0.0, length / 2)
    return _doc(
        "pinched_cylinder_nl", surf, h, 3.0e4, 0.3,
        {"elements_u": elements, "elements_v": elements, "degree": degree, "continuity": continuity},
        [
            {"type": "symmetry", "edge": "u0", "axis": 1},
            {"type": "symmetry", "edge": "u1", "axis": 0},
            {"type": "symmetry", "edge": "v0", "axis": 2},
            {"type": "diaphragm", "edge": "v1", "components": [0, 1]},
        ],
        [{"type": "point", "at": [1.0, 0.0], "force": [0.0, -3000.0, 0.0]}],
        [
            {"name": "w_A", "at": [1.0, 0.0], "direction": [0.0, -1.0, 0.0]},
            {"name": "u_B", "at": [0.0, 0.0], "direction": [1.0, 0.0, 0.0]},
        ],
        {"method": "arc_length", "variant": "modified_riks", "initial_lpf_step": 0.01, "desired_iterations": 5,
         "target_lpf": 1.0, "max_increments": 400},
        {"A": [1.0, 0.0], "B": [0.0, 0.0], "C": [0.75, 0.0]},
        h / r,
    )


_PRESETS = {
    "pinched_cylinder_linear": pinched_cylinder_linear,
    "shallow_shell": shallow_shell,
    "semi_cylinder": semi_cylinder,
    "pullout_cylinder": pullout_cylinder,
    "pinched_cylinder_nl": pinched_cylinder_nl,
}

PRESETS = tuple(_PRESETS)


def preset(name: str, **kwargs) -> dict:
    """Model-file document of a named benchmark."""
    try:
        factory = _PRESETS[name]
    except KeyError:
        raise UnknownPresetError(f"unknown preset {name!r}; expected one of {PRESETS}") from None
    return copy.deepcopy(factory(**kwargs))
