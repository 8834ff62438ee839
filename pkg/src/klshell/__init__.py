"""Isogeometric Kirchhoff-Love shells with curviness-aware constitutive models."""

from .assembly import Model
from .constitutive import MODELS, Material
from .continuation import ContinuationSettings, trace
from .modelfile import build
from .nurbs import NurbsSurface
from .presets import preset

__version__ = "0.1.0"

__all__ = ["MODELS", "ContinuationSettings", "Material", "Model", "NurbsSurface", "build", "preset", "trace"]
