"""Hierarchical image segmentation by topological total variation."""

from .errors import (
    ImproperSimplificationError,
    InsufficientDataError,
    LensInvalidError,
    NoApogeeError,
    NotDownwardClosedError,
    UnsupportedMiddlePointError,
    VariletError,
)
from .fractal import FractalRegion, PowerLawFit, fit_power_law, fractal_regions
from .ingest import LuminanceGrid, PatchMesh, build_mesh, evaluate, load_image
from .lens import Lens
from .levels import LevelOrder, Probe
from .middlespace import MiddleSpace, build_middle_space
from .persistence import Persistence, Region
from .transform import RebuiltMiddle, ScaleLevel, Simplified, Transform
from .vectorize import TracedFacet, emit_svg, facet_index, trace_facets

__version__ = "0.1.0"

__all__ = [
    "VariletError", "NoApogeeError", "NotDownwardClosedError",
    "ImproperSimplificationError", "LensInvalidError",
    "UnsupportedMiddlePointError", "InsufficientDataError",
    "LuminanceGrid", "PatchMesh", "build_mesh", "load_image", "evaluate",
    "LevelOrder", "Probe",
    "MiddleSpace", "build_middle_space",
    "Persistence", "Region",
    "Lens",
    "Transform", "Simplified", "ScaleLevel", "RebuiltMiddle",
    "PowerLawFit", "FractalRegion", "fit_power_law", "fractal_regions",
    "TracedFacet", "trace_facets", "emit_svg", "facet_index",
    "__version__",
]
