"""Real algebraic hypersurfaces whose projections are special generic maps.

Given a compact region cut out by polynomial inequalities, build a polynomial
``P(x, y)`` whose zero set projects onto the region with sphere fibers over
interior points and single points over the boundary, then check that
structure numerically.
"""
from .construct import Hypersurface, VerticalSpec, build_basic, build_generalized, choose_T, validate_vertical_spec
from .polynomial import MultiPoly, UniPoly
from .region import Region, certify, classify_point, region_euler

__all__ = [
    "Hypersurface", "MultiPoly", "Region", "UniPoly", "VerticalSpec",
    "build_basic", "build_generalized", "certify", "choose_T", "classify_point",
    "region_euler", "validate_vertical_spec",
]
__version__ = "0.1.0"
