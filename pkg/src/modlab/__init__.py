"""Combinatorial p-modulus of curve families on self-similar tilings."""

from .families import (BoxSet, Connect, CrossRect, Density, DiamAtLeast,
                       DiscreteCurve, IdSet, Tube, curve_length,
                       enumerate_curves, min_length_curve, relative_distance,
                       resolve, side_box, spec_from_json, spec_to_json)
from .solver import (ModulusSolution, mass, modulus, pointwise_bound_check,
                     reference_modulus)
from .symmetry import (FoldingMap, build_folding, classify_curve,
                       discrete_frechet, lift_curve, symmetrize)
from .tiling import (Cell, GraphApproximation, ValidationReport, build_carpet,
                     build_inflated_cover, build_space, build_sponge,
                     build_square, is_connected, validate_approximation)

__version__ = "0.1.0"

__all__ = [
    "BoxSet", "Cell", "Connect", "CrossRect", "Density", "DiamAtLeast",
    "DiscreteCurve", "FoldingMap", "GraphApproximation", "IdSet",
    "ModulusSolution", "Tube", "ValidationReport", "build_carpet",
    "build_folding", "build_inflated_cover", "build_space", "build_sponge",
    "build_square", "classify_curve", "curve_length", "discrete_frechet",
    "enumerate_curves", "is_connected", "lift_curve", "mass",
    "min_length_curve", "modulus", "pointwise_bound_check",
    "reference_modulus", "relative_distance", "resolve", "side_box",
    "spec_from_json", "spec_to_json", "symmetrize", "validate_approximation",
]
