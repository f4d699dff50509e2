"""Degradation models, return mapping and consistent tangents."""

from .params import DegradationModel, MaterialError, MaterialParams, lame_params, youngs_modulus
from .update import (
    PointStates,
    QuadPointState,
    StressUpdateError,
    StressUpdateResult,
    algorithmic_tangent,
    plane_stress_elastic_matrix,
    status_message,
    stress_update,
    update_points,
    von_mises,
    yield_function,
    yield_stress,
)

__all__ = [
    "DegradationModel", "MaterialError", "MaterialParams", "PointStates", "QuadPointState",
    "StressUpdateError", "StressUpdateResult", "algorithmic_tangent", "lame_params",
    "plane_stress_elastic_matrix", "status_message", "stress_update", "update_points",
    "von_mises", "yield_function", "yield_stress", "youngs_modulus",
]
