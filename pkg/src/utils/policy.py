"""
Numerical tolerances in one place.
"""

import math
from dataclasses import dataclass

from .errors import ModelError


@dataclass(frozen=True)
class NumericPolicy:
    """Tolerances and truncation orders shared by the analytic pipeline."""

    jet_order: int = 4
    root_residual: float = 1e-10
    contour_epsilon: float = 1e-6
    contour_max_step: float = math.pi / 8
    contour_initial_points: int = 128
    solve_residual: float = 1e-10
    pivot_tolerance: float = 1e-14
    rank_tolerance: float = 1e-8
    negative_probability_tolerance: float = 1e-9
    max_load: float = 0.999
    max_subdivision_depth: int = 40
    fixed_point_iterations: int = 200

    def __post_init__(self):
        if self.jet_order < 1:
            raise ModelError(f"jet_order must be >= 1, got {self.jet_order}")
        if not 0 < self.contour_epsilon < 0.1:
            raise ModelError(f"contour_epsilon must lie in (0, 0.1), got {self.contour_epsilon}")
        if not 0 < self.max_load < 1:
            raise ModelError(f"max_load must lie in (0, 1), got {self.max_load}")

    @property
    def moment_order(self) -> int:
        """Highest Taylor order available after a singular z = 1 solve."""
        return self.jet_order - 1


DEFAULT_POLICY = NumericPolicy()
