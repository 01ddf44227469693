"""
Argument-principle counting and root location in the unit disk.
"""

import numpy as np
import pytest

from src.utils.errors import RootCountError
from src.utils.roots import circle_path, eigenvalue_fixed_points, unit_disk_roots, winding_number


def test_winding_number_of_polynomials():
    assert winding_number(lambda z: z ** 3, circle_path(0.5)) == 3
    assert winding_number(lambda z: (z - 0.2) * (z + 2.0), circle_path(1.0)) == 1
    assert winding_number(lambda z: np.exp(z), circle_path(1.0)) == 0


def test_double_root_at_origin_counted_with_multiplicity():
    roots = unit_disk_roots(lambda z: z * z, 2)
    assert len(roots) == 2
    assert all(abs(r) < 1e-6 for r in roots)


def test_roots_found_without_candidates():
    target = [0.3 + 0.4j, 0.3 - 0.4j, -0.5]

    def g(z):
        return (z - target[0]) * (z - target[1]) * (z - target[2]) * (z - 1.0)

    roots = unit_disk_roots(g, 3)
    for t in target:
        assert min(abs(r - t) for r in roots) < 1e-9


def test_root_close_to_the_contour_at_one_is_excluded():
    # a zero at z = 1 stays outside the shrunken contour
    roots = unit_disk_roots(lambda z: (z - 1.0) * (z + 0.25), 1)
    assert roots[0] == pytest.approx(-0.25)


def test_single_interior_root_of_quadratic_kernel():
    roots = unit_disk_roots(lambda z: z - 0.25 - 0.25 * z * z, 1)
    assert len(roots) == 1
    assert roots[0] == pytest.approx(2.0 - np.sqrt(3.0), abs=1e-10)


def test_count_mismatch_raises():
    with pytest.raises(RootCountError):
        unit_disk_roots(lambda z: z - 0.5, 2)


def test_eigenvalue_fixed_points_of_scalar_kernel():
    # z = a(z) with a(z) = 0.25 + 0.5 z^2 has the fixed point 1 - sqrt(0.5) inside the disk
    points = eigenvalue_fixed_points(lambda z: np.array([[0.25 + 0.5 * z * z]]), 1)
    assert points and points[0] == pytest.approx(1.0 - np.sqrt(0.5), abs=1e-10)
