"""
Matrix exponentials, truncated Laplace integrals and jet-aware solves.
"""

import numpy as np
import pytest
from scipy import integrate

from src.utils.errors import ModelError, SingularMatrixError
from src.utils.jets import Jet
from src.utils.linalg import (mat_exp, matrix_power, right_null_vector, solve_linear,
                              solve_singular_rows, stationary_vector, transient_integral)


def test_mat_exp_of_diagonal_and_nilpotent():
    assert np.allclose(mat_exp(np.diag([1.0, -2.0]), 0.5), np.diag(np.exp([0.5, -1.0])), rtol=1e-13)
    n = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert np.allclose(mat_exp(n, 3.0), [[1.0, 3.0], [0.0, 1.0]])


def test_mat_exp_semigroup():
    q = np.array([[-1 / 60, 1 / 60], [1 / 240, -1 / 240]])
    assert np.allclose(mat_exp(q, 30.0 + 45.0), mat_exp(q, 30.0) @ mat_exp(q, 45.0), rtol=1e-12)
    assert np.allclose(mat_exp(q, 0.0), np.eye(2))


def test_transient_integral_scalar_cases():
    # M = 0, s = 1: integral of exp(-t) over [0, T]
    assert transient_integral(np.zeros((1, 1)), 1.0, 50.0)[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert transient_integral(np.zeros((1, 1)), 0.0, 3.0)[0, 0] == pytest.approx(3.0)
    m = np.array([[-0.3]])
    expected = (1 - np.exp(-(0.5 + 0.3) * 4.0)) / (0.5 + 0.3)
    assert transient_integral(m, 0.5, 4.0)[0, 0] == pytest.approx(expected, rel=1e-12)


def test_transient_integral_zero_horizon_and_negative_horizon():
    m = np.array([[-1.0, 1.0], [0.5, -0.5]])
    assert np.allclose(transient_integral(m, 0.2, 0.0), 0.0)
    with pytest.raises(ModelError):
        transient_integral(m, 0.2, -1.0)


def test_transient_integral_matches_quadrature():
    m = np.array([[-0.4, 0.3], [0.2, -0.6]])
    s, horizon = 0.15, 7.0
    got = transient_integral(m, s, horizon)
    for i in range(2):
        for j in range(2):
            val, _ = integrate.quad(lambda t: np.exp(-s * t) * mat_exp(m, t)[i, j], 0.0, horizon)
            assert got[i, j] == pytest.approx(val, rel=1e-9)


def test_transient_integral_jet_derivatives():
    m = np.array([[-0.4, 0.3], [0.2, -0.6]])
    horizon = 5.0
    series = transient_integral(m, Jet.variable(0.0, 2), horizon)
    # d/ds at 0 is minus the integral of t exp(M t)
    for i in range(2):
        for j in range(2):
            first, _ = integrate.quad(lambda t: -t * mat_exp(m, t)[i, j], 0.0, horizon)
            second, _ = integrate.quad(lambda t: 0.5 * t * t * mat_exp(m, t)[i, j], 0.0, horizon)
            assert series.coeffs[1][i, j] == pytest.approx(first, rel=1e-9)
            assert series.coeffs[2][i, j] == pytest.approx(second, rel=1e-9)


def test_transient_integral_jet_away_from_zero_matches_finite_difference():
    m = np.array([[-0.4, 0.3], [0.2, -0.6]])
    s0, h = 0.3, 1e-5
    series = transient_integral(m, Jet.variable(s0, 1), 6.0)
    fd = (transient_integral(m, s0 + h, 6.0) - transient_integral(m, s0 - h, 6.0)) / (2 * h)
    assert np.allclose(series.coeffs[1], fd, rtol=1e-6)


def test_solve_linear_jet_matches_derivative_of_inverse():
    a0 = np.array([[2.0, 1.0], [0.5, 3.0]])
    a1 = np.array([[0.1, 0.0], [0.3, -0.2]])
    s = Jet.variable(0.0, 2)
    a = a0 + s * a1
    x = solve_linear(a, np.eye(2))
    inv = np.linalg.inv(a0)
    assert np.allclose(x.coeffs[0], inv)
    assert np.allclose(x.coeffs[1], -inv @ a1 @ inv)


def test_singular_matrix_rejected():
    with pytest.raises(SingularMatrixError):
        solve_linear(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))


def test_stationary_vector_of_generator():
    q = np.array([[-1 / 60, 1 / 60], [1 / 240, -1 / 240]])
    pi = stationary_vector(q)
    assert np.allclose(pi, [0.2, 0.8])


def test_right_null_vector():
    p = np.array([[0.3, 0.7], [0.6, 0.4]])
    v = right_null_vector(np.eye(2) - p)
    assert np.allclose(v / v[0], [1.0, 1.0])
    with pytest.raises(SingularMatrixError):
        right_null_vector(np.eye(2))


def test_singular_row_solve_recovers_regular_solution():
    # x(e) D(e) = b(e) with D(e) = I - P - e C, b chosen from a known x(e)
    p = np.array([[0.5, 0.5], [0.2, 0.8]])
    c = np.array([[0.3, 0.1], [0.0, 0.4]])
    e = Jet.variable(0.0, 4)
    d = np.eye(2) - p - e * c
    x_true = Jet(np.array([[1.0, 2.0], [0.5, -1.0], [0.25, 0.0], [0.1, 0.1], [0.0, 0.3]]))
    b = x_true @ d
    x = solve_singular_rows(d, b)
    assert x.order == 3
    assert np.allclose(x.coeffs, x_true.coeffs[:4], atol=1e-10)


def test_matrix_power_of_jet():
    s = Jet.variable(0.0, 2)
    m = np.eye(2) + s * np.array([[0.0, 1.0], [0.0, 0.0]])
    cube = matrix_power(m, 3)
    assert np.allclose(cube.coeffs[1], [[0.0, 3.0], [0.0, 0.0]])
    assert np.allclose(matrix_power(np.diag([2.0, 3.0]), 2), np.diag([4.0, 9.0]))
