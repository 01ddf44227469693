"""
Matrix kernels used by the analytic pipeline: matrix exponentials, the
truncated Laplace integral of a matrix exponential, jet-aware linear solves
and null vectors.
"""

import logging
import warnings
from typing import Optional, Tuple

import numpy as np
from scipy import linalg as sla

from .errors import ModelError, NumericalError, SingularMatrixError
from .jets import Jet
from .policy import DEFAULT_POLICY, NumericPolicy

logger = logging.getLogger(__name__)


def mat_exp(m: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(M t) by scaling and squaring with Pade approximation."""
    a = np.asarray(m) * t
    if not np.all(np.isfinite(a)):
        raise NumericalError("matrix exponential of a non-finite matrix")
    out = sla.expm(a)
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"matrix exponential overflowed (t = {t})")
    return out


def transient_integral(m: np.ndarray, s, horizon: float):
    """Integral over [0, horizon] of exp(-s t) exp(M t) dt.

    ``s`` may be a complex scalar or a scalar jet. All Taylor coefficients in
    ``s`` come from one exponential of a block-bidiagonal matrix whose
    diagonal holds copies of ``M - s0 I`` followed by a zero block.

    Args:
        m: square matrix M
        s: evaluation point (number or Jet)
        horizon: upper integration limit, must be >= 0

    Returns:
        ndarray for numeric ``s``, matrix-valued Jet for a jet ``s``
    """
    if horizon < 0 or not np.isfinite(horizon):
        raise ModelError(f"integration horizon must be finite and >= 0, got {horizon}")
    m = np.asarray(m)
    n = m.shape[0]
    s_jet = s if isinstance(s, Jet) else None
    order = s_jet.order if s_jet is not None else 0
    s0 = s_jet.value.item() if s_jet is not None else s

    shifted = m - s0 * np.eye(n)
    blocks = order + 2
    big = np.zeros((blocks * n, blocks * n), dtype=np.result_type(shifted, float))
    for b in range(order + 1):
        big[b * n:(b + 1) * n, b * n:(b + 1) * n] = shifted
        big[b * n:(b + 1) * n, (b + 1) * n:(b + 2) * n] = np.eye(n)
    e = mat_exp(big, horizon)

    last = slice((order + 1) * n, (order + 2) * n)
    # block row order-k holds the integral of t^k / k! exp((M - s0) t)
    coeffs = np.stack([
        (-1.0) ** k * e[(order - k) * n:(order - k + 1) * n, last]
        for k in range(order + 1)
    ])
    if s_jet is None:
        return coeffs[0]
    return Jet(coeffs).compose(s_jet)


def _factor(a: np.ndarray, policy: NumericPolicy):
    """LU factorization with a relative pivot check."""
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise SingularMatrixError("linear system has non-finite entries")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=False)
    scale = max(float(np.max(np.abs(a))), np.finfo(float).tiny)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < policy.pivot_tolerance * scale:
        raise SingularMatrixError(
            f"singular system: pivot {pivots.min():.3e} below {policy.pivot_tolerance:g} of scale {scale:.3e}"
        )
    return lu, piv


def _check_residual(a, x, b, policy: NumericPolicy):
    residual = np.linalg.norm(a @ x - b)
    bound = policy.solve_residual * max(np.linalg.norm(b), np.linalg.norm(a) * np.linalg.norm(x), 1e-300)
    if residual > bound:
        logger.warning("linear solve residual %.3e exceeds %.3e", residual, bound)


def solve_linear(a, b, policy: NumericPolicy = DEFAULT_POLICY):
    """Solve A X = B where either side may be a jet.

    Jets are solved order by order against one factorization of the
    constant term.
    """
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        factors = _factor(a, policy)
        x = sla.lu_solve(factors, b, check_finite=False)
        _check_residual(np.asarray(a), x, np.asarray(b), policy)
        return x

    a_c = a.coeffs if isinstance(a, Jet) else np.asarray(a)[None]
    b_c = b.coeffs if isinstance(b, Jet) else np.asarray(b)[None]
    if isinstance(a, Jet) and isinstance(b, Jet):
        order = min(a.order, b.order)
    else:
        order = (a if isinstance(a, Jet) else b).order
    factors = _factor(a_c[0], policy)

    xs = []
    for k in range(order + 1):
        rhs = b_c[k].astype(np.result_type(b_c, a_c, float)) if k < len(b_c) else np.zeros_like(xs[0])
        for j in range(1, min(k, len(a_c) - 1) + 1):
            rhs = rhs - a_c[j] @ xs[k - j]
        xs.append(sla.lu_solve(factors, rhs, check_finite=False))
    _check_residual(a_c[0], xs[0], b_c[0], policy)
    return Jet(np.stack(xs))


def solve_rows(d, b, policy: NumericPolicy = DEFAULT_POLICY):
    """Solve X D = B for row vectors (or stacked rows) X."""
    if (b.ndim if isinstance(b, Jet) else np.ndim(b)) == 1:
        return solve_linear(d.T, b, policy)
    return solve_linear(d.T, b.T, policy).T


def stationary_vector(m: np.ndarray, policy: NumericPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Row vector x with x M = 0 and sum(x) = 1.

    ``M`` is a generator, or ``I - P`` for a stochastic matrix ``P``.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    bordered = m.copy()
    bordered[:, -1] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    return solve_linear(bordered.T, rhs, policy)


def right_null_vector(a: np.ndarray, policy: NumericPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Unit vector spanning the right null space of a rank-deficient matrix."""
    a = np.asarray(a)
    _, sv, vh = np.linalg.svd(a)
    top = max(sv[0], np.finfo(float).tiny)
    if sv[-1] > policy.rank_tolerance * top:
        raise SingularMatrixError(
            f"matrix is not rank deficient: smallest singular value {sv[-1]:.3e} (largest {top:.3e})"
        )
    if len(sv) > 1 and sv[-2] <= policy.rank_tolerance * top:
        logger.warning("null space has dimension > 1 (singular values %s)", sv[-3:])
    return vh[-1].conj()


def solve_singular_rows(d: Jet, b: Jet, policy: NumericPolicy = DEFAULT_POLICY,
                        left_null: Optional[np.ndarray] = None) -> Jet:
    """Solve x D = b around a point where D(0) is singular.

    D(0) must have the all-ones vector as its only right null vector, as
    ``I - P`` does for an irreducible stochastic ``P``. Each order of the
    solution is fixed by the solvability condition one order higher, so an
    input of order K yields an output of order K - 1.

    Args:
        d: matrix jet D
        b: row (or stacked rows) jet b, last axis of length N
        left_null: row vector pi with pi D(0) = 0; computed when omitted

    Returns:
        Jet of x with order min(d.order, b.order) - 1
    """
    order = min(d.order, b.order)
    if order < 1:
        raise NumericalError("singular solve needs jets of order >= 1")
    dc, bc = d.coeffs, b.coeffs
    n = dc.shape[-1]
    ones = np.ones(n)
    pi = stationary_vector(dc[0], policy) if left_null is None else np.asarray(left_null)

    inconsistency = np.max(np.abs(bc[0] @ ones)) if bc[0].size else 0.0
    if inconsistency > 1e-8 * max(1.0, float(np.max(np.abs(bc[0])))):
        logger.warning("singular solve right-hand side is inconsistent (%.3e)", inconsistency)

    bordered = np.array(dc[0], dtype=np.result_type(dc, float))
    bordered[:, -1] = 1.0
    factors = _factor(bordered.T, policy)

    def particular(c):
        rhs = np.array(c, dtype=np.result_type(c, bordered))
        rhs[..., -1] = 0.0
        return sla.lu_solve(factors, rhs.T, check_finite=False).T

    drift = pi @ dc[1] @ ones
    if abs(drift) < policy.pivot_tolerance:
        raise SingularMatrixError("first-order term does not resolve the singular direction")

    xs = []
    x_hat = particular(bc[0])
    for k in range(order):
        c_next = np.array(bc[k + 1], dtype=np.result_type(bc, x_hat))
        for j in range(k):
            c_next = c_next - xs[j] @ dc[k + 1 - j]
        c_next = c_next - x_hat @ dc[1]
        alpha = (c_next @ ones) / drift
        xs.append(x_hat + np.multiply.outer(alpha, pi))
        c_next = c_next - np.multiply.outer(alpha, pi @ dc[1])
        x_hat = particular(c_next)
    return Jet(np.stack(xs))


def matrix_power(m, k: int):
    """Integer power of a matrix or matrix jet."""
    if k < 0:
        raise ModelError(f"negative matrix power {k}")
    if not isinstance(m, Jet):
        return np.linalg.matrix_power(np.asarray(m), k)
    n = m.shape[-1]
    result = Jet.constant(np.eye(n, dtype=m.coeffs.dtype), m.order)
    base = m
    while k:
        if k & 1:
            result = result @ base
        base = base @ base
        k >>= 1
    return result


def split_real(x: np.ndarray, tolerance: float) -> Tuple[np.ndarray, float]:
    """Real part of ``x`` and the largest imaginary component discarded."""
    x = np.asarray(x)
    if np.iscomplexobj(x):
        imag = float(np.max(np.abs(x.imag))) if x.size else 0.0
        if imag > tolerance:
            raise NumericalError(f"expected a real result, imaginary part {imag:.3e}")
        return x.real.copy(), imag
    return x.copy(), 0.0
