"""
Counting and locating zeros of an analytic scalar function inside the unit disk.

Zeros are counted with the argument principle on an adaptively refined
contour. Candidate roots (typically eigenvalue fixed points) are polished
with a secant iteration; when candidates do not account for every zero the
disk is subdivided into sectors and each sector is counted and searched.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import RootCountError
from .policy import DEFAULT_POLICY, NumericPolicy

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi

ComplexFn = Callable[[complex], complex]
PathFn = Callable[[float], complex]


def _phase_step(w1: complex, w0: complex) -> float:
    return float(np.angle(w1 / w0))


def winding_number(g: ComplexFn, path: PathFn, policy: NumericPolicy = DEFAULT_POLICY) -> int:
    """Winding number of g along a closed path parametrized on [0, 1].

    Intervals are bisected until both halves agree with the whole and each
    phase increment stays below ``policy.contour_max_step``.
    """
    def value(t: float) -> complex:
        w = complex(g(path(t)))
        if w == 0 or not np.isfinite(w):
            raise RootCountError(f"function vanishes or is undefined on the contour at z = {path(t):.6g}")
        return w

    def accumulate(t0, w0, t1, w1, depth) -> float:
        whole = _phase_step(w1, w0)
        tm = 0.5 * (t0 + t1)
        wm = value(tm)
        left, right = _phase_step(wm, w0), _phase_step(w1, wm)
        settled = (abs(left + right - whole) < 1e-9
                   and abs(left) < policy.contour_max_step
                   and abs(right) < policy.contour_max_step)
        if settled:
            return left + right
        if depth >= policy.max_subdivision_depth:
            raise RootCountError(f"contour refinement did not settle near z = {path(tm):.6g}")
        return accumulate(t0, w0, tm, wm, depth + 1) + accumulate(tm, wm, t1, w1, depth + 1)

    grid = np.linspace(0.0, 1.0, policy.contour_initial_points + 1)
    values = [value(t) for t in grid[:-1]]
    values.append(values[0])
    total = 0.0
    for i in range(len(grid) - 1):
        total += accumulate(grid[i], values[i], grid[i + 1], values[i + 1], 0)
    turns = total / TWO_PI
    count = int(round(turns))
    if abs(turns - count) > 1e-3:
        raise RootCountError(f"winding number {turns:.6f} is not an integer")
    return count


def circle_path(radius: float, center: complex = 0.0) -> PathFn:
    return lambda t: center + radius * np.exp(1j * TWO_PI * t)


@dataclass(frozen=True)
class _Sector:
    """Annular sector r0 <= |z| <= r1, th0 <= arg z <= th1 (a full disk when r0 == 0 and the span is 2 pi)."""

    r0: float
    r1: float
    th0: float
    th1: float

    @property
    def is_disk(self) -> bool:
        return self.r0 == 0.0 and self.th1 - self.th0 >= TWO_PI

    @property
    def size(self) -> float:
        return max(self.r1 - self.r0, self.r1 * (self.th1 - self.th0))

    @property
    def center(self) -> complex:
        if self.is_disk:
            return 0.0j
        r = 0.5 * (self.r0 + self.r1)
        return r * np.exp(0.5j * (self.th0 + self.th1))

    def contains(self, z: complex, slack: float) -> bool:
        r = abs(z)
        if self.is_disk:
            return r <= self.r1 + slack
        th = (np.angle(z) - self.th0) % TWO_PI
        return (self.r0 - slack <= r <= self.r1 + slack
                and th <= (self.th1 - self.th0) + slack / max(r, 1e-12))

    def path(self) -> PathFn:
        if self.is_disk:
            return circle_path(self.r1)
        r0, r1, th0, th1 = self.r0, self.r1, self.th0, self.th1

        def point(t: float) -> complex:
            u = 4.0 * (t % 1.0)
            leg, f = int(u), u - int(u)
            if leg == 0:
                return (r0 + f * (r1 - r0)) * np.exp(1j * th0)
            if leg == 1:
                return r1 * np.exp(1j * (th0 + f * (th1 - th0)))
            if leg == 2:
                return (r1 - f * (r1 - r0)) * np.exp(1j * th1)
            return r0 * np.exp(1j * (th1 - f * (th1 - th0)))

        return point

    def nudged(self) -> "_Sector":
        if self.is_disk:
            return _Sector(0.0, self.r1 * (1 + 1e-7), 0.0, TWO_PI)
        return _Sector(self.r0 * (1 - 1e-7), self.r1 * (1 + 1e-7), self.th0 - 1e-7, self.th1 + 1e-7)

    def children(self) -> List["_Sector"]:
        if self.is_disk:
            inner = _Sector(0.0, 0.5 * self.r1, 0.0, TWO_PI)
            offset = 0.1234
            quarters = [offset + q * np.pi / 2 for q in range(5)]
            return [inner] + [_Sector(0.5 * self.r1, self.r1, quarters[q], quarters[q + 1]) for q in range(4)]
        rm = 0.5 * (self.r0 + self.r1)
        tm = 0.5 * (self.th0 + self.th1)
        return [
            _Sector(self.r0, rm, self.th0, tm),
            _Sector(self.r0, rm, tm, self.th1),
            _Sector(rm, self.r1, self.th0, tm),
            _Sector(rm, self.r1, tm, self.th1),
        ]


def polish_root(g: ComplexFn, guess: complex, known: Sequence[complex] = (),
                policy: NumericPolicy = DEFAULT_POLICY) -> Optional[complex]:
    """Secant iteration from ``guess`` with already-found roots deflated out."""
    known = list(known)

    def deflated(z):
        w = g(z)
        for r in known:
            w = w / (z - r)
        return w

    try:
        z0 = complex(guess)
        z = optimize.newton(deflated, z0, x1=z0 * (1 + 1e-4) + 1e-4, tol=1e-14, maxiter=100)
    except (RuntimeError, ZeroDivisionError, OverflowError, FloatingPointError):
        return None
    z = complex(z)
    if not np.isfinite(z) or abs(g(z)) > policy.root_residual:
        return None
    return z


def _is_new(z: complex, roots: Iterable[complex], tol: float = 1e-8) -> bool:
    return all(abs(z - r) > tol for r in roots)


def unit_disk_roots(g: ComplexFn, expected: int, candidates: Iterable[complex] = (),
                    policy: NumericPolicy = DEFAULT_POLICY) -> List[complex]:
    """All zeros of g strictly inside the unit disk, with multiplicity.

    Args:
        g: analytic function on a neighbourhood of the closed unit disk
        expected: number of zeros that must lie inside |z| < 1 - contour_epsilon
        candidates: starting guesses, e.g. eigenvalue fixed points

    Returns:
        List of roots ordered by modulus then argument

    Raises:
        RootCountError: the contour count differs from ``expected`` or the
            search cannot recover every root
    """
    radius = 1.0 - policy.contour_epsilon
    counted = winding_number(g, circle_path(radius), policy)
    if counted != expected:
        raise RootCountError(
            f"argument principle counts {counted} zeros inside |z| < {radius}, expected {expected}"
        )
    if expected == 0:
        return []

    roots: List[complex] = []
    for guess in candidates:
        z = polish_root(g, guess, policy=policy)
        if z is not None and abs(z) < radius and _is_new(z, roots):
            roots.append(z)
        if len(roots) == expected:
            break

    if len(roots) != expected:
        logger.debug("candidates gave %d of %d roots; subdividing the disk", len(roots), expected)
        roots = _subdivide(g, _Sector(0.0, radius, 0.0, TWO_PI), expected, policy, 0)

    for z in roots:
        if abs(g(z)) > policy.root_residual:
            raise RootCountError(f"root {z:.6g} has residual {abs(g(z)):.3e}")
    return sorted(roots, key=lambda z: (round(abs(z), 12), np.angle(z)))


def _subdivide(g: ComplexFn, region: _Sector, count: int, policy: NumericPolicy, depth: int) -> List[complex]:
    if count == 0:
        return []
    if region.size < 1e-8:
        z = polish_root(g, region.center, policy=policy)
        return [z if z is not None else region.center] * count
    if count == 1:
        z = polish_root(g, region.center, policy=policy)
        if z is not None and region.contains(z, 1e-9):
            return [z]
    if depth >= policy.max_subdivision_depth:
        raise RootCountError(f"root search did not converge near {region.center:.6g}")

    found: List[complex] = []
    for child in region.children():
        try:
            inside = winding_number(g, child.path(), policy)
        except RootCountError:
            # zero on a shared edge
            child = child.nudged()
            inside = winding_number(g, child.path(), policy)
        found.extend(_subdivide(g, child, inside, policy, depth + 1))
    if len(found) != count:
        raise RootCountError(f"sector search found {len(found)} roots, expected {count}")
    return found


def eigenvalue_fixed_points(matrix_fn: Callable[[complex], np.ndarray], n: int,
                            exclude: complex = 1.0, policy: NumericPolicy = DEFAULT_POLICY) -> List[complex]:
    """Fixed points z = lambda_j(A(z)) traced along each eigenvalue branch.

    The branch is followed by picking the eigenvalue nearest to the current
    iterate. Points within 1e-6 of ``exclude`` or outside the unit disk are
    dropped.
    """
    start = np.linalg.eigvals(np.asarray(matrix_fn(0.0), dtype=complex))
    points: List[complex] = []
    for z in start[:n]:
        z = complex(z)
        for _ in range(policy.fixed_point_iterations):
            ev = np.linalg.eigvals(np.asarray(matrix_fn(z), dtype=complex))
            z_new = complex(ev[np.argmin(np.abs(ev - z))])
            if abs(z_new - z) < 1e-13:
                z = z_new
                break
            z = z_new
        if abs(z) < 1.0 and abs(z - exclude) > 1e-6 and _is_new(z, points, 1e-7):
            points.append(z)
    return points
