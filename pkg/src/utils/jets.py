"""
Truncated Taylor series ("jets") with array-valued coefficients.

A jet of order K stores c_0..c_K of a series in a small increment epsilon.
Coefficients may be scalars, vectors or matrices; every arithmetic operation
truncates to the smaller order of its operands. Moments of transforms are
read off the coefficients at the expansion point.
"""

import math
from typing import Union

import numpy as np

from .errors import JetError

Number = Union[int, float, complex, np.number]


def _lift(a: np.ndarray, b: np.ndarray):
    """Insert axes after the order axis so both coefficient arrays have equal rank."""
    if a.ndim < b.ndim:
        a = a.reshape(a.shape[:1] + (1,) * (b.ndim - a.ndim) + a.shape[1:])
    elif b.ndim < a.ndim:
        b = b.reshape(b.shape[:1] + (1,) * (a.ndim - b.ndim) + b.shape[1:])
    return a, b


class Jet:
    """Truncated power series sum_k coeffs[k] * epsilon**k."""

    __array_ufunc__ = None
    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        arr = np.array(coeffs)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.dtype.kind not in "fc":
            arr = arr.astype(float)
        if not np.all(np.isfinite(arr)):
            raise JetError("jet coefficients must be finite")
        arr.setflags(write=False)
        self.coeffs = arr

    # ------------------------------------------------------------------ builders

    @classmethod
    def constant(cls, value, order: int) -> "Jet":
        value = np.asarray(value)
        coeffs = np.zeros((order + 1,) + value.shape, dtype=np.result_type(value, float))
        coeffs[0] = value
        return cls(coeffs)

    @classmethod
    def variable(cls, value: Number, order: int) -> "Jet":
        """The jet of the identity map around ``value``."""
        coeffs = np.zeros(order + 1, dtype=np.result_type(value, float))
        coeffs[0] = value
        if order >= 1:
            coeffs[1] = 1.0
        return cls(coeffs)

    # ---------------------------------------------------------------- accessors

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def shape(self):
        return self.coeffs.shape[1:]

    @property
    def ndim(self) -> int:
        return self.coeffs.ndim - 1

    @property
    def value(self):
        return self.coeffs[0]

    @property
    def real(self) -> "Jet":
        return Jet(self.coeffs.real)

    @property
    def T(self) -> "Jet":
        if self.ndim < 2:
            return self
        return Jet(np.swapaxes(self.coeffs, -1, -2))

    def derivative(self, k: int):
        """k-th derivative at the expansion point."""
        return math.factorial(k) * self.coeffs[k]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise JetError(f"cannot raise jet order from {self.order} to {order}")
        return Jet(self.coeffs[: order + 1])

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.coeffs[(slice(None),) + idx])

    def sum(self, axis=None) -> "Jet":
        if axis is None:
            return Jet(self.coeffs.reshape(self.order + 1, -1).sum(axis=1))
        return Jet(self.coeffs.sum(axis=axis + 1 if axis >= 0 else axis))

    def __repr__(self) -> str:
        return f"Jet(order={self.order}, shape={self.shape}, value={self.value!r})"

    # --------------------------------------------------------------- arithmetic

    def _pair(self, other):
        if isinstance(other, Jet):
            k = min(self.order, other.order)
            return _lift(self.coeffs[: k + 1], other.coeffs[: k + 1])
        other = np.asarray(other)
        padded = np.zeros((self.order + 1,) + other.shape, dtype=np.result_type(other, float))
        padded[0] = other
        return _lift(self.coeffs, padded)

    def __add__(self, other) -> "Jet":
        a, b = self._pair(other)
        return Jet(a + b)

    __radd__ = __add__

    def __sub__(self, other) -> "Jet":
        a, b = self._pair(other)
        return Jet(a - b)

    def __rsub__(self, other) -> "Jet":
        a, b = self._pair(other)
        return Jet(b - a)

    def __neg__(self) -> "Jet":
        return Jet(-self.coeffs)

    def __pos__(self) -> "Jet":
        return self

    def __mul__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            other = np.asarray(other)
            a, _ = _lift(self.coeffs, np.empty((1,) + other.shape))
            return Jet(a * other)
        a, b = self._pair(other)
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=np.result_type(a, b))
        for k in range(out.shape[0]):
            for j in range(k + 1):
                out[k] += a[j] * b[k - j]
        return Jet(out)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            other = np.asarray(other)
            if np.any(other == 0):
                raise JetError("division of a jet by zero")
            return self * (1.0 / other)
        a, b = self._pair(other)
        if np.any(b[0] == 0):
            raise JetError("division by a jet with zero constant term")
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=np.result_type(a, b))
        for k in range(out.shape[0]):
            acc = a[k] - sum((b[j] * out[k - j] for j in range(1, k + 1)), np.zeros_like(out[0]))
            out[k] = acc / b[0]
        return Jet(out)

    def __rtruediv__(self, other) -> "Jet":
        return Jet.constant(other, self.order) / self

    def __pow__(self, n: int) -> "Jet":
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise JetError(f"jets support non-negative integer powers only, got {n!r}")
        result = Jet.constant(np.ones(self.shape, dtype=self.coeffs.dtype), self.order)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __matmul__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            return Jet(np.matmul(self.coeffs, np.asarray(other)))
        k_max = min(self.order, other.order)
        terms = []
        for k in range(k_max + 1):
            acc = None
            for j in range(k + 1):
                term = np.matmul(self.coeffs[j], other.coeffs[k - j])
                acc = term if acc is None else acc + term
            terms.append(acc)
        return Jet(np.stack(terms))

    def __rmatmul__(self, other) -> "Jet":
        other = np.asarray(other)
        if self.ndim == 1:
            return Jet(np.matmul(other, self.coeffs.T).T)
        return Jet(np.matmul(other, self.coeffs))

    # ---------------------------------------------------------------- functions

    def exp(self) -> "Jet":
        """Elementwise exponential."""
        a = self.coeffs
        out = np.zeros_like(a, dtype=np.result_type(a, float))
        out[0] = np.exp(a[0])
        for k in range(1, a.shape[0]):
            out[k] = sum(j * a[j] * out[k - j] for j in range(1, k + 1)) / k
        return Jet(out)

    def compose(self, inner: "Jet") -> "Jet":
        """Substitute ``epsilon = inner - inner.value`` into this series.

        ``self`` is read as a series around the constant term of ``inner``;
        ``inner`` must be scalar-valued. The result has the smaller order.
        """
        if inner.ndim != 0:
            raise JetError("only scalar jets can be composed into a series")
        order = min(self.order, inner.order)
        delta = inner.truncate(order) - inner.value
        result = Jet.constant(self.coeffs[order], order)
        for k in range(order - 1, -1, -1):
            result = result * delta + self.coeffs[k]
        return result


JetLike = Union[Jet, np.ndarray, Number]


def value_of(x):
    """Constant term of a jet, or ``x`` itself."""
    return x.value if isinstance(x, Jet) else x


def exp(x):
    """Exponential of a scalar, array or jet."""
    if isinstance(x, Jet):
        return x.exp()
    return np.exp(x)
