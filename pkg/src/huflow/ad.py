"""Vectorized forward-mode derivatives over a small fixed set of seed directions.

A ``Dual`` carries a batch of values with shape ``(n,)`` and the partial
derivatives of every entry with respect to ``k`` seed unknowns, shape
``(n, k)``.  All interface-flux kernels are written in terms of ``Dual``
arithmetic, which makes the Jacobian blocks exact up to round-off.  Branch
selections (upwind picks) go through :func:`where`, which switches value and
derivative rows together, so the selection indicator is treated as locally
constant.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Dual", "constant", "variable", "where", "arctan", "as_dual"]


def _col(x: np.ndarray) -> np.ndarray:
    """Broadcast a value-shaped operand against a derivative block."""
    return np.asarray(x)[..., None]


@dataclass
class Dual:
    """Batch of scalars with partial derivatives along fixed seed directions."""

    val: np.ndarray  # shape (n,)
    der: np.ndarray  # shape (n, k)

    # keep ndarray <op> Dual out of numpy's ufunc machinery so it falls
    # back to the reflected operators below instead of object arrays
    __array_ufunc__ = None

    @property
    def ndir(self) -> int:
        return self.der.shape[-1]

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.der + other.der)
        return Dual(self.val + np.asarray(other), self.der.copy())

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.der - other.der)
        return Dual(self.val - np.asarray(other), self.der.copy())

    def __rsub__(self, other):
        return Dual(np.asarray(other) - self.val, -self.der)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.val * other.val,
                self.der * _col(other.val) + other.der * _col(self.val),
            )
        other = np.asarray(other)
        return Dual(self.val * other, self.der * _col(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.val
            val = self.val * inv
            return Dual(val, (self.der - other.der * _col(val)) * _col(inv))
        inv = 1.0 / np.asarray(other)
        return Dual(self.val * inv, self.der * _col(inv))

    def __rtruediv__(self, other):
        inv = 1.0 / self.val
        val = np.asarray(other) * inv
        return Dual(val, -self.der * _col(val * inv))

    def __neg__(self):
        return Dual(-self.val, -self.der)

    def __pow__(self, exponent: float):
        # Monomial exponents are >= 1 everywhere in this package, so the
        # derivative factor exponent - 1 never goes negative at val == 0.
        val = self.val**exponent
        return Dual(val, self.der * _col(exponent * self.val ** (exponent - 1.0)))

    def copy(self) -> "Dual":
        return Dual(self.val.copy(), self.der.copy())


def constant(values, ndir: int) -> Dual:
    """Wrap values with zero derivatives."""
    val = np.atleast_1d(np.asarray(values, dtype=float))
    return Dual(val, np.zeros((val.shape[0], ndir)))


def variable(values, index: int, ndir: int) -> Dual:
    """Wrap values seeded as the unknown at the given seed column."""
    d = constant(values, ndir)
    d.der[:, index] = 1.0
    return d


def as_dual(x, ndir: int) -> Dual:
    return x if isinstance(x, Dual) else constant(x, ndir)


def where(mask, a, b):
    """Row-wise selection that follows both value and derivative."""
    if isinstance(a, Dual) or isinstance(b, Dual):
        ndir = a.ndir if isinstance(a, Dual) else b.ndir
        a = as_dual(a, ndir)
        b = as_dual(b, ndir)
        mask = np.asarray(mask)
        return Dual(
            np.where(mask, a.val, b.val),
            np.where(mask[..., None], a.der, b.der),
        )
    return np.where(mask, a, b)


def arctan(x):
    if isinstance(x, Dual):
        # 1/(1+x^2) underflows to 0 for huge |x|; the overflow in x*x is benign.
        with np.errstate(over="ignore"):
            slope = 1.0 / (1.0 + x.val * x.val)
        return Dual(np.arctan(x.val), x.der * _col(slope))
    return np.arctan(x)
