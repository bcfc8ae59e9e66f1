"""Vectorized forward-mode automatic differentiation.

A :class:`Dual` carries an array of values together with the derivative of
every entry with respect to ``N`` seed variables (trailing axis of ``der``).
Seeding all decision variables at once yields a full gradient or Jacobian in
a single evaluation. NumPy ufuncs (``np.sin``, ``np.exp`` ...) dispatch to
Duals through ``__array_ufunc__``, so callbacks written against NumPy work
unchanged on floats, arrays and Duals.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class Dual:
    __slots__ = ("val", "der")
    __array_priority__ = 100

    def __init__(self, val, der):
        self.val = np.asarray(val, dtype=float)
        self.der = np.asarray(der, dtype=float)

    @classmethod
    def seed(cls, z) -> "Dual":
        z = np.asarray(z, dtype=float)
        return cls(z, np.eye(z.size).reshape(z.shape + (z.size,)))

    @property
    def shape(self):
        return self.val.shape

    @property
    def ndim(self):
        return self.val.ndim

    @property
    def nvars(self) -> int:
        return self.der.shape[-1]

    def __len__(self):
        return len(self.val)

    def __repr__(self):
        return f"Dual(val={self.val!r}, nvars={self.nvars})"

    def __getitem__(self, idx):
        if isinstance(idx, tuple):
            return Dual(self.val[idx], self.der[idx + (slice(None),)])
        return Dual(self.val[idx], self.der[idx])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        val = self.val.reshape(shape)
        return Dual(val, self.der.reshape(val.shape + (self.nvars,)))

    def sum(self, axis=None):
        if axis is None:
            axes = tuple(range(self.ndim))
        else:
            axes = tuple(a % self.ndim for a in np.atleast_1d(axis))
        return Dual(self.val.sum(axis=axes), self.der.sum(axis=axes))

    def _lift(self, other):
        other = np.asarray(other, dtype=float)
        return other, np.zeros(other.shape + (self.nvars,))

    # Broadcasting helper: derivative arrays need the value's trailing axes
    # aligned before the variable axis.
    @staticmethod
    def _bcast(a_val, b_val, a_der, b_der):
        shape = np.broadcast_shapes(a_val.shape, b_val.shape)
        nv = a_der.shape[-1]
        return (
            np.broadcast_to(a_der, shape + (nv,)) if a_der.shape[:-1] != shape else a_der,
            np.broadcast_to(b_der, shape + (nv,)) if b_der.shape[:-1] != shape else b_der,
        )

    def __add__(self, other):
        if isinstance(other, Dual):
            da, db = self._bcast(self.val, other.val, self.der, other.der)
            return Dual(self.val + other.val, da + db)
        other = np.asarray(other, dtype=float)
        val = self.val + other
        der = self.der if val.shape == self.val.shape else np.broadcast_to(
            self.der, val.shape + (self.nvars,))
        return Dual(val, der)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.val, -self.der)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.val * other.val,
                self.der * other.val[..., None] + other.der * self.val[..., None],
            )
        other = np.asarray(other, dtype=float)
        return Dual(self.val * other, self.der * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return self * other.reciprocal()
        other = np.asarray(other, dtype=float)
        return Dual(self.val / other, self.der / other[..., None])

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def reciprocal(self):
        inv = 1.0 / self.val
        return Dual(inv, -self.der * (inv**2)[..., None])

    def __pow__(self, p):
        if isinstance(p, Dual):
            return np.exp(p * np.log(self))
        p = float(p)
        if p == 0:
            return Dual(np.ones_like(self.val), np.zeros_like(self.der))
        if p == 2:
            return self * self
        return Dual(self.val**p, self.der * (p * self.val ** (p - 1))[..., None])

    def __rpow__(self, base):
        return np.exp(self * np.log(base))

    def __matmul__(self, other):
        other = np.asarray(other, dtype=float)
        val = self.val @ other
        if self.ndim == 1:
            der = np.einsum("aN,a...->...N", self.der, other)
        else:
            der = np.einsum("...abN,bc->...acN", self.der, other) if other.ndim == 2 else \
                np.einsum("...abN,b->...aN", self.der, other)
        return Dual(val, der)

    def __rmatmul__(self, other):
        other = np.asarray(other, dtype=float)
        val = other @ self.val
        if self.ndim == 1:
            der = np.einsum("...a,aN->...N", other, self.der)
        else:
            der = np.einsum("ab,...bcN->...acN", other, self.der)
        return Dual(val, der)

    # Comparisons act on values only (for branching in callbacks).
    def __lt__(self, other):
        return self.val < value(other)

    def __le__(self, other):
        return self.val <= value(other)

    def __gt__(self, other):
        return self.val > value(other)

    def __ge__(self, other):
        return self.val >= value(other)

    def __float__(self):
        return float(self.val)

    _UNARY = {
        np.sin: (np.sin, np.cos),
        np.cos: (np.cos, lambda x: -np.sin(x)),
        np.tan: (np.tan, lambda x: 1.0 / np.cos(x) ** 2),
        np.exp: (np.exp, np.exp),
        np.log: (np.log, lambda x: 1.0 / x),
        np.sqrt: (np.sqrt, lambda x: 0.5 / np.sqrt(x)),
        np.tanh: (np.tanh, lambda x: 1.0 - np.tanh(x) ** 2),
        np.arctan: (np.arctan, lambda x: 1.0 / (1.0 + x**2)),
        np.absolute: (np.absolute, np.sign),
    }

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs:
            return NotImplemented
        if ufunc in self._UNARY:
            f, df = self._UNARY[ufunc]
            x = inputs[0]
            return Dual(f(x.val), x.der * df(x.val)[..., None])
        if ufunc is np.square:
            return inputs[0] * inputs[0]
        if ufunc is np.negative:
            return -inputs[0]
        binary = {
            np.add: lambda a, b: a + b,
            np.subtract: lambda a, b: a - b,
            np.multiply: lambda a, b: a * b,
            np.true_divide: lambda a, b: a / b,
            np.power: lambda a, b: a**b,
            np.matmul: lambda a, b: a @ b,
        }
        if ufunc in binary:
            a, b = inputs
            if not isinstance(a, Dual):
                # Dual on the right: use reflected operators.
                reflected = {
                    np.add: b.__radd__, np.subtract: b.__rsub__,
                    np.multiply: b.__rmul__, np.true_divide: b.__rtruediv__,
                    np.power: b.__rpow__, np.matmul: b.__rmatmul__,
                }
                return reflected[ufunc](a)
            return binary[ufunc](a, b)
        return NotImplemented


def value(x):
    """Strip derivative information."""
    return x.val if isinstance(x, Dual) else x


def stack(items: Sequence, axis: int = 0, nvars: int | None = None):
    """``np.stack`` that accepts a mixture of Duals and plain numbers."""
    duals = [it for it in items if isinstance(it, Dual)]
    if not duals:
        return np.stack([np.asarray(it, dtype=float) for it in items], axis=axis)
    nv = duals[0].nvars if nvars is None else nvars
    shape = np.broadcast_shapes(*[np.shape(value(it)) for it in items])
    vals, ders = [], []
    for it in items:
        if isinstance(it, Dual):
            vals.append(np.broadcast_to(it.val, shape))
            ders.append(np.broadcast_to(it.der, shape + (nv,)))
        else:
            vals.append(np.broadcast_to(np.asarray(it, dtype=float), shape))
            ders.append(np.zeros(shape + (nv,)))
    axis = axis % (len(shape) + 1)
    return Dual(np.stack(vals, axis=axis), np.stack(ders, axis=axis))


def concatenate(items: Sequence, nvars: int | None = None):
    """Concatenate 1-D pieces (Duals or arrays) into one flat vector."""
    duals = [it for it in items if isinstance(it, Dual)]
    flat = [np.ravel(value(it)) if not isinstance(it, Dual) else it.reshape(-1) for it in items]
    if not duals:
        return np.concatenate(flat) if flat else np.empty(0)
    nv = duals[0].nvars if nvars is None else nvars
    vals, ders = [], []
    for it in flat:
        if isinstance(it, Dual):
            vals.append(it.val)
            ders.append(it.der)
        else:
            vals.append(it)
            ders.append(np.zeros((it.size, nv)))
    return Dual(np.concatenate(vals), np.concatenate(ders, axis=0))


def _check_finite(x, what: str):
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"{what} returned a non-finite value")


def gradient(f: Callable, z, differentiable: bool = True) -> np.ndarray:
    """Gradient of the scalar function ``f`` at ``z``.

    Forward-mode AD by default; central differences when
    ``differentiable=False``.
    """
    z = np.asarray(z, dtype=float)
    if not differentiable:
        return fd_gradient(f, z)
    out = f(Dual.seed(z))
    if not isinstance(out, Dual):
        _check_finite(out, "objective")
        return np.zeros(z.size)
    g = out.der.reshape(-1, z.size)
    if g.shape[0] != 1:
        raise ValueError("gradient() requires a scalar-valued function")
    _check_finite(out.val, "objective")
    _check_finite(g, "objective gradient")
    return g[0].copy()


def jacobian(c: Callable, z, differentiable: bool = True) -> np.ndarray:
    """Jacobian (rows = outputs) of the vector function ``c`` at ``z``."""
    z = np.asarray(z, dtype=float)
    if not differentiable:
        return fd_jacobian(c, z)
    out = c(Dual.seed(z))
    if not isinstance(out, Dual):
        out = np.atleast_1d(np.asarray(out, dtype=float))
        _check_finite(out, "constraint")
        return np.zeros((out.size, z.size))
    J = out.der.reshape(-1, z.size)
    _check_finite(out.val, "constraint")
    _check_finite(J, "constraint Jacobian")
    return J.copy()


def _fd_step(z: np.ndarray) -> np.ndarray:
    return 1e-6 * np.maximum(1.0, np.abs(z))


def fd_gradient(f: Callable, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    h = _fd_step(z)
    g = np.empty(z.size)
    for i in range(z.size):
        zp, zm = z.copy(), z.copy()
        zp[i] += h[i]
        zm[i] -= h[i]
        g[i] = (float(f(zp)) - float(f(zm))) / (2 * h[i])
    _check_finite(g, "finite-difference gradient")
    return g


def fd_jacobian(c: Callable, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    h = _fd_step(z)
    cols = []
    for i in range(z.size):
        zp, zm = z.copy(), z.copy()
        zp[i] += h[i]
        zm[i] -= h[i]
        cols.append((np.ravel(c(zp)) - np.ravel(c(zm))) / (2 * h[i]))
    J = np.stack(cols, axis=1) if cols else np.empty((0, 0))
    _check_finite(J, "finite-difference Jacobian")
    return J
