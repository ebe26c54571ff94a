"""Second-order truncated Taylor arithmetic, vectorized over a batch of points.

A :class:`Jet2` carries the value, gradient and Hessian of a scalar field with
respect to ``k`` seed variables.  Every array has a common leading batch shape,
so one pass over an expression tree differentiates it at a whole quadrature
grid at once.
"""

from __future__ import annotations

import numpy as np

DIVISION_TOL = 1e-14


class DomainError(ValueError):
    """Raised when an expression is evaluated outside its domain."""


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


class Jet2:
    __slots__ = ("val", "grad", "hess")
    # make ndarray (op) Jet2 defer to the reflected Jet2 methods
    __array_ufunc__ = None

    def __init__(self, val, grad, hess):
        self.val = np.asarray(val, dtype=float)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = np.asarray(hess, dtype=float)

    @property
    def nvars(self) -> int:
        return self.grad.shape[-1]

    @classmethod
    def constant(cls, c, nvars: int) -> "Jet2":
        c = np.asarray(c, dtype=float)
        return cls(c, np.zeros(c.shape + (nvars,)), np.zeros(c.shape + (nvars, nvars)))

    @classmethod
    def variables(cls, points) -> list["Jet2"]:
        """Seed jets for the coordinates of ``points`` (shape ``(..., k)``)."""
        points = np.asarray(points, dtype=float)
        k = points.shape[-1]
        batch = points.shape[:-1]
        out = []
        for i in range(k):
            grad = np.zeros(batch + (k,))
            grad[..., i] = 1.0
            out.append(cls(points[..., i], grad, np.zeros(batch + (k, k))))
        return out

    def _lift(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            return other
        return Jet2.constant(np.broadcast_to(np.asarray(other, dtype=float), self.val.shape), self.nvars)

    def chain(self, v0, d1, d2) -> "Jet2":
        """Compose with a univariate function given its value and first two derivatives."""
        d1 = np.asarray(d1, dtype=float)
        d2 = np.asarray(d2, dtype=float)
        return Jet2(
            v0,
            d1[..., None] * self.grad,
            d2[..., None, None] * _outer(self.grad, self.grad) + d1[..., None, None] * self.hess,
        )

    def __add__(self, other):
        if not isinstance(other, Jet2):
            other = np.asarray(other, dtype=float)
            return Jet2(self.val + other, self.grad + 0.0 * other[..., None], self.hess + 0.0 * other[..., None, None])
        return Jet2(self.val + other.val, self.grad + other.grad, self.hess + other.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.val, -self.grad, -self.hess)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            c = np.asarray(other, dtype=float)
            return Jet2(self.val * c, self.grad * c[..., None], self.hess * c[..., None, None])
        f, g = self, other
        hess = (
            f.val[..., None, None] * g.hess
            + g.val[..., None, None] * f.hess
            + (_outer(f.grad, g.grad) + _outer(g.grad, f.grad))
        )
        return Jet2(f.val * g.val, f.val[..., None] * g.grad + g.val[..., None] * f.grad, hess)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet2":
        v = self.val
        if np.any(np.abs(v) < DIVISION_TOL):
            raise DomainError("division by (near) zero")
        inv = 1.0 / v
        return self.chain(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other):
        if not isinstance(other, Jet2):
            c = np.asarray(other, dtype=float)
            if np.any(np.abs(c) < DIVISION_TOL):
                raise DomainError("division by (near) zero")
            return self * (1.0 / c)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, k: int):
        if not isinstance(k, (int, np.integer)):
            raise TypeError("jets only support integer exponents")
        k = int(k)
        v = self.val
        if k == 0:
            return Jet2.constant(np.ones_like(v), self.nvars)
        if k == 1:
            return Jet2(v, self.grad, self.hess)
        if k < 0 and np.any(np.abs(v) < DIVISION_TOL):
            raise DomainError("negative power of (near) zero")
        k = float(k)
        return self.chain(v**k, k * v ** (k - 1), k * (k - 1) * v ** (k - 2))

    def __repr__(self):
        return f"Jet2(val={self.val!r}, grad={self.grad!r}, hess={self.hess!r})"


# Elementary functions.  Each accepts a Jet2, a float or an ndarray.


def sqrt(x):
    if isinstance(x, Jet2):
        if np.any(x.val <= DIVISION_TOL):
            raise DomainError("sqrt requires a positive argument for differentiation")
        s = np.sqrt(x.val)
        return x.chain(s, 0.5 / s, -0.25 / (s * x.val))
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("sqrt of a negative number")
    return np.sqrt(x)


def exp(x):
    if isinstance(x, Jet2):
        e = np.exp(x.val)
        return x.chain(e, e, e)
    return np.exp(x)


def log(x):
    if isinstance(x, Jet2):
        if np.any(x.val <= DIVISION_TOL):
            raise DomainError("log of a nonpositive number")
        inv = 1.0 / x.val
        return x.chain(np.log(x.val), inv, -inv * inv)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("log of a nonpositive number")
    return np.log(x)


def sin(x):
    if isinstance(x, Jet2):
        s, c = np.sin(x.val), np.cos(x.val)
        return x.chain(s, c, -s)
    return np.sin(x)


def cos(x):
    if isinstance(x, Jet2):
        s, c = np.sin(x.val), np.cos(x.val)
        return x.chain(c, -s, -c)
    return np.cos(x)


def divide(a, b):
    """``a / b`` with the near-zero guard for plain numbers as well as jets."""
    if isinstance(a, Jet2) or isinstance(b, Jet2):
        if not isinstance(b, Jet2) and np.any(np.abs(np.asarray(b)) < DIVISION_TOL):
            raise DomainError("division by (near) zero")
        return a / b
    b = np.asarray(b, dtype=float)
    if np.any(np.abs(b) < DIVISION_TOL):
        raise DomainError("division by (near) zero")
    return a / b


def stack(jets) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack component jets of a vector map into value, Jacobian and second-derivative arrays.

    Returns arrays of shape ``(..., m)``, ``(..., k, m)`` and ``(..., k, k, m)``
    where ``m`` is the number of components and ``k`` the number of variables.
    """
    val = np.stack([j.val for j in jets], axis=-1)
    grad = np.stack([j.grad for j in jets], axis=-1)
    hess = np.stack([j.hess for j in jets], axis=-1)
    return val, grad, hess
