"""Truncated bivariate Taylor (jet) arithmetic on grids.

A :class:`Jet` carries the Taylor coefficients of a scalar field in the two
surface parameters ``(u, v)`` up to total degree :data:`JET_ORDER`, for every
grid point at once.  Catalog immersions and user expressions are evaluated in
this arithmetic, which yields partial derivatives of the immersion that are
exact to machine precision (no finite-difference noise in the jets).
"""

from __future__ import annotations

from math import factorial

import numpy as np

JET_ORDER = 4

_PAIRS = [(a, b) for a in range(JET_ORDER + 1) for b in range(JET_ORDER + 1 - a)]


class Jet:
    """Taylor coefficients ``c[a, b, ...]`` of ``sum c[a,b] du^a dv^b``."""

    __slots__ = ("c",)

    def __init__(self, c: np.ndarray):
        self.c = c

    # -- constructors -------------------------------------------------

    @staticmethod
    def constant(value, shape) -> "Jet":
        dtype = np.result_type(np.asarray(value).dtype, np.float64)
        c = np.zeros((JET_ORDER + 1, JET_ORDER + 1) + tuple(shape), dtype=dtype)
        c[0, 0] = value
        return Jet(c)

    @staticmethod
    def variable(values: np.ndarray, axis: int) -> "Jet":
        """Identity jet of the parameter ``u`` (axis 0) or ``v`` (axis 1)."""
        values = np.asarray(values, dtype=float)
        c = np.zeros((JET_ORDER + 1, JET_ORDER + 1) + values.shape)
        c[0, 0] = values
        if axis == 0:
            c[1, 0] = 1.0
        else:
            c[0, 1] = 1.0
        return Jet(c)

    # -- ring operations ----------------------------------------------

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.c + other.c)
        c = self.c.copy().astype(np.result_type(self.c.dtype, np.asarray(other).dtype))
        c[0, 0] = c[0, 0] + other
        return Jet(c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c * other)
        dtype = np.result_type(self.c.dtype, other.c.dtype)
        out = np.zeros_like(self.c, dtype=dtype)
        for a, b in _PAIRS:
            for i in range(a + 1):
                for j in range(b + 1):
                    out[a, b] += self.c[i, j] * other.c[a - i, b - j]
        return Jet(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return Jet(self.c / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, k):
        if isinstance(k, Jet):
            raise TypeError("jet exponents are not supported")
        if float(k).is_integer():
            k = int(round(float(k)))
            if k == 0:
                return Jet.constant(1.0, self.c.shape[2:])
            if k < 0:
                return self.reciprocal() ** (-k)
            out = self
            for _ in range(k - 1):
                out = out * self
            return out
        return (self.log() * k).exp()

    # -- composition with univariate functions ------------------------

    def _compose(self, derivs) -> "Jet":
        """Compose with a scalar function given its derivatives at c[0,0].

        ``derivs[k]`` holds the k-th derivative of the outer function
        evaluated at the constant part of this jet.
        """
        delta = Jet(self.c.copy())
        delta.c[0, 0] = 0.0
        out = Jet.constant(0.0, self.c.shape[2:]) + derivs[0]
        power = None
        for k in range(1, JET_ORDER + 1):
            power = delta if power is None else power * delta
            out = out + power * (derivs[k] / factorial(k))
        return out

    def reciprocal(self) -> "Jet":
        f0 = self.c[0, 0]
        derivs = [(-1.0) ** k * factorial(k) * f0 ** (-(k + 1))
                  for k in range(JET_ORDER + 1)]
        return self._compose(derivs)

    def exp(self) -> "Jet":
        e0 = np.exp(self.c[0, 0])
        return self._compose([e0] * (JET_ORDER + 1))

    def log(self) -> "Jet":
        f0 = self.c[0, 0]
        derivs = [np.log(f0)]
        for k in range(1, JET_ORDER + 1):
            derivs.append((-1.0) ** (k - 1) * factorial(k - 1) * f0 ** (-k))
        return self._compose(derivs)

    def sqrt(self) -> "Jet":
        return (self.log() * 0.5).exp()

    def sin(self) -> "Jet":
        f0 = self.c[0, 0]
        s, c = np.sin(f0), np.cos(f0)
        return self._compose([s, c, -s, -c, s])

    def cos(self) -> "Jet":
        f0 = self.c[0, 0]
        s, c = np.sin(f0), np.cos(f0)
        return self._compose([c, -s, -c, s, c])

    # -- extraction ----------------------------------------------------

    def partial(self, a: int, b: int) -> np.ndarray:
        """Partial derivative d^{a+b} f / du^a dv^b on the grid."""
        return self.c[a, b] * (factorial(a) * factorial(b))

    @property
    def value(self) -> np.ndarray:
        return self.c[0, 0]


def jet_exp_i(phase: Jet) -> tuple[Jet, Jet]:
    """(cos, sin) of a phase jet, for complex exponentials of real phases."""
    return phase.cos(), phase.sin()
