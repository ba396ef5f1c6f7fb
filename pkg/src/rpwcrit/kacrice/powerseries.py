"""Truncated power series in ``r`` with exact rational coefficients.

Used to evaluate the covariance quantities near ``r = 0``, where the closed
forms are ratios of nearly equal numbers.
"""
from __future__ import annotations

import math
from fractions import Fraction


class PowerSeries:
    """``sum_k c[k] r**k`` known exactly up to and including ``r**order``."""

    __slots__ = ("coeffs", "order")

    def __init__(self, coeffs, order: int):
        c = [Fraction(x) for x in coeffs[: order + 1]]
        c += [Fraction(0)] * (order + 1 - len(c))
        self.coeffs = tuple(c)
        self.order = order

    @classmethod
    def constant(cls, value, order: int) -> "PowerSeries":
        return cls([value], order)

    def _coerce(self, other) -> "PowerSeries":
        if isinstance(other, PowerSeries):
            return other
        return PowerSeries.constant(other, self.order)

    def __add__(self, other):
        other = self._coerce(other)
        order = min(self.order, other.order)
        return PowerSeries([a + b for a, b in zip(self.coeffs, other.coeffs)], order)

    __radd__ = __add__

    def __neg__(self):
        return PowerSeries([-a for a in self.coeffs], self.order)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def valuation(self) -> int:
        for k, c in enumerate(self.coeffs):
            if c != 0:
                return k
        return self.order + 1

    def __mul__(self, other):
        if not isinstance(other, PowerSeries):
            f = Fraction(other)
            return PowerSeries([f * a for a in self.coeffs], self.order)
        order = min(self.order + other.valuation(), other.order + self.valuation())
        out = [Fraction(0)] * (order + 1)
        for i, a in enumerate(self.coeffs):
            if a == 0 or i > order:
                continue
            for j, b in enumerate(other.coeffs[: order - i + 1]):
                if b:
                    out[i + j] += a * b
        return PowerSeries(out, order)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            return NotImplemented
        out = PowerSeries.constant(1, self.order)
        for _ in range(n):
            out = out * self
        return out

    def shift(self, k: int) -> "PowerSeries":
        """Multiply by ``r**k``; negative ``k`` requires the dropped terms to vanish."""
        if k >= 0:
            return PowerSeries([0] * k + list(self.coeffs), self.order + k)
        if any(self.coeffs[:-k]):
            raise ZeroDivisionError("series is not divisible by r**%d" % -k)
        return PowerSeries(self.coeffs[-k:], self.order + k)

    def derivative(self) -> "PowerSeries":
        return PowerSeries([k * c for k, c in enumerate(self.coeffs)][1:], self.order - 1)

    def reciprocal(self) -> "PowerSeries":
        c0 = self.coeffs[0]
        if c0 == 0:
            raise ZeroDivisionError("reciprocal of a series with zero constant term")
        out = [1 / c0]
        for n in range(1, self.order + 1):
            acc = sum(self.coeffs[k] * out[n - k] for k in range(1, n + 1))
            out.append(-acc / c0)
        return PowerSeries(out, self.order)

    def __truediv__(self, other):
        if not isinstance(other, PowerSeries):
            return self * (1 / Fraction(other))
        v = other.valuation()
        return self.shift(-v) * other.shift(-v).reciprocal()

    def __call__(self, r: float) -> float:
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * r + float(c)
        return acc

    def truncated(self, order: int) -> "PowerSeries":
        return PowerSeries(self.coeffs, min(order, self.order))

    def __repr__(self):
        terms = [f"{c}*r^{k}" for k, c in enumerate(self.coeffs[:8]) if c]
        return "PowerSeries(" + " + ".join(terms) + f" + O(r^{self.order + 1}))"


def j0_series(order: int) -> PowerSeries:
    """Power series of ``J0(r)``."""
    c = [Fraction(0)] * (order + 1)
    for k in range(order // 2 + 1):
        c[2 * k] = Fraction((-1) ** k, 4**k * math.factorial(k) ** 2)
    return PowerSeries(c, order)
