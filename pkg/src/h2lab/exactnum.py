"""Exact arithmetic in the rationals and in real quadratic fields Q(sqrt k)."""

from __future__ import annotations

import math
import re
from fractions import Fraction
from numbers import Rational as _RationalABC

import mpmath

Rational = Fraction

_TEXT = re.compile(
    r"^\s*(?P<a>-?\d+(?:/\d+)?)\s*\+\s*(?P<b>-?\d+(?:/\d+)?)\s*\*\s*sqrt\(\s*(?P<k>\d+)\s*\)\s*$"
)


def squarefree_part(n: int) -> tuple[int, int]:
    """Return (k, s) with n = k * s**2 and k square-free."""
    if not isinstance(n, int) or n <= 0:
        raise ValueError(f"squarefree_part needs a positive integer, got {n!r}")
    k, s = 1, 1
    p = 2
    while p * p <= n:
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        s *= p ** (e // 2)
        if e % 2:
            k *= p
        p += 1 if p == 2 else 2
    return k * n, s


def _is_squarefree(k: int) -> bool:
    return k >= 1 and squarefree_part(k)[0] == k


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, _RationalABC)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"expected a rational, got {type(x).__name__}")


class MixedFieldError(ValueError):
    """Raised when two quadratic numbers from different fields meet."""


class QuadNum:
    """The number a + b*sqrt(k) with a, b rational and k square-free.

    k = 1 is allowed and denotes the rationals; b is folded into a there.
    """

    __slots__ = ("a", "b", "k")

    def __init__(self, a=0, b=0, k: int = 1):
        if not _is_squarefree(k):
            raise ValueError(f"k must be a square-free positive integer, got {k}")
        a, b = _frac(a), _frac(b)
        if k == 1:
            a, b = a + b, Fraction(0)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "k", k)

    def __setattr__(self, name, value):
        raise AttributeError("QuadNum is immutable")

    @classmethod
    def sqrt(cls, n) -> QuadNum:
        """Exact square root of a nonnegative rational."""
        n = _frac(n)
        if n < 0:
            raise ValueError("square root of a negative rational")
        if n == 0:
            return cls(0)
        # sqrt(p/q) = sqrt(p*q)/q
        k, s = squarefree_part(n.numerator * n.denominator)
        return cls(0, Fraction(s, n.denominator), k)

    @property
    def is_rational(self) -> bool:
        return self.b == 0

    def _coerce(self, other) -> QuadNum | None:
        if isinstance(other, QuadNum):
            if other.k != self.k and other.k != 1 and self.k != 1:
                # a rational value embeds in every field
                if other.b == 0:
                    return QuadNum(other.a, 0, self.k)
                if self.b != 0:
                    raise MixedFieldError(f"cannot combine Q(sqrt {self.k}) with Q(sqrt {other.k})")
            return other
        if isinstance(other, (int, Fraction)):
            return QuadNum(other, 0, self.k)
        return None

    def _field(self, other: QuadNum) -> int:
        return self.k if self.k != 1 and (self.b != 0 or other.k == 1) else other.k

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return float(self) + other if isinstance(other, float) else NotImplemented
        return QuadNum(self.a + o.a, self.b + o.b, self._field(o))

    __radd__ = __add__

    def __neg__(self):
        return QuadNum(-self.a, -self.b, self.k)

    def __pos__(self):
        return self

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return float(self) - other if isinstance(other, float) else NotImplemented
        return QuadNum(self.a - o.a, self.b - o.b, self._field(o))

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return other - float(self) if isinstance(other, float) else NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return float(self) * other if isinstance(other, float) else NotImplemented
        k = self._field(o)
        if self.k == 1 or o.k == 1:
            # one factor is rational
            if self.k == 1:
                return QuadNum(self.a * o.a, self.a * o.b, k)
            return QuadNum(self.a * o.a, self.b * o.a, k)
        return QuadNum(self.a * o.a + self.b * o.b * k, self.a * o.b + self.b * o.a, k)

    __rmul__ = __mul__

    def conjugate(self) -> QuadNum:
        return QuadNum(self.a, -self.b, self.k)

    def norm(self) -> Fraction:
        """Field norm a^2 - k b^2."""
        return self.a * self.a - self.k * self.b * self.b

    def inverse(self) -> QuadNum:
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("inverse of zero in a quadratic field")
        return QuadNum(self.a / n, -self.b / n, self.k)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return float(self) / other if isinstance(other, float) else NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return other / float(self) if isinstance(other, float) else NotImplemented
        return o * self.inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return self.inverse() ** (-n)
        result, base = QuadNum(1, 0, self.k), self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __abs__(self):
        return -self if quad_sign(self) < 0 else self

    def _cmp(self, other) -> int:
        o = self._coerce(other)
        if o is None:
            raise TypeError(f"cannot compare QuadNum with {type(other).__name__}")
        return quad_sign(self - o)

    def __eq__(self, other):
        if isinstance(other, float):
            return float(self) == other
        try:
            o = self._coerce(other)
        except MixedFieldError:
            return False
        if o is None:
            return NotImplemented
        return self.a == o.a and self.b == o.b

    def __hash__(self):
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b, self.k))

    def __lt__(self, other):
        if isinstance(other, float):
            return float(self) < other
        return self._cmp(other) < 0

    def __le__(self, other):
        if isinstance(other, float):
            return float(self) <= other
        return self._cmp(other) <= 0

    def __gt__(self, other):
        if isinstance(other, float):
            return float(self) > other
        return self._cmp(other) > 0

    def __ge__(self, other):
        if isinstance(other, float):
            return float(self) >= other
        return self._cmp(other) >= 0

    def __bool__(self):
        return self.a != 0 or self.b != 0

    def __float__(self):
        return float(to_float(self, 64)[0])

    def __floor__(self):
        n = math.floor(float(self))
        while self < n:
            n -= 1
        while self >= n + 1:
            n += 1
        return n

    def __ceil__(self):
        return -math.floor(-self)

    def __round__(self, ndigits=None):
        if ndigits is not None:
            return round(float(self), ndigits)
        return math.floor(self + Fraction(1, 2))

    def __str__(self):
        return f"{self.a} + {self.b}*sqrt({self.k})"

    def __repr__(self):
        return f"QuadNum({str(self)!r})"

    @classmethod
    def parse(cls, text: str) -> QuadNum:
        m = _TEXT.match(text)
        if m is None:
            raise ValueError(f"not a quadratic number: {text!r}")
        return cls(Fraction(m["a"]), Fraction(m["b"]), int(m["k"]))


def quad_sign(x) -> int:
    """Exact sign of a + b*sqrt(k), decided by comparing a^2 with k*b^2."""
    if not isinstance(x, QuadNum):
        x = QuadNum(x)
    a, b, k = x.a, x.b, x.k
    sa = (a > 0) - (a < 0)
    sb = (b > 0) - (b < 0)
    if sb == 0:
        return sa
    if sa == 0 or sa == sb:
        return sb
    # opposite signs: the larger magnitude wins
    diff = a * a - b * b * k
    return sa if diff > 0 else sb


def to_float(x, precision_bits: int = 128) -> tuple[mpmath.mpf, mpmath.mpf]:
    """Approximate a + b*sqrt(k) as an mpf with a rigorous error bound.

    The bound is 2**(1 - precision_bits) * (|a| + |b| sqrt k).
    """
    if precision_bits < 32:
        raise ValueError("precision_bits must be at least 32")
    if not isinstance(x, QuadNum):
        x = QuadNum(x)
    with mpmath.workprec(precision_bits):
        if x.b == 0:
            value = mpmath.mpf(x.a.numerator) / x.a.denominator
        else:
            # floor(sqrt(k) * 2**P) / 2**P underestimates sqrt k by < 2**-P
            p = precision_bits + 2
            root = Fraction(math.isqrt(x.k << (2 * p)), 1 << p)
            approx = x.a + x.b * root
            value = mpmath.mpf(approx.numerator) / approx.denominator
        bound = mpmath.mpf(2) ** (1 - precision_bits) * (
            abs(mpmath.mpf(x.a.numerator) / x.a.denominator)
            + abs(mpmath.mpf(x.b.numerator) / x.b.denominator) * mpmath.sqrt(x.k)
        )
    return value, bound


def exact_sqrt(x):
    """Square root staying exact where possible, else a float.

    Rationals give a QuadNum; a QuadNum whose square root is rational times
    sqrt of its own k (or rational) stays exact; everything else is float.
    """
    if isinstance(x, float):
        return math.sqrt(x)
    if isinstance(x, (int, Fraction)):
        return QuadNum.sqrt(x)
    if isinstance(x, QuadNum):
        if x.b == 0:
            return QuadNum.sqrt(x.a)
        return math.sqrt(float(x))
    return math.sqrt(float(x))


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction, QuadNum))


def simplify(x):
    """Collapse a rational-valued QuadNum to Fraction."""
    if isinstance(x, QuadNum) and x.b == 0:
        return x.a
    return x


def to_text(x) -> str:
    """Serialize an exact scalar; rationals stay in plain fraction form."""
    if isinstance(x, QuadNum):
        return str(x)
    if isinstance(x, (int, Fraction)):
        return str(Fraction(x))
    raise TypeError(f"not an exact scalar: {x!r}")


def from_text(text: str):
    if "sqrt" in text:
        return QuadNum.parse(text)
    return Fraction(text)
