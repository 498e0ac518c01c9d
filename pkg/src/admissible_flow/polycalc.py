"""Exact univariate polynomials over Q.

A :class:`Polynomial` stores rational coefficients in ascending degree
order.  On top of the arithmetic this module provides the two
non-polynomial primitives the rest of the package needs:

* :func:`exp_weighted_integral` -- ``int_a^b p(t) exp(k t) dt`` in floating
  point, from exact coefficients;
* :func:`isolate_real_roots` -- Sturm-sequence root isolation on an open
  interval, exact until the final float conversion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

__all__ = [
    "Polynomial",
    "RootBracket",
    "as_fraction",
    "evaluate",
    "antiderivative",
    "definite_integral",
    "exp_weighted_integral",
    "isolate_real_roots",
    "sturm_sequence",
    "count_roots",
    "poly_gcd",
]

# |k| (b - a) below this uses the shifted exponential series instead of the
# closed form (see exp_weighted_integral).
SERIES_THRESHOLD = 4.0
DEFAULT_ROOT_WIDTH = Fraction(1, 10**12)


def as_fraction(value) -> Fraction:
    """Exact conversion; strings such as ``"3/4"`` and floats are accepted."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot convert {type(value).__name__} to Fraction")


class Polynomial:
    """Immutable polynomial with :class:`~fractions.Fraction` coefficients.

    ``Polynomial([1, 0, -1])`` is ``1 - z**2``.  Trailing zeros are stripped, so
    the zero polynomial has an empty coefficient tuple and degree ``-1``.
    """

    __slots__ = ("_c", "_fc")

    def __init__(self, coeffs=()):
        c = [as_fraction(a) for a in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self._c = tuple(c)
        self._fc = None

    # -- construction helpers -------------------------------------------------
    @classmethod
    def constant(cls, c) -> Polynomial:
        return cls([c])

    @classmethod
    def identity(cls) -> Polynomial:
        return cls([0, 1])

    @classmethod
    def linear(cls, c0, c1) -> Polynomial:
        """``c0 + c1 z``."""
        return cls([c0, c1])

    # -- basic properties -----------------------------------------------------
    @property
    def coeffs(self) -> tuple:
        return self._c

    @property
    def degree(self) -> int:
        return len(self._c) - 1

    def is_zero(self) -> bool:
        return not self._c

    @property
    def leading(self) -> Fraction:
        return self._c[-1] if self._c else Fraction(0)

    def float_coeffs(self) -> np.ndarray:
        if self._fc is None:
            self._fc = np.array([float(a) for a in self._c], dtype=float)
        return self._fc

    def __repr__(self):
        if not self._c:
            return "Polynomial(0)"
        return "Polynomial([" + ", ".join(str(a) for a in self._c) + "])"

    def __str__(self):
        if not self._c:
            return "0"
        terms = []
        for i, a in enumerate(self._c):
            if a == 0:
                continue
            mono = "" if i == 0 else ("z" if i == 1 else f"z^{i}")
            coef = str(a)
            if mono and a == 1:
                coef = ""
            elif mono and a == -1:
                coef = "-"
            terms.append(f"{coef}{'*' if coef not in ('', '-') and mono else ''}{mono}")
        return " + ".join(terms).replace("+ -", "- ")

    # -- comparison ------------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self._c == other._c
        if isinstance(other, (int, Fraction)):
            return self._c == Polynomial([other])._c
        return NotImplemented

    def __hash__(self):
        return hash(self._c)

    def __bool__(self):
        return bool(self._c)

    # -- arithmetic -------------------------------------------------------------
    @staticmethod
    def _coerce(other):
        if isinstance(other, Polynomial):
            return other
        if isinstance(other, (int, Fraction, str)):
            return Polynomial([other])
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        a, b = self._c, o._c
        if len(a) < len(b):
            a, b = b, a
        return Polynomial([x + (b[i] if i < len(b) else 0) for i, x in enumerate(a)])

    __radd__ = __add__

    def __neg__(self):
        return Polynomial([-a for a in self._c])

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if not self._c or not o._c:
            return Polynomial()
        out = [Fraction(0)] * (len(self._c) + len(o._c) - 1)
        for i, a in enumerate(self._c):
            if a == 0:
                continue
            for j, b in enumerate(o._c):
                out[i + j] += a * b
        return Polynomial(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("exponent must be a non-negative integer")
        result = Polynomial([1])
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def scale(self, c) -> Polynomial:
        c = as_fraction(c)
        return Polynomial([c * a for a in self._c])

    def divmod(self, divisor: Polynomial):
        """Euclidean division ``self = q * divisor + r`` with ``deg r < deg divisor``."""
        if divisor.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        r = list(self._c)
        d = divisor._c
        lead = d[-1]
        q = [Fraction(0)] * max(len(r) - len(d) + 1, 0)
        for shift in range(len(r) - len(d), -1, -1):
            c = r[shift + len(d) - 1] / lead
            q[shift] = c
            if c:
                for j, b in enumerate(d):
                    r[shift + j] -= c * b
        return Polynomial(q), Polynomial(r[: len(d) - 1])

    def __floordiv__(self, other):
        return self.divmod(other)[0]

    def __mod__(self, other):
        return self.divmod(other)[1]

    def exact_div(self, divisor: Polynomial) -> Polynomial:
        q, r = self.divmod(divisor)
        if not r.is_zero():
            raise ArithmeticError(f"{divisor} does not divide {self}")
        return q

    def monic(self) -> Polynomial:
        if not self._c:
            return self
        return self.scale(1 / self._c[-1])

    # -- calculus ----------------------------------------------------------------
    def deriv(self, m: int = 1) -> Polynomial:
        c = list(self._c)
        for _ in range(m):
            c = [i * a for i, a in enumerate(c)][1:]
        return Polynomial(c)

    def antiderivative(self) -> Polynomial:
        """Antiderivative with zero constant term."""
        return Polynomial([0] + [a / (i + 1) for i, a in enumerate(self._c)])

    def compose(self, other: Polynomial) -> Polynomial:
        result = Polynomial()
        for a in reversed(self._c):
            result = result * other + Polynomial([a])
        return result

    def shift(self, c) -> Polynomial:
        """``z -> p(z + c)``."""
        return self.compose(Polynomial([c, 1]))

    # -- evaluation ----------------------------------------------------------------
    def __call__(self, t):
        if isinstance(t, (int, Fraction)):
            acc = Fraction(0)
            for a in reversed(self._c):
                acc = acc * t + a
            return acc
        if isinstance(t, np.ndarray) or isinstance(t, (float, np.floating)):
            return self.evalf(t)
        if isinstance(t, str):
            return self(as_fraction(t))
        # complex or other numeric: generic Horner
        acc = 0 * t
        for a in reversed(self._c):
            acc = acc * t + float(a)
        return acc

    def evalf(self, t):
        """Float (or complex) Horner evaluation, vectorised over arrays."""
        t = np.asarray(t)
        c = self.float_coeffs()
        acc = np.zeros_like(t, dtype=np.result_type(t.dtype, float))
        for a in c[::-1]:
            acc = acc * t + a
        return acc if acc.ndim else acc[()]

    def sign_at(self, t: Fraction, side: int = 0) -> int:
        """Sign of p at ``t`` (side 0), just right of it (+1) or just left (-1)."""
        if self.is_zero():
            return 0
        p = self
        j = 0
        while True:
            v = p(t)
            if v != 0 or side == 0:
                s = (v > 0) - (v < 0)
                return s * (-1 if (side < 0 and j % 2) else 1)
            p = p.deriv()
            j += 1


def evaluate(p: Polynomial, t):
    """Exact for rational ``t``, floating point otherwise."""
    if isinstance(t, (int, Fraction, str)):
        return p(as_fraction(t))
    return p.evalf(t)


def antiderivative(p: Polynomial) -> Polynomial:
    return p.antiderivative()


def definite_integral(p: Polynomial, a, b) -> Fraction:
    a, b = as_fraction(a), as_fraction(b)
    q = p.antiderivative()
    return q(b) - q(a)


# ---------------------------------------------------------------------------
# exponential weight
# ---------------------------------------------------------------------------
def _closed_form(p: Polynomial, k: float, a: float, b: float) -> float:
    # int p e^{kt} = e^{kt} sum_i (-1)^i p^(i)(t) / k^(i+1)
    derivs = []
    q = p
    while not q.is_zero():
        derivs.append(q)
        q = q.deriv()

    def g(t):
        s = 0.0
        for i, d in enumerate(derivs):
            s += (-1) ** i * d.evalf(t) / k ** (i + 1)
        return s

    return math.exp(k * b) * g(b) - math.exp(k * a) * g(a)


def _series_moment(j: int, c: float) -> float:
    """``sum_m c^m / (m! (j+m+1))`` for ``c >= 0``, i.e. int_0^1 u^j e^{cu} du."""
    total = 0.0
    term = 1.0  # c^m / m!
    m = 0
    while True:
        total += term / (j + m + 1)
        m += 1
        term *= c / m
        # remainder of the tail is bounded by term * e^c / (j + m + 1)
        if term * math.exp(c) / (j + m + 1) <= 2.0**-60 * total:
            return total


def _series(p: Polynomial, k: float, a: Fraction, b: Fraction) -> float:
    # Shift so the exponential weight is increasing on [0, w]: every series
    # term is then positive and only the signs of p's own coefficients cancel.
    # The shifted coefficients are formed in floats: an exact shift at a
    # float-derived endpoint (denominator ~2^52) costs milliseconds per call.
    w = float(b - a)
    if k >= 0:
        base, sgn, kappa = float(a), 1.0, k
    else:
        base, sgn, kappa = float(b), -1.0, -k
    coeffs = [float(c) for c in p.coeffs]
    n = len(coeffs)
    q = np.zeros(n)
    for i in range(n):
        binom = 1.0
        for j in range(i + 1):
            q[j] += coeffs[i] * binom * base ** (i - j)
            binom = binom * (i - j) / (j + 1)
    c = kappa * w
    acc = 0.0
    for j, qj in enumerate(q):
        if qj:
            acc += qj * sgn**j * w ** (j + 1) * _series_moment(j, c)
    return math.exp(k * base) * acc


def exp_weighted_integral(p: Polynomial, k, a, b) -> float:
    """``int_a^b p(t) exp(k t) dt``.

    For ``|k| (b - a) >= SERIES_THRESHOLD`` the closed form
    ``e^{kt} sum_i (-1)^i p^(i)(t) / k^(i+1)`` is used; below it the exact
    polynomial is integrated against the exponential series (with a rigorous
    tail bound), which avoids the cancellation of the closed form as k -> 0.
    ``k == 0`` is integrated exactly.
    """
    k = float(k)
    fa, fb = as_fraction(a), as_fraction(b)
    if p.is_zero() or fa == fb:
        return 0.0
    if k == 0.0:
        return float(definite_integral(p, fa, fb))
    if abs(k) * float(fb - fa) < SERIES_THRESHOLD:
        return _series(p, k, fa, fb)
    return _closed_form(p, k, float(fa), float(fb))


# ---------------------------------------------------------------------------
# roots
# ---------------------------------------------------------------------------
def poly_gcd(a: Polynomial, b: Polynomial) -> Polynomial:
    """Monic greatest common divisor (zero if both are zero)."""
    while not b.is_zero():
        a, b = b, a % b
    return a.monic()


def sturm_sequence(p: Polynomial) -> list:
    seq = [p, p.deriv()]
    while not seq[-1].is_zero():
        r = seq[-2] % seq[-1]
        if r.is_zero():
            break
        seq.append(-r)
    return [q for q in seq if not q.is_zero()]


def _variations(seq, t: Fraction, side: int) -> int:
    signs = [s for s in (q.sign_at(t, side) for q in seq) if s]
    return sum(1 for u, v in zip(signs, signs[1:]) if u != v)


def count_roots(p: Polynomial, a, b, seq=None) -> int:
    """Number of distinct real roots of ``p`` in the open interval ``(a, b)``."""
    if p.is_zero():
        raise ValueError("zero polynomial has infinitely many roots")
    a, b = as_fraction(a), as_fraction(b)
    if a >= b:
        return 0
    if seq is None:
        seq = sturm_sequence(p)
    return _variations(seq, a, +1) - _variations(seq, b, -1)


@dataclass(frozen=True)
class RootBracket:
    """Isolating interval ``[lo, hi]`` containing exactly one distinct root."""

    lo: Fraction
    hi: Fraction
    simple: bool

    @property
    def midpoint(self) -> float:
        return float((self.lo + self.hi) / 2)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def __contains__(self, t) -> bool:
        return self.lo <= as_fraction(t) <= self.hi


def isolate_real_roots(p: Polynomial, a, b, width=DEFAULT_ROOT_WIDTH) -> list:
    """Disjoint isolating brackets for every real root of ``p`` in ``(a, b)``.

    Brackets are refined by exact bisection until narrower than ``width``;
    a root hit exactly is returned as a degenerate bracket.  ``simple`` is
    False when the root is shared with ``p'`` (a multiple root).
    """
    if p.is_zero():
        raise ValueError("cannot isolate the roots of the zero polynomial")
    a, b = as_fraction(a), as_fraction(b)
    width = as_fraction(width)
    g = poly_gcd(p, p.deriv())
    sqfree = p.exact_div(g) if g.degree > 0 else p
    seq = sturm_sequence(sqfree)
    gseq = sturm_sequence(g) if g.degree > 0 else None

    def is_simple(lo, hi):
        if gseq is None:
            return True
        if lo == hi:
            return g(lo) != 0
        return count_roots(g, lo, hi, gseq) == 0 and g(lo) != 0 and g(hi) != 0

    found = []
    stack = [(a, b)]
    while stack:
        lo, hi = stack.pop()
        n = count_roots(sqfree, lo, hi, seq)
        if n == 0:
            continue
        if n == 1:
            found.append(_refine(sqfree, lo, hi, width))
            continue
        mid = (lo + hi) / 2
        if sqfree(mid) == 0:
            found.append((mid, mid))
        stack.append((lo, mid))
        stack.append((mid, hi))
    found.sort()
    return [RootBracket(lo, hi, is_simple(lo, hi)) for lo, hi in found]


def _refine(q: Polynomial, lo: Fraction, hi: Fraction, width: Fraction):
    # one root of square-free q in (lo, hi): its sign flips across it
    s_lo = q.sign_at(lo, +1)
    while hi - lo > width:
        mid = (lo + hi) / 2
        v = q(mid)
        if v == 0:
            return mid, mid
        if (v > 0) == (s_lo > 0):
            lo = mid
        else:
            hi = mid
    return lo, hi
