"""Admissible data and the exact invariants of an admissible class.

The fiber ends are not stored: the zero section contributes a factor with
``x = 1`` and ``s = d0 + 1``, the infinity section one with ``x = -1`` and
``s = -(dinf + 1)``.  These values make the fiber Fubini-Study metrics
have scalar curvature ``d(d+1)`` under the convention ``Scal(+-g_a) = +-d_a s_a``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .errors import InvariantViolation, MalformedInputError, NotKahlerError
from .polycalc import (
    Polynomial,
    RootBracket,
    as_fraction,
    definite_integral,
    isolate_real_roots,
)

__all__ = [
    "BaseFactor",
    "AdmissibleData",
    "InvariantBundle",
    "FanoParameters",
    "BoundaryReport",
    "validate",
    "build_pc",
    "build_invariants",
    "boundary_structure_check",
    "single_root_check",
    "fano_parameters",
    "fano_residual",
    "koiso_data",
]

ONE = Polynomial([1, 1])  # 1 + z
ONE_MINUS = Polynomial([1, -1])  # 1 - z


@dataclass(frozen=True)
class BaseFactor:
    """One base factor ``S_a``: complex dimension ``d``, constant ``s``, admissible datum ``x``."""

    d: int
    s: Fraction
    x: Fraction

    def __post_init__(self):
        object.__setattr__(self, "s", as_fraction(self.s))
        object.__setattr__(self, "x", as_fraction(self.x))


@dataclass(frozen=True)
class AdmissibleData:
    factors: tuple = ()
    d0: int = 0
    dinf: int = 0

    def __post_init__(self):
        facs = tuple(f if isinstance(f, BaseFactor) else BaseFactor(*f) for f in self.factors)
        object.__setattr__(self, "factors", facs)

    @property
    def m(self) -> int:
        """Complex dimension of the total space."""
        return sum(f.d for f in self.factors) + self.d0 + self.dinf + 1

    def all_factors(self) -> list:
        """Base factors plus the implied fiber ends that have positive dimension."""
        out = list(self.factors)
        if self.d0 > 0:
            out.append(BaseFactor(self.d0, self.d0 + 1, 1))
        if self.dinf > 0:
            out.append(BaseFactor(self.dinf, -(self.dinf + 1), -1))
        return out

    def scaled(self, eps) -> AdmissibleData:
        """Same bundle with every base ``x_a`` multiplied by ``eps`` (``s_a`` fixed)."""
        eps = as_fraction(eps)
        return AdmissibleData(
            tuple(BaseFactor(f.d, f.s, f.x * eps) for f in self.factors), self.d0, self.dinf
        )

    def fiber_only(self) -> AdmissibleData:
        return AdmissibleData((), self.d0, self.dinf)


def koiso_data(x, l: int = 1) -> AdmissibleData:
    """Anti-canonical data on CP^{l+1} # -CP^{l+1} over CP^l: one factor with ``s = 1/x``."""
    x = as_fraction(x)
    return AdmissibleData((BaseFactor(l, 1 / x, x),), 0, 0)


def validate(data: AdmissibleData) -> AdmissibleData:
    for name, d in (("d0", data.d0), ("dinf", data.dinf)):
        if not isinstance(d, int) or isinstance(d, bool) or d < 0:
            raise MalformedInputError(f"{name} must be a non-negative integer, got {d!r}")
    for i, f in enumerate(data.factors):
        if not isinstance(f.d, int) or isinstance(f.d, bool) or f.d <= 0:
            raise MalformedInputError(f"factors[{i}].d must be a positive integer, got {f.d!r}")
        if f.x == 0 or abs(f.x) >= 1:
            raise NotKahlerError(f"factors[{i}].x = {f.x}: need 0 < |x| < 1")
    return data


def fiber_factor(data: AdmissibleData) -> Polynomial:
    """``(1+z)^d0 (1-z)^dinf``."""
    return ONE ** data.d0 * ONE_MINUS ** data.dinf


def base_denominator(data: AdmissibleData) -> Polynomial:
    out = Polynomial([1])
    for f in data.factors:
        out = out * Polynomial([1, f.x]) ** f.d
    return out


def build_pc(data: AdmissibleData) -> Polynomial:
    return fiber_factor(data) * base_denominator(data)


@dataclass(frozen=True)
class InvariantBundle:
    p_c: Polynomial
    P: Polynomial
    alpha0: Fraction
    beta0: Fraction
    P_deflated: Polynomial
    base_denominator: Polynomial
    fiber_factor: Polynomial
    # sum_a d_a s_a x_a / (1 + x_a z) * p_c, a polynomial
    curvature_density: Polynomial
    d0: int = 0
    dinf: int = 0
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def scal_average(self) -> Fraction:
        return self.beta0 / self.alpha0

    @property
    def ratio(self):
        """``P / p_c`` as the pair ``(P_deflated, base_denominator)``."""
        return self.P_deflated, self.base_denominator


def build_invariants(data: AdmissibleData) -> InvariantBundle:
    validate(data)
    pc = build_pc(data)
    density = Polynomial()
    for f in data.all_factors():
        lin = Polynomial([1, f.x])
        q, r = pc.divmod(lin)
        if not r.is_zero():
            raise InvariantViolation(f"p_c not divisible by 1 + {f.x} z")
        density = density + q.scale(f.d * f.s * f.x)
    alpha0 = definite_integral(pc, -1, 1)
    beta0 = pc(Fraction(1)) + pc(Fraction(-1)) + definite_integral(density, -1, 1)
    integrand = density - pc.scale(beta0 / alpha0)
    prim = integrand.antiderivative()
    P = (prim - prim(Fraction(-1))).scale(2) + 2 * pc(Fraction(-1))

    fib = fiber_factor(data)
    P_defl, rem = P.divmod(fib)
    if not rem.is_zero():
        raise InvariantViolation(
            f"P = {P} is not divisible by (1+z)^{data.d0}(1-z)^{data.dinf}"
        )
    return InvariantBundle(
        p_c=pc,
        P=P,
        alpha0=alpha0,
        beta0=beta0,
        P_deflated=P_defl,
        base_denominator=base_denominator(data),
        fiber_factor=fib,
        curvature_density=density,
        d0=data.d0,
        dinf=data.dinf,
    )


@dataclass
class BoundaryReport:
    clauses: list  # (description, passed)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok in self.clauses)

    def failures(self) -> list:
        return [desc for desc, ok in self.clauses if not ok]


def boundary_structure_check(inv: InvariantBundle, data: AdmissibleData = None, strict=True):
    """Check the vanishing orders and signs of P at the ends of [-1, 1].

    When ``d0 = 0``, ``P(-1) > 0``; otherwise ``P`` and its first ``d0 - 1``
    derivatives vanish at -1 and ``P^(d0)(-1) > 0``.  Symmetrically at +1 with
    the sign ``(-1)^(dinf+1)``.
    """
    d0 = data.d0 if data is not None else inv.d0
    dinf = data.dinf if data is not None else inv.dinf
    P = inv.P
    m1, p1 = Fraction(-1), Fraction(1)
    clauses = []
    for j in range(d0):
        clauses.append((f"P^({j})(-1) = 0", P.deriv(j)(m1) == 0))
    clauses.append((f"P^({d0})(-1) > 0", P.deriv(d0)(m1) > 0))
    for j in range(dinf):
        clauses.append((f"P^({j})(1) = 0", P.deriv(j)(p1) == 0))
    sign = (-1) ** (dinf + 1)
    v = P.deriv(dinf)(p1)
    clauses.append((f"sign P^({dinf})(1) = {sign:+d}", v * sign > 0))
    clauses.append(("P(-1) = 2 p_c(-1)", P(m1) == 2 * inv.p_c(m1)))
    clauses.append(("P(1) = -2 p_c(1)", P(p1) == -2 * inv.p_c(p1)))
    report = BoundaryReport(clauses)
    if strict and not report.passed:
        raise InvariantViolation("boundary structure violated: " + "; ".join(report.failures()))
    return report


def single_root_check(inv: InvariantBundle):
    """``(True, bracket)`` iff P has exactly one root in (-1, 1)."""
    brackets = isolate_real_roots(inv.P, -1, 1)
    if len(brackets) == 1:
        return True, brackets[0]
    return False, brackets[0] if brackets else None


@dataclass(frozen=True)
class FanoParameters:
    lam: Fraction
    C: Fraction
    m: int


def fano_parameters(data: AdmissibleData) -> FanoParameters:
    return FanoParameters(
        lam=Fraction(data.d0 + data.dinf + 2, 2),
        C=Fraction(data.d0 - data.dinf),
        m=data.m,
    )


def fano_residual(inv: InvariantBundle, fp: FanoParameters) -> Polynomial:
    """``2 lam z p_c - C p_c + P``; zero exactly for (multiples of) the anti-canonical class."""
    z = Polynomial.identity()
    return (z * inv.p_c).scale(2 * fp.lam) - inv.p_c.scale(fp.C) + inv.P
