"""The obstruction MT(k), the soliton slope k0 and the GQE momentum profile.

A GQE profile solves ``F' + k0 F = P`` with ``F(+-1) = 0``, i.e.

    F(z) = exp(-k0 z) * int_{-1}^z P(t) exp(k0 t) dt,

and ``Theta_inf = F / p_c``.  ``F`` is evaluated by Gauss-Legendre quadrature
(the integrand is entire), which also accepts complex arguments; verification
uses complex-step differentiation so that the ODE residual is checked against
an independent derivative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .admissible import (
    AdmissibleData,
    FanoParameters,
    InvariantBundle,
    fano_residual,
    single_root_check,
)
from .errors import HypothesisNotMet, NoGQEProfile, NotApplicable, NumericFailure
from .polycalc import Polynomial, definite_integral, exp_weighted_integral

__all__ = [
    "mt",
    "solve_k0",
    "GQEProfile",
    "PolynomialProfile",
    "canonical_profile",
    "build_profile",
    "verify_profile",
    "ProfileReport",
    "laplacian_of",
    "scalar_curvature",
    "tz_value",
    "richardson_limit",
]

K_MAX = 500.0
MT_RTOL = 1e-12
_CS_STEP = 1e-30


def mt(inv: InvariantBundle, k: float) -> float:
    """``int_{-1}^1 P(t) exp(k t) dt``."""
    return exp_weighted_integral(inv.P, k, -1, 1)


def solve_k0(inv: InvariantBundle) -> float:
    """Unique zero of MT, assuming P has exactly one root in (-1, 1).

    P > 0 near -1 and P < 0 near +1, so MT(k) -> +inf as k -> -inf and
    MT(k) -> -inf as k -> +inf.  The bracket grows geometrically from
    [-1, 1] before Brent's method refines it.
    """
    ok, _ = single_root_check(inv)
    if not ok:
        raise HypothesisNotMet("P does not have exactly one root in (-1, 1)")
    exact0 = definite_integral(inv.P, -1, 1)
    if exact0 == 0:
        return 0.0
    mt0 = float(exact0)
    direction = -1.0 if mt0 < 0 else 1.0
    K = min(1.0, K_MAX)
    while True:
        far = mt(inv, direction * K)
        if np.sign(far) != np.sign(mt0) and far != 0.0:
            break
        if far == 0.0:
            return direction * K
        if K >= K_MAX:
            raise NumericFailure(f"no sign change of MT within |k| <= {K_MAX:g}")
        K = min(2 * K, K_MAX)
    lo, hi = sorted((0.0, direction * K))
    k0 = brentq(lambda k: mt(inv, k), lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                maxiter=500)
    resid = abs(mt(inv, k0))
    if resid > MT_RTOL * max(1.0, abs(mt0)):
        raise NumericFailure(f"|MT(k0)| = {resid:.3e} above tolerance")
    return float(k0)


@lru_cache(maxsize=64)
def _gauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def richardson_limit(f, end: float, h: float = 1e-3) -> float:
    """Limit of ``f`` at ``end`` from inside [-1, 1]: 3 levels, steps h, h/2, h/4."""
    inward = -np.sign(end) if end != 0 else 1.0
    vals = [float(f(end + inward * h / 2**j)) for j in range(3)]
    r1 = [2 * vals[1] - vals[0], 2 * vals[2] - vals[1]]
    return (4 * r1[1] - r1[0]) / 3


class _ProfileBase:
    """Shared evaluation helpers; subclasses supply ``theta`` and ``fprime_over_pc``."""

    inv: InvariantBundle

    def pc(self, z):
        return self.inv.p_c(z)

    def ratio(self, z):
        """The smooth function ``P / p_c`` (deflated)."""
        return self.inv.P_deflated(z) / self.inv.base_denominator(z)

    def dratio(self, z):
        n, d = self.inv.P_deflated, self.inv.base_denominator
        dz = d(z)
        return (n.deriv()(z) * dz - n(z) * d.deriv()(z)) / dz**2

    def log_pc_base(self, z):
        """``d/dz log`` of the base part of p_c (regular on [-1, 1])."""
        d = self.inv.base_denominator
        return d.deriv()(z) / d(z)

    def theta_times_fiber_log(self, z, th=None):
        """``Theta * (d0/(1+z) - dinf/(1-z))`` with its limits -> 2 d0, -2 dinf at the ends."""
        z = np.asarray(z, dtype=float)
        th = self.theta(z) if th is None else th
        d0, dinf = self.inv.d0, self.inv.dinf
        out = np.zeros(np.shape(z))
        with np.errstate(divide="ignore", invalid="ignore"):
            if d0:
                out = out + np.where(z == -1.0, 2.0 * d0, d0 * th / (1 + z))
            if dinf:
                out = out + np.where(z == 1.0, -2.0 * dinf, -dinf * th / (1 - z))
        return out if out.ndim else out[()]

    def theta_log_pc(self, z):
        """``Theta * p_c' / p_c`` with endpoint limits."""
        th = self.theta(z)
        return th * self.log_pc_base(z) + self.theta_times_fiber_log(z, th)

    def dtheta(self, z):
        return self.fprime_over_pc(z) - self.theta_log_pc(z)


@dataclass(frozen=True, eq=False)
class GQEProfile(_ProfileBase):
    """Self-similar target of the flow: ``F(z) = e^{-k0 z} int_{-1}^z P e^{k0 t} dt``."""

    inv: InvariantBundle
    k0: float
    data: AdmissibleData = None
    split: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_quad(self) -> int:
        return 24 + self.inv.P.degree // 2 + int(math.ceil(2 * abs(self.k0)))

    def _nodes(self):
        return _gauss(self.n_quad)

    def F(self, z):
        """``e^{-k0 z} int_{-1}^z P e^{k0 t} dt``; accepts complex ``z``.

        Right of ``split`` this is evaluated as
        ``e^{-k0 z} (MT(k0) - int_z^1 P e^{k0 t} dt)`` so that F keeps full
        relative accuracy where it vanishes at +1.
        """
        x, w = self._nodes()
        z = np.asarray(z)
        k = self.k0
        u = (x + 1) / 2
        out = np.zeros(z.shape, dtype=np.result_type(z.dtype, float))
        left = np.real(z) <= self.split
        if np.any(left):
            zz = z[left][..., None]
            t = -1 + (zz + 1) * u
            out[left] = (z[left] + 1) / 2 * ((self.inv.P.evalf(t) * np.exp(k * (t - zz))) @ w)
        right = ~left
        if np.any(right):
            zr = z[right]
            zz = zr[..., None]
            t = 1 - (1 - zz) * u
            tail = (1 - zr) / 2 * ((self.inv.P.evalf(t) * np.exp(k * (t - zz))) @ w)
            out[right] = np.exp(-k * zr) * self.mt_k0 - tail
        return out if out.ndim else out[()]

    @property
    def mt_k0(self) -> float:
        # exact when k0 = 0, else the same quadrature as the tail it is combined with
        if "mt" not in self._cache:
            if self.k0 == 0:
                val = float(definite_integral(self.inv.P, -1, 1))
            else:
                x, w = self._nodes()
                val = float((self.inv.P.evalf(x) * np.exp(self.k0 * x)) @ w)
            self._cache["mt"] = val
        return self._cache["mt"]

    def dF(self, z):
        return self.inv.P(z) - self.k0 * self.F(z)

    def d2F(self, z):
        return self.inv.P.deriv()(z) - self.k0 * self.dF(z)

    def F_complex_step(self, z):
        """``F'`` by complex-step differentiation of the quadrature (independent of the ODE)."""
        z = np.asarray(z, dtype=float)
        return np.imag(self.F(z + 1j * _CS_STEP)) / _CS_STEP

    def theta(self, z):
        """``F / p_c`` through the deflated integrand; exact zeros at +-1.

        Left of ``split`` the integral runs from -1, right of it from +1, so the
        factor ``(1+t)^d0`` (resp. ``(1-t)^dinf``) cancels against p_c without a
        0/0.  Accepts complex ``z``.
        """
        x, w = self._nodes()
        z = np.asarray(z)
        k, d0, dinf = self.k0, self.inv.d0, self.inv.dinf
        Pd = self.inv.P_deflated
        u = (x + 1) / 2
        zl = z[..., None]
        out = np.zeros(z.shape, dtype=np.result_type(z.dtype, float))
        left = np.real(z) <= self.split
        if np.any(left):
            zz = zl[left]
            t = -1 + (zz + 1) * u
            g = Pd.evalf(t) * np.exp(k * (t - zz)) * u**d0
            if dinf:
                g = g * ((1 - t) / (1 - zz)) ** dinf
            out[left] = (z[left] + 1) / 2 * (g @ w)
        right = ~left
        if np.any(right):
            zz = zl[right]
            t = 1 - (1 - zz) * u
            g = Pd.evalf(t) * np.exp(k * (t - zz)) * u**dinf
            if d0:
                g = g * ((1 + t) / (1 + zz)) ** d0
            out[right] = -(1 - z[right]) / 2 * (g @ w)
        out = out / self.inv.base_denominator.evalf(z)
        return out if out.ndim else out[()]

    def theta_naive(self, z):
        return self.F(z) / self.inv.p_c(z)

    def fprime_over_pc(self, z):
        # F'/p_c = (P - k0 F)/p_c = P/p_c - k0 Theta
        return self.ratio(z) - self.k0 * self.theta(z)

    def dtheta_complex_step(self, z):
        z = np.asarray(z, dtype=float)
        return np.imag(self.theta(z + 1j * _CS_STEP)) / _CS_STEP

    def samples(self, n: int) -> dict:
        """Grid data used by the flow: nodes, Theta_inf and ``p_c'/p_c + k0`` (cached)."""
        if n not in self._cache:
            z = np.linspace(-1.0, 1.0, n + 1)
            th = self.theta(z)
            th[0] = th[-1] = 0.0
            inner = z[1:-1]
            lk = np.zeros(n + 1)
            lk[1:-1] = self.log_pc_base(inner) + self.k0
            d0, dinf = self.inv.d0, self.inv.dinf
            if d0:
                lk[1:-1] += d0 / (1 + inner)
            if dinf:
                lk[1:-1] -= dinf / (1 - inner)
            self._cache[n] = {
                "z": z,
                "theta_inf": th,
                "lk": lk,
                "pc": self.inv.p_c.evalf(z),
                "ratio": self.ratio(z),
                "dratio": self.dratio(z),
                "dtheta_inf": self.dtheta(z),
            }
        return self._cache[n]


@dataclass(frozen=True, eq=False)
class PolynomialProfile(_ProfileBase):
    """A momentum profile given by a polynomial Theta with ``Theta(+-1) = 0``."""

    inv: InvariantBundle
    theta_poly: Polynomial

    def __post_init__(self):
        if self.theta_poly(Fraction(-1)) != 0 or self.theta_poly(Fraction(1)) != 0:
            raise ValueError("Theta must vanish at both ends")

    @property
    def k0(self) -> float:
        return 0.0

    def theta(self, z):
        return self.theta_poly(z)

    def F(self, z):
        return (self.theta_poly * self.inv.p_c)(z)

    def dF(self, z):
        return (self.theta_poly * self.inv.p_c).deriv()(z)

    def d2F(self, z):
        return (self.theta_poly * self.inv.p_c).deriv(2)(z)

    def fprime_over_pc(self, z):
        # Theta' + Theta p_c'/p_c, with the fiber poles cancelled exactly
        g = self.theta_poly.exact_div(Polynomial([1, 0, -1]))
        fib = (Polynomial([1, -1]).scale(self.inv.d0) - Polynomial([1, 1]).scale(self.inv.dinf)) * g
        return self.theta_poly.deriv()(z) + self.theta_poly(z) * self.log_pc_base(z) + fib(z)


def canonical_profile(inv: InvariantBundle) -> PolynomialProfile:
    """The canonical admissible metric, ``Theta_c = 1 - z^2``."""
    return PolynomialProfile(inv, Polynomial([1, 0, -1]))


def build_profile(inv: InvariantBundle, k0: float, data: AdmissibleData = None,
                  n_check: int = 2000) -> GQEProfile:
    prof = GQEProfile(inv, float(k0), data)
    z = np.linspace(-1, 1, n_check + 1)[1:-1]
    F = prof.F(z)
    if np.any(F <= 0):
        bad = z[np.argmin(F)]
        raise NoGQEProfile(f"F <= 0 at z = {bad:.6g} (k0 = {k0!r})")
    return prof


@dataclass
class ProfileReport:
    checks: list  # (name, value, tolerance, passed)

    @property
    def passed(self) -> bool:
        return all(c[3] for c in self.checks)

    def failures(self) -> list:
        return [c[0] for c in self.checks if not c[3]]

    def __getitem__(self, name):
        for c in self.checks:
            if c[0] == name:
                return c
        raise KeyError(name)


def verify_profile(profile: GQEProfile, n_grid: int = 10_000, atol: float = 1e-8,
                   ode_rtol: float = 1e-10) -> ProfileReport:
    """Boundary conditions, positivity and the first-order ODE, checked numerically.

    ``F'`` and ``Theta'`` come from complex-step differentiation, not from the
    identity ``F' = P - k0 F`` that the profile itself uses.
    """
    inv = profile.inv
    ends = np.array([-1.0, 1.0])
    pc_end = np.abs(inv.p_c.evalf(ends))
    scale = np.maximum(1.0, pc_end)
    F_end = profile.F(ends)
    dF_end = profile.F_complex_step(ends)
    th_end = profile.theta(ends)
    dth_end = profile.dtheta_complex_step(ends)
    z = np.linspace(-1, 1, n_grid + 2)[1:-1]
    F = profile.F(z)
    resid = profile.F_complex_step(z) + profile.k0 * F - inv.P.evalf(z)
    pmax = float(np.max(np.abs(inv.P.evalf(np.linspace(-1, 1, 2001)))))
    checks = []
    def add(name, value, tol, ok):
        checks.append((name, float(value), float(tol), bool(ok)))

    for i, (name, sgn) in enumerate((("-1", 1.0), ("+1", -1.0))):
        add(f"F({name})", abs(F_end[i]), atol * scale[i], abs(F_end[i]) <= atol * scale[i])
        err = abs(dF_end[i] - sgn * 2 * inv.p_c.evalf(ends[i]))
        add(f"F'({name}) = {'-' if sgn < 0 else ''}2 p_c", err, atol * scale[i], err <= atol * scale[i])
        add(f"Theta({name})", abs(th_end[i]), atol, abs(th_end[i]) <= atol)
        err = abs(dth_end[i] - sgn * 2)
        add(f"Theta'({name})", err, atol, err <= atol)
    add("min F interior", F.min(), 0.0, F.min() > 0)
    r = np.max(np.abs(resid))
    add("F' + k0 F - P", r, ode_rtol * pmax, r <= ode_rtol * pmax)
    return ProfileReport(checks)


def laplacian_of(profile, ds, d2s=None):
    """``S -> -[S' F]' / (2 p_c)`` as a function of z.

    ``ds`` is either a :class:`Polynomial` S (both derivatives are taken
    exactly) or a callable for ``S'``, with ``d2s`` the callable for ``S''``.
    """
    if isinstance(ds, Polynomial) and d2s is None:
        S = ds
        ds, d2s = S.deriv(), S.deriv(2)
    if d2s is None:
        raise TypeError("d2s is required when ds is a callable")

    def lap(z):
        z = np.asarray(z, dtype=float)
        return -0.5 * (d2s(z) * profile.theta(z) + ds(z) * profile.fprime_over_pc(z))

    return lap


def scalar_curvature(profile, inv: InvariantBundle):
    """Scalar curvature of the admissible metric of ``profile`` and its average ``beta0/alpha0``.

    ``Scal = (density - F''/2) / p_c`` where ``density = sum_a d_a s_a x_a p_c/(1+x_a z)``.
    At an end where p_c vanishes the value is the extrapolated limit.
    """
    dens = inv.curvature_density

    def raw(z):
        return (dens(z) - 0.5 * profile.d2F(z)) / inv.p_c(z)

    def scal(z):
        z = np.asarray(z, dtype=float)
        out = np.array(raw(np.where(np.abs(z) == 1.0, 0.0, z)), dtype=float)
        for end in (-1.0, 1.0):
            mask = z == end
            if np.any(mask):
                if inv.p_c(Fraction(int(end))) != 0:
                    out[mask] = raw(end)
                else:
                    out[mask] = richardson_limit(raw, end)
        return out if out.ndim else out[()]

    return scal, float(inv.beta0 / inv.alpha0)


def tz_value(inv: InvariantBundle, fp: FanoParameters, k: float, vol_S: float) -> float:
    """Reduced Tian-Zhu invariant ``-2 pi lam^m exp(-k C / (2 lam)) vol_S MT(k)``."""
    if not fano_residual(inv, fp).is_zero():
        raise NotApplicable("class is not a multiple of the anti-canonical class")
    if vol_S <= 0:
        raise ValueError("vol_S must be positive")
    lam, C = float(fp.lam), float(fp.C)
    return -2 * math.pi * lam**fp.m * math.exp(-k * C / (2 * lam)) * vol_S * mt(inv, k)
