"""The decay condition ``Q < 0`` on [-1, 1] and its sufficient criteria.

``Q = Theta_inf (P/p_c)' - (P/p_c) Theta_inf'``.  It is evaluated directly
from the deflated profile, and again through ``xi = P e^{k0 t}``,
``eta = int_{-1}^t xi`` as ``Q = -(xi^2 - eta xi') e^{-2 k0 z} / p_c^2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .admissible import AdmissibleData, InvariantBundle, build_invariants, single_root_check
from .errors import InvariantViolation, NumericFailure
from .gqe import GQEProfile, richardson_limit
from .polycalc import (
    Polynomial,
    as_fraction,
    count_roots,
    exp_weighted_integral,
    isolate_real_roots,
)

__all__ = [
    "StabilityReport",
    "q_function",
    "q_direct",
    "q_xi_eta",
    "xi_eta_gap",
    "log_concavity_check",
    "log_concavity_polynomial",
    "limit_P",
    "small_x_diagnostic",
    "SmallXRow",
    "case1_constant",
    "root_sign_data",
]

BRANCH_RTOL = 1e-6
DELTA = 1e-3


@dataclass(frozen=True)
class StabilityReport:
    q_min: float
    q_boundary: tuple
    condition_holds: bool
    xi_eta_min: float
    log_concavity_holds: bool
    branch_error: float = 0.0


def q_direct(profile):
    """Q from Theta_inf and the smooth ratio P/p_c; regular up to +-1."""

    def q(z):
        z = np.asarray(z, dtype=float)
        return profile.theta(z) * profile.dratio(z) - profile.ratio(z) * profile.dtheta(z)

    return q


def _eta(inv: InvariantBundle, k0: float, t):
    """``int_{-1}^t xi``; right of 0 as ``-int_t^1 xi`` (``MT(k0) = 0``) to avoid cancellation."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = []
    for ti in t:
        q = Fraction(float(ti))
        if ti <= 0:
            out.append(exp_weighted_integral(inv.P, k0, -1, q))
        else:
            out.append(-exp_weighted_integral(inv.P, k0, q, 1))
    return np.array(out, dtype=float)


def xi_eta_gap(inv: InvariantBundle, k0: float, t):
    """``xi^2 - eta xi'`` with ``xi = P e^{k0 t}``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    e = np.exp(k0 * t)
    xi = inv.P.evalf(t) * e
    dxi = (inv.P.deriv().evalf(t) + k0 * inv.P.evalf(t)) * e
    return xi**2 - _eta(inv, k0, t) * dxi


def q_xi_eta(inv: InvariantBundle, k0: float, z):
    z = np.atleast_1d(np.asarray(z, dtype=float))
    return -xi_eta_gap(inv, k0, z) * np.exp(-2 * k0 * z) / inv.p_c.evalf(z) ** 2


def q_function(profile: GQEProfile, inv: InvariantBundle = None, n: int = 2000,
               n_check: int = 400):
    """Return ``(Q, report)``.

    ``Q`` is branch (a) as a callable.  Branch (b) is evaluated on ``n_check``
    points of ``[-1 + delta, 1 - delta]``; a relative disagreement above
    ``1e-6`` raises :class:`NumericFailure`.
    """
    inv = profile.inv if inv is None else inv
    k0 = profile.k0
    q = q_direct(profile)

    zc = np.linspace(-1 + DELTA, 1 - DELTA, n_check)
    qa, qb = q(zc), q_xi_eta(inv, k0, zc)
    scale = max(float(np.max(np.abs(qa))), np.finfo(float).tiny)
    err = float(np.max(np.abs(qa - qb))) / scale
    if not err <= BRANCH_RTOL:
        raise NumericFailure(f"Q branches disagree: relative error {err:.3e}")

    q_lo = richardson_limit(q, -1.0)
    q_hi = richardson_limit(q, 1.0)
    z = np.linspace(-1, 1, n + 1)[1:-1]
    q_min = float(min(np.min(q(z)), q_lo, q_hi))
    gap = xi_eta_gap(inv, k0, np.linspace(-1, 1, n_check + 2)[1:-1])
    report = StabilityReport(
        q_min=q_min,
        q_boundary=(q_lo, q_hi),
        condition_holds=bool(q_min < 0),
        xi_eta_min=float(np.min(gap)),
        log_concavity_holds=log_concavity_check(inv),
        branch_error=err,
    )
    return q, report


def log_concavity_polynomial(P: Polynomial) -> Polynomial:
    """``P'' P - P'^2``."""
    return P.deriv(2) * P - P.deriv() ** 2


def log_concavity_check(inv: InvariantBundle, n: int = 400) -> bool:
    """``P'' P - P'^2 < 0`` at the rational points ``-1 + 2j/n``, ``0 < j < n``, exactly."""
    G = log_concavity_polynomial(inv.P)
    return all(G(Fraction(-n + 2 * j, n)) < 0 for j in range(1, n))


def limit_P(data: AdmissibleData):
    """The ``x_a -> 0`` limit of P (``s_a`` fixed) and its interior root ``t0``.

    Base terms vanish linearly in ``x_a`` and ``p_c`` tends to the fiber
    factor, so the limit is the P of the fiber-only data.  Returns
    ``(P_lim, t0)`` with ``t0`` an exact Fraction.
    """
    inv = build_invariants(data.fiber_only())
    d0, dinf = data.d0, data.dinf
    lin = inv.P_deflated
    if lin.degree != 1 or lin.leading != -(2 + d0 + dinf):
        raise InvariantViolation(f"limit P does not factor as expected: P/fiber = {lin}")
    t0 = -lin.coeffs[0] / lin.coeffs[1]
    roots = isolate_real_roots(inv.P, -1, 1)
    if len(roots) != 1 or t0 not in roots[0]:
        raise InvariantViolation(f"root isolation disagrees with t0 = {t0}")
    return inv.P, t0


@dataclass(frozen=True)
class SmallXRow:
    scale: Fraction
    g_minus: Fraction  # P''P - P'^2 at t = -1
    g_plus: Fraction  # at t = +1
    distance: Fraction  # max coefficient distance to the limit polynomial


def _coef_distance(a: Polynomial, b: Polynomial) -> Fraction:
    d = a - b
    return max((abs(c) for c in d.coeffs), default=Fraction(0))


def small_x_diagnostic(data: AdmissibleData, scales) -> list:
    """Exact ``P''P - P'^2`` at ``t = -+1`` and distance to ``limit_P`` for each x-scale."""
    P_lim, _ = limit_P(data)
    rows = []
    for eps in scales:
        eps = as_fraction(eps)
        P = build_invariants(data.scaled(eps)).P
        G = log_concavity_polynomial(P)
        rows.append(SmallXRow(eps, G(Fraction(-1)), G(Fraction(1)), _coef_distance(P, P_lim)))
    return rows


def case1_constant(dinf: int) -> int:
    """Limit of ``P''P - P'^2`` at ``t = -1`` when ``d0 = 0``."""
    return -(1 + dinf) * (4 + dinf) * 2 ** (2 * dinf)


def root_sign_data(inv: InvariantBundle, k0: float):
    """Signs behind ``xi^2 - eta xi' > 0`` at the root ``t0`` of P.

    Returns ``(dP_sign, eta_t0)``: the exact sign of ``P'`` on the isolating
    bracket of ``t0`` (0 if ``P'`` vanishes there) and ``eta(t0)``.  Since
    ``xi(t0) = 0`` the gap equals ``-eta(t0) xi'(t0)``.
    """
    ok, br = single_root_check(inv)
    if not ok:
        return None
    dP = inv.P.deriv()
    if count_roots(dP, br.lo, br.hi) or dP(br.lo) == 0 or dP(br.hi) == 0:
        sign = 0
    else:
        sign = 1 if dP(br.lo) > 0 else -1
    return sign, float(_eta(inv, k0, br.midpoint)[0])
