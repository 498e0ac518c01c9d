"""The reduced flow on a uniform grid, its diagnostics and symplectic potentials.

The stored unknown is ``Theta_t`` with ``Theta_t(+-1) = 0``.  Its evolution is
``d/dt Theta = Theta V' - Theta' V`` with

    V = (F_t'/p_c + k0 Theta_t - P/p_c) / 2 = (R phi + Theta_inf phi') / 2,

where ``phi = Theta_t/Theta_inf - 1`` and ``R = P/p_c``.  Expanding the
products gives

    2 d/dt Theta = Theta_inf Theta phi'' - (Theta_inf phi')^2 + R Theta_inf phi' + Q (1 + phi) phi,

in which ``Theta_inf``, ``R`` and ``Q`` are known in closed form and only
``phi`` is differenced (2nd-order central).  Differencing only ``phi``, which
is pinned to 0 at both ends, keeps the boundary slopes ``-+2`` to O(h^3).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit
from scipy.integrate import solve_ivp
from scipy.linalg import solve_banded
from scipy.sparse import diags
from scipy.stats import linregress

from ._fd import SLOPE_STENCIL, derivative
from .errors import InvalidInitialization, InvalidProfile, NumericFailure, PositivityLoss
from .gqe import GQEProfile

__all__ = [
    "FlowConfig",
    "FlowState",
    "FlowGrid",
    "InitialSpec",
    "Trajectory",
    "DecayFit",
    "SymplecticPotential",
    "flow_grid",
    "make_state",
    "init_state",
    "velocity_field",
    "theta_form_rhs",
    "phi_form_rhs",
    "scheme_rhs",
    "step",
    "run",
    "decay_fit",
    "reference_solution",
    "canonical_potential",
    "potential_from_theta",
    "u_canonical",
    "y_canonical",
]

RUNNING, CONVERGED, POSITIVITY = 0, 1, 2


@dataclass(frozen=True)
class FlowConfig:
    n: int = 200
    cfl: float = 0.2
    dt_max: float = 1e-2
    t_end: float = 50.0
    tol_conv: float = 1e-8

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 16 or self.n % 2:
            raise ValueError(f"n must be an even integer >= 16, got {self.n!r}")
        if not 0 < self.cfl <= 0.5:
            raise ValueError(f"cfl must lie in (0, 0.5], got {self.cfl!r}")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")
        if not self.tol_conv > 0:
            raise ValueError("tol_conv must be positive")


@dataclass(frozen=True)
class InitialSpec:
    """``canonical`` (Theta_0 = 1 - z^2) or ``perturbed`` (Theta_inf (1 + a (1-z^2)^p))."""

    type: str = "perturbed"
    amplitude: float = 0.1
    power: float = 1.0

    def __post_init__(self):
        if self.type not in ("canonical", "perturbed"):
            raise ValueError(f"unknown initial type {self.type!r}")
        if self.type == "perturbed" and not self.power >= 1:
            raise ValueError("power must be >= 1")


@dataclass(frozen=True, eq=False)
class FlowGrid:
    """Profile data sampled on the grid; read-only and shared between states."""

    n: int
    h: float
    z: np.ndarray
    theta_inf: np.ndarray
    ratio: np.ndarray
    q: np.ndarray
    lk: np.ndarray  # p_c'/p_c + k0 at interior nodes, 0 at the ends
    pc_weights: np.ndarray  # trapezoid weights times p_c


def flow_grid(profile: GQEProfile, n: int) -> FlowGrid:
    key = ("flow", n)
    cache = profile._cache
    if key not in cache:
        s = profile.samples(n)
        z = s["z"]
        thi = s["theta_inf"]
        q = thi * s["dratio"] - s["ratio"] * s["dtheta_inf"]
        w = np.full(n + 1, 2.0 / n)
        w[0] = w[-1] = 1.0 / n
        grid = FlowGrid(n, 2.0 / n, z, thi, s["ratio"], q, s["lk"], w * s["pc"])
        for a in (z, thi, grid.ratio, q, grid.lk, grid.pc_weights):
            a.flags.writeable = False
        cache[key] = grid
    return cache[key]


@dataclass(frozen=True)
class FlowState:
    grid: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    time: float
    sup_phi: float
    l2_phi: float
    min_theta: float
    bnd_err: tuple  # (|Theta'(-1) - 2|, |Theta'(1) + 2|)
    steps: int = 0

    @property
    def diagnostics(self) -> dict:
        return {
            "t": self.time,
            "sup_phi": self.sup_phi,
            "l2_phi": self.l2_phi,
            "min_theta": self.min_theta,
            "bnd_err_m1": self.bnd_err[0],
            "bnd_err_p1": self.bnd_err[1],
        }


def _phi(theta, thi):
    phi = np.zeros_like(theta)
    phi[1:-1] = theta[1:-1] / thi[1:-1] - 1.0
    return phi


def _slope_errors(theta, h):
    left = SLOPE_STENCIL @ theta[:6] / h
    right = -(SLOPE_STENCIL @ theta[::-1][:6]) / h
    return abs(left - 2.0), abs(right + 2.0)


def make_state(fg: FlowGrid, theta, time: float = 0.0, steps: int = 0) -> FlowState:
    theta = np.array(theta, dtype=float)
    if theta.shape != fg.z.shape:
        raise ValueError(f"theta has {theta.size} samples, grid has {fg.z.size}")
    theta[0] = theta[-1] = 0.0
    theta.flags.writeable = False
    phi = _phi(theta, fg.theta_inf)
    phi.flags.writeable = False
    return FlowState(
        grid=fg.z,
        theta=theta,
        phi=phi,
        time=float(time),
        sup_phi=float(np.max(np.abs(phi))),
        l2_phi=float(math.sqrt(fg.pc_weights @ phi**2)),
        min_theta=float(np.min(theta[1:-1])),
        bnd_err=_slope_errors(theta, fg.h),
        steps=steps,
    )


def init_state(profile: GQEProfile, initial: InitialSpec = None, config: FlowConfig = None) -> FlowState:
    initial = InitialSpec() if initial is None else initial
    config = FlowConfig() if config is None else config
    fg = flow_grid(profile, config.n)
    z = fg.z
    if initial.type == "canonical":
        theta = 1.0 - z**2
    else:
        bump = 1.0 + initial.amplitude * (1.0 - z**2) ** initial.power
        if np.any(bump[1:-1] <= 0):
            raise InvalidInitialization(
                f"amplitude {initial.amplitude!r} makes Theta_0 non-positive"
            )
        theta = fg.theta_inf * bump
    if np.any(theta[1:-1] <= 0):
        raise InvalidInitialization("Theta_0 is not positive on the interior")
    return make_state(fg, theta)


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------
@njit(cache=True, nogil=True)
def _rhs(theta, thi, R, Q, h, phi, out):
    n = theta.size - 1
    phi[0] = 0.0
    phi[n] = 0.0
    for j in range(1, n):
        phi[j] = theta[j] / thi[j] - 1.0
    out[0] = 0.0
    out[n] = 0.0
    inv2h = 0.5 / h
    invh2 = 1.0 / (h * h)
    for j in range(1, n):
        p1 = (phi[j + 1] - phi[j - 1]) * inv2h
        p2 = (phi[j + 1] - 2.0 * phi[j] + phi[j - 1]) * invh2
        a = thi[j]
        ap1 = a * p1
        out[j] = 0.5 * (a * theta[j] * p2 - ap1 * ap1 + R[j] * ap1 + Q[j] * (1.0 + phi[j]) * phi[j])


@njit(cache=True, nogil=True)
def _rk4_step(theta, dt, thi, R, Q, h, phi, k1, k2, k3, k4, tmp, out):
    m = theta.size
    _rhs(theta, thi, R, Q, h, phi, k1)
    for j in range(m):
        tmp[j] = theta[j] + 0.5 * dt * k1[j]
    _rhs(tmp, thi, R, Q, h, phi, k2)
    for j in range(m):
        tmp[j] = theta[j] + 0.5 * dt * k2[j]
    _rhs(tmp, thi, R, Q, h, phi, k3)
    for j in range(m):
        tmp[j] = theta[j] + dt * k3[j]
    _rhs(tmp, thi, R, Q, h, phi, k4)
    for j in range(m):
        out[j] = theta[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
    out[0] = 0.0
    out[m - 1] = 0.0


@njit(cache=True, nogil=True)
def _cfl_dt(theta, h, cfl, dt_max):
    tmax = 0.0
    for j in range(theta.size):
        if theta[j] > tmax:
            tmax = theta[j]
    return min(dt_max, cfl * h * h / tmax)


@njit(cache=True, nogil=True)
def _advance(theta, t, t_stop, thi, R, Q, h, cfl, dt_max, tol, slope):
    """Step until ``t_stop``, convergence or positivity loss.

    Returns ``(t, steps, status, node, max_slope_error)``; ``theta`` is updated in place.
    """
    m = theta.size
    n = m - 1
    phi = np.empty(m)
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    new = np.empty(m)
    steps = 0
    bmax = 0.0
    ns = slope.size
    while t < t_stop:
        dt = _cfl_dt(theta, h, cfl, dt_max)
        last = t + dt >= t_stop
        if last:
            dt = t_stop - t
        _rk4_step(theta, dt, thi, R, Q, h, phi, k1, k2, k3, k4, tmp, new)
        t = t_stop if last else t + dt
        steps += 1
        for j in range(1, n):
            if not new[j] > 0.0:
                return t, steps, 2, j, bmax
        sup = 0.0
        for j in range(m):
            theta[j] = new[j]
        for j in range(1, n):
            v = abs(theta[j] / thi[j] - 1.0)
            if v > sup:
                sup = v
        sl = 0.0
        sr = 0.0
        for i in range(ns):
            sl += slope[i] * theta[i]
            sr += slope[i] * theta[n - i]
        e = max(abs(sl / h - 2.0), abs(-sr / h + 2.0))
        if e > bmax:
            bmax = e
        if sup < tol:
            return t, steps, 1, -1, bmax
    return t, steps, 0, -1, bmax


def scheme_rhs(state: FlowState, profile: GQEProfile) -> np.ndarray:
    """``d/dt Theta`` of the semi-discrete scheme used by :func:`step`."""
    fg = flow_grid(profile, state.theta.size - 1)
    th = np.ascontiguousarray(state.theta, dtype=float)
    out = np.empty_like(th)
    _rhs(th, fg.theta_inf, fg.ratio, fg.q, fg.h, np.empty_like(th), out)
    return out


def step(state: FlowState, profile: GQEProfile, inv=None, config: FlowConfig = None) -> FlowState:
    """One RK4 step with ``dt = min(dt_max, cfl h^2 / max Theta)``."""
    config = FlowConfig(n=state.theta.size - 1) if config is None else config
    fg = flow_grid(profile, state.theta.size - 1)
    th = np.array(state.theta, dtype=float)
    dt = _cfl_dt(th, fg.h, config.cfl, config.dt_max)
    work = [np.empty_like(th) for _ in range(6)]
    new = np.empty_like(th)
    _rk4_step(th, dt, fg.theta_inf, fg.ratio, fg.q, fg.h, *work, new)
    t = state.time + dt
    bad = np.flatnonzero(~(new[1:-1] > 0))
    if bad.size:
        node = int(bad[0]) + 1
        raise PositivityLoss(f"Theta <= 0 at node {node} (z = {fg.z[node]:.6g}) at t = {t:.6g}",
                             node=node, time=t)
    return make_state(fg, new, t, state.steps + 1)


@dataclass
class Trajectory:
    t: list = field(default_factory=list)
    sup_phi: list = field(default_factory=list)
    l2_phi: list = field(default_factory=list)
    min_theta: list = field(default_factory=list)
    bnd_err_m1: list = field(default_factory=list)
    bnd_err_p1: list = field(default_factory=list)
    final: FlowState = None
    converged: bool = False
    steps: int = 0
    max_bnd_err: float = 0.0  # over every accepted step, not only recorded ones
    min_theta_all: float = math.inf

    COLUMNS = ("t", "sup_phi", "l2_phi", "min_theta", "bnd_err_m1", "bnd_err_p1")

    def record(self, state: FlowState):
        d = state.diagnostics
        for c in self.COLUMNS:
            getattr(self, c).append(d[c])
        self.final = state
        self.max_bnd_err = max(self.max_bnd_err, *state.bnd_err)
        self.min_theta_all = min(self.min_theta_all, state.min_theta)

    def rows(self):
        return list(zip(*(getattr(self, c) for c in self.COLUMNS)))

    def __len__(self):
        return len(self.t)


def run(state: FlowState, profile: GQEProfile, inv=None, config: FlowConfig = None,
        output_interval: float = 0.1) -> Trajectory:
    """Integrate until ``sup|phi| < tol_conv`` or ``t >= t_end``, recording every ``output_interval``.

    A positivity loss raises :class:`PositivityLoss` carrying the partial
    trajectory as ``.trajectory``.
    """
    config = FlowConfig(n=state.theta.size - 1) if config is None else config
    if config.n != state.theta.size - 1:
        raise ValueError("state grid does not match config.n")
    if not output_interval > 0:
        raise ValueError("output_interval must be positive")
    fg = flow_grid(profile, config.n)
    traj = Trajectory()
    traj.record(state)
    if state.sup_phi < config.tol_conv:
        traj.converged = True
        return traj
    th = np.array(state.theta, dtype=float)
    t = state.time
    steps = state.steps
    k = 1
    while t < config.t_end:
        t_stop = min(state.time + k * output_interval, config.t_end)
        k += 1
        if t_stop <= t:
            continue
        t, ns, status, node, bmax = _advance(
            th, t, t_stop, fg.theta_inf, fg.ratio, fg.q, fg.h,
            config.cfl, config.dt_max, config.tol_conv, SLOPE_STENCIL,
        )
        steps += ns
        traj.steps = steps - state.steps
        traj.max_bnd_err = max(traj.max_bnd_err, bmax)
        if status == POSITIVITY:
            err = PositivityLoss(f"Theta <= 0 at node {node} (z = {fg.z[node]:.6g}) at t = {t:.6g}",
                                 node=int(node), time=t)
            err.trajectory = traj
            raise err
        if not np.all(np.isfinite(th)):
            raise NumericFailure(f"non-finite Theta at t = {t:.6g}")
        traj.record(make_state(fg, th, t, steps))
        if status == CONVERGED:
            traj.converged = True
            break
    return traj


class DecayFit(NamedTuple):
    rate: float
    r_squared: float


def decay_fit(trajectory, values=None) -> DecayFit:
    """Least-squares slope of ``log sup|phi|`` against t over the last half of the samples.

    Accepts a :class:`Trajectory` or two sequences ``(t, sup_phi)``.  With
    fewer than 10 samples, or fewer than two positive values in the tail,
    the rate is undefined and ``(nan, nan)`` is returned.
    """
    if values is None:
        t, y = trajectory.t, trajectory.sup_phi
    else:
        t, y = trajectory, values
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 10:
        return DecayFit(math.nan, math.nan)
    tail = slice(t.size // 2, None)
    t, y = t[tail], y[tail]
    keep = y > 0
    if keep.sum() < 2 or np.ptp(t[keep]) == 0:
        return DecayFit(math.nan, math.nan)
    fit = linregress(t[keep], np.log(y[keep]))
    return DecayFit(float(fit.slope), float(fit.rvalue**2))


def reference_solution(profile: GQEProfile, theta0, t_end: float, rtol: float = 1e-12,
                       atol: float = 1e-14) -> np.ndarray:
    """Same semi-discretization integrated in time with an implicit Radau method.

    Used for grid-convergence studies at resolutions where explicit steps are
    too small to be practical.
    """
    theta0 = np.array(theta0, dtype=float)
    n = theta0.size - 1
    fg = flow_grid(profile, n)
    phi = np.empty_like(theta0)

    def f(_t, th):
        out = np.empty_like(th)
        _rhs(th, fg.theta_inf, fg.ratio, fg.q, fg.h, phi, out)
        return out

    sparsity = diags([1, 1, 1], [-1, 0, 1], shape=(n + 1, n + 1))
    sol = solve_ivp(f, (0.0, t_end), theta0, method="Radau", rtol=rtol, atol=atol,
                    jac_sparsity=sparsity)
    if not sol.success:
        raise NumericFailure(f"reference integration failed: {sol.message}")
    return sol.y[:, -1]


# ---------------------------------------------------------------------------
# velocity and the two right-hand sides, as stand-alone diagnostics
# ---------------------------------------------------------------------------
def _log_pc(profile: GQEProfile, z):
    """``p_c'/p_c`` at interior points."""
    inv = profile.inv
    out = profile.log_pc_base(z)
    if inv.d0:
        out = out + inv.d0 / (1 + z)
    if inv.dinf:
        out = out - inv.dinf / (1 - z)
    return out


def velocity_field(state: FlowState, profile: GQEProfile, inv=None, accuracy: int = 2) -> np.ndarray:
    """``V = (Theta' + Theta p_c'/p_c + k0 Theta - P/p_c) / 2`` with ``V(+-1) = 0``.

    ``Theta'`` is a finite difference of the given ``accuracy`` (2, 4 or 6).
    """
    z = state.grid
    th = np.asarray(state.theta, dtype=float)
    h = z[1] - z[0]
    dth = derivative(th, h, 1, accuracy)
    zi = z[1:-1]
    V = np.zeros_like(th)
    V[1:-1] = 0.5 * (dth[1:-1] + th[1:-1] * (_log_pc(profile, zi) + profile.k0)
                     - profile.ratio(zi))
    return V


def theta_form_rhs(state: FlowState, profile: GQEProfile, accuracy: int = 2) -> np.ndarray:
    """``Theta V' - Theta' V`` from the nodal velocity; zero at the ends."""
    z = state.grid
    h = z[1] - z[0]
    th = np.asarray(state.theta, dtype=float)
    V = velocity_field(state, profile, accuracy=accuracy)
    out = th * derivative(V, h, 1, accuracy) - derivative(th, h, 1, accuracy) * V
    out[0] = out[-1] = 0.0
    return out


def phi_form_rhs(state: FlowState, profile: GQEProfile, accuracy: int = 2) -> np.ndarray:
    """``Theta_inf Theta phi'' - (Theta_inf phi')^2 + R Theta_inf phi' + Q (1 + phi) phi``.

    This is ``2 Theta_inf d/dt phi``; zero at the ends.
    """
    n = state.theta.size - 1
    fg = flow_grid(profile, n)
    phi = np.asarray(state.phi, dtype=float)
    th = np.asarray(state.theta, dtype=float)
    p1 = derivative(phi, fg.h, 1, accuracy)
    p2 = derivative(phi, fg.h, 2, accuracy)
    a = fg.theta_inf
    out = a * th * p2 - (a * p1) ** 2 + fg.ratio * a * p1 + fg.q * (1 + phi) * phi
    out[0] = out[-1] = 0.0
    return out


# ---------------------------------------------------------------------------
# symplectic potentials
# ---------------------------------------------------------------------------
def u_canonical(z):
    """``((1-z) log(1-z) + (1+z) log(1+z) - 2 log 2) / 2``, continuous at +-1."""
    z = np.asarray(z, dtype=float)
    a, b = 1 - z, 1 + z
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = np.where(a > 0, a * np.log(np.where(a > 0, a, 1.0)), 0.0)
        tb = np.where(b > 0, b * np.log(np.where(b > 0, b, 1.0)), 0.0)
    out = 0.5 * (ta + tb - 2 * math.log(2))
    return out if out.ndim else out[()]


def y_canonical(z):
    """``u_c' = artanh z``."""
    with np.errstate(divide="ignore"):
        return np.arctanh(z)


def _upp_canonical(z):
    with np.errstate(divide="ignore"):
        return 1.0 / (1.0 - np.asarray(z, dtype=float) ** 2)


@dataclass(frozen=True)
class SymplecticPotential:
    """Samples of ``u``, ``y = u'`` and ``u''`` on nodes ``z``; ``h = -u + y z``.

    ``y`` and ``u''`` are infinite at +-1.
    """

    z: np.ndarray
    u: np.ndarray
    y: np.ndarray
    upp: np.ndarray

    @property
    def h(self) -> np.ndarray:
        return -self.u + self.y * self.z


def canonical_potential(z=None) -> SymplecticPotential:
    z = np.linspace(-1, 1, 201) if z is None else np.asarray(z, dtype=float)
    return SymplecticPotential(z, u_canonical(z), y_canonical(z), _upp_canonical(z))


def potential_from_theta(theta, z=None, n: int = 400) -> SymplecticPotential:
    """``u = u_c + w`` with ``w'' = 1/Theta - 1/Theta_c`` (bounded) and ``w(+-1) = 0``.

    ``theta`` is either samples on the uniform grid ``z`` or a callable.  The
    second difference of ``w`` is solved exactly, so ``u''`` on the interior
    nodes is ``1/Theta`` up to rounding.
    """
    if callable(theta):
        z = np.linspace(-1, 1, n + 1) if z is None else np.asarray(z, dtype=float)
        th = np.asarray(theta(z), dtype=float)
    else:
        th = np.asarray(theta, dtype=float)
        z = np.linspace(-1, 1, th.size) if z is None else np.asarray(z, dtype=float)
    m = th.size - 1
    if np.any(~(th[1:-1] > 0)):
        raise InvalidProfile("Theta must be positive on the interior")
    h = z[1] - z[0]
    zi = z[1:-1]
    g = 1.0 / th[1:-1] - 1.0 / (1.0 - zi**2)
    ab = np.zeros((3, m - 1))
    ab[0, 1:] = 1.0
    ab[1, :] = -2.0
    ab[2, :-1] = 1.0
    w = np.zeros(m + 1)
    w[1:-1] = solve_banded((1, 1), ab, g * h * h)
    dw = derivative(w, h, 1, 2)
    d2w = np.zeros(m + 1)
    d2w[1:-1] = g
    u = u_canonical(z) + w
    u[0] = u[-1] = 0.0
    return SymplecticPotential(z, u, y_canonical(z) + dw, _upp_canonical(z) + d2w)
