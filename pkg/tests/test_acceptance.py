"""Acceptance criteria 1-10, one PASS/FAIL line each.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are written
with output capture disabled so they appear in the normal pytest log.
"""
import math
from fractions import Fraction as Fr
from math import comb

import numpy as np
import pytest

from admissible_flow.admissible import (
    AdmissibleData,
    build_invariants,
    fano_parameters,
    fano_residual,
    koiso_data,
    single_root_check,
)
from admissible_flow.flow import (
    FlowConfig,
    InitialSpec,
    decay_fit,
    init_state,
    phi_form_rhs,
    reference_solution,
    run,
    step,
    theta_form_rhs,
)
from admissible_flow.gqe import build_profile, mt, solve_k0, tz_value
from admissible_flow.polycalc import Polynomial
from admissible_flow.stability import case1_constant, limit_P, q_function, small_x_diagnostic

T = Polynomial.identity()


@pytest.fixture
def report(capsys):
    def emit(num, title, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {num:2d} {'PASS' if ok else 'FAIL'}: {title} [{detail}]")
        assert ok, detail

    return emit


def profile(data):
    inv = build_invariants(data)
    return inv, build_profile(inv, solve_k0(inv), data)


def test_criterion_01_koiso_obstruction(report):
    worst = 0.0
    for l in (1, 2, 3):
        for x in (Fr(1, 10), Fr(-1, 10), Fr(1, 2), Fr(-1, 2)):
            closed = -4 * sum(comb(l, 2 * i - 1) * x ** (2 * i - 1) / (2 * i + 1)
                              for i in range(1, (l + 1) // 2 + 1))
            got = mt(build_invariants(koiso_data(x, l)), 0.0)
            worst = max(worst, abs(got - float(closed)) / abs(float(closed)))
    half = mt(build_invariants(koiso_data(Fr(1, 2))), 0.0)
    ok = worst <= 1e-12 and abs(half + 2 / 3) <= 1e-12 * 2 / 3
    report(1, "Koiso obstruction MT(0)", ok, f"max rel err {worst:.2e}, MT(0) at x=1/2 = {half!r}")


def test_criterion_02_fano_identity(report):
    ok, details = True, []
    for x in (Fr(1, 10), Fr(1, 2)):
        data = koiso_data(x)
        inv = build_invariants(data)
        fp = fano_parameters(data)
        lam, C = fp.lam, fp.C
        direct = (2 * lam) * T * inv.p_c - C * inv.p_c + inv.P
        single, br = single_root_check(inv)
        root = C / (2 * lam)
        ok &= (lam, C) == (1, 0) and direct.is_zero() and fano_residual(inv, fp).is_zero()
        ok &= single and root in br
        details.append(f"x={x}: residual zero={direct.is_zero()}, root bracket [{br.lo}, {br.hi}]")
    report(2, "Fano identity 2 lam z p_c - C p_c + P = 0", ok, "; ".join(details))


def test_criterion_03_gqe_conditions(report):
    ok, worst = True, {}
    z = np.linspace(-1, 1, 10001)[1:-1]
    ends = np.array([-1.0, 1.0])
    for name, data in (("round", AdmissibleData()), ("x=1/10", koiso_data(Fr(1, 10))),
                       ("x=1/2", koiso_data(Fr(1, 2)))):
        inv, prof = profile(data)
        f1 = abs(float(prof.F(1.0)))
        dF = prof.F_complex_step(ends)
        pc = inv.p_c.evalf(ends)
        slope = max(abs(dF[0] - 2 * pc[0]), abs(dF[1] + 2 * pc[1]))
        fmin = float(np.min(prof.F(z)))
        Pz = inv.P.evalf(z)
        ode = float(np.max(np.abs(prof.F_complex_step(z) + prof.k0 * prof.F(z) - Pz)))
        ode_rel = ode / float(np.max(np.abs(Pz)))
        ok &= f1 <= 1e-10 and slope <= 1e-8 and fmin > 0 and ode_rel <= 1e-10
        worst[name] = f"|F(1)|={f1:.1e} slope={slope:.1e} minF={fmin:.2e} ode={ode_rel:.1e}"
    report(3, "GQE profile conditions", ok, "; ".join(f"{k}: {v}" for k, v in worst.items()))


def test_criterion_04_boundary_limits(report):
    base = ((1, 2, Fr(1, 2)),)
    ok, parts = True, []
    for d0, dinf in ((0, 0), (0, 1), (1, 2)):
        for facs in ((), base):
            data = AdmissibleData(facs, d0, dinf)
            inv, prof = profile(data)
            _, rep = q_function(prof, inv)
            lo, hi = rep.q_boundary
            err = max(abs(lo + 4 * (d0 + 1)), abs(hi + 4 * (dinf + 1)))
            ok &= err <= 1e-4
            parts.append(f"({d0},{dinf}){'+base' if facs else ''}: {err:.1e}")
    inv, prof = profile(AdmissibleData())
    q, _ = q_function(prof, inv)
    zi = np.linspace(-1, 1, 2001)[1:-1]
    round_err = float(np.max(np.abs(q(zi) + 2 + 2 * zi**2)))
    ok &= round_err <= 1e-10
    report(4, "Q boundary limits -4(d+1)", ok, ", ".join(parts) + f"; round Q err {round_err:.1e}")


def test_criterion_05_case1_constant(report):
    ok, parts = True, []
    scales = [Fr(1, 10), Fr(1, 100), Fr(1, 1000)]
    for dinf in (0, 2):
        target = case1_constant(dinf)
        rows = small_x_diagnostic(AdmissibleData(((1, 2, Fr(1, 2)), (2, -1, Fr(-1, 3))), 0, dinf), scales)
        errs = [abs(r.g_minus - target) for r in rows]
        rel = float(errs[-1] / abs(target))
        mono = all(b < a for a, b in zip(errs, errs[1:]))
        ok &= target == -(1 + dinf) * (4 + dinf) * 4**dinf and mono and rel <= 0.01
        parts.append(f"dinf={dinf}: target {target}, G(-1) at 1e-3 = {float(rows[-1].g_minus):.4f}, "
                     f"rel {rel:.1e}, monotone={mono}")
    report(5, "small-x Case-1 constant", ok, "; ".join(parts))


def test_criterion_06_limit_polynomial(report):
    P, t0 = limit_P(AdmissibleData(((1, 2, Fr(1, 2)),), 0, 1))
    ok = P == 3 * T**2 - 2 * T - 1 and t0 == Fr(-1, 3) and (2 + 1) * (1 + t0) == 2
    report(6, "limit polynomial 3t^2-2t-1", ok, f"P = {P}, t0 = {t0}")


def test_criterion_07_flow(report):
    ok, parts = True, []
    for name, data in (("round", AdmissibleData()), ("x=1/10", koiso_data(Fr(1, 10)))):
        inv, prof = profile(data)
        cfg = FlowConfig(n=200, t_end=50)
        still = init_state(prof, InitialSpec("perturbed", 0.0), cfg)
        sup_still = still.sup_phi
        for _ in range(500):
            still = step(still, prof, inv, cfg)
            sup_still = max(sup_still, still.sup_phi)
        tr = run(init_state(prof, InitialSpec("perturbed", 0.1, 1.0), cfg), prof, inv, cfg)
        rate, r2 = decay_fit(tr)
        ok &= (sup_still <= 1e-12 and tr.converged and tr.final.sup_phi < 1e-8
               and rate < 0 and r2 > 0.99 and tr.max_bnd_err <= 1e-6 and tr.min_theta_all > 0)
        parts.append(f"{name}: still {sup_still:.1e}, t_conv {tr.final.time:.2f}, rate {rate:.3f}, "
                     f"r2 {r2:.6f}, slope err {tr.max_bnd_err:.1e}, min Theta {tr.min_theta_all:.2e}")
    report(7, "flow stationarity and decay", ok, "; ".join(parts))


def test_criterion_08_scheme_order(report):
    inv, prof = profile(AdmissibleData())
    t_end = 1.0
    fine = 1600
    ref0 = init_state(prof, InitialSpec("perturbed", 0.1, 1.0), FlowConfig(n=fine))
    ref = reference_solution(prof, ref0.theta, t_end)
    z_ref = ref0.grid
    errs = []
    for n in (100, 200, 400):
        cfg = FlowConfig(n=n, t_end=t_end, tol_conv=1e-300)
        tr = run(init_state(prof, InitialSpec("perturbed", 0.1, 1.0), cfg), prof, inv, cfg,
                 output_interval=t_end)
        sub = ref[:: fine // n]
        assert np.allclose(z_ref[:: fine // n], tr.final.grid, atol=1e-14, rtol=0)
        thi = tr.final.theta / (1 + tr.final.phi)
        phi_ref = np.zeros_like(sub)
        phi_ref[1:-1] = sub[1:-1] / thi[1:-1] - 1
        errs.append(float(np.max(np.abs(tr.final.phi - phi_ref))))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    ok = all(3 <= r <= 5 for r in ratios)
    report(8, "scheme order", ok,
           f"errors {', '.join(f'{e:.3e}' for e in errs)}; ratios {ratios[0]:.2f}, {ratios[1]:.2f}")


def test_criterion_09_form_equivalence(report):
    inv, prof = profile(koiso_data(Fr(1, 10)))
    s = init_state(prof, InitialSpec("perturbed", 0.1, 1.0), FlowConfig(n=400))

    def gap(accuracy):
        a = phi_form_rhs(s, prof, accuracy=accuracy)
        b = 2 * theta_form_rhs(s, prof, accuracy=accuracy)
        return float(np.max(np.abs(a - b)[1:-1]) / np.max(np.abs(a)))

    g4, g2 = gap(4), gap(2)
    report(9, "form equivalence at n=400", g4 <= 1e-6,
           f"relative gap {g4:.1e} with 4th-order differences ({g2:.1e} with 2nd-order)")


def test_criterion_10_tian_zhu(report):
    data = koiso_data(Fr(1, 2))
    inv = build_invariants(data)
    fp = fano_parameters(data)
    at0 = tz_value(inv, fp, 0.0, 1.0)
    atk = tz_value(inv, fp, solve_k0(inv), 1.0)
    ok = abs(at0 - 4 * math.pi / 3) <= 1e-12 * 4 * math.pi / 3 and abs(atk) <= 1e-12
    report(10, "Tian-Zhu relation", ok, f"tz(0) = {at0!r} vs 4 pi/3 = {4 * math.pi / 3!r}; tz(k0) = {atk:.1e}")
