"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line; the lines are repeated in an
"acceptance criteria" section at the end of the pytest run.
"""

import time
from fractions import Fraction

import numpy as np
from mpmath import mp

from acceptance_log import report
from chattering import run
from chattering.cli import sci3
from chattering.fd_oracle import compare_l2, crank_nicolson_solve, observed_orders
from chattering.instance_builder import build_instance, exact_objective, positivity_certificate, verify_optimality
from chattering.series_eval import coefficient_power_sum, harmonic_power_sum, verify_sign_pattern
from chattering.spectral_heat import BangBangControl, adjoint_trace, forward_terminal_state, switching_samples, terminal_datum_w
from oracles import harmonic_squares, trace_by_quadrature

PUBLISHED_DELTA = ["5.00e-01", "1.56e-02", "1.22e-04", "1.52e-05", "2.38e-07", "7.45e-09"]
PUBLISHED_P = [1, 2, 21, 333, 994, 9069]
PUBLISHED_Q = [1, 5, 22, 334, 996, 9070]
PUBLISHED_R = [1, 5, 7, 9, 12, 14]


def rel(a, b):
    return abs(a - b) / abs(b)


def test_criterion_1_table():
    t0 = time.perf_counter()
    seq = run(0.5, K=6, precision_bits=128)
    elapsed = time.perf_counter() - t0
    p = [seq.p(k) for k in range(1, 7)]
    q = [seq.q(k) for k in range(1, 7)]
    r = [seq.r(k) for k in range(1, 7)]
    deltas = [sci3(seq.delta(k)) for k in range(1, 7)]
    ok = p == PUBLISHED_P and q == PUBLISHED_Q and r == PUBLISHED_R and deltas == PUBLISHED_DELTA and elapsed < 60
    report(1, "published sequence table", ok, f"p={p} q={q} r={r} 1-z={deltas} in {elapsed:.2f}s")
    assert ok


def test_criterion_2_sign_pattern():
    t0 = time.perf_counter()
    seq = run(0.5, K=9, precision_bits=256)
    reports = [verify_sign_pattern(seq, L) for L in range(1, 10)]
    elapsed = time.perf_counter() - t0
    signs_ok = all(
        rep.ok and [int(mp.sign(v)) for v in rep.values] == [(-1) ** (k + 1) for k in range(1, rep.L + 1)]
        for rep in reports
    )
    ok = signs_ok and elapsed < 120
    report(2, "sign pattern for K=9, L=1..9", ok, f"{elapsed:.2f}s")
    assert ok


def test_criterion_3_power_sums(seq6):
    worst = 0.0
    with mp.workprec(128):
        for gamma in (1, 1.5, 2, 3):
            for k in range(1, 7):
                lhs = coefficient_power_sum(seq6, gamma, k)
                rhs = harmonic_power_sum(seq6.r(k), gamma)
                if isinstance(rhs, Fraction):
                    rhs = mp.mpf(rhs.numerator) / rhs.denominator
                worst = max(worst, float(abs(lhs - rhs) / rhs))
    ok = worst <= 1e-12
    report(3, "power-sum identity", ok, f"max relative error {worst:.2e}")
    assert ok


def test_criterion_4_parseval_and_objective(seq9, inst6):
    worst, limit_ok = 0.0, True
    for L in range(1, 10):
        r = seq9.r(L)
        exact = harmonic_squares(r) / 2
        worst = max(worst, rel(terminal_datum_w(seq9, L).norm2(), float(exact)))
        with mp.workprec(128):
            tail = (mp.zeta(2) - mp.mpf(exact.numerator * 2) / exact.denominator) / 2
            gap = mp.pi**2 / 12 - mp.mpf(terminal_datum_w(seq9, L).norm2())
            limit_ok = limit_ok and abs(gap) <= tail * (1 + mp.mpf(10) ** -9) + mp.mpf(10) ** -15
    quarter = harmonic_squares(14) / 4
    objective_ok = (
        exact_objective(inst6.seq, 6) == quarter
        and rel(inst6.diagnostics.objective_value, float(quarter)) <= 1e-12
    )
    ok = worst <= 1e-12 and objective_ok and limit_ok
    report(
        4,
        "Parseval, objective and limit",
        ok,
        f"Parseval rel err {worst:.2e}, objective {inst6.diagnostics.objective_value:.12f} = {quarter}",
    )
    assert ok


def test_criterion_5_trace_identity(seq6):
    T = 1.0
    ts = np.linspace(0.0, T - 1e-4, 200)
    ref = trace_by_quadrature(seq6, 6, T - ts)
    got = np.array([float(adjoint_trace(seq6, 6, T, t)) for t in ts])
    err = float(np.max(np.abs(got - ref)))
    ok = err < 1e-8
    report(5, "adjoint trace identity", ok, f"max deviation {err:.2e} on 200 points")
    assert ok


def test_criterion_6_oracle_equivalence(inst6):
    const = BangBangControl(0.1, 1)
    reference = forward_terminal_state(const, tol=1e-9)
    gap_const = compare_l2(crank_nicolson_solve(const, 2001, 2000), reference)
    fd = crank_nicolson_solve(inst6.control, 2001, 2000, min_steps=200)
    gap_inst = compare_l2(fd, inst6.terminal_state)
    errs = [compare_l2(crank_nicolson_solve(const, n + 1, n), reference) for n in (100, 200, 400)]
    orders = observed_orders(errs)
    ok = gap_const < 1e-3 and gap_inst < 1e-3 and min(orders) >= 1.9
    report(
        6,
        "finite-difference oracle",
        ok,
        f"gaps {gap_const:.2e} (u=1) and {gap_inst:.2e} (L=6), orders {[round(o, 3) for o in orders]}",
    )
    assert ok


def test_criterion_7_optimality(seq6):
    t0 = time.perf_counter()
    inst = build_instance(seq6, 6, 1.0, 64)
    rep = verify_optimality(inst, t_grid_size=10_000, control_samples=100, seed=0)
    cert = positivity_certificate(inst)
    elapsed = time.perf_counter() - t0
    switches = inst.diagnostics.interior_switch_count
    ok = (
        rep.sign_residual == 0
        and rep.checks["variational_inequality"]
        and rep.checks["variational_inequality_exact"]
        and rep.checks["adjoint_terminal_datum"]
        and switches >= 5
        and cert.value > 0.39
        and inst.diagnostics.objective_value > 0.39
        and elapsed < 300
    )
    report(
        7,
        "optimality system for L=6, T=1",
        ok,
        f"sign residual {rep.sign_residual}, VI min {rep.vi_min:.3e} >= -{rep.vi_eps:.3e}, "
        f"exact VI min {rep.vi_exact_min:.3e}, switches {switches}, ||w||^2 {cert.value:.6f}, "
        f"objective {inst.diagnostics.objective_value:.6f}, {elapsed:.1f}s",
    )
    assert ok


def test_criterion_8_chattering_scaling(seq9):
    counts, lower_ok = {}, True
    for L in range(2, 10):
        inst = build_instance(seq9, L, 1.0, 64)
        counts[L] = inst.diagnostics.interior_switch_count
        if all(s.interior for s in switching_samples(seq9, L, 1.0)):
            lower_ok = lower_ok and counts[L] >= L - 1
    values = list(counts.values())
    monotone = all(a <= b for a, b in zip(values, values[1:]))
    ok = monotone and lower_ok
    report(8, "switch count grows with L", ok, f"counts {counts}")
    assert ok
