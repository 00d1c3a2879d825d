import json
import math
from fractions import Fraction

import numpy as np
import pytest

from chattering.instance_builder import (
    ChatteringInstance,
    InstanceError,
    build_instance,
    exact_objective,
    minimal_horizon,
    positivity_certificate,
    switch_offsets,
    verify_optimality,
)
from chattering.spectral_heat import trace_values
from oracles import harmonic_squares


@pytest.fixture(scope="module")
def inst1(seq6):
    return build_instance(seq6, 1, 1.0)


def test_first_level_instance(inst1):
    assert inst1.diagnostics.interior_switch_count == 0
    assert inst1.control.offsets == ()
    assert inst1.control.initial_sign == -1  # trace is z > 0
    assert inst1.diagnostics.objective_value == 0.25
    assert positivity_certificate(inst1).value == 0.5


def test_first_level_verifies(inst1):
    assert verify_optimality(inst1, 2000, 20).ok


def test_minimal_horizon_value(seq6):
    assert minimal_horizon(seq6) == pytest.approx(math.log(2) / math.pi**2, rel=1e-15)


def test_short_horizon_rejected_with_bound(seq6):
    with pytest.raises(InstanceError, match=r"ln\(1/z_1\)/pi\^2"):
        build_instance(seq6, 6, 0.05)


def test_level_out_of_range(seq6):
    with pytest.raises(InstanceError):
        build_instance(seq6, 7, 1.0)


def test_table_instance(inst6):
    d = inst6.diagnostics
    assert d.interior_switch_count >= 5
    assert exact_objective(inst6.seq, 6) == harmonic_squares(14) / 4
    assert abs(d.objective_value - float(harmonic_squares(14) / 4)) <= 1e-12 * d.objective_value
    assert abs(d.objective_value - 0.393999) < 1e-5


def test_switches_are_trace_roots(inst6):
    th = np.asarray(inst6.control.offsets)
    below = trace_values(inst6.seq, 6, th * (1 - 1e-9))
    above = trace_values(inst6.seq, 6, th * (1 + 1e-9))
    assert np.all(np.sign(below) == -np.sign(above))


def test_switches_interleave_probe_times(inst6, seq6):
    th = inst6.control.offsets
    probes = [-math.log1p(-float(seq6.delta(k))) / math.pi**2 for k in range(1, 7)]
    for k in range(5):
        assert any(probes[k + 1] < t < probes[k] for t in th)


def test_y_d_identity(inst6):
    for n in inst6.w.n[:50]:
        n = int(n)
        yb = inst6.terminal_state.coefficient(n)
        assert inst6.y_d.coefficient(n) == yb - inst6.w.coefficient(n)
    assert inst6.y_d.a0 == inst6.terminal_state.a0


def test_verify_table_instance(inst6):
    rep = verify_optimality(inst6, 10_000, 100)
    assert rep.ok, rep.checks
    assert rep.sign_residual == 0
    assert rep.vi_min >= -rep.vi_eps
    assert rep.vi_exact_min >= -rep.vi_exact_eps
    assert rep.terminal_exact


def test_opposite_control_value(inst6):
    # u = -ubar gives twice the L1 norm of the trace
    rep = verify_optimality(inst6, 2000, 5)
    ts = np.linspace(0, inst6.T, 200_001)[:-1]
    l1 = np.abs(trace_values(inst6.seq, 6, inst6.T - ts)).mean() * inst6.T
    assert rep.opposite_control_value == pytest.approx(2 * l1, rel=1e-3)
    assert rep.opposite_control_value > 0


def test_verify_detects_wrong_control(inst6):
    from dataclasses import replace

    flipped = replace(inst6, control=replace(inst6.control, initial_sign=-inst6.control.initial_sign))
    rep = verify_optimality(flipped, 2000, 5)
    assert not rep.checks["sign_law"]
    assert not rep.checks["variational_inequality_exact"]


def test_positivity_six_levels(inst6):
    cert = positivity_certificate(inst6)
    assert cert.exact == harmonic_squares(14) / 2
    assert abs(cert.parseval - float(cert.exact)) < 1e-14
    assert abs(cert.quadrature - cert.parseval) < 1e-8
    assert cert.value > 0.39


def test_limit_objective(seq9):
    for L in (6, 9):
        r = seq9.r(L)
        norm = 2 * float(exact_objective(seq9, L))
        gap = 0.5 * (math.pi**2 / 6 - float(harmonic_squares(r)))
        assert abs(math.pi**2 / 12 - norm - gap) < 1e-15
    assert abs(math.pi**2 / 24 - 0.41123) < 1e-5


def test_switch_count_monotone_in_level(seq9):
    counts = [len(switch_offsets(seq9, L, 1.0)[0]) for L in range(1, 10)]
    assert counts == sorted(counts)
    assert all(c >= L - 1 for L, c in zip(range(1, 10), counts))


def test_oracle_gap(seq6):
    inst = build_instance(seq6, 3, 1.0, oracle_nx=401, oracle_nt=800)
    assert inst.diagnostics.oracle_l2_gap < 1e-3


def test_instance_json_round_trip(inst6):
    doc = json.loads(inst6.dumps())
    assert len(doc["y_d"]["grid"]["x"]) == 1001
    back = ChatteringInstance.from_json(doc)
    assert back.control == inst6.control
    assert back.seq.blocks == inst6.seq.blocks
    np.testing.assert_array_equal(back.y_d.a, inst6.y_d.a)
    assert verify_optimality(back, 2000, 5).ok


def test_exact_objective_is_rational(seq6):
    assert exact_objective(seq6, 2) == (1 + Fraction(1, 4) + Fraction(1, 9) + Fraction(1, 16) + Fraction(1, 25)) / 4
