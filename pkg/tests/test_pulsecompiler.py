import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mrqsim import pulsecompiler as pc
from mrqsim import spincore as sc
from mrqsim.errors import AssemblyError, CompilationError, ConfigurationError

R = 1 / math.sqrt(2)
BASES = ("zero", "one")


def kinds(tokens):
    return [t.kind for t in tokens]


# -- signal transformation -------------------------------------------------------

def test_control_zero_is_hold_pair():
    assert kinds(pc.transform_signal(pc.LogicalSignal("control", "zero"))) == ["R(180)"] * 2


def test_control_one_follows_sign():
    assert kinds(pc.transform_signal(pc.LogicalSignal("control", "one"))) == ["R(90)"]
    assert kinds(pc.transform_signal(pc.LogicalSignal("control", "one", "-"))) == ["-R(90)"]


@pytest.mark.parametrize("basis", BASES)
def test_target_is_quadrupole_for_either_basis(basis):
    toks = pc.transform_signal(pc.LogicalSignal("target", basis))
    assert kinds(toks) == ["R(90)", "R(180)", "R(180)", "R(-90)"]
    assert {t.channel for t in toks} == {"target_line"}


def test_signal_and_token_domains_are_closed():
    with pytest.raises(ConfigurationError):
        pc.LogicalSignal("ancilla", "zero")
    with pytest.raises(ConfigurationError):
        pc.LogicalSignal("control", "two")
    with pytest.raises(ConfigurationError):
        pc.PulseToken("R(45)", "control_line")
    with pytest.raises(ConfigurationError):
        pc.PulseToken("R(90)", "rf_line")


@given(st.sampled_from(["control", "target"]), st.sampled_from(BASES),
       st.sampled_from(["+", "-"]))
def test_transform_is_deterministic(role, basis, sign):
    sig = pc.LogicalSignal(role, basis, sign)
    assert pc.transform_signal(sig) == pc.transform_signal(pc.LogicalSignal(role, basis, sign))


# -- branch algebra ------------------------------------------------------------------

def test_hadamard_branch_tokens():
    bp, bpp = pc.control_hadamard_branches("zero")
    assert (bp.name, bp.bit, bp.sign) == ("B+", 0, 1)
    assert (bpp.name, bpp.bit, bpp.sign) == ("B++", 1, 1)
    bm, bmm = pc.control_hadamard_branches("one")
    assert (bm.name, bm.bit, bm.sign) == ("B-", 0, 1)
    assert (bmm.name, bmm.bit, bmm.sign) == ("B--", 1, -1)


@pytest.mark.parametrize("basis", BASES)
def test_branch_amplitudes_reproduce_hadamard_output(basis):
    a, b = pc.control_hadamard_branches(basis)
    vec = np.zeros(2)
    for tok in (a, b):
        vec[tok.bit] += tok.sign * R
    ket = sc.StateVector.basis("0" if basis == "zero" else "1")
    np.testing.assert_allclose(vec, (sc.hadamard_via_rotations() @ ket).amplitudes, atol=1e-15)


def test_target_identity_branch():
    assert pc.target_identity_branch("zero").name == "A+"
    assert pc.target_identity_branch("one").name == "A-"
    assert pc.target_identity_branch("zero") == pc.target_identity_branch("zero")


def test_eight_cnot_terms():
    terms = pc.enumerate_cnot_terms()
    assert len(terms) == 8
    by = {t.name: t for t in terms}
    assert by["C[B+A+]"].cnot_result == (1, "00")
    assert by["C[B++A+]"].cnot_result == (1, "11")
    assert by["C[B--A-]"].cnot_result == (-1, "10")
    for t in terms:
        flips = t.control.name in ("B++", "B--")
        assert (t.cnot_result[1][1] != str(t.target.bit)) == flips


def test_assembled_states_match_table():
    asm = pc.assemble_bell(pc.enumerate_cnot_terms())
    assert asm.states["Phi+"] == {"00": 1, "11": 1}
    assert asm.states["Phi-"] == {"00": 1, "11": -1}
    assert asm.states["Psi+"] == {"01": 1, "10": 1}
    assert asm.states["Psi-"] == {"01": 1, "10": -1}
    np.testing.assert_allclose(asm.vector("Phi+").amplitudes, [R, 0, 0, R], atol=1e-16)
    np.testing.assert_allclose(asm.vector("Psi-").amplitudes, [0, R, -R, 0], atol=1e-16)
    assert asm.halves["Phi+"] == [{"00": 1}, {"11": 1}]


def test_assembled_states_agree_with_canonical_bell_basis():
    asm = pc.assemble_bell(pc.enumerate_cnot_terms())
    canon = sc.bell_states()
    for label in sc.BELL_LABELS:
        assert sc.state_fidelity(asm.vector(label), canon[label]) >= 1 - 1e-12
    vecs = [asm.vector(k).amplitudes for k in asm.states]
    gram = np.array([[np.vdot(a, b) for b in vecs] for a in vecs])
    assert np.max(np.abs(gram - np.eye(4))) <= 1e-12


def test_sum_check_against_printed_rows():
    # rows written out ket by ket: |0>[|0>] + |1>[|1>], |0>[|0>] - |1>[|1>], ...
    rows = [{"00": 1, "11": 1}, {"00": 1, "11": -1}, {"01": 1, "10": 1}, {"01": 1, "10": -1}]
    total = {}
    for r in rows:
        for k, v in r.items():
            total[k] = total.get(k, 0) + v
    expected = {k: Fraction(v) for k, v in sorted(total.items()) if v}
    assert pc.assemble_bell(pc.enumerate_cnot_terms()).phi_sum() == expected


def test_missing_term_is_named():
    terms = [t for t in pc.enumerate_cnot_terms() if t.name != "C[B--A-]"]
    with pytest.raises(AssemblyError, match=r"C\[B--A-\]"):
        pc.assemble_bell(terms)


def test_flipping_b_minus_minus_sign_flips_only_its_states():
    flipped = dict(pc.CONTROL_TOKENS)
    flipped["B--"] = pc.BranchToken("B--", 1, +1)
    base = pc.assemble_bell(pc.enumerate_cnot_terms())
    alt = pc.assemble_bell(pc.enumerate_cnot_terms(flipped.values()))
    for label in ("Phi+", "Psi+"):
        assert alt.states[label] == base.states[label]
    assert alt.states["Phi-"] == {"00": 1, "11": 1}
    assert alt.states["Psi-"] == {"01": 1, "10": 1}
    for label in ("Phi-", "Psi-"):
        # first half unchanged, second half negated: only the relative phase moves
        assert alt.halves[label][0] == base.halves[label][0]
        assert alt.halves[label][1] == {k: -v for k, v in base.halves[label][1].items()}


# -- compilation -------------------------------------------------------------------------

def test_default_program_layout():
    prog = pc.compile_bell_sequence()
    ctrl = prog.channel("control_line")
    tgt = prog.channel("target_line")
    assert [(e.token, e.axis) for e in ctrl] == [("R(90)", "y"), ("R(180)", "x"),
                                                 ("R(180)", "z"), ("R(180)", "z"),
                                                 ("R(90)", "z")]
    assert [(e.token, e.axis, e.conditional) for e in tgt] == [
        ("R(90)", "y", False), ("R(180)", "x", True), ("R(180)", "y", True),
        ("R(-90)", "y", False)]
    assert max(e.order for e in ctrl) < min(e.order for e in tgt)
    assert prog.token_counts() == {"control_line:hadamard": 2, "control_line:hold": 2,
                                   "control_line:phase": 1, "target_line:quadrupole": 4}


def test_empty_gate_program_is_target_only():
    prog = pc.compile_bell_sequence(gates=("CNOT",))
    assert not [e for e in prog.events if e.segment == "hadamard"]
    prog = pc.compile_bell_sequence(gates=())
    assert prog.events == []


def test_unsupported_gate():
    with pytest.raises(ConfigurationError):
        pc.compile_bell_sequence(gates=("H", "SWAP"))


@pytest.mark.parametrize("c,t", list(itertools.product(BASES, BASES)))
@pytest.mark.parametrize("hold", ["z", "y"])
def test_every_input_pair_reaches_its_bell_state(c, t, hold):
    rep = pc.verify_compiled(pc.compile_bell_sequence(c, t, hold_axis=hold))
    assert rep.expected_label == pc.INPUT_TO_BELL[(c, t)]
    assert rep.fidelity_expected >= 1 - 1e-12
    assert rep.bell_fidelities[rep.expected_label] >= 1 - 1e-12
    assert rep.passed


def test_hold_axis_substitution_leaves_fidelity_unchanged():
    for c, t in itertools.product(BASES, BASES):
        fz = pc.verify_compiled(pc.compile_bell_sequence(c, t, hold_axis="z")).fidelity_expected
        fy = pc.verify_compiled(pc.compile_bell_sequence(c, t, hold_axis="y")).fidelity_expected
        assert abs(fz - fy) <= 1e-12


def test_negative_phase_token_lands_on_partner_state():
    rep = pc.verify_compiled(pc.compile_bell_sequence("zero", "one", phase_sign="-"))
    assert rep.expected_label == "Psi-"
    assert rep.bell_fidelities["Psi-"] >= 1 - 1e-12
    rep = pc.verify_compiled(pc.compile_bell_sequence("zero", "zero", phase_sign="-"))
    assert rep.bell_fidelities["Phi-"] >= 1 - 1e-12


def test_identity_program():
    rep = pc.verify_compiled(pc.compile_bell_sequence(gates=()))
    assert rep.fidelity_ideal == 1.0
    assert rep.expected_label is None
    assert sc.state_fidelity(rep.output, sc.StateVector.basis("00")) == 1.0


def test_program_unitary_is_cnot_after_hadamard():
    u = pc.program_unitary(pc.compile_bell_sequence().events).matrix
    ideal = pc.ideal_unitary([("H", 0), ("CNOT", (0, 1))])
    phase = np.vdot(ideal.ravel(), u.ravel()) / 4
    assert abs(abs(phase) - 1) <= 1e-12
    np.testing.assert_allclose(u, phase * ideal, atol=1e-12)


def test_quadrupole_discrepancy_is_reported():
    rep = pc.quadrupole_report()
    assert rep["gap_to_cnot"] > 0.1
    assert rep["control_one_phase"] == pytest.approx([0.0, -1.0], abs=1e-12)
    assert "controlled(-iX)" in rep["note"]


def test_lowering_errors():
    ev = pc.PulseEvent(0, "control_line", "R(90)", None)
    with pytest.raises(CompilationError, match="no axis"):
        pc.lower_event(ev)
    with pytest.raises(CompilationError):
        pc.lower_event(pc.PulseEvent(0, "control_line", "R(45)", "x"))
    with pytest.raises(CompilationError):
        pc.lower_event(pc.PulseEvent(0, "control_line", "R(90)", "x", conditional=True))


def test_program_json():
    d = pc.compile_bell_sequence().to_dict()
    assert d["lowering"] == pc.LOWERING_VERSION
    assert d["input"] == {"control": "|0>", "target": "|0>"}
    assert {"channel", "token", "axis", "order"} <= set(d["events"][0])
    assert any("same quadrupole train" in n for n in d["notes"])


def test_bloch_track_shape_and_end_state():
    track = pc.bloch_track(pc.compile_bell_sequence())
    assert track.shape == (1 + 9, 7)
    np.testing.assert_allclose(track[0, 1:], [0, 0, 1, 0, 0, 1], atol=1e-15)
    # maximally entangled: both reduced Bloch vectors vanish
    np.testing.assert_allclose(track[-1, 1:], 0.0, atol=1e-12)


# -- textual programs ------------------------------------------------------------------

def test_parse_program():
    spec = pc.parse_program("control=|1>; target=|0>; gates=H,CNOT")
    assert spec["phi1_basis"] == "one" and spec["phi2_basis"] == "zero"
    assert spec["gates"] == ("H", "CNOT")
    spec = pc.parse_program("# comment\ncontrol = 0\ntarget = |1>\ngates = I\nhold_axis = y\n")
    assert spec["gates"] == () and spec["hold_axis"] == "y"


@pytest.mark.parametrize("text,match", [
    ("control=|0>", "missing target"),
    ("control=|0>; target=|0>; gates=H,T", "unsupported"),
    ("control=|0>; target=|0>; colour=red", "unknown key"),
    ("control=|0>; control=|1>; target=|0>", "duplicate"),
    ("control|0>; target=|0>", "key=value"),
    ("control=|0>\ntarget=|5>", "line 2"),
])
def test_parse_program_errors(text, match):
    with pytest.raises(ConfigurationError, match=match):
        pc.parse_program(text)
