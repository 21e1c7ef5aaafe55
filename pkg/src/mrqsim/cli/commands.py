"""Subcommand implementations.

Each ``prepare_<cmd>`` validates everything the command needs and returns a
zero-argument callable that performs the run; nothing is computed or written
until every check has passed. The callable returns ``(result, artifacts)``.
"""

import io
import math

import numpy as np

from .. import fieldmodel as fm
from .. import pulsecompiler as pc
from .. import spincore as sc
from ..blochsim import (Delay, Pulse, PopulationSummary, integrate_sequence, make_ensemble,
                        modified_stimulated_echo, t1_recovery_hadamard)
from ..blochsim.integrator import max_trajectory_gap
from ..errors import ConfigurationError, NumericalInvariantError

STRICT = 1e-12
PHASE_TOL = 1e-9
ORACLE_TOL = 1e-6


def _wrap(phase):
    return math.atan2(math.sin(phase), math.cos(phase))


def _gradient(cfg):
    if cfg is None:
        return fm.PiecewiseLinear.zero()
    if hasattr(cfg, "points"):
        z, v = zip(*cfg.points)
        return fm.PiecewiseLinear(z, v)
    return fm.PiecewiseLinear.linear(cfg.slope, cfg.offset, cfg.z_ref)


def build_magnet(section):
    if section is None:
        raise ConfigurationError("the field command needs a magnet section", key="magnet")
    sites = [fm.QubitSite(s.index, s.z_center, s.half_width, _gradient(s.reverse_gradient))
             for s in section.sites]
    system = fm.MagnetSystem(section.b0, _gradient(section.main_gradient), sites,
                             section.gamma if section.gamma is not None else fm.GAMMA_PROTON,
                             section.homogeneity_tol)
    fm.check_layout(system)
    return system


def build_ensemble(section, seed, b0=None):
    population = PopulationSummary.thermal(b0) if b0 is not None else None
    return make_ensemble(section.size, section.t1, section.t2, section.spread,
                         section.distribution, seed, population=population)


def _csv(traj):
    buf = io.StringIO()
    traj.to_csv(buf)
    return buf.getvalue()


# -- field -------------------------------------------------------------------

def prepare_field(scenario, seed):
    system = build_magnet(scenario.magnet)
    samples = scenario.magnet.samples_per_site

    def run():
        report = fm.field_report(system, samples)
        center = fm.larmor(system.b0, system.gamma)
        return {
            "b0_T": system.b0,
            "gamma_rad_s_T": system.gamma,
            "center_frequency_rad_s": center,
            "center_frequency_hz": center / (2 * math.pi),
            "all_qubit_grade": all(s.qubit_grade for s in report.sites),
            "report": report.to_dict(),
        }, {}

    return run


# -- gate --------------------------------------------------------------------

def prepare_gate(scenario, seed):
    eps = scenario.gate.pseudo_pure_epsilon

    def run():
        h = sc.hadamard_via_rotations()
        plus = sc.StateVector(np.array([1, 1]) / np.sqrt(2.0))
        minus = sc.StateVector(np.array([1, -1]) / np.sqrt(2.0))
        h0 = h @ sc.StateVector.basis("0")
        h1 = h @ sc.StateVector.basis("1")
        hadamard = {
            "via_rotations": sc.gate_to_json(h),
            "canonical_max_deviation": float(np.max(np.abs(h.matrix - sc.HADAMARD))),
            "involution_max_deviation": float(np.max(np.abs(h.matrix @ h.matrix - np.eye(2)))),
            "h0_amplitudes": sc.complex_to_json(h0.amplitudes),
            "h1_amplitudes": sc.complex_to_json(h1.amplitudes),
            "h0_fidelity_plus_x": sc.state_fidelity(h0, plus),
            "h1_fidelity_minus_x": sc.state_fidelity(h1, minus),
        }
        cnot = sc.cnot_gate(0, 1, 2)
        circuit = cnot.matrix @ sc.embed(h, 0, 2).matrix
        bells = sc.bell_states()
        circuit_f = {}
        for (c, t), label in pc.INPUT_TO_BELL.items():
            ket = ("0" if c == "zero" else "1") + ("0" if t == "zero" else "1")
            out = sc.StateVector(circuit @ sc.StateVector.basis(ket).amplitudes, atol=1e-10)
            circuit_f[f"|{ket}>"] = {"expected": label,
                                     "fidelity": sc.state_fidelity(out, bells[label])}
        gram = np.array([[np.vdot(a.amplitudes, b.amplitudes) for b in bells.values()]
                         for a in bells.values()])
        rho = sc.pseudo_pure_density(sc.PseudoPureSpec(1, eps, sc.StateVector.basis("0")))
        rho_h = sc.conjugate_density(rho, h)
        eps_after, psi_after = sc.pseudo_pure_parameters(rho_h)
        result = {
            "hadamard": hadamard,
            "cnot": sc.gate_to_json(cnot),
            "bell": {
                "states": {k: sc.complex_to_json(v.amplitudes) for k, v in bells.items()},
                "circuit_fidelities": circuit_f,
                "orthonormality_max_deviation": float(np.max(np.abs(gram - np.eye(4)))),
            },
            "pseudo_pure": {
                "epsilon": eps,
                "epsilon_after_hadamard": eps_after,
                "state_after_hadamard_fidelity_plus_x": sc.state_fidelity(psi_after, plus),
                "eigenvalue_max_deviation": float(np.max(np.abs(
                    rho.eigenvalues() - rho_h.eigenvalues()))),
            },
        }
        failures = []
        if hadamard["canonical_max_deviation"] > STRICT:
            failures.append("hadamard deviates from canonical matrix")
        for key in ("h0_fidelity_plus_x", "h1_fidelity_minus_x"):
            if hadamard[key] < 1 - STRICT:
                failures.append(key)
        for ket, rec in circuit_f.items():
            if rec["fidelity"] < 1 - STRICT:
                failures.append(f"circuit on {ket}")
        if result["bell"]["orthonormality_max_deviation"] > STRICT:
            failures.append("bell states not orthonormal")
        if failures:
            raise NumericalInvariantError("gate invariants violated: " + ", ".join(failures),
                                          {"failures": failures})
        return result, {}

    return run


# -- purify ------------------------------------------------------------------

def purification_ledger(epsilon0, factor, steps):
    """Exact impure-fraction ledger of repeated purification steps."""
    spec = sc.PseudoPureSpec(1, epsilon0, sc.StateVector.basis("0"))
    rows = [spec.impure_fraction]
    for _ in range(steps):
        spec = sc.purify_step(spec, factor)
        rows.append(spec.impure_fraction)
    expected = (1 - sc.exact(epsilon0)) * sc.exact(factor) ** steps
    return {
        "epsilon0": epsilon0,
        "factor": factor,
        "steps": steps,
        "impure_fractions": [str(f) for f in rows],
        "impure_fractions_float": [float(f) for f in rows],
        "final_impure_fraction": str(rows[-1]),
        "final_epsilon": float(1 - rows[-1]),
        "closed_form_exact": rows[-1] == expected,
    }


def compensation_scan(ensemble, t_a, window, shifts, select_stages, refocus_axis):
    """Induced final-phase change vs injected shift, with and without the 180s."""
    rows = {}
    for echo in (True, False):
        base = None
        errs = []
        for s in shifts:
            tr = modified_stimulated_echo(ensemble, *t_a, window, select_stages=select_stages,
                                          echo_pulses=echo, refocus_axis=refocus_axis,
                                          offresonance_error=s)
            if tr.empty:
                errs.append(None)
                continue
            if base is None:
                base = tr.final_phase
            errs.append(_wrap(tr.final_phase - base))
        rows["with_echoes" if echo else "without_echoes"] = errs
    coeff_on = t_a[0] - t_a[1] - t_a[2] + t_a[3]
    coeff_off = sum(t_a)
    slope = None
    pts = [(s, e) for s, e in zip(shifts, rows["without_echoes"]) if e is not None]
    if len(pts) >= 2:
        x = np.array([p[0] for p in pts])
        y = np.unwrap(np.array([p[1] for p in pts]))
        slope = float(np.polyfit(x, y, 1)[0])
    residual = [abs(e) for e in rows["with_echoes"] if e is not None]
    return {
        "shifts_rad_s": list(shifts),
        "window_rad": window,
        "phase_change_with_echoes": rows["with_echoes"],
        "phase_change_without_echoes": rows["without_echoes"],
        "max_abs_phase_change_with_echoes": max(residual) if residual else None,
        "slope_without_echoes_s": slope,
        "expected_slope_without_echoes_s": -coeff_off,
        "shift_coefficient_with_echoes_s": coeff_on,
        "exact_cancellation_expected": math.isclose(t_a[1], t_a[3], rel_tol=1e-12,
                                                     abs_tol=0.0),
    }


def prepare_purify(scenario, seed):
    cfg = scenario.purify
    b0 = scenario.magnet.b0 if scenario.magnet is not None else None
    ensemble = build_ensemble(scenario.ensemble, seed, b0)
    sample_dt = scenario.output.sample_dt

    def run():
        trace = modified_stimulated_echo(ensemble, *cfg.t_a, cfg.window,
                                         select_stages=cfg.select_stages,
                                         refocus_axis=cfg.refocus_axis, sample_dt=sample_dt)
        ledger = purification_ledger(cfg.ledger.epsilon0, cfg.ledger.factor, cfg.ledger.steps)
        comp = compensation_scan(ensemble, cfg.t_a, cfg.compensation.window,
                                 cfg.compensation.shifts, cfg.select_stages, cfg.refocus_axis)
        pop = trace.final.population
        result = {
            "t_a_s": list(cfg.t_a),
            "window_rad": cfg.window,
            "ensemble_size": len(ensemble),
            "trace": trace.to_dict(),
            "population": pop.to_dict() if pop is not None else None,
            "ledger": ledger,
            "compensation": comp,
        }
        if not ledger["closed_form_exact"]:
            raise NumericalInvariantError("purification ledger is not exact", ledger)
        resid = comp["max_abs_phase_change_with_echoes"]
        if comp["exact_cancellation_expected"] and resid is not None and resid > PHASE_TOL:
            raise NumericalInvariantError(
                f"echo compensation left a phase change of {resid!r} rad",
                {"max_abs_phase_change_with_echoes": resid})
        artifacts = {}
        if scenario.output.trajectory:
            artifacts["purify_trajectory.csv"] = _csv(trace.trajectory)
        return result, artifacts

    return run


# -- bell --------------------------------------------------------------------

def prepare_bell(scenario, seed):
    try:
        spec = pc.parse_program(scenario.bell.program)
    except ConfigurationError as exc:
        raise ConfigurationError(f"bell.program: {exc}", key="bell.program") from None
    program = pc.compile_bell_sequence(**spec)

    def run():
        assembly = pc.assemble_bell(pc.enumerate_cnot_terms())
        report = pc.verify_compiled(program, assembly)
        other = "y" if program.hold_axis == "z" else "z"
        pairs = {}
        for (c, t) in pc.INPUT_TO_BELL:
            rec = {}
            for axis in (program.hold_axis, other):
                p = pc.compile_bell_sequence(c, t, hold_axis=axis,
                                             phase_sign=program.phase_sign)
                rec[axis] = pc.verify_compiled(p, assembly)
            bit = {"zero": "0", "one": "1"}
            pairs[f"|{bit[c]}{bit[t]}>"] = {
                "expected": rec[program.hold_axis].expected_label,
                "fidelity": rec[program.hold_axis].fidelity_expected,
                "fidelity_substituted_hold_axis": rec[other].fidelity_expected,
                "substitution_delta": abs(rec[program.hold_axis].fidelity_expected
                                          - rec[other].fidelity_expected),
                "passed": rec[program.hold_axis].passed and rec[other].passed,
            }
        labels = list(assembly.states)
        vecs = [assembly.vector(k).amplitudes for k in labels]
        gram = np.array([[np.vdot(a, b) for b in vecs] for a in vecs])
        result = {
            "program": program.to_dict(),
            "verification": report.to_dict(),
            "four_inputs": pairs,
            "assembly": assembly.to_dict(),
            "assembly_orthonormality_max_deviation": float(np.max(np.abs(gram - np.eye(4)))),
            "quadrupole": pc.quadrupole_report(),
        } if report.expected_label is not None else {
            "program": program.to_dict(),
            "verification": report.to_dict(),
        }
        failures = []
        if not report.passed:
            failures.append("compiled program below fidelity threshold")
        if report.expected_label is not None:
            failures += [f"input {k}" for k, v in pairs.items() if not v["passed"]]
            if result["assembly_orthonormality_max_deviation"] > STRICT:
                failures.append("assembled states not orthonormal")
        if failures:
            raise NumericalInvariantError("bell invariants violated: " + ", ".join(failures),
                                          {"failures": failures})
        track = pc.bloch_track(program)
        lines = ["order,q0_x,q0_y,q0_z,q1_x,q1_y,q1_z"]
        for row in track:
            lines.append(",".join([str(int(row[0]))] + [repr(float(v)) for v in row[1:]]))
        artifacts = {"bell_bloch_track.csv": "\n".join(lines) + "\n"}
        return result, artifacts

    return run


# -- t1had -------------------------------------------------------------------

def prepare_t1had(scenario, seed):
    cfg = scenario.t1had
    if cfg.delay is None and not math.isfinite(scenario.ensemble.t1):
        raise ConfigurationError("t1had needs a finite ensemble.t1 or a t1had.delay",
                                 key="ensemble.t1")
    if cfg.delay is not None and not (math.isfinite(cfg.delay) and cfg.delay >= 0):
        raise ConfigurationError("t1had.delay must be finite and >= 0", key="t1had.delay")
    ensemble = build_ensemble(scenario.ensemble, seed)
    sample_dt = scenario.output.sample_dt

    def run():
        _, report, traj = t1_recovery_hadamard(ensemble, cfg.coincidence, sample_dt=sample_dt,
                                              delay=cfg.delay)
        result = {"report": report.to_dict(), "ensemble_size": len(ensemble),
                  "t1_s": ensemble.t1, "t2_s": ensemble.t2,
                  "mz_expected": 1.0 - math.exp(-report.t_coincidence / ensemble.t1)}
        if cfg.oracle_steps:
            events = [Pulse("y", math.pi / 2), Delay(report.t_coincidence),
                      Pulse("y", math.pi / 2)]
            t, m, _ = integrate_sequence(ensemble, events, cfg.oracle_steps, sample_dt)
            gap = max_trajectory_gap(traj, t, m)
            result["oracle"] = {"steps_per_delay": cfg.oracle_steps, "max_gap": gap,
                                "tolerance": ORACLE_TOL}
            if gap > ORACLE_TOL:
                raise NumericalInvariantError(
                    f"trajectory differs from the fine-step oracle by {gap!r}",
                    {"max_gap": gap})
        artifacts = {"t1had_trajectory.csv": _csv(traj)} if scenario.output.trajectory else {}
        return result, artifacts

    return run


PREPARE = {
    "field": prepare_field,
    "gate": prepare_gate,
    "purify": prepare_purify,
    "bell": prepare_bell,
    "t1had": prepare_t1had,
}
