"""Purification sequences and the T1-recovery Hadamard.

Selection model: a selecting 90 degree pulse first post-selects the spin pair
lying inside a phase window and rotates everything else, which is then
discarded. The surviving pair therefore never sees that pulse and stays in
the transverse plane, where the two 180 degree pulses refocus it.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, DomainError
from .ensemble import Ensemble
from .sequence import (Delay, Pulse, Select, apply_pulse, free_evolve, run_sequence,
                       validate_events)

HALF_RECOVERY = 0.693  # t / T1 at which Mz recovers from 0 to one half


@dataclass
class PurificationTrace:
    stage_fractions: list
    nominal_fractions: list
    cumulative_factor: float
    nominal_cumulative: float
    axis_phases: list
    final: Ensemble
    final_phase: float
    reference_phase: float
    refocus_coefficient: float
    events: list
    trajectory: object = None

    @property
    def empty(self):
        return self.final.empty

    @property
    def phase_error(self):
        """Final phase minus the nominal spin's final phase, wrapped to (-pi, pi]."""
        if self.empty:
            return math.nan
        d = self.final_phase - self.reference_phase
        return math.atan2(math.sin(d), math.cos(d))

    def to_dict(self):
        return {
            "stage_fractions": self.stage_fractions,
            "nominal_fractions": self.nominal_fractions,
            "cumulative_factor": self.cumulative_factor,
            "nominal_cumulative": self.nominal_cumulative,
            "axis_phases": self.axis_phases,
            "empty": self.empty,
            "final_size": len(self.final),
            "final_magnetization": [float(v) for v in self.final.net_magnetization()],
            "final_phase": None if self.empty else self.final_phase,
            "reference_phase": self.reference_phase,
            "phase_error": None if self.empty else self.phase_error,
            "refocus_coefficient_s": self.refocus_coefficient,
        }


def window_fraction(half_width):
    """Selected fraction of a uniformly dephased ensemble for a given window."""
    return min(1.0, half_width / math.pi)


def _skeleton(t_a, window, select_stages, axis_phases, echo_pulses, refocus_axis):
    stages = []
    for k in range(3):
        if select_stages[k]:
            stages.append(Select(axis_phases[k], window))
        else:
            stages.append(Pulse("x", math.pi / 2))
    events = [stages[0], Delay(t_a[0])]
    if echo_pulses:
        events.append(Pulse(refocus_axis, math.pi))
    events += [Delay(t_a[1]), stages[1], Delay(t_a[2])]
    if echo_pulses:
        events.append(Pulse(refocus_axis, math.pi))
    events += [Delay(t_a[3]), stages[2]]
    return events


def _reference_phases(ensemble, t_a, select_stages, echo_pulses, refocus_axis):
    """Phase of an on-resonance spin in front of each stage, and at the end."""
    ref = Ensemble(np.array([[0.0, 0.0, 1.0]]), [0.0], [1.0], ensemble.t1, ensemble.t2,
                   check=False)
    phases = []

    def phase(e):
        x, y, _ = e.m[0]
        return math.atan2(y, x) if math.hypot(x, y) > 1e-15 else 0.0

    def stage(e, k):
        phases.append(phase(e))
        return e if select_stages[k] else apply_pulse(e, "x", math.pi / 2)

    ref = stage(ref, 0)
    ref = free_evolve(ref, t_a[0])
    if echo_pulses:
        ref = apply_pulse(ref, refocus_axis, math.pi)
    ref = stage(free_evolve(ref, t_a[1]), 1)
    ref = free_evolve(ref, t_a[2])
    if echo_pulses:
        ref = apply_pulse(ref, refocus_axis, math.pi)
    ref = stage(free_evolve(ref, t_a[3]), 2)
    return phases, phase(ref)


def modified_stimulated_echo(ensemble, t_a1, t_a2, t_a3, t_a4, window, *,
                             select_stages=(False, True, True), axis_phases=None,
                             echo_pulses=True, refocus_axis="x",
                             offresonance_error=0.0, sample_dt=None):
    """Three 90x pulses with a 180 degree refocusing pulse inside each gap.

    ``90x - t_a1 - 180 - t_a2 - 90x - t_a3 - 180 - t_a4 - 90x``. Each 90
    degree pulse flagged in ``select_stages`` is a selection stage with
    phase window ``+-window`` around ``axis_phases[k]`` (default: where an
    on-resonance spin sits at that moment). ``offresonance_error`` (rad/s) is
    added to every isochromat but not to the on-resonance reference, so
    ``trace.phase_error`` measures how much of it survives the sequence.

    The shift enters the final phase with coefficient
    ``t_a1 - t_a2 - t_a3 + t_a4`` when the 180s are present and
    ``t_a1 + t_a2 + t_a3 + t_a4`` without them; with ``t_a1 == t_a3`` and
    ``t_a2 == t_a4`` the two echoes cancel it exactly.
    """
    t_a = tuple(float(t) for t in (t_a1, t_a2, t_a3, t_a4))
    if any(not (math.isfinite(t) and t >= 0) for t in t_a):
        raise ConfigurationError("MSTE intervals must be finite and >= 0")
    if not math.isclose(t_a[0], t_a[2], rel_tol=1e-12, abs_tol=0.0):
        raise ConfigurationError(
            f"timing constraint t_a1 == t_a3 violated (t_a1={t_a[0]!r}, t_a3={t_a[2]!r})",
            key="t_a1/t_a3")
    if not 0 < window <= math.pi:
        raise ConfigurationError("window half-width must lie in (0, pi]")
    select_stages = tuple(bool(s) for s in select_stages)
    if len(select_stages) != 3:
        raise ConfigurationError("select_stages needs one flag per 90 degree pulse")

    ref_phases, reference_final = _reference_phases(ensemble, t_a, select_stages,
                                                    echo_pulses, refocus_axis)
    if axis_phases is None:
        axis_phases = ref_phases
    axis_phases = [float(p) for p in axis_phases]

    events = _skeleton(t_a, window, select_stages, axis_phases, echo_pulses, refocus_axis)
    validate_events(events)
    work = ensemble
    if offresonance_error:
        work = ensemble.evolve(delta_omega=ensemble.delta_omega + offresonance_error)
    traj = run_sequence(work, events, sample_dt=sample_dt)

    fractions = []
    it = iter(traj.selections)
    for flag in select_stages:
        fractions.append(next(it) if flag else None)
    used = [f for f in fractions if f is not None]
    nominal = [window_fraction(window) if flag else None for flag in select_stages]
    final = traj.final
    if ensemble.population is not None and not final.empty:
        final = final.evolve(population=ensemble.population.with_selection(
            fraction_x=float(np.prod(used)) if used else 1.0))

    if echo_pulses:
        coeff = t_a[0] - t_a[1] - t_a[2] + t_a[3]
    else:
        coeff = sum(t_a)
    return PurificationTrace(
        stage_fractions=fractions,
        nominal_fractions=nominal,
        cumulative_factor=float(np.prod(used)) if used else 1.0,
        nominal_cumulative=float(np.prod([f for f in nominal if f is not None]))
        if used else 1.0,
        axis_phases=axis_phases,
        final=final,
        final_phase=final.transverse_phase() if not final.empty else math.nan,
        reference_phase=reference_final,
        refocus_coefficient=coeff,
        events=events,
        trajectory=traj,
    )


@dataclass
class T1HadamardReport:
    t_coincidence: float
    mz_coincidence: float
    final_magnetization: tuple
    hadamard_alignment: float

    def to_dict(self):
        return {
            "t_coincidence_s": self.t_coincidence,
            "mz_coincidence": self.mz_coincidence,
            "final_magnetization": list(self.final_magnetization),
            "hadamard_alignment": self.hadamard_alignment,
        }


def t1_recovery_hadamard(ensemble, coincidence=HALF_RECOVERY, sample_dt=None, delay=None):
    """``Ry(90) -> delay(coincidence * T1) -> Ry(90)``.

    ``delay`` (seconds) replaces ``coincidence * T1`` with a fixed interval,
    e.g. one tuned for a reference T1; this is how the slow-recovery limit is
    probed (``T1 -> inf`` at fixed delay gives a net 180 degree y rotation).

    ``hadamard_alignment`` is the Bloch-sphere fidelity ``(1 + n.x)/2`` of the
    final net magnetisation direction ``n`` with +x, the image of |0> under
    the Hadamard. It is reported, not asserted: classical magnetisation
    dynamics are not a qubit unitary.
    """
    if delay is None:
        if not math.isfinite(ensemble.t1):
            raise DomainError("t1_recovery_hadamard needs a finite T1")
        t_c = coincidence * ensemble.t1
    else:
        if not (math.isfinite(delay) and delay >= 0):
            raise ConfigurationError("delay must be finite and >= 0")
        t_c = float(delay)
    events = [Pulse("y", math.pi / 2), Delay(t_c), Pulse("y", math.pi / 2)]
    traj = run_sequence(ensemble, events, sample_dt=sample_dt)
    # samples: 0, after Ry, [inside delay], end of delay, after second Ry
    mz_c = float(traj.m[-2, 2])
    final = tuple(float(v) for v in traj.m[-1])
    norm = math.sqrt(sum(v * v for v in final))
    align = 0.5 * (1.0 + final[0] / norm) if norm > 0 else 0.5
    report = T1HadamardReport(t_c, mz_c, final, align)
    return traj.final, report, traj
