"""Hard-pulse sequence primitives and the generic event executor."""

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from . import kernels
from .ensemble import Ensemble

AXES = ("x", "y", "z")


@dataclass(frozen=True)
class Pulse:
    axis: str
    angle: float
    kind: str = field(default="rf_pulse", init=False)


@dataclass(frozen=True)
class Delay:
    duration: float
    kind: str = field(default="delay", init=False)


@dataclass(frozen=True)
class Select:
    """Keep only isochromats whose phase is within ``half_width`` of ``axis_phase``."""

    axis_phase: float
    half_width: float
    kind: str = field(default="select", init=False)


def validate_events(events):
    """Check an event list before anything runs; raise ``ConfigurationError``."""
    for i, ev in enumerate(events):
        if isinstance(ev, Pulse):
            if ev.axis not in AXES:
                raise ConfigurationError(f"event {i}: unknown pulse axis {ev.axis!r}")
            if not math.isfinite(ev.angle):
                raise ConfigurationError(f"event {i}: pulse angle must be finite")
        elif isinstance(ev, Delay):
            if not (math.isfinite(ev.duration) and ev.duration >= 0):
                raise ConfigurationError(f"event {i}: delay must be finite and >= 0")
        elif isinstance(ev, Select):
            if not math.isfinite(ev.axis_phase):
                raise ConfigurationError(f"event {i}: axis_phase must be finite")
            if not 0 < ev.half_width <= math.pi:
                raise ConfigurationError(f"event {i}: half_width must lie in (0, pi]")
        else:
            raise ConfigurationError(f"event {i}: not a sequence event: {ev!r}")


def apply_pulse(ensemble, axis, angle):
    """Instantaneous rotation of every isochromat (no relaxation during the pulse)."""
    if axis not in AXES:
        raise ConfigurationError(f"unknown pulse axis {axis!r}")
    r = kernels.rotation_matrix(axis, float(angle))
    return ensemble.evolve(m=kernels.rotate(ensemble.m, r))


def free_evolve(ensemble, duration):
    """Precession by ``-delta_omega * duration`` about z plus T1/T2 relaxation."""
    if duration < 0:
        raise ConfigurationError("duration must be >= 0")
    if duration == 0:
        return ensemble
    m = kernels.free_evolve(ensemble.m, ensemble.delta_omega, duration,
                            ensemble.t1, ensemble.t2)
    return ensemble.evolve(m=m)


@dataclass(frozen=True)
class SelectionResult:
    ensemble: Ensemble
    selected_fraction: float
    discarded_fraction: float

    @property
    def empty(self):
        return self.ensemble.empty


def _wrap(phase):
    return (phase + np.pi) % (2 * np.pi) - np.pi


def phase_window_mask(ensemble, axis_phase, half_width):
    if half_width >= math.pi:
        return np.ones(len(ensemble), dtype=bool)
    # an isochromat with no transverse component has no phase to select on
    has_phase = np.hypot(ensemble.m[:, 0], ensemble.m[:, 1]) > 1e-15
    return has_phase & (np.abs(_wrap(ensemble.phases() - axis_phase)) <= half_width)


def select_phase_window(ensemble, axis_phase, half_width):
    """Post-select isochromats by transverse phase and renormalise weights.

    An empty selection returns an ensemble with no isochromats and
    ``selected_fraction == 0``; callers check ``result.empty``.
    """
    if not 0 < half_width <= math.pi:
        raise ConfigurationError("half_width must lie in (0, pi]")
    keep = phase_window_mask(ensemble, axis_phase, half_width)
    total = kernels.total(ensemble.weight)
    kept = kernels.total(ensemble.weight[keep]) if keep.any() else 0.0
    frac = kept / total if total > 0 else 0.0
    if kept > 0:
        w = ensemble.weight[keep] / kept
    else:
        w = np.zeros(0)
    out = ensemble.evolve(m=ensemble.m[keep], delta_omega=ensemble.delta_omega[keep],
                          weight=w)
    return SelectionResult(out, frac, 1.0 - frac)


@dataclass(frozen=True)
class EchoResult:
    ensemble: Ensemble
    initial_amplitude: float
    echo_amplitude: float


def spin_echo(ensemble, tau, axis="x"):
    """delay(tau) -> 180 degrees about ``axis`` -> delay(tau)."""
    if tau < 0:
        raise ConfigurationError("tau must be >= 0")
    a0 = ensemble.transverse_magnitude()
    out = free_evolve(apply_pulse(free_evolve(ensemble, tau), axis, math.pi), tau)
    return EchoResult(out, a0, out.transverse_magnitude())


@dataclass
class Trajectory:
    """Sampled weighted-ensemble magnetisation ``(t, Mx, My, Mz)``."""

    t: np.ndarray
    m: np.ndarray
    final: Ensemble
    selections: list

    def to_csv(self, path_or_buf):
        lines = ["t,Mx,My,Mz"]
        for t, row in zip(self.t.tolist(), self.m.tolist()):
            lines.append(",".join(repr(v) for v in (t, *row)))
        text = "\n".join(lines) + "\n"
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)
        return text

    def transverse(self):
        return np.hypot(self.m[:, 0], self.m[:, 1])


def run_sequence(ensemble, events, sample_dt=None, timing_jitter=0.0, rng=None):
    """Execute ``events`` in order and sample the ensemble-sum magnetisation.

    A sample is taken at t=0, after every event, and every ``sample_dt``
    seconds inside delays (``None`` samples event boundaries only). Pulses
    are instantaneous, so a pulse contributes a second sample at the same
    time. ``timing_jitter`` (seconds, standard deviation) perturbs each delay
    with a draw from ``rng``; negative perturbed delays clip to zero.
    """
    events = list(events)
    validate_events(events)
    if sample_dt is not None and not sample_dt > 0:
        raise ConfigurationError("sample_dt must be > 0")
    if timing_jitter and rng is None:
        raise ConfigurationError("timing_jitter needs an rng")
    t = 0.0
    ts = [0.0]
    ms = [ensemble.net_magnetization()]
    selections = []
    cur = ensemble
    for ev in events:
        if isinstance(ev, Pulse):
            cur = apply_pulse(cur, ev.axis, ev.angle)
        elif isinstance(ev, Delay):
            d = ev.duration
            if timing_jitter:
                d = max(0.0, d + float(rng.normal(0.0, timing_jitter)))
            if sample_dt is not None and not cur.empty:
                k = 1
                while k * sample_dt < d:
                    ts.append(t + k * sample_dt)
                    ms.append(kernels.evolved_sum(cur.m, cur.delta_omega, cur.weight,
                                                  k * sample_dt, cur.t1, cur.t2))
                    k += 1
            cur = free_evolve(cur, d)
            t += d
        else:
            res = select_phase_window(cur, ev.axis_phase, ev.half_width)
            selections.append(res.selected_fraction)
            cur = res.ensemble
        ts.append(t)
        ms.append(cur.net_magnetization())
    return Trajectory(np.asarray(ts), np.asarray(ms), cur, selections)
