"""Fine-step numerical Bloch integration, used to check the closed-form executor.

Pulses are applied as ``expm`` of the rotation generator and delays are
integrated with classical RK4, so nothing here reuses the closed-form maps
of :mod:`.kernels` / :mod:`.sequence`.
"""

import math

import numpy as np
from scipy.linalg import expm

from ..errors import ConfigurationError
from . import kernels
from .ensemble import Ensemble
from .sequence import Delay, Pulse, Select, phase_window_mask, validate_events

_GENERATORS = {
    "x": np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]),
    "y": np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]),
    "z": np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
}


def _weighted(m, w):
    return (w[:, None] * m).sum(axis=0)


def integrate_sequence(ensemble, events, steps_per_delay=1_000_000, sample_dt=None):
    """Integrate ``events`` with ``steps_per_delay`` RK4 steps per delay.

    Samples are taken at the same instants as
    :func:`mrqsim.blochsim.sequence.run_sequence` with the same ``sample_dt``.
    Returns ``(t, M, m_final)`` where ``M`` is the ``(k, 3)`` weighted sum.
    """
    events = list(events)
    validate_events(events)
    if steps_per_delay < 1:
        raise ConfigurationError("steps_per_delay must be >= 1")
    m = ensemble.m.copy()
    dw = ensemble.delta_omega.copy()
    w = ensemble.weight.copy()
    t = 0.0
    ts, ms = [0.0], [_weighted(m, w)]
    for ev in events:
        if isinstance(ev, Pulse):
            r = expm(ev.angle * _GENERATORS[ev.axis])
            m = m @ r.T
        elif isinstance(ev, Delay):
            d = ev.duration
            h = d / steps_per_delay if d > 0 else 0.0
            marks = []
            if sample_dt is not None:
                k = 1
                while k * sample_dt < d:
                    marks.append(k * sample_dt)
                    k += 1
            marks.append(d)
            done = 0.0
            for mark in marks:
                chunk = mark - done
                n = max(1, int(round(chunk / h))) if h > 0 else 0
                m = kernels.rk4_evolve(m, dw, chunk, n, ensemble.t1, ensemble.t2)
                done = mark
                if mark != d:
                    ts.append(t + mark)
                    ms.append(_weighted(m, w))
            t += d
        elif isinstance(ev, Select):
            probe = Ensemble(m, dw, w, ensemble.t1, ensemble.t2, check=False)
            keep = phase_window_mask(probe, ev.axis_phase, ev.half_width)
            m, dw, w = m[keep], dw[keep], w[keep]
            if w.size:
                w = w / w.sum()
        ts.append(t)
        ms.append(_weighted(m, w) if w.size else np.zeros(3))
    return np.asarray(ts), np.asarray(ms), m


def max_trajectory_gap(traj, oracle_t, oracle_m):
    tol = 1e-15 + 1e-12 * math.fabs(traj.t[-1])
    if traj.t.shape != oracle_t.shape or not np.allclose(traj.t, oracle_t, rtol=0, atol=tol):
        raise ValueError("trajectory and oracle are sampled at different times")
    return float(np.max(np.abs(traj.m - oracle_m)))
