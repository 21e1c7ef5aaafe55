"""Classical isochromat-ensemble Bloch simulation with hard pulses."""

from .ensemble import Ensemble, Isochromat, PopulationSummary, make_ensemble
from .integrator import integrate_sequence
from .purification import (HALF_RECOVERY, PurificationTrace, T1HadamardReport,
                           modified_stimulated_echo, t1_recovery_hadamard, window_fraction)
from .sequence import (Delay, EchoResult, Pulse, Select, SelectionResult, Trajectory,
                       apply_pulse, free_evolve, run_sequence, select_phase_window,
                       spin_echo, validate_events)

__all__ = [
    "Delay", "EchoResult", "Ensemble", "HALF_RECOVERY", "Isochromat", "PopulationSummary",
    "Pulse", "PurificationTrace", "Select", "SelectionResult", "T1HadamardReport",
    "Trajectory", "apply_pulse", "free_evolve", "integrate_sequence", "make_ensemble",
    "modified_stimulated_echo", "run_sequence", "select_phase_window", "spin_echo",
    "t1_recovery_hadamard", "validate_events", "window_fraction",
]
