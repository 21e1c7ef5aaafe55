"""Isochromat ensembles and spin-population bookkeeping."""

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ConfigurationError
from . import kernels

HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J/K
WATER_DROP_SPINS = 2 * 3.35e22  # protons in the reference water drop


@dataclass(frozen=True)
class Isochromat:
    m: tuple
    delta_omega: float
    weight: float


@dataclass(frozen=True)
class PopulationSummary:
    """Narrative spin counts carried alongside a simulated ensemble.

    ``n_low``/``n_high`` are the Zeeman-aligned populations, a small part of
    ``n_total``. ``selected_x``/``selected_y`` record how many aligned spins
    survive x/y phase-window selection; they carry no dynamics.
    """

    n_total: float
    n_low: float
    n_high: float
    selected_x: float = 0.0
    selected_y: float = 0.0

    def __post_init__(self):
        if self.n_low + self.n_high > self.n_total:
            raise ConfigurationError("n_low + n_high exceeds n_total")
        if self.n_low < self.n_high:
            raise ConfigurationError("n_low < n_high contradicts Zeeman polarisation")

    @classmethod
    def thermal(cls, b0, temperature=293.15, gamma=2 * math.pi * 42.577e6,
                n_total=WATER_DROP_SPINS):
        """Aligned populations from the Boltzmann polarisation at ``b0``.

        The aligned fraction is the polarisation ``P = tanh(hbar gamma B0 / 2kT)``,
        split into ``n_low : n_high = (1 + P) : (1 - P)``.
        """
        p = math.tanh(HBAR * gamma * b0 / (2 * K_B * temperature))
        aligned = n_total * p
        return cls(n_total, aligned * (1 + p) / 2, aligned * (1 - p) / 2)

    def with_selection(self, fraction_x=None, fraction_y=None):
        out = self
        if fraction_x is not None:
            out = replace(out, selected_x=self.n_low * fraction_x)
        if fraction_y is not None:
            out = replace(out, selected_y=self.n_low * fraction_y)
        return out

    def to_dict(self):
        return {"n_total": self.n_total, "n_low": self.n_low, "n_high": self.n_high,
                "selected_x": self.selected_x, "selected_y": self.selected_y}


class Ensemble:
    """Weighted isochromats sharing one T1/T2 pair.

    ``m`` is ``(n, 3)``; ``delta_omega`` (rad/s) and ``weight`` are ``(n,)``.
    Weights sum to one (an empty ensemble, produced by a selection that kept
    nothing, is the only exception). Ensembles are treated as values: every
    operation returns a new one.
    """

    def __init__(self, m, delta_omega, weight=None, t1=math.inf, t2=math.inf,
                 population=None, *, check=True):
        m = np.ascontiguousarray(m, dtype=float)
        if m.ndim == 1:
            m = m.reshape(1, 3)
        n = m.shape[0]
        dw = np.ascontiguousarray(np.broadcast_to(np.asarray(delta_omega, dtype=float), (n,)))
        w = (np.full(n, 1.0 / n) if weight is None and n
             else np.ascontiguousarray(weight if weight is not None else [], dtype=float))
        self.m, self.delta_omega, self.weight = m, dw, w
        self.t1, self.t2 = float(t1), float(t2)
        self.population = population
        if check:
            self._validate()

    def _validate(self):
        n = self.m.shape[0]
        if self.m.shape != (n, 3) or self.delta_omega.shape != (n,) or self.weight.shape != (n,):
            raise ConfigurationError("inconsistent ensemble array shapes")
        if not (self.t1 > 0 and self.t2 > 0):
            raise ConfigurationError("T1 and T2 must be positive", key="ensemble")
        if self.t2 > self.t1:
            warnings.warn(f"T2 ({self.t2}) exceeds T1 ({self.t1})", stacklevel=3)
        if np.any(self.weight < 0):
            raise ConfigurationError("isochromat weights must be nonnegative")
        if n and abs(kernels.total(self.weight) - 1.0) > 1e-12:
            raise ConfigurationError("isochromat weights must sum to 1")

    def evolve(self, m=None, delta_omega=None, weight=None, population=None):
        """Copy with some arrays replaced (no validation of the copy)."""
        return Ensemble(self.m if m is None else m,
                        self.delta_omega if delta_omega is None else delta_omega,
                        self.weight if weight is None else weight,
                        self.t1, self.t2,
                        self.population if population is None else population,
                        check=False)

    def __len__(self):
        return self.m.shape[0]

    def __getitem__(self, i):
        return Isochromat(tuple(self.m[i]), float(self.delta_omega[i]), float(self.weight[i]))

    @property
    def empty(self):
        return self.m.shape[0] == 0

    def net_magnetization(self):
        return kernels.weighted_sum(self.m, self.weight)

    def transverse_magnitude(self):
        mx, my, _ = self.net_magnetization()
        return math.hypot(mx, my)

    def transverse_phase(self):
        mx, my, _ = self.net_magnetization()
        return math.atan2(my, mx)

    def phases(self):
        """Per-isochromat transverse phase ``atan2(My, Mx)``."""
        return np.arctan2(self.m[:, 1], self.m[:, 0])

    def __repr__(self):
        return f"Ensemble(n={len(self)}, t1={self.t1}, t2={self.t2})"


def make_ensemble(n=100_000, t1=math.inf, t2=math.inf, spread=0.0,
                  distribution="uniform", seed=0, m0=(0.0, 0.0, 1.0), population=None):
    """Ensemble with off-resonance drawn over ``[-spread, +spread]`` rad/s.

    ``distribution`` is ``"uniform"`` (seeded random draw), ``"gaussian"``
    (seeded, standard deviation ``spread``) or ``"grid"`` (deterministic,
    evenly spaced cell centres).
    """
    if n < 1:
        raise ConfigurationError("ensemble size must be >= 1", key="ensemble.size")
    rng = np.random.default_rng(seed)
    if distribution == "uniform":
        dw = rng.uniform(-spread, spread, n)
    elif distribution == "gaussian":
        dw = rng.normal(0.0, spread, n)
    elif distribution == "grid":
        dw = -spread + (2 * np.arange(n) + 1) * (spread / n)
    else:
        raise ConfigurationError(f"unknown off-resonance distribution {distribution!r}",
                                 key="ensemble.distribution")
    m = np.tile(np.asarray(m0, dtype=float), (n, 1))
    return Ensemble(m, dw, np.full(n, 1.0 / n), t1, t2, population)
