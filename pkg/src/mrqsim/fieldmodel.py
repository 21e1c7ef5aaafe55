"""Local fields and Larmor frequencies of gradient-defined qubit sites.

The field at position ``z`` inside site ``n`` is the main field plus the main
gradient offset minus the site's local reverse gradient::

    B_n(z) = B0 + G(z) - G_n(z)
    omega_n = gamma * B_n(z_center)

Gradients are ideal field offsets (tesla) given as piecewise-linear maps of
position (meter). All quantities are SI.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError

GAMMA_PROTON = 2.0 * np.pi * 42.577e6  # rad/s/T
DEFAULT_HOMOGENEITY_TOL = 1e-9


@dataclass(frozen=True)
class PiecewiseLinear:
    """Field offset (tesla) as a piecewise-linear function of z (meter).

    Outside the knot range the first/last segment is extended linearly, so a
    two-knot map is an ordinary straight line.
    """

    z: tuple
    values: tuple

    def __post_init__(self):
        z = tuple(float(v) for v in self.z)
        values = tuple(float(v) for v in self.values)
        if len(z) != len(values):
            raise ConfigurationError("knot positions and values differ in length")
        if len(z) == 0:
            raise ConfigurationError("piecewise-linear map needs at least one knot")
        if any(b <= a for a, b in zip(z, z[1:])):
            raise ConfigurationError("knot positions must be strictly increasing")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "values", values)

    @classmethod
    def linear(cls, slope, offset=0.0, z_ref=0.0):
        """Straight line through ``(z_ref, offset)`` with ``slope`` T/m."""
        return cls((z_ref, z_ref + 1.0), (offset, offset + slope))

    @classmethod
    def constant(cls, offset):
        return cls((0.0,), (offset,))

    @classmethod
    def zero(cls):
        return cls.constant(0.0)

    def scaled(self, c):
        return PiecewiseLinear(self.z, tuple(c * v for v in self.values))

    def __call__(self, z):
        zk = np.asarray(self.z)
        vk = np.asarray(self.values)
        zq = np.asarray(z, dtype=float)
        if zk.size == 1:
            out = np.full(zq.shape, vk[0])
            return out if out.ndim else float(out)
        i = np.clip(np.searchsorted(zk, zq, side="right"), 1, zk.size - 1)
        z0, z1 = zk[i - 1], zk[i]
        v0, v1 = vk[i - 1], vk[i]
        out = v0 + (v1 - v0) * ((zq - z0) / (z1 - z0))
        return out if out.ndim else float(out)

    def to_dict(self):
        return {"z_m": list(self.z), "offset_T": list(self.values)}


@dataclass(frozen=True)
class QubitSite:
    index: int
    z_center: float
    half_width: float
    reverse_gradient: PiecewiseLinear = field(default_factory=PiecewiseLinear.zero)

    def __post_init__(self):
        if not self.half_width > 0:
            raise ConfigurationError(
                f"site {self.index}: half_width must be > 0, got {self.half_width}")

    @property
    def z_min(self):
        return self.z_center - self.half_width

    @property
    def z_max(self):
        return self.z_center + self.half_width

    def contains(self, z):
        z = np.asarray(z, dtype=float)
        return bool(np.all((z >= self.z_min) & (z <= self.z_max)))


@dataclass(frozen=True)
class MagnetSystem:
    b0: float
    main_gradient: PiecewiseLinear
    sites: tuple
    gamma: float = GAMMA_PROTON
    homogeneity_tol: float = DEFAULT_HOMOGENEITY_TOL

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        if not self.b0 > 0:
            raise ConfigurationError(f"b0 must be > 0, got {self.b0}", key="b0")
        if not self.gamma > 0:
            raise ConfigurationError(f"gamma must be > 0, got {self.gamma}", key="gamma")
        if not self.homogeneity_tol >= 0:
            raise ConfigurationError("homogeneity_tol must be >= 0", key="homogeneity_tol")
        centers = [s.z_center for s in self.sites]
        if any(b <= a for a, b in zip(centers, centers[1:])):
            raise ConfigurationError("site positions must be strictly increasing in z",
                                     key="sites")
        indices = [s.index for s in self.sites]
        if len(set(indices)) != len(indices):
            raise ConfigurationError("site indices must be unique", key="sites")

    def site(self, site_index):
        for s in self.sites:
            if s.index == site_index:
                return s
        raise ConfigurationError(f"no site with index {site_index}", key="sites")


def check_layout(system):
    """Raise ``ConfigurationError`` if any two site intervals overlap."""
    for a, b in zip(system.sites, system.sites[1:]):
        if a.z_max >= b.z_min:
            raise ConfigurationError(
                f"sites {a.index} and {b.index} overlap: "
                f"[{a.z_min}, {a.z_max}] vs [{b.z_min}, {b.z_max}]", key="sites")


def larmor(b, gamma=GAMMA_PROTON):
    """Angular Larmor frequency (rad/s) of a spin in field ``b`` (tesla)."""
    if np.ndim(b):
        return gamma * np.asarray(b, dtype=float)
    return gamma * float(b)


def local_field(system, site_index, z):
    """Field in tesla at ``z`` (scalar or array) inside the given site."""
    site = system.site(site_index)
    if not site.contains(z):
        raise DomainError(
            f"z={z!r} outside site {site_index} interval [{site.z_min}, {site.z_max}]")
    # net offset first, so identical maps cancel to exactly zero
    return system.b0 + (system.main_gradient(z) - site.reverse_gradient(z))


def larmor_frequency(system, site_index):
    site = system.site(site_index)
    return system.gamma * local_field(system, site_index, site.z_center)


@dataclass(frozen=True)
class SiteReport:
    index: int
    z_center: float
    local_field: float
    larmor_frequency: float
    frequency_spread: float
    separation_prev: float | None
    separation_next: float | None
    qubit_grade: bool

    @property
    def relative_spread(self):
        return self.frequency_spread / abs(self.larmor_frequency)

    def to_dict(self):
        two_pi = 2.0 * np.pi

        def hz(w):
            return None if w is None else w / two_pi

        return {
            "index": self.index,
            "z_center_m": self.z_center,
            "local_field_T": self.local_field,
            "larmor_frequency_rad_s": self.larmor_frequency,
            "larmor_frequency_hz": hz(self.larmor_frequency),
            "frequency_spread_rad_s": self.frequency_spread,
            "frequency_spread_hz": hz(self.frequency_spread),
            "relative_spread": self.relative_spread,
            "neighbor_separation_prev_rad_s": self.separation_prev,
            "neighbor_separation_prev_hz": hz(self.separation_prev),
            "neighbor_separation_next_rad_s": self.separation_next,
            "neighbor_separation_next_hz": hz(self.separation_next),
            "qubit_grade": self.qubit_grade,
        }


@dataclass(frozen=True)
class FieldReport:
    sites: tuple
    samples_per_site: int
    homogeneity_tol: float

    def to_dict(self):
        return {
            "samples_per_site": self.samples_per_site,
            "homogeneity_tol": self.homogeneity_tol,
            "sites": [s.to_dict() for s in self.sites],
        }


def field_report(system, samples_per_site=101):
    """Per-site field, Larmor frequency, in-site spread and neighbour spacing.

    The spread is ``gamma * (max - min)`` of the local field over
    ``samples_per_site`` evenly spaced points spanning the site interval.
    """
    if samples_per_site < 2:
        raise ConfigurationError("samples_per_site must be >= 2", key="samples_per_site")
    check_layout(system)
    fields = []
    spreads = []
    for s in system.sites:
        grid = np.linspace(s.z_min, s.z_max, samples_per_site)
        b = local_field(system, s.index, grid)
        fields.append(local_field(system, s.index, s.z_center))
        spreads.append(system.gamma * float(b.max() - b.min()))
    omegas = [system.gamma * b for b in fields]
    reports = []
    n = len(system.sites)
    for k, s in enumerate(system.sites):
        prev_sep = abs(omegas[k] - omegas[k - 1]) if k > 0 else None
        next_sep = abs(omegas[k + 1] - omegas[k]) if k < n - 1 else None
        grade = spreads[k] <= system.homogeneity_tol * abs(omegas[k])
        reports.append(SiteReport(s.index, s.z_center, float(fields[k]), float(omegas[k]),
                                  spreads[k], prev_sep, next_sep, bool(grade)))
    return FieldReport(tuple(reports), samples_per_site, system.homogeneity_tol)
