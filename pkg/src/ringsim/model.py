"""Geometry, polarization and dipole-dipole couplings for a ring of emitters
with a central absorbing impurity.

Unit convention: all rates are expressed in units of the single-emitter
free-space decay rate gamma0 = 1, all lengths in units of 1/k0 with k0 = 1,
so the transition wavelength is 2*pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

GAMMA0 = 1.0
K0 = 1.0
LAMBDA0 = 2.0 * math.pi / K0

#: resonant single-emitter scattering cross section, 6*pi/k0^2
SIGMA_SCATT = 6.0 * math.pi / K0**2

_ORIGIN = (0.0, 0.0, 0.0)


class ConfigError(ValueError):
    """Invalid scenario parameters."""


@dataclass(frozen=True)
class UnitConvention:
    gamma0: float = GAMMA0
    k0: float = K0


def circular_inplane_polarization() -> np.ndarray:
    """Unit-norm circular polarization in the ring plane, (x + i y)/sqrt(2)."""
    return np.array([1.0, 1.0j, 0.0], dtype=complex) / math.sqrt(2.0)


def normalize_polarization(vec) -> np.ndarray:
    p = np.asarray(vec, dtype=complex).reshape(3)
    norm = math.sqrt(float(np.vdot(p, p).real))
    if not np.isfinite(norm) or norm == 0.0:
        raise ConfigError("polarization vector must be finite and nonzero")
    return p / norm


@dataclass(frozen=True)
class RingGeometry:
    """Regular polygon of emitters in the z = 0 plane, impurity at the origin.

    For n_ring >= 2 the radius is d / (2 sin(pi/N)).  The degenerate n_ring = 1
    case places the single emitter at distance R = d from the origin.  An empty
    ring (n_ring = 0) is allowed for impurity-only reference scenarios, but is
    never produced by build_geometry.
    """

    n_ring: int
    spacing: float
    radius: float
    positions: np.ndarray                # (n_ring, 3)
    impurity_position: np.ndarray = field(
        default_factory=lambda: np.array(_ORIGIN))


def build_geometry(n: int, lambda_over_d: float) -> RingGeometry:
    """Construct the ring for n emitters at nearest-neighbour spacing
    d = lambda0 / lambda_over_d."""
    if int(n) != n or n < 1:
        raise ConfigError(f"ring needs at least one emitter, got n={n}")
    n = int(n)
    if not np.isfinite(lambda_over_d) or lambda_over_d <= 0:
        raise ConfigError(f"lambda_over_d must be finite and positive, got {lambda_over_d}")
    d = LAMBDA0 / float(lambda_over_d)
    if n == 1:
        radius = d
    else:
        radius = d / (2.0 * math.sin(math.pi / n))
    angles = 2.0 * math.pi * np.arange(n) / n
    positions = radius * np.stack(
        [np.cos(angles), np.sin(angles), np.zeros(n)], axis=1)
    return RingGeometry(n_ring=n, spacing=d, radius=radius, positions=positions)


def impurity_only_geometry() -> RingGeometry:
    """Empty ring: just the central impurity (single-emitter references)."""
    return RingGeometry(n_ring=0, spacing=0.0, radius=0.0,
                        positions=np.zeros((0, 3)))


@dataclass(frozen=True)
class ImpuritySpec:
    """Central absorber: detuning, radiative rate and trap (extraction) rate."""

    delta_I: float = 0.0
    gamma_I: float = GAMMA0
    gamma_T: float = 0.0
    polarization: np.ndarray = field(
        default_factory=circular_inplane_polarization)

    def __post_init__(self):
        if not self.gamma_I > 0:
            raise ConfigError(f"gamma_I must be positive, got {self.gamma_I}")
        if self.gamma_T < 0:
            raise ConfigError(f"gamma_T must be >= 0, got {self.gamma_T}")


@dataclass(frozen=True)
class SystemConfig:
    """Single source of truth for one ring + impurity scenario."""

    geometry: RingGeometry
    impurity: ImpuritySpec
    ring_polarization: np.ndarray = field(
        default_factory=circular_inplane_polarization)
    units: UnitConvention = field(default_factory=UnitConvention)

    @property
    def n_ring(self) -> int:
        return self.geometry.n_ring

    @property
    def n_total(self) -> int:
        return self.geometry.n_ring + 1


_POLARIZATIONS = {"circular_inplane": circular_inplane_polarization}


def make_config(n_ring: int, lambda_over_d: float, delta_I: float = 0.0,
                gamma_I: float = GAMMA0, gamma_T: float = 0.0,
                polarization: str = "circular_inplane") -> SystemConfig:
    """Convenience constructor mirroring the JSON scenario schema."""
    if polarization not in _POLARIZATIONS:
        raise ConfigError(f"unknown polarization {polarization!r}; "
                          f"supported: {sorted(_POLARIZATIONS)}")
    pol = _POLARIZATIONS[polarization]()
    if n_ring == 0:
        geometry = impurity_only_geometry()
    else:
        geometry = build_geometry(n_ring, lambda_over_d)
    impurity = ImpuritySpec(delta_I=delta_I, gamma_I=gamma_I, gamma_T=gamma_T,
                            polarization=pol)
    return SystemConfig(geometry=geometry, impurity=impurity,
                        ring_polarization=pol)


def with_impurity(config: SystemConfig, **changes) -> SystemConfig:
    """Copy of config with impurity parameters replaced."""
    return replace(config, impurity=replace(config.impurity, **changes))


def greens_scalar(r_i, r_j, p_i, p_j) -> complex:
    """Free-space dipole-dipole coupling between unit dipoles p_i at r_i and
    p_j at r_j.

    Returns the complex coupling G_ij whose real part is the coherent shift
    J_ij and whose imaginary part gives the collective decay
    Gamma_ij = -2 Im G_ij.  Only p_i is conjugated.
    """
    rvec = np.asarray(r_i, dtype=float) - np.asarray(r_j, dtype=float)
    r = float(np.linalg.norm(rvec))
    if r == 0.0:
        raise ValueError("coincident emitter positions: the self-interaction "
                         "is set by convention on the diagonal, not here")
    x = K0 * r
    rhat = rvec / r
    pi_pj = np.vdot(p_i, p_j)          # conjugates first argument
    pi_r = np.vdot(p_i, rhat)
    pj_r = np.dot(np.asarray(p_j), rhat)
    pref = 3.0 * GAMMA0 / (4.0 * x**3) * np.exp(1j * x)
    return complex(pref * ((1.0 - 1j * x - x**2) * pi_pj
                           + (-3.0 + 3j * x + x**2) * pi_r * pj_r))


def inplane_pair_coupling(distance: float) -> complex:
    """Closed-form greens_scalar for two circularly in-plane polarized dipoles
    separated in the ring plane; depends only on the distance.

    Equals (3 gamma0 / 8 x^3) e^{ix} (-1 + ix - x^2) with x = k0 * distance.
    """
    x = K0 * float(distance)
    if x == 0.0:
        raise ValueError("coincident emitter positions")
    return complex(3.0 * GAMMA0 / (8.0 * x**3) * np.exp(1j * x)
                   * (-1.0 + 1j * x - x**2))


@dataclass(frozen=True)
class CouplingMatrices:
    """Dipole-dipole couplings of ring + impurity.

    g is the complex symmetric (N+1) x (N+1) matrix entering the effective
    Hamiltonian; index N is the impurity.  Off-diagonal entries are the pair
    couplings (impurity row/column scaled by sqrt(gamma_I/gamma0)); the
    diagonal holds -i*gamma0/2 for ring entries and -delta_I - i*gamma_I/2 for
    the impurity (the trap rate gamma_T is kept in the config, not in g).
    j_part = Re g and gamma_part = -2 Im g elementwise.
    """

    g: np.ndarray
    j_part: np.ndarray
    gamma_part: np.ndarray
    n_ring: int

    @property
    def impurity_index(self) -> int:
        return self.n_ring


def coupling_matrices(config: SystemConfig) -> CouplingMatrices:
    """Assemble the coupling matrices for a scenario."""
    geo = config.geometry
    n = geo.n_ring
    imp = config.impurity
    pol = config.ring_polarization
    positions = np.vstack([geo.positions, geo.impurity_position[None, :]])
    scale = math.sqrt(imp.gamma_I / GAMMA0)

    g = np.zeros((n + 1, n + 1), dtype=complex)
    for i in range(n + 1):
        p_i = pol if i < n else imp.polarization
        for j in range(i + 1, n + 1):
            p_j = pol if j < n else imp.polarization
            val = greens_scalar(positions[i], positions[j], p_i, p_j)
            if j == n or i == n:
                val *= scale
            g[i, j] = val
            g[j, i] = val
    for i in range(n):
        g[i, i] = -0.5j * GAMMA0
    g[n, n] = -imp.delta_I - 0.5j * imp.gamma_I

    return CouplingMatrices(g=g, j_part=g.real.copy(),
                            gamma_part=(-2.0 * g.imag).copy(), n_ring=n)


def effective_matrix(couplings: CouplingMatrices, gamma_T: float) -> np.ndarray:
    """Single-excitation effective Hamiltonian matrix, trap rate included as
    -i*gamma_T/2 on the impurity diagonal."""
    m = couplings.g.copy()
    m[couplings.impurity_index, couplings.impurity_index] += -0.5j * gamma_T
    return m
