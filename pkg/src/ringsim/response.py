"""Weak-drive steady states and absorption cross sections.

The coherent path solves the (N+1)-dimensional linear amplitude system
directly; the eigenmode expansion is kept as a cross-check.  The incoherent
path evaluates the perturbative per-mode formula.  Cross sections are
reported in units of the resonant single-emitter scattering cross section
sigma = 6 pi / k0^2.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import GAMMA0, SystemConfig, coupling_matrices, effective_matrix
from .spectral import ModeSet, diagonalize_effective

WEAK_DRIVE_LIMIT = 0.05 * GAMMA0

MASKS = ("all", "ring_only", "center_only")


class WeakDriveWarning(UserWarning):
    pass


class SingularDriveError(RuntimeError):
    """Drive detuning hit an exact real eigenvalue of zero width."""


@dataclass(frozen=True)
class DriveSpec:
    """Weak external illumination.

    strength is the Rabi frequency for kind="coherent" and the pump rate for
    kind="incoherent".  detuning is the laser-emitter detuning omega_L -
    omega_0 (coherent only).  k_hat defaults to z, i.e. perpendicular
    propagation with equal phases on all in-plane emitters.
    """

    kind: str = "coherent"
    strength: float = 1e-3
    detuning: float = 0.0
    k_hat: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    mask: str = "all"

    def __post_init__(self):
        if self.kind not in ("coherent", "incoherent"):
            raise ValueError(f"unknown drive kind {self.kind!r}")
        if self.mask not in MASKS:
            raise ValueError(f"unknown mask {self.mask!r}; choose from {MASKS}")
        if self.strength < 0:
            raise ValueError("drive strength must be >= 0")
        if self.strength > WEAK_DRIVE_LIMIT:
            warnings.warn(
                f"drive strength {self.strength} exceeds the weak-drive "
                f"regime ({WEAK_DRIVE_LIMIT}); perturbative results are "
                "unreliable", WeakDriveWarning, stacklevel=2)
        k = np.asarray(self.k_hat, dtype=float).reshape(3)
        object.__setattr__(self, "k_hat", k / np.linalg.norm(k))


@dataclass(frozen=True)
class AbsorptionResult:
    sigma_abs_over_sigma: float
    sigma_abs_over_quarter_sigma: float
    impurity_population: float
    ring_population: float
    amplitudes: np.ndarray | None = None


def illumination_vector(config: SystemConfig, drive: DriveSpec) -> np.ndarray:
    """Unit-amplitude illumination weights: mask times plane-wave phases."""
    geo = config.geometry
    positions = np.vstack([geo.positions, geo.impurity_position[None, :]])
    phases = np.exp(1j * positions @ drive.k_hat)
    weights = np.ones(config.n_total)
    if drive.mask == "ring_only":
        weights[-1] = 0.0
    elif drive.mask == "center_only":
        weights[:-1] = 0.0
    return phases * weights


def steady_state_coherent(config: SystemConfig, drive: DriveSpec) -> np.ndarray:
    """First-order steady-state excitation amplitudes b[0..N].

    Solves (delta*Id - M) b = -Omega_vec with M the effective Hamiltonian
    including the trap rate on the impurity diagonal.
    """
    if drive.kind != "coherent":
        raise ValueError("steady_state_coherent needs a coherent drive")
    m = effective_matrix(coupling_matrices(config), config.impurity.gamma_T)
    omega_vec = drive.strength * illumination_vector(config, drive)
    a = drive.detuning * np.eye(config.n_total) - m
    try:
        b = np.linalg.solve(a, -omega_vec)
    except np.linalg.LinAlgError as exc:
        raise SingularDriveError(
            "steady-state system is singular (drive resonant with a "
            "zero-width eigenvalue); perturb the detuning") from exc
    return b


def eigen_expansion_amplitudes(config: SystemConfig, drive: DriveSpec,
                               modes: ModeSet | None = None) -> np.ndarray:
    """Cross-check path: b = sum_nu v_nu (v_nu^T Omega) / (nu - delta)."""
    if modes is None:
        modes = diagonalize_effective(coupling_matrices(config),
                                      config.impurity.gamma_T)
    omega_vec = drive.strength * illumination_vector(config, drive)
    v = modes.right_vectors
    coeffs = (v.T @ omega_vec) / (modes.eigenvalues - drive.detuning)
    return v @ coeffs


def sigma_abs_coherent(config: SystemConfig, drive: DriveSpec) -> AbsorptionResult:
    """Absorbed-photon cross section under weak coherent drive,
    sigma_abs/sigma = gamma_T gamma0 |b_I|^2 / (4 Omega^2)."""
    gamma_T = config.impurity.gamma_T
    b = steady_state_coherent(config, drive)
    populations = np.abs(b)**2
    imp_pop = float(populations[-1])
    ring_pop = float(populations[:-1].sum())
    if gamma_T == 0.0:
        warnings.warn("gamma_T = 0: nothing is extracted, absorption is zero",
                      UserWarning, stacklevel=2)
        value = 0.0
    else:
        value = gamma_T * GAMMA0 * imp_pop / (4.0 * drive.strength**2)
    return AbsorptionResult(sigma_abs_over_sigma=value,
                            sigma_abs_over_quarter_sigma=4.0 * value,
                            impurity_population=imp_pop,
                            ring_population=ring_pop,
                            amplitudes=b)


@dataclass(frozen=True)
class SingleModeEstimate:
    sigma_abs_over_sigma: float
    mode_index: int
    isolated: bool


def single_mode_sigma(config: SystemConfig, drive: DriveSpec,
                      modes: ModeSet | None = None,
                      mode_index: int | None = None) -> SingleModeEstimate:
    """Single-resonance estimate of the coherent cross section.

    Valid when the target mode is spectrally isolated; otherwise the result
    is flagged unreliable.  Defaults to the darkest impurity-coupled mode.
    """
    from .spectral import darkest_coupled_mode

    if modes is None:
        modes = diagonalize_effective(coupling_matrices(config),
                                      config.impurity.gamma_T)
    if mode_index is None:
        mode_index = darkest_coupled_mode(modes).mode_index
    nu = modes.eigenvalues[mode_index]
    gamma_nu = -2.0 * nu.imag
    u = illumination_vector(config, drive)
    v = modes.right_vectors[:, mode_index]
    overlap2 = abs(v @ u)**2
    weight2 = abs(v[-1])**2
    value = (config.impurity.gamma_T * GAMMA0 / gamma_nu**2) * weight2 * overlap2

    others = np.delete(np.arange(modes.n_modes), mode_index)
    gap = np.abs(modes.frequencies[others] - nu.real).min() if others.size else np.inf
    isolated = bool(gap > 5.0 * gamma_nu)
    if not isolated:
        warnings.warn(
            f"mode {mode_index} is not isolated (nearest frequency gap "
            f"{gap:.3e} <= 5 x width {gamma_nu:.3e}); single-mode estimate "
            "unreliable", UserWarning, stacklevel=2)
    return SingleModeEstimate(sigma_abs_over_sigma=float(value),
                              mode_index=int(mode_index), isolated=isolated)


def sigma_abs_incoherent(config: SystemConfig, drive: DriveSpec,
                         modes: ModeSet | None = None) -> AbsorptionResult:
    """Perturbative cross section for a temporally incoherent, spatially
    coherent weak pump: sigma_abs/sigma = sum_nu (gamma_T/Gamma_nu)
    |<I|nu>|^2 |<nu^T|R_k>|^2."""
    if drive.kind != "incoherent":
        raise ValueError("sigma_abs_incoherent needs an incoherent drive")
    gamma_T = config.impurity.gamma_T
    if modes is None:
        modes = diagonalize_effective(coupling_matrices(config), gamma_T)
    rates = modes.decay_rates
    r_vec = illumination_vector(config, drive)
    v = modes.right_vectors
    overlaps2 = np.abs(v.T @ r_vec)**2
    weights2 = np.abs(v[-1, :])**2
    couplings = weights2 * overlaps2
    # ring guided modes decouple from both the center and a perpendicular
    # drive; their width is pure float noise and their term is exactly zero
    live = rates > 0.0
    noise_floor = 1e-20 * max(1.0, float(np.vdot(r_vec, r_vec).real))
    if np.any(~live & (couplings > noise_floor)):
        raise ZeroDivisionError(
            "a driven, impurity-coupled mode has zero decay rate; the "
            "perturbative incoherent formula is undefined for a perfect "
            "dark state")
    terms = np.where(live, gamma_T * couplings / np.where(live, rates, 1.0), 0.0)
    value = float(terms.sum())
    rates = np.where(live, rates, np.inf)

    # mode-resolved population estimates at pump rate epsilon
    eps = drive.strength
    mode_pops = eps * overlaps2 / rates
    imp_pop = float((mode_pops * weights2).sum())
    ring_pop = float((mode_pops * (np.abs(v[:-1, :])**2).sum(axis=0)).sum())
    return AbsorptionResult(sigma_abs_over_sigma=value,
                            sigma_abs_over_quarter_sigma=4.0 * value,
                            impurity_population=imp_pop,
                            ring_population=ring_pop,
                            amplitudes=None)


@dataclass(frozen=True)
class ScanRow:
    delta: float
    sigma_abs_over_sigma: float
    sigma_abs_over_quarter_sigma: float
    impurity_population: float
    ring_population: float


def spectrum_scan(config: SystemConfig, delta_range: tuple[float, float],
                  resolution: int,
                  drive: DriveSpec | None = None) -> list[ScanRow]:
    """Coherent cross section versus drive detuning on a uniform grid."""
    if drive is None:
        drive = DriveSpec()
    rows = []
    for delta in np.linspace(delta_range[0], delta_range[1], resolution):
        d = DriveSpec(kind="coherent", strength=drive.strength,
                      detuning=float(delta), k_hat=drive.k_hat,
                      mask=drive.mask)
        res = sigma_abs_coherent(config, d)
        rows.append(ScanRow(delta=float(delta),
                            sigma_abs_over_sigma=res.sigma_abs_over_sigma,
                            sigma_abs_over_quarter_sigma=res.sigma_abs_over_quarter_sigma,
                            impurity_population=res.impurity_population,
                            ring_population=res.ring_population))
    return rows


def single_emitter_sigma_coherent(gamma_T: float) -> float:
    """Resonant single-emitter absorption, units of sigma:
    gamma0 gamma_T / (gamma0 + gamma_T)^2 (maximum 1/4 at gamma_T = gamma0)."""
    return GAMMA0 * gamma_T / (GAMMA0 + gamma_T)**2


def single_emitter_sigma_incoherent(gamma_T: float) -> float:
    """Single-emitter absorption under the incoherent pump, units of sigma:
    gamma_T / (gamma0 + gamma_T)."""
    return gamma_T / (GAMMA0 + gamma_T)
