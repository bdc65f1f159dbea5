"""Eigenmode analysis of the non-Hermitian effective Hamiltonian.

The coupling matrix is complex symmetric, so left eigenvectors are the
transposes of right eigenvectors and the natural normalization is the
bilinear one, v^T v = 1.  Mode populations reported to users are computed
under the usual conjugate norm instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    GAMMA0,
    CouplingMatrices,
    SystemConfig,
    coupling_matrices,
    effective_matrix,
    inplane_pair_coupling,
)


class EigensolverError(RuntimeError):
    """Eigendecomposition failed or produced unusable vectors.

    Carries the offending matrix in the .matrix attribute.
    """

    def __init__(self, message: str, matrix: np.ndarray):
        super().__init__(message)
        self.matrix = matrix


class NonCirculantError(ValueError):
    """Ring block is not circulant; geometry or polarization broke symmetry."""


@dataclass(frozen=True)
class ModeSet:
    """Biorthogonal eigendecomposition, modes sorted by ascending decay rate.

    right_vectors columns satisfy v^T v = 1; the impurity lives at the last
    component.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    @property
    def decay_rates(self) -> np.ndarray:
        return -2.0 * self.eigenvalues.imag

    @property
    def frequencies(self) -> np.ndarray:
        return self.eigenvalues.real

    def impurity_weights(self) -> np.ndarray:
        """|<I|nu>|^2 per mode under conjugate normalization (values in [0,1])."""
        v = self.right_vectors
        return (np.abs(v[-1, :])**2 / np.sum(np.abs(v)**2, axis=0)).real


def _bilinear_orthonormalize(values: np.ndarray, vectors: np.ndarray,
                             matrix: np.ndarray) -> np.ndarray:
    """Normalize eigenvector columns to v^T v = 1, Gram-Schmidt-ing inside
    degenerate clusters so the bilinear products vanish across the set."""
    n = values.size
    scale = max(np.abs(values).max(), 1.0)
    order = np.argsort(values.real + 1e-9 * values.imag)
    cluster: list[int] = []
    out = vectors.astype(complex).copy()

    def finish(cluster):
        for pos, k in enumerate(cluster):
            v = out[:, k]
            for prev in cluster[:pos]:
                v = v - (out[:, prev] @ v) * out[:, prev]
            norm2 = v @ v
            if abs(norm2) < 1e-12 * np.vdot(v, v).real:
                raise EigensolverError(
                    "quasi-defective eigenvector (v^T v ~ 0); the matrix is "
                    "too close to an exceptional point", matrix)
            v = v / np.sqrt(norm2)
            # fix the residual sign/phase freedom for reproducible output
            lead = np.argmax(np.abs(v))
            if v[lead].real < 0 or (v[lead].real == 0 and v[lead].imag < 0):
                v = -v
            out[:, k] = v

    for idx in order:
        if cluster and abs(values[idx] - values[cluster[-1]]) > 1e-10 * scale:
            finish(cluster)
            cluster = []
        cluster.append(idx)
    finish(cluster)
    return out


def diagonalize_effective(couplings: CouplingMatrices,
                          gamma_T: float = 0.0) -> ModeSet:
    """Diagonalize the effective Hamiltonian including the trap rate.

    Modes are sorted by ascending decay rate; vectors are bilinear-normalized.
    """
    m = effective_matrix(couplings, gamma_T)
    if not np.all(np.isfinite(m)):
        raise EigensolverError("effective matrix has non-finite entries", m)
    try:
        values, vectors = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigensolver did not converge: {exc}", m) from exc
    vectors = _bilinear_orthonormalize(values, vectors, m)

    scale = max(float(np.abs(m).max()), 1.0)
    residual = np.abs(m @ vectors - vectors * values[None, :]).max()
    if residual > 1e-10 * scale:
        raise EigensolverError(
            f"eigendecomposition residual {residual:.3e} exceeds tolerance "
            f"for matrix scale {scale:.3e}", m)

    order = np.lexsort((values.real, -2.0 * values.imag))
    return ModeSet(eigenvalues=values[order], right_vectors=vectors[:, order])


@dataclass(frozen=True)
class RingModes:
    """Collective shifts and decay rates of the bare ring, indexed by the
    discrete-Fourier mode number m in {0..N-1}."""

    j_m: np.ndarray
    gamma_m: np.ndarray


def ring_mode_spectrum(couplings: CouplingMatrices) -> RingModes:
    """Fourier eigenvalues of the circulant ring block.

    Mode m has eigenvector components e^{i 2 pi m j / N}/sqrt(N); m = 0 is the
    symmetric mode that couples to the central impurity.
    """
    n = couplings.n_ring
    if n < 1:
        raise ValueError("ring_mode_spectrum needs at least one ring emitter")
    block = couplings.g[:n, :n]
    first = block[0]
    scale = max(float(np.abs(first).max()), 1.0)
    for j in range(n):
        expected = np.roll(first, j)
        if np.abs(block[j] - expected).max() > 1e-9 * scale:
            raise NonCirculantError(
                "ring block is not circulant; row "
                f"{j} deviates by {np.abs(block[j] - expected).max():.3e}")
    ms = np.arange(n)
    phases = np.exp(2j * math.pi * np.outer(ms, np.arange(n)) / n)
    lam = phases @ first
    return RingModes(j_m=lam.real, gamma_m=-2.0 * lam.imag)


@dataclass(frozen=True)
class SymmetricBlock:
    """Two-level reduction onto the symmetric ring mode |R> and the impurity
    |I>, with closed-form eigenvalues and the dark eigenvector (alpha, beta).

    alpha/beta are the |R>/|I> amplitudes under conjugate normalization.
    """

    j_R: float
    gamma_R: float
    j: float
    gamma: float
    lambda_plus: complex
    lambda_minus: complex
    alpha: complex
    beta: complex

    @property
    def lambda_dark(self) -> complex:
        if -self.lambda_plus.imag <= -self.lambda_minus.imag:
            return self.lambda_plus
        return self.lambda_minus

    @property
    def lambda_bright(self) -> complex:
        if -self.lambda_plus.imag <= -self.lambda_minus.imag:
            return self.lambda_minus
        return self.lambda_plus


def symmetric_block(config: SystemConfig) -> SymmetricBlock:
    """Build and solve the 2x2 symmetric-sector block.

    The impurity entry carries its trap rate, so for gamma_T = 0 the
    eigenvalues are exactly the closed-form lambda_{+-} of the bare model.
    """
    if config.n_ring < 1:
        raise ValueError("symmetric sector needs at least one ring emitter")
    imp = config.impurity
    ring = ring_mode_spectrum(coupling_matrices(config))
    j_R = float(ring.j_m[0])
    gamma_R = float(ring.gamma_m[0])
    pair = inplane_pair_coupling(config.geometry.radius)
    j = pair.real
    gamma = -2.0 * pair.imag

    lam_R = j_R - 0.5j * gamma_R
    lam_I = -imp.delta_I - 0.5j * (imp.gamma_I + imp.gamma_T)
    off = math.sqrt(config.n_ring * imp.gamma_I / GAMMA0) * pair
    half_diff = 0.5 * (lam_R - lam_I)
    disc = np.sqrt(half_diff**2 + off**2)
    mean = 0.5 * (lam_R + lam_I)
    lam_plus = complex(mean + disc)
    lam_minus = complex(mean - disc)

    dark = lam_plus if -lam_plus.imag <= -lam_minus.imag else lam_minus
    vec = np.array([off, dark - lam_R], dtype=complex)
    vec = vec / math.sqrt(float(np.vdot(vec, vec).real))
    return SymmetricBlock(j_R=j_R, gamma_R=gamma_R, j=j, gamma=gamma,
                          lambda_plus=lam_plus, lambda_minus=lam_minus,
                          alpha=complex(vec[0]), beta=complex(vec[1]))


@dataclass(frozen=True)
class DarkModeReport:
    mode_index: int
    decay_rate: float
    frequency: float
    impurity_weight: float


def darkest_coupled_mode(modes: ModeSet,
                         weight_threshold: float = 1e-6) -> DarkModeReport:
    """Minimal-decay mode among those with impurity weight above threshold.

    Ring guided modes (m != 0) are darker still but their field vanishes at
    the center, so they are excluded by the weight filter.
    """
    if not 0.0 < weight_threshold < 1.0:
        raise ValueError(f"weight_threshold must be in (0, 1), got {weight_threshold}")
    weights = modes.impurity_weights()
    coupled = np.flatnonzero(weights > weight_threshold)
    if coupled.size == 0:
        raise ValueError("no mode has impurity weight above "
                         f"{weight_threshold}; nothing couples to the center")
    rates = modes.decay_rates
    best = coupled[np.argmin(rates[coupled])]
    return DarkModeReport(mode_index=int(best),
                          decay_rate=float(rates[best]),
                          frequency=float(modes.frequencies[best]),
                          impurity_weight=float(weights[best]))


@dataclass(frozen=True)
class DarkConditionPrediction:
    """Near-field prediction for the impurity detuning that supports a dark
    mode, with the identical-emitter residual J_R - (N-1) J."""

    delta_I: float
    identical_residual: float


def dark_condition_delta(config: SystemConfig) -> DarkConditionPrediction:
    """Predicted impurity detuning delta_I = J (N - gamma_I/gamma0) - J_R.

    Intended for the deep subwavelength regime; elsewhere it is only a seed
    for the optimizer.  Ignores config.impurity.delta_I.
    """
    block_cfg = config
    ring = ring_mode_spectrum(coupling_matrices(block_cfg))
    j_R = float(ring.j_m[0])
    j = inplane_pair_coupling(config.geometry.radius).real
    n = config.n_ring
    predicted = j * (n - config.impurity.gamma_I / GAMMA0) - j_R
    return DarkConditionPrediction(delta_I=float(predicted),
                                   identical_residual=float(j_R - (n - 1) * j))
