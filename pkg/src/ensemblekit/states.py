"""Canonical and microcanonical states, thermal observables, Haar samples, partial traces.

Density matrices carry an optional mixture representation (an orthonormal
eigenvector block plus weights) so that Gibbs and microcanonical states of the
same Hamiltonian never need the full D^N x D^N matrix: partial traces and
same-basis trace distances work directly on the spectral data.

Entropy convention: every von Neumann entropy here is in nats; base-2
conversions live in the divergence module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyWindow, PreconditionError
from .lattice import Region
from .operators import SpectralDecomposition

TRACE_TOL = 1e-10
EIG_CLIP = 1e-8


@dataclass
class DensityMatrix:
    """Hermitian, PSD, unit-trace operator on the sites of ``support_region``.

    Exactly one representation is stored: a dense matrix, or a mixture
    ``basis @ diag(weights) @ basis^dagger`` with orthonormal ``basis`` columns.
    The dense form is materialized on first access and cached.
    """

    support_region: Region | None = None
    _dense: np.ndarray | None = None
    _basis: np.ndarray | None = None
    _weights: np.ndarray | None = None

    @classmethod
    def from_matrix(cls, matrix, support_region=None, check=True) -> "DensityMatrix":
        m = np.asarray(matrix)
        if check:
            m = _validate_density(m)
        return cls(support_region, _dense=m)

    @classmethod
    def from_mixture(cls, basis, weights, support_region=None) -> "DensityMatrix":
        w = np.asarray(weights, dtype=float)
        if abs(w.sum() - 1.0) > TRACE_TOL:
            raise PreconditionError(f"mixture weights sum to {w.sum()}, not 1")
        if w.min() < -EIG_CLIP:
            raise PreconditionError(f"mixture weight {w.min()} below -1e-8")
        w = np.clip(w, 0.0, None)
        w = w / w.sum()
        return cls(support_region, _basis=np.asarray(basis), _weights=w)

    @classmethod
    def from_vector(cls, vector, support_region=None) -> "DensityMatrix":
        v = np.asarray(vector)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise PreconditionError("zero vector is not a state")
        return cls.from_mixture(v[:, None] / nrm, np.array([1.0]), support_region)

    @property
    def dim(self) -> int:
        if self._dense is not None:
            return self._dense.shape[0]
        return self._basis.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        if self._dense is None:
            b = self._basis
            self._dense = (b * self._weights) @ b.conj().T
        return self._dense

    @property
    def is_mixture(self) -> bool:
        return self._basis is not None

    def mixture_parts(self) -> tuple[np.ndarray, np.ndarray]:
        return self._basis, self._weights

    def eigenvalues(self) -> np.ndarray:
        """Ascending spectrum (mixture weights are completed with zeros)."""
        if self._basis is not None:
            vals = np.zeros(self.dim)
            vals[: self._weights.shape[0]] = self._weights
            return np.sort(vals)
        return np.linalg.eigvalsh(self.matrix)


def _validate_density(m: np.ndarray) -> np.ndarray:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise PreconditionError(f"density matrix must be square, got {m.shape}")
    if np.max(np.abs(m - m.conj().T)) > 1e-9:
        raise PreconditionError("density matrix is not Hermitian")
    tr = np.trace(m).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise PreconditionError(f"trace {tr} differs from 1 beyond 1e-10")
    vals = np.linalg.eigvalsh(m)
    if vals[0] < -EIG_CLIP:
        raise PreconditionError(f"eigenvalue {vals[0]:.3e} below -1e-8; not a state")
    if vals[0] < 0.0:
        # bounded numerical noise: clip to the PSD cone and renormalize
        vals2, vecs = np.linalg.eigh(m)
        vals2 = np.clip(vals2, 0.0, None)
        m = (vecs * (vals2 / vals2.sum())) @ vecs.conj().T
    return m


@dataclass(frozen=True)
class ThermalData:
    """Per-site thermal observables of one Gibbs state (k_B = 1, entropy in nats)."""

    temperature: float
    partition_function: float
    log_partition_function: float
    energy_density: float
    specific_heat: float
    entropy_density: float


@dataclass(frozen=True)
class MicrocanonicalWindow:
    """Eigenstate index set M = {nu : |E_nu - e N| <= delta sqrt(N)}."""

    e: float
    delta: float
    num_sites: int
    members: np.ndarray
    member_energies: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.members.shape[0])

    @property
    def mean_energy(self) -> float:
        return float(self.member_energies.mean())


def _boltzmann_weights(energies: np.ndarray, T: float) -> tuple[np.ndarray, float]:
    """Shifted weights exp(-(E - E_min)/T) and the shift E_min."""
    shift = float(energies.min())
    return np.exp(-(energies - shift) / T), shift


def gibbs(spec: SpectralDecomposition, T: float, num_sites: int | None = None,
          region: Region | None = None) -> tuple[DensityMatrix, ThermalData]:
    """Gibbs state exp(-H/T)/Z in the eigenbasis, with its thermal observables.

    ``num_sites`` sets the densities' normalization (defaults to log2 of the
    dimension, i.e. qubit sites).
    """
    if T <= 0:
        raise PreconditionError(f"temperature must be positive, got {T}")
    energies = spec.energies
    N = num_sites if num_sites is not None else int(round(math.log2(spec.dim)))
    w, shift = _boltzmann_weights(energies, T)
    zs = w.sum()
    p = w / zs
    log_z = math.log(zs) - shift / T
    z = math.exp(log_z) if abs(log_z) < 700 else math.inf
    u = float(p @ energies) / N
    var = float(p @ (energies - u * N) ** 2)
    c = var / (N * T * T)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), 0.0)
    s = -float(p @ logs) / N
    rho = DensityMatrix.from_mixture(spec.eigenvectors, p, region)
    return rho, ThermalData(T, z, log_z, u, c, s)


def microcanonical(spec: SpectralDecomposition, e: float, delta: float,
                   num_sites: int | None = None,
                   region: Region | None = None) -> tuple[DensityMatrix, MicrocanonicalWindow]:
    """Uniform mixture of the eigenstates with |E_nu - e N| <= delta sqrt(N)."""
    if delta <= 0:
        raise PreconditionError(f"energy spread delta must be positive, got {delta}")
    energies = spec.energies
    N = num_sites if num_sites is not None else int(round(math.log2(spec.dim)))
    center = e * N
    half_width = delta * math.sqrt(N)
    members = np.flatnonzero(np.abs(energies - center) <= half_width)
    if members.size == 0:
        nearest = float(energies[np.argmin(np.abs(energies - center))])
        raise EmptyWindow(
            f"no eigenvalue within {half_width:.6g} of eN={center:.6g}; "
            f"nearest eigenvalue is {nearest:.6g}", nearest_energy=nearest)
    window = MicrocanonicalWindow(e, delta, N, members, energies[members])
    # Full-length weights over the shared eigenbasis keep same-basis fast paths exact.
    weights = np.zeros(spec.dim)
    weights[members] = 1.0 / members.size
    tau = DensityMatrix.from_mixture(spec.eigenvectors, weights, region)
    return tau, window


def restricted_partition(spec: SpectralDecomposition, T: float, e: float,
                         delta: float, num_sites: int | None = None) -> float:
    """Z(T, e, delta): Boltzmann weights summed over the microcanonical window."""
    if T <= 0:
        raise PreconditionError(f"temperature must be positive, got {T}")
    N = num_sites if num_sites is not None else int(round(math.log2(spec.dim)))
    center = e * N
    half_width = delta * math.sqrt(N)
    energies = spec.energies
    members = np.abs(energies - center) <= half_width
    if not members.any():
        nearest = float(energies[np.argmin(np.abs(energies - center))])
        raise EmptyWindow(
            f"empty window around eN={center:.6g}; nearest eigenvalue {nearest:.6g}",
            nearest_energy=nearest)
    w, shift = _boltzmann_weights(energies, T)
    return float(w[members].sum() * math.exp(-shift / T))


def haar_state(window: MicrocanonicalWindow, spec: SpectralDecomposition,
               seed: int, region: Region | None = None) -> DensityMatrix:
    """Pure state drawn Haar-uniformly from the window's eigenspace span.

    Isotropic complex Gaussian coefficients, normalized; deterministic per seed.
    """
    if window.dim < 1:
        raise PreconditionError("window must contain at least one state")
    rng = np.random.default_rng(seed)
    coeff = rng.standard_normal(window.dim) + 1j * rng.standard_normal(window.dim)
    coeff /= np.linalg.norm(coeff)
    basis = spec.eigenvectors[:, window.members]
    psi = basis @ coeff
    if np.max(np.abs(psi.imag)) == 0.0:
        psi = psi.real
    return DensityMatrix.from_vector(psi, region)


def _keep_positions(keep: Region, within: Region) -> list[int]:
    pos = {s: i for i, s in enumerate(within.sites)}
    return [pos[s] for s in keep.sites]


def partial_trace(rho: DensityMatrix, keep: Region, local_dim: int = 2) -> DensityMatrix:
    """Reduced state on ``keep`` (a subset of the state's support), canonical order."""
    num_sites = round(math.log(rho.dim, local_dim))
    if local_dim ** num_sites != rho.dim:
        raise PreconditionError(
            f"dim {rho.dim} is not a power of local_dim {local_dim}")
    if rho.support_region is not None:
        if not keep.issubset(rho.support_region):
            raise PreconditionError(
                f"keep region {keep.sites} is not a subset of the support "
                f"{rho.support_region.sites}")
        keep_axes = _keep_positions(keep, rho.support_region)
    else:
        keep_axes = list(keep.indices)
        if any(a >= num_sites for a in keep_axes):
            raise PreconditionError("keep region indexes sites outside the state")
    reduced = _reduce(rho, keep_axes, num_sites, local_dim)
    return DensityMatrix.from_matrix(reduced, keep, check=False)


def _reduce(rho: DensityMatrix, keep_axes: list[int], num_sites: int,
            local_dim: int) -> np.ndarray:
    rest = [a for a in range(num_sites) if a not in keep_axes]
    dk = local_dim ** len(keep_axes)
    dr = local_dim ** len(rest)
    if rho.is_mixture:
        basis, weights = rho.mixture_parts()
        live = np.flatnonzero(weights > 0.0)
        cols = basis[:, live]
        t = cols.reshape([local_dim] * num_sites + [live.size])
        t = np.ascontiguousarray(np.transpose(t, keep_axes + rest + [num_sites]))
        scaled = t.reshape(dk, dr, live.size) * np.sqrt(weights[live])[None, None, :]
        block = scaled.reshape(dk, dr * live.size)
        out = block @ block.conj().T
    else:
        t = rho.matrix.reshape([local_dim] * (2 * num_sites))
        perm = keep_axes + rest
        t = t.transpose(perm + [num_sites + a for a in perm])
        t = t.reshape(dk, dr, dk, dr)
        out = np.einsum("arbr->ab", t)
    out = (out + out.conj().T) / 2.0
    if np.iscomplexobj(out) and np.max(np.abs(out.imag)) == 0.0:
        out = out.real
    return out


def shares_basis(a: DensityMatrix, b: DensityMatrix) -> bool:
    """True when both states are mixtures over the identical basis array."""
    return (a.is_mixture and b.is_mixture and a._basis is b._basis
            and a._weights.shape == b._weights.shape)
