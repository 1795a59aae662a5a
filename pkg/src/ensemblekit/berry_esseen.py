"""Spectral energy CDF vs Gaussian comparison and the lattice Berry-Esseen bound.

The spectral CDF F(x) sums the diagonal weights of a state in the energy
eigenbasis; its Kolmogorov distance to the matched Gaussian G is evaluated
exactly at the jump points (degenerate energies are merged first so left
limits are well defined).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import DegenerateSpectrum, PreconditionError
from .operators import SpectralDecomposition
from .states import DensityMatrix

MERGE_TOL = 1e-10


@dataclass(frozen=True)
class SpectralCDF:
    """Right-continuous step CDF of energy with weights of one state."""

    jump_points: np.ndarray
    masses: np.ndarray
    mu: float
    sigma2: float

    def evaluate(self, x: float) -> float:
        idx = np.searchsorted(self.jump_points, x, side="right")
        return float(self.masses[:idx].sum())

    def gaussian(self, x) -> np.ndarray:
        if self.sigma2 <= 0:
            raise DegenerateSpectrum("zero energy variance")
        z = (np.asarray(x, dtype=float) - self.mu) / math.sqrt(2.0 * self.sigma2)
        return 0.5 * erfc(-z)


@dataclass(frozen=True)
class BEDelta:
    """The bound prefactor Delta and the full Kolmogorov bound it implies."""

    c_d: float
    k: int
    xi: float
    z: float
    d: int
    num_sites: int
    sigma2: float
    temperature: float | None
    value: float
    kolmogorov_bound: float  # Delta * ln^{2d}(N) / sqrt(N)


def from_weights(energies, weights, normalize: bool = True) -> SpectralCDF:
    """Build the merged step CDF from raw (energy, weight) pairs."""
    energies = np.asarray(energies, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if energies.shape != weights.shape:
        raise PreconditionError("energies and weights must have equal length")
    if normalize:
        weights = weights / weights.sum()
    order = np.argsort(energies)
    energies, weights = energies[order], weights[order]
    jumps, masses = [], []
    for e, w in zip(energies, weights):
        if jumps and e - jumps[-1] <= MERGE_TOL:
            masses[-1] += w
        else:
            jumps.append(e)
            masses.append(w)
    jumps = np.array(jumps)
    masses = np.array(masses)
    total = masses.sum()
    if abs(total - 1.0) > 1e-10:
        raise PreconditionError(f"masses sum to {total}, not 1")
    mu = float(masses @ jumps)
    sigma2 = float(masses @ (jumps - mu) ** 2)
    return SpectralCDF(jumps, masses, mu, sigma2)


def spectral_cdf(rho: DensityMatrix, spec: SpectralDecomposition) -> SpectralCDF:
    """F(x) = sum over E_nu <= x of <nu|rho|nu>, with mu = tr(rho H) and
    sigma^2 = tr(rho (H - mu)^2)."""
    if rho.dim != spec.dim:
        raise PreconditionError(f"state dim {rho.dim} != spectrum dim {spec.dim}")
    if rho.is_mixture:
        basis, w = rho.mixture_parts()
        if basis is spec.eigenvectors and w.shape[0] == spec.dim:
            return from_weights(spec.energies, w, normalize=False)
        overlap = spec.eigenvectors.conj().T @ basis        # (dim, r)
        masses = (np.abs(overlap) ** 2) @ w
    else:
        v = spec.eigenvectors
        masses = np.einsum("ij,ji->i", v.conj().T @ rho.matrix, v).real
    masses = np.clip(masses, 0.0, None)
    return from_weights(spec.energies, masses, normalize=True)


def kolmogorov_distance(cdf: SpectralCDF) -> float:
    """sup_x |F(x) - G(x)| evaluated exactly at the jumps and their left limits."""
    if cdf.sigma2 <= 0:
        raise DegenerateSpectrum("energy variance is zero; Gaussian undefined")
    f_right = np.cumsum(cdf.masses)
    f_left = f_right - cdf.masses
    g = cdf.gaussian(cdf.jump_points)
    return float(np.maximum(np.abs(f_right - g), np.abs(f_left - g)).max())


def delta_bound(k: int, xi: float, z: float, d: int, num_sites: int,
                sigma2: float, c_d: float = 1.0,
                temperature: float | None = None) -> BEDelta:
    """Literal evaluation of the Berry-Esseen prefactor

        Delta = C_d (max{k,xi}(z+1))^{2d} / (sigma/sqrt(N))
                * max{ 1/(max{k,xi}(z+1) ln N), 1/(sigma^2/N) }

    and the implied bound Delta ln^{2d}(N)/sqrt(N) on sup|F - G|.
    """
    if num_sites <= 1:
        raise PreconditionError("need N > 1 (ln N must be positive)")
    if sigma2 <= 0:
        raise PreconditionError("need sigma^2 > 0")
    if c_d < 1.0:
        raise PreconditionError(f"C_d must be >= 1, got {c_d}")
    scale = max(k, xi) * (z + 1.0)
    sigma_density = math.sqrt(sigma2 / num_sites)
    branch = max(1.0 / (scale * math.log(num_sites)), num_sites / sigma2)
    value = c_d * scale ** (2 * d) / sigma_density * branch
    bound = value * math.log(num_sites) ** (2 * d) / math.sqrt(num_sites)
    return BEDelta(c_d, k, xi, z, d, num_sites, sigma2, temperature, value, bound)
