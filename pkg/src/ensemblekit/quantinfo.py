"""Distances, entropies, relative entropies, and free energy.

Unit discipline: every divergence value carries an explicit nats/bits tag.
Substate-chain and equivalence-bound formulas are evaluated in bits (the
2^lambda convention), thermodynamic identities in nats.  0 log 0 = 0
throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .states import DensityMatrix, shares_basis

LN2 = math.log(2.0)

# Eigenvalue threshold below which a direction counts as outside the support.
SUPPORT_TOL = 1e-10


@dataclass(frozen=True)
class DivergenceValue:
    """Non-negative extended real with an explicit unit tag."""

    value: float
    unit: str  # "nats" | "bits"

    def __post_init__(self):
        if self.unit not in ("nats", "bits"):
            raise PreconditionError(f"unknown unit {self.unit!r}")

    def to(self, unit: str) -> "DivergenceValue":
        if unit == self.unit or not math.isfinite(self.value):
            return DivergenceValue(self.value, unit)
        factor = 1.0 / LN2 if unit == "bits" else LN2
        return DivergenceValue(self.value * factor, unit)

    @property
    def bits(self) -> float:
        return self.to("bits").value

    @property
    def nats(self) -> float:
        return self.to("nats").value


def _as_matrix(state) -> np.ndarray:
    if isinstance(state, DensityMatrix):
        return state.matrix
    return np.asarray(state)


def _check_same_space(a, b) -> None:
    ma, mb = _as_matrix(a), _as_matrix(b)
    if ma.shape != mb.shape:
        raise PreconditionError(f"dimension mismatch: {ma.shape} vs {mb.shape}")
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        ra, rb = a.support_region, b.support_region
        if ra is not None and rb is not None and ra.sites != rb.sites:
            raise PreconditionError(
                f"states live on different regions: {ra.sites} vs {rb.sites}")


def trace_distance(rho, sigma) -> float:
    """tr|rho - sigma| via the spectrum of the Hermitian difference (range [0, 2])."""
    _check_same_space(rho, sigma)
    if isinstance(rho, DensityMatrix) and isinstance(sigma, DensityMatrix) \
            and shares_basis(rho, sigma):
        return float(np.abs(rho._weights - sigma._weights).sum())
    diff = _as_matrix(rho) - _as_matrix(sigma)
    return float(np.abs(np.linalg.eigvalsh(diff)).sum())


def _clipped_spectrum(state) -> np.ndarray:
    if isinstance(state, DensityMatrix) and state.is_mixture:
        _, w = state.mixture_parts()
        vals = w
    else:
        vals = np.linalg.eigvalsh(_as_matrix(state))
    return np.clip(vals, 0.0, None)


def von_neumann_entropy(rho) -> float:
    """-sum lambda ln lambda in nats over the clipped spectrum."""
    vals = _clipped_spectrum(rho)
    pos = vals[vals > 0]
    return float(-(pos * np.log(pos)).sum())


def relative_entropy(tau, rho, unit: str = "bits",
                     support_tol: float = SUPPORT_TOL) -> DivergenceValue:
    """S(tau||rho) = tr(tau (log tau - log rho)); +inf if supp(tau) leaves supp(rho)."""
    _check_same_space(tau, rho)
    mt = _as_matrix(tau)
    vals_r, vecs_r = np.linalg.eigh(_as_matrix(rho))
    # weight of tau along each eigenvector of rho
    overlap = np.einsum("ij,ji->i", vecs_r.conj().T @ mt, vecs_r).real
    overlap = np.clip(overlap, 0.0, None)
    outside = vals_r <= support_tol
    if overlap[outside].sum() > support_tol:
        return DivergenceValue(math.inf, unit)
    inside = ~outside
    cross = float(overlap[inside] @ np.log(vals_r[inside]))
    ent = von_neumann_entropy(tau)  # nats
    return DivergenceValue(-ent - cross, "nats").to(unit)


def max_relative_entropy(tau, rho,
                         support_tol: float = SUPPORT_TOL) -> DivergenceValue:
    """S_max = log2 lambda_max(rho^{-1/2} tau rho^{-1/2}), on supp(rho); bits."""
    _check_same_space(tau, rho)
    mt = _as_matrix(tau)
    vals_r, vecs_r = np.linalg.eigh(_as_matrix(rho))
    outside = vals_r <= support_tol
    overlap = np.einsum("ij,ji->i", vecs_r.conj().T @ mt, vecs_r).real
    if np.clip(overlap, 0.0, None)[outside].sum() > support_tol:
        return DivergenceValue(math.inf, "bits")
    inv_sqrt = np.where(outside, 0.0, 1.0 / np.sqrt(np.where(outside, 1.0, vals_r)))
    core = (vecs_r * inv_sqrt) @ vecs_r.conj().T
    sandwich = core @ mt @ core
    lam = float(np.linalg.eigvalsh((sandwich + sandwich.conj().T) / 2.0)[-1])
    # a unit-trace tau supported in supp(rho) always has lam >= 1/dim > 0
    lam = max(lam, np.finfo(float).tiny)
    return DivergenceValue(math.log2(lam), "bits")


def free_energy(tau, hamiltonian, T: float) -> float:
    """F_T(tau) = tr(H tau) - T S(tau) with S in nats, so that
    T * S(tau||rho_T) in nats equals F_T(tau) - F_T(rho_T)."""
    if T <= 0:
        raise PreconditionError(f"temperature must be positive, got {T}")
    hm = hamiltonian.dense if hasattr(hamiltonian, "dense") else np.asarray(hamiltonian)
    mt = _as_matrix(tau)
    energy = float(np.trace(hm @ mt).real)
    return energy - T * von_neumann_entropy(tau)
