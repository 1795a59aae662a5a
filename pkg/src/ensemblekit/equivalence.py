"""End-to-end equivalence evaluators: hypotheses, claimed bounds, and measured
local distances side by side.

All checkers are total: an unsatisfiable precondition is recorded with both
sides of its inequality instead of raising, because at desk scale several
conditions are expected to fail for C_d = 1.  The scientific output is the
margin table together with the measured distance.  All equivalence-bound
formulas are evaluated in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .berry_esseen import BEDelta, delta_bound
from .correlations import CorrelationProfile
from .errors import PreconditionError
from .lattice import LatticeSpec, hypercubes
from .operators import Hamiltonian, SpectralDecomposition, diagonalize
from .quantinfo import relative_entropy, trace_distance, von_neumann_entropy
from .states import (
    DensityMatrix,
    ThermalData,
    gibbs,
    haar_state,
    microcanonical,
    partial_trace,
    shares_basis,
)

LN2 = math.log(2.0)
CONCLUSION_SLACK = 1e-9

# (sqrt(2) + 2 + sqrt(ln 2)) sqrt(2 eps) is the stronger conclusion constant
STRONG_CONSTANT = math.sqrt(2.0) + 2.0 + math.sqrt(LN2)


@dataclass(frozen=True)
class Precondition:
    """One inequality lhs <= rhs with its numeric margin (rhs - lhs)."""

    name: str
    lhs: float
    rhs: float

    def __post_init__(self):
        object.__setattr__(self, "lhs", float(self.lhs))
        object.__setattr__(self, "rhs", float(self.rhs))

    @property
    def satisfied(self) -> bool:
        return self.lhs <= self.rhs + CONCLUSION_SLACK

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
                "satisfied": self.satisfied, "margin": self.margin}


@dataclass
class EquivalenceReport:
    params: dict
    preconditions: list[Precondition]
    claimed_bound: float
    measured: float
    measured_max: float
    conclusion_holds: bool
    extras: dict = field(default_factory=dict)

    @property
    def preconditions_satisfied(self) -> bool:
        return all(p.satisfied for p in self.preconditions)

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "preconditions": [p.to_dict() for p in self.preconditions],
            "preconditions_satisfied": self.preconditions_satisfied,
            "claimed_bound": self.claimed_bound,
            "measured": self.measured,
            "measured_max": self.measured_max,
            "conclusion_holds": self.conclusion_holds,
            "extras": self.extras,
        }


@dataclass
class MicroRelEntReport:
    lhs_bits: float
    rhs_bits: float
    delta0: float
    preconditions: list[Precondition]
    holds: bool
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "lhs_bits": self.lhs_bits,
            "rhs_bits": self.rhs_bits,
            "delta0": self.delta0,
            "preconditions": [p.to_dict() for p in self.preconditions],
            "preconditions_satisfied": all(p.satisfied for p in self.preconditions),
            "holds": self.holds,
            "extras": self.extras,
        }


def lambert_w(x: float) -> float:
    """Principal branch of w e^w = x for x >= 0, by Halley iteration from
    ln(1+x); residual |W e^W - x| <= 1e-12 max(1, x)."""
    if x < 0:
        raise PreconditionError(f"only the W >= 0 branch is supported, got x={x}")
    if x == 0.0:
        return 0.0
    if not math.isfinite(x):
        return math.inf
    w = math.log1p(x)
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= 1e-13 * max(1.0, x):
            break
        fp = ew * (w + 1.0)
        fpp = ew * (w + 2.0)
        w -= f / (fp - f * fpp / (2.0 * fp))
    return w


def _lambert_w_of_exp(log_arg: float) -> float:
    """W(e^y) for possibly huge y, solving w + ln w = y without forming e^y."""
    if log_arg <= 700.0:
        return lambert_w(math.exp(log_arg))
    w = log_arg - math.log(log_arg)
    for _ in range(100):
        g = w + math.log(w) - log_arg
        if abs(g) <= 1e-14 * max(1.0, log_arg):
            break
        w -= g / (1.0 + 1.0 / w)
    return w


def local_distance_average(tau: DensityMatrix, rho: DensityMatrix, l: int,
                           lattice: LatticeSpec | None = None,
                           local_dim: int = 2) -> float:
    """Exact average of trace distances of reduced states over all cubes in C_l."""
    avg, _, _ = local_distance_profile(tau, rho, l, lattice, local_dim)
    return avg


def local_distance_profile(tau: DensityMatrix, rho: DensityMatrix, l: int,
                           lattice: LatticeSpec | None = None,
                           local_dim: int = 2) -> tuple[float, float, list[float]]:
    """(average, maximum, per-cube list) of reduced-state trace distances."""
    if lattice is None:
        for st in (tau, rho):
            if st.support_region is not None:
                lattice = st.support_region.lattice
                break
    if lattice is None:
        raise PreconditionError("pass a lattice or states with support regions")
    fam = hypercubes(lattice, l)
    per_cube = []
    for cube in fam.cubes:
        a = partial_trace(tau, cube, local_dim)
        b = partial_trace(rho, cube, local_dim)
        per_cube.append(trace_distance(a, b))
    return float(np.mean(per_cube)), float(np.max(per_cube)), per_cube


def equivalence_size_condition(c: float, delta_be: float, n: int, d: int,
                               D: int, l: int, eps: float, xi: float,
                               z: float) -> Precondition:
    """The size condition coupling epsilon, N, and l for thermal windows."""
    N = n ** d
    lhs = ((56.0 * math.sqrt(c) * delta_be * math.log(N) ** (2 * d)
            + (5.0 + eps * z) * math.log(N)) / (eps * LN2)
           + (2.0 * xi * math.log(D) * l ** d + l + 2.0) / (xi * LN2))
    rhs = (eps * N / (math.log(4.0) ** d * xi ** d)) ** (1.0 / (d + 1))
    return Precondition("size_condition", lhs, rhs)


def simple_size_condition(s_bits: float, n: int, d: int, D: int, l: int,
                          eps: float, xi: float, z: float) -> Precondition:
    """Simplified size condition (no Lambert factor)."""
    N = n ** d
    lhs = ((s_bits + 3.0) / eps
           + (2.0 * xi * math.log(D) * l ** d + l + 2.0) / (xi * LN2)
           + (z + 1.0) * math.log2(N))
    rhs = (eps * N / (math.log(4.0) ** d * xi ** d)) ** (1.0 / (d + 1))
    return Precondition("simple_condition", lhs, rhs)


def lambert_size_condition(s_bits: float, n: int, d: int, D: int, l: int,
                           eps: float, xi: float, z: float) -> Precondition:
    """Size condition with the ceil(W(...) xi d)^d group-count factor."""
    pre = _w_ceil_factor((s_bits + 1.5) * LN2 / (eps * d), n, d, D, l, eps, xi, z)
    lhs = pre * (s_bits + 2.0) / eps
    rhs = eps * (n - l + 1) ** d
    return Precondition("lambert_condition", lhs, rhs)


def micro_lambert_condition(s_bundle: float, n: int, d: int, D: int, l: int,
                            eps: float, xi: float, z: float) -> Precondition:
    """The microcanonical version: 2^{s/d} inside W, multiplied by s outside."""
    pre = _w_ceil_factor(s_bundle * LN2 / d, n, d, D, l, eps, xi, z)
    lhs = pre * s_bundle
    rhs = eps * (n - l + 1) ** d
    return Precondition("micro_lambert_condition", lhs, rhs)


def _w_ceil_factor(exp_nats: float, n: int, d: int, D: int, l: int,
                   eps: float, xi: float, z: float) -> float:
    """ceil(W(arg) xi d)^d with the argument assembled in log space:
    arg = (2^d-1)^{1/d} (n-l+1) / (eps^{1/d} xi d) * e^{exp_nats}
          * D^{2 l^d / d} * n^z * e^{(l-1)/(xi d)}."""
    log_arg = (math.log(2.0 ** d - 1.0) / d + math.log(n - l + 1)
               - math.log(eps) / d - math.log(xi * d) + exp_nats
               + (2.0 * l ** d / d) * math.log(D) + z * math.log(n)
               + (l - 1.0) / (xi * d))
    w = _lambert_w_of_exp(log_arg)
    if not math.isfinite(w):
        return math.inf
    return math.ceil(w * xi * d) ** d


def micro_exponent_bundle(c: float, delta_be: float, N: int, d: int, eps: float) -> float:
    """The exponent bundle s = (1/eps) log2(sqrt(N)/(Delta ln^{2d} N)
    * e^{56 sqrt(c) Delta ln^{2d} N}) + 2/eps."""
    log_n_2d = math.log(N) ** (2 * d)
    return ((math.log2(math.sqrt(N) / (delta_be * log_n_2d))
             + 56.0 * math.sqrt(c) * delta_be * log_n_2d / LN2) / eps + 2.0 / eps)


def _thermal_preconditions(e: float, delta: float, td: ThermalData, be: BEDelta,
                           N: int, d: int) -> list[Precondition]:
    sigma_density = math.sqrt(td.specific_heat) * td.temperature
    eq2_lower = (28.0 * be.value * sigma_density * math.log(N) ** (2 * d)
                 / math.sqrt(N))
    return [
        Precondition("lattice_size", 3.0, float(N)),  # N > 2, integer N
        Precondition("energy_offset", abs(e - td.energy_density),
                     sigma_density / math.sqrt(N)),
        Precondition("spread_lower", eq2_lower, delta),
        Precondition("spread_upper", delta, sigma_density),
        Precondition("spread_window_feasible", eq2_lower, sigma_density),
    ]


def check_microcanonical_equivalence(
        ham: Hamiltonian, T: float, e: float, delta: float, l: int, eps: float,
        profile: CorrelationProfile, c_d: float = 1.0,
        spec: SpectralDecomposition | None = None) -> EquivalenceReport:
    """Evaluate every hypothesis and the 7 sqrt(eps) conclusion of the main
    equivalence statement, reporting numeric margins for all of them."""
    lat = ham.lattice
    n, d, D, N = lat.n, lat.d, ham.local_dim, lat.num_sites
    if spec is None:
        spec = diagonalize(ham)
    rho, td = gibbs(spec, T, num_sites=N)
    tau, window = microcanonical(spec, e, delta, num_sites=N)
    xi, z = profile.xi, profile.z
    sigma2 = N * td.specific_heat * T * T
    be = delta_bound(ham.locality, xi, z, d, N, sigma2, c_d, temperature=T)

    pre = _thermal_preconditions(e, delta, td, be, N, d)
    pre.append(equivalence_size_condition(td.specific_heat, be.value, n, d, D, l, eps, xi, z))

    measured, measured_max, per_cube = local_distance_profile(tau, rho, l, lat, D)
    claimed_bound = 7.0 * math.sqrt(eps)
    s_bundle = micro_exponent_bundle(td.specific_heat, be.value, N, d, eps)
    micro_lambert = micro_lambert_condition(s_bundle, n, d, D, l, eps, xi, z)
    report = EquivalenceReport(
        params={"n": n, "d": d, "N": N, "local_dim": D, "k": ham.locality,
                "T": T, "e": e, "delta": delta, "l": l, "eps": eps,
                "xi": xi, "z": z, "C_d": c_d},
        preconditions=pre + [micro_lambert],
        claimed_bound=claimed_bound,
        measured=measured,
        measured_max=measured_max,
        conclusion_holds=measured <= claimed_bound + CONCLUSION_SLACK,
        extras={
            "window_dim": window.dim,
            "be_delta": be.value,
            "be_kolmogorov_bound": be.kolmogorov_bound,
            "thermal": {"u": td.energy_density, "c": td.specific_heat,
                        "s": td.entropy_density, "log_z": td.log_partition_function},
            "s_bundle": s_bundle,
            "strong_bound": STRONG_CONSTANT * math.sqrt(2.0 * eps),
            "strong_conclusion_holds": bool(
                measured <= STRONG_CONSTANT * math.sqrt(2.0 * eps) + CONCLUSION_SLACK),
            "global_trace_distance": trace_distance(tau, rho),
            "per_cube_distances": per_cube,
        },
    )
    return report


def check_state_equivalence(tau: DensityMatrix, rho: DensityMatrix, l: int,
                            eps: float, profile: CorrelationProfile,
                            lattice: LatticeSpec | None = None,
                            local_dim: int = 2) -> EquivalenceReport:
    """Evaluate local equivalence for a general state pair: the Lambert-W
    size condition and its simplified sufficient form, with the
    (sqrt2+2+sqrt(ln2)) sqrt(2 eps) conclusion."""
    if lattice is None:
        lattice = (tau.support_region or rho.support_region).lattice
    n, d, D, N = lattice.n, lattice.d, local_dim, lattice.num_sites
    s_bits = relative_entropy(tau.matrix, rho.matrix, unit="bits").value
    if not math.isfinite(s_bits):
        raise PreconditionError("S(tau||rho) must be finite")
    xi, z = profile.xi, profile.z
    strong = lambert_size_condition(s_bits, n, d, D, l, eps, xi, z)
    simple = simple_size_condition(s_bits, n, d, D, l, eps, xi, z)
    measured, measured_max, per_cube = local_distance_profile(tau, rho, l, lattice, D)
    claimed_bound = STRONG_CONSTANT * math.sqrt(2.0 * eps)
    return EquivalenceReport(
        params={"n": n, "d": d, "N": N, "local_dim": D, "l": l, "eps": eps,
                "xi": xi, "z": z},
        preconditions=[strong, simple],
        claimed_bound=claimed_bound,
        measured=measured,
        measured_max=measured_max,
        conclusion_holds=measured <= claimed_bound + CONCLUSION_SLACK,
        extras={
            "s_rel_bits": s_bits,
            "simple_bound": 7.0 * math.sqrt(eps),
            "simple_conclusion_holds": bool(
                measured <= 7.0 * math.sqrt(eps) + CONCLUSION_SLACK),
            "eps_above_half": eps > 0.5,
            "per_cube_distances": per_cube,
        },
    )


def _diagonal_relative_entropy_bits(tau: DensityMatrix, spec: SpectralDecomposition,
                                    td: ThermalData, N: int) -> float:
    """S(tau||rho_T) in bits for tau diagonal in the energy eigenbasis."""
    _, w = tau.mixture_parts()
    live = w > 0
    ent_bits = von_neumann_entropy(tau) / LN2
    shift = float(spec.energies.min())
    # log2 p_nu with the same max-weight shift used by gibbs()
    log2_p = (-(spec.energies[live] - shift) / td.temperature
              - (td.log_partition_function + shift / td.temperature)) / LN2
    return float(-ent_bits - w[live] @ log2_p)


def micro_relent_bound(ham: Hamiltonian, T: float, tau: DensityMatrix | None,
                       e: float, delta: float, profile: CorrelationProfile,
                       c_d: float = 1.0,
                       spec: SpectralDecomposition | None = None) -> MicroRelEntReport:
    """Relative entropy of a window-supported state against the Gibbs state,
    next to its closed bound -S(tau) + log|M| + log(sqrt(N) e^{56 sqrt(c)
    Delta ln^{2d} N} / (Delta ln^{2d} N))."""
    lat = ham.lattice
    N, d = lat.num_sites, lat.d
    if spec is None:
        spec = diagonalize(ham)
    rho, td = gibbs(spec, T, num_sites=N)
    tau_window, window = microcanonical(spec, e, delta, num_sites=N)
    if tau is None:
        tau = tau_window

    # support check: all diagonal weight must sit inside the window
    masses = _eigenbasis_masses(tau, spec)
    outside = np.ones(spec.dim, dtype=bool)
    outside[window.members] = False
    stray = float(masses[outside].sum())
    if stray > 1e-9:
        raise PreconditionError(
            f"tau has weight {stray:.3e} outside the microcanonical window")

    if shares_basis(tau, rho):
        lhs = _diagonal_relative_entropy_bits(tau, spec, td, N)
    else:
        lhs = relative_entropy(tau.matrix, rho.matrix, unit="bits").value

    xi, z = profile.xi, profile.z
    sigma2 = N * td.specific_heat * T * T
    be = delta_bound(ham.locality, xi, z, d, N, sigma2, c_d, temperature=T)
    log_n_2d = math.log(N) ** (2 * d)
    s_tau_bits = von_neumann_entropy(tau) / LN2
    rhs = (-s_tau_bits + math.log2(window.dim)
           + math.log2(math.sqrt(N) / (be.value * log_n_2d))
           + 56.0 * math.sqrt(td.specific_heat) * be.value * log_n_2d / LN2)
    sigma = math.sqrt(sigma2)
    delta0 = 1.5 * math.sqrt(2.0 * math.pi) * be.value * math.e ** 2 * log_n_2d * sigma / N
    pre = _thermal_preconditions(e, delta, td, be, N, d)
    return MicroRelEntReport(
        lhs_bits=lhs,
        rhs_bits=rhs,
        delta0=delta0,
        preconditions=pre,
        holds=lhs <= rhs + CONCLUSION_SLACK,
        extras={"window_dim": window.dim, "entropy_tau_bits": s_tau_bits,
                "be_delta": be.value, "thermal": {"u": td.energy_density,
                                                  "c": td.specific_heat}},
    )


def _eigenbasis_masses(tau: DensityMatrix, spec: SpectralDecomposition) -> np.ndarray:
    if tau.is_mixture:
        basis, w = tau.mixture_parts()
        if basis is spec.eigenvectors and w.shape[0] == spec.dim:
            return w
        overlap = spec.eigenvectors.conj().T @ basis
        return np.clip((np.abs(overlap) ** 2) @ w, 0.0, None)
    v = spec.eigenvectors
    return np.clip(np.einsum("ij,ji->i", v.conj().T @ tau.matrix, v).real, 0.0, None)


def haar_eta(td: ThermalData, N: int) -> float:
    """eta = 18^{1/3} pi exp(-N/3 (s(T) - (2 sqrt(c(T)) + 2)/sqrt(N)))."""
    arg = -(N / 3.0) * (td.entropy_density
                        - (2.0 * math.sqrt(td.specific_heat) + 2.0) / math.sqrt(N))
    try:
        return 18.0 ** (1.0 / 3.0) * math.pi * math.exp(arg)
    except OverflowError:
        return math.inf


def check_window_states(ham: Hamiltonian, T: float, e: float, delta: float,
                        tau_or_seed, part: int, l: int, eps: float,
                        profile: CorrelationProfile, c_d: float = 1.0,
                        spec: SpectralDecomposition | None = None,
                        haar_samples: int = 100) -> EquivalenceReport:
    """Beyond-microcanonical checks.

    Part 1 takes a window-supported state (or None for tau itself) and tests
    the entropy hypothesis plus the 7 sqrt(eps) conclusion.  Part 2 takes a
    seed, samples Haar states from the window span, and reports the empirical
    fraction obeying 7 sqrt(eps) + eta + D^{l^d} eta^{3/2}/sqrt(18 pi^3).
    """
    if part not in (1, 2):
        raise PreconditionError(f"part must be 1 or 2, got {part}")
    lat = ham.lattice
    n, d, D, N = lat.n, lat.d, ham.local_dim, lat.num_sites
    if spec is None:
        spec = diagonalize(ham)
    rho, td = gibbs(spec, T, num_sites=N)
    tau_window, window = microcanonical(spec, e, delta, num_sites=N)
    xi, z = profile.xi, profile.z
    sigma2 = N * td.specific_heat * T * T
    be = delta_bound(ham.locality, xi, z, d, N, sigma2, c_d, temperature=T)

    pre = _thermal_preconditions(e, delta, td, be, N, d)
    size = equivalence_size_condition(td.specific_heat, be.value, n, d, D, l, eps, xi, z)
    scale = (eps * N / (math.log(4.0) ** d * xi ** d)) ** (1.0 / (d + 1))
    pre.append(Precondition("size_condition_halved", size.lhs, 0.5 * scale))

    params = {"n": n, "d": d, "N": N, "local_dim": D, "T": T, "e": e,
              "delta": delta, "l": l, "eps": eps, "xi": xi, "z": z,
              "C_d": c_d, "part": part}

    if part == 1:
        tau = tau_or_seed if tau_or_seed is not None else tau_window
        masses = _eigenbasis_masses(tau, spec)
        outside = np.ones(spec.dim, dtype=bool)
        outside[window.members] = False
        if float(masses[outside].sum()) > 1e-9:
            raise PreconditionError("tau is not supported on the window subspace")
        s_tau_bits = von_neumann_entropy(tau) / LN2
        entropy_floor = math.log2(window.dim) - (eps / 2.0) * scale
        pre.append(Precondition("entropy_floor", entropy_floor, s_tau_bits))
        measured, measured_max, per_cube = local_distance_profile(tau, rho, l, lat, D)
        claimed_bound = 7.0 * math.sqrt(eps)
        return EquivalenceReport(
            params, pre, claimed_bound, measured, measured_max,
            measured <= claimed_bound + CONCLUSION_SLACK,
            extras={"window_dim": window.dim, "entropy_tau_bits": s_tau_bits,
                    "entropy_floor": entropy_floor,
                    "per_cube_distances": per_cube})

    seed = int(tau_or_seed)
    eta = haar_eta(td, N)
    tail = (D ** (l ** d)) * eta ** 1.5 / math.sqrt(18.0 * math.pi ** 3) \
        if math.isfinite(eta) else math.inf
    claimed_bound = 7.0 * math.sqrt(eps) + eta + tail
    prob_bound = 1.0 - 2.0 * math.exp(-1.0 / eta) if eta > 0 else 1.0
    per_sample = []
    for i in range(haar_samples):
        psi = haar_state(window, spec, seed=seed + i)
        m, _, _ = local_distance_profile(psi, rho, l, lat, D)
        per_sample.append(m)
    per_sample = np.array(per_sample)
    fraction_ok = float(np.mean(per_sample <= claimed_bound + CONCLUSION_SLACK))
    reference, _, _ = local_distance_profile(tau_window, rho, l, lat, D)
    mean = float(per_sample.mean())
    stderr = float(per_sample.std(ddof=1) / math.sqrt(haar_samples)) \
        if haar_samples > 1 else 0.0
    return EquivalenceReport(
        params, pre, claimed_bound, mean, float(per_sample.max()),
        mean <= claimed_bound + CONCLUSION_SLACK,
        extras={"window_dim": window.dim, "degenerate_window": window.dim == 1,
                "eta": eta, "probability_bound": prob_bound,
                "fraction_within_bound": fraction_ok,
                "probability_claim_holds": fraction_ok >= prob_bound - CONCLUSION_SLACK,
                "sample_mean": mean, "sample_stderr": stderr,
                "microcanonical_reference": reference,
                "num_samples": haar_samples})
