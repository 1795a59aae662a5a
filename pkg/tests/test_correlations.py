import math

import numpy as np
import pytest

from conftest import random_density
from ensemblekit.correlations import correlation, fit_profile
from ensemblekit.errors import PreconditionError
from ensemblekit.lattice import LatticeSpec
from ensemblekit.operators import SIGMA_X, SIGMA_Y, SIGMA_Z, ModelSpec, build_model, diagonalize
from ensemblekit.states import DensityMatrix, gibbs

PAULIS = [SIGMA_X, SIGMA_Y, SIGMA_Z]


def pauli_correlation_oracle(delta):
    """For two qubits, cor over Hermitian unit-norm observables equals
    sigma_max of the 3x3 Pauli correlation matrix of Delta (identity
    components drop out because Delta has vanishing marginals)."""
    m = np.zeros((3, 3))
    for i, pi in enumerate(PAULIS):
        for j, pj in enumerate(PAULIS):
            m[i, j] = np.trace(np.kron(pi, pj) @ delta).real
    return float(np.linalg.svd(m, compute_uv=False)[0])


def bloch_grid_oracle(delta, steps=60):
    """Coarse direct maximization over Bloch-sphere observable pairs."""
    best = 0.0
    thetas = np.linspace(0, math.pi, steps)
    phis = np.linspace(0, 2 * math.pi, 2 * steps, endpoint=False)
    dirs = []
    for t in thetas:
        for p in phis:
            dirs.append((math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t)))
    dirs = np.array(dirs)
    m = np.zeros((3, 3))
    for i, pi in enumerate(PAULIS):
        for j, pj in enumerate(PAULIS):
            m[i, j] = np.trace(np.kron(pi, pj) @ delta).real
    vals = np.abs(dirs @ m @ dirs.T)
    return float(vals.max())


def two_qubit_state(matrix):
    lat = LatticeSpec(2, 1)
    return DensityMatrix.from_matrix(matrix, lat.region([(1,), (2,)]), check=False), lat


class TestCorrelation:
    def test_product_state_is_zero(self, rng):
        a, b = random_density(rng, 2), random_density(rng, 2)
        rho, lat = two_qubit_state(np.kron(a, b))
        est = correlation(rho, lat.region([(1,)]), lat.region([(2,)]))
        assert est.lower == pytest.approx(0.0, abs=1e-10)
        assert est.upper == pytest.approx(0.0, abs=1e-10)

    def test_bell_pair_against_grid_oracle(self):
        bell = np.zeros((4, 4))
        bell[0, 0] = bell[0, 3] = bell[3, 0] = bell[3, 3] = 0.5
        rho, lat = two_qubit_state(bell)
        x, y = lat.region([(1,)]), lat.region([(2,)])
        est = correlation(rho, x, y)
        delta = bell - np.kron(np.eye(2) / 2, np.eye(2) / 2)
        oracle = bloch_grid_oracle(delta)
        assert est.lower == pytest.approx(oracle, abs=1e-3)
        assert est.lower == pytest.approx(1.0, abs=1e-9)

    def test_ascent_matches_pauli_oracle_on_random_states(self, rng):
        lat = LatticeSpec(2, 1)
        x, y = lat.region([(1,)]), lat.region([(2,)])
        for i in range(25):
            m = random_density(rng, 4)
            rho = DensityMatrix.from_matrix(m, lat.region([(1,), (2,)]), check=False)
            est = correlation(rho, x, y, seed=i)
            rx = np.einsum("ikjk->ij", m.reshape(2, 2, 2, 2))
            ry = np.einsum("kikj->ij", m.reshape(2, 2, 2, 2))
            oracle = pauli_correlation_oracle(m - np.kron(rx, ry))
            assert est.lower == pytest.approx(oracle, abs=1e-8)
            assert est.lower <= est.upper + 1e-12
            # the relaxation really is an upper bound on the true maximum
            assert est.upper >= oracle - 1e-9

    def test_witnesses_achieve_lower(self, rng):
        lat = LatticeSpec(2, 1)
        m = random_density(rng, 4)
        rho = DensityMatrix.from_matrix(m, lat.region([(1,), (2,)]), check=False)
        est = correlation(rho, lat.region([(1,)]), lat.region([(2,)]))
        rx = np.einsum("ikjk->ij", m.reshape(2, 2, 2, 2))
        ry = np.einsum("kikj->ij", m.reshape(2, 2, 2, 2))
        delta = m - np.kron(rx, ry)
        achieved = abs(np.trace(np.kron(est.witness_p, est.witness_q) @ delta).real)
        assert achieved == pytest.approx(est.lower, abs=1e-9)
        assert np.linalg.norm(est.witness_p, 2) <= 1 + 1e-9
        assert np.linalg.norm(est.witness_q, 2) <= 1 + 1e-9

    def test_lower_bounded_by_trace_norm(self, rng):
        lat = LatticeSpec(2, 1)
        for i in range(10):
            m = random_density(rng, 4)
            rho = DensityMatrix.from_matrix(m, lat.region([(1,), (2,)]), check=False)
            est = correlation(rho, lat.region([(1,)]), lat.region([(2,)]), seed=i)
            rx = np.einsum("ikjk->ij", m.reshape(2, 2, 2, 2))
            ry = np.einsum("kikj->ij", m.reshape(2, 2, 2, 2))
            tn = np.abs(np.linalg.eigvalsh(m - np.kron(rx, ry))).sum()
            assert est.lower <= tn + 1e-12
            assert est.upper <= tn + 1e-12  # upper is clamped by the trace norm

    def test_zero_distance_rejected(self, rng):
        lat = LatticeSpec(2, 1)
        rho = DensityMatrix.from_matrix(random_density(rng, 4),
                                        lat.region([(1,), (2,)]), check=False)
        with pytest.raises(PreconditionError):
            correlation(rho, lat.region([(1,)]), lat.region([(1,), (2,)]))

    def test_tfim_gibbs_upper_decreasing_with_distance(self):
        sd = diagonalize(build_model(ModelSpec("tfim", n=8, d=1)))
        lat = LatticeSpec(8, 1)
        region = lat.region([(i,) for i in range(1, 9)])
        rho, _ = gibbs(sd, 5.0, region=region)
        uppers = []
        for dist in (1, 2, 3, 4):
            est = correlation(rho, lat.region([(1,)]), lat.region([(1 + dist,)]))
            uppers.append(est.upper)
        assert all(a >= b - 1e-12 for a, b in zip(uppers, uppers[1:]))


class TestFitProfile:
    def test_pure_exponential(self):
        samples = [(d, math.exp(-d / 2.0)) for d in (1, 2, 3, 4)]
        prof = fit_profile(samples, num_sites=8)
        assert prof.xi == pytest.approx(2.0, rel=1e-9)
        assert prof.z == 0.0
        assert prof.envelope_ok

    def test_with_polynomial_prefactor(self):
        n = 8
        samples = [(d, n * math.exp(-d)) for d in (1, 2, 3)]
        prof = fit_profile(samples, n)
        assert prof.z == pytest.approx(1.0)
        assert prof.xi == pytest.approx(1.0, rel=1e-9)
        assert prof.envelope_ok

    def test_certificate_dominates_noisy_samples(self, rng):
        n = 10
        samples = [(d, math.exp(-d / 1.5) * rng.uniform(0.5, 1.5)) for d in range(1, 8)]
        prof = fit_profile(samples, n)
        assert prof.envelope_ok
        for d, v in samples:
            assert v <= prof.envelope(d, n) + 1e-9

    def test_all_zero_samples(self):
        prof = fit_profile([(1, 0.0), (2, 0.0)], 8)
        assert prof.envelope_ok
        assert prof.xi > 0

    def test_zero_samples_dropped(self):
        samples = [(1, 0.5), (2, 0.25), (3, 0.0)]
        prof = fit_profile(samples, 8)
        assert prof.envelope_ok

    def test_too_few_distances(self):
        with pytest.raises(PreconditionError):
            fit_profile([(1, 0.5), (1, 0.4)], 8)

    def test_tfim_profile_envelope(self):
        sd = diagonalize(build_model(ModelSpec("tfim", n=8, d=1)))
        lat = LatticeSpec(8, 1)
        region = lat.region([(i,) for i in range(1, 9)])
        rho, _ = gibbs(sd, 5.0, region=region)
        samples = []
        for dist in (1, 2, 3, 4, 5):
            est = correlation(rho, lat.region([(1,)]), lat.region([(1 + dist,)]))
            samples.append((dist, est.upper))
        prof = fit_profile(samples, 8)
        assert prof.envelope_ok
        for d, v in samples:
            assert v <= prof.envelope(d, 8) + 1e-9
