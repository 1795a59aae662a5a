"""k-local Hamiltonians as dense Hermitian matrices, and their full eigensystems.

Built-in families (transverse-field Ising, Heisenberg, seeded random k-local)
rescale couplings so every local term has operator norm <= 1; explicit term
lists are validated instead.  Dense storage only: every downstream quantity
(microcanonical windows, spectral CDFs, max-relative entropies) needs the full
spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LocalityViolation, NormViolation, NumericalError, PreconditionError
from .lattice import LatticeSpec, Region

HERMITICITY_TOL = 1e-12
NORM_TOL = 1e-9

# Upper limit for dense diagonalization (matrix side D^N).
MAX_DENSE_DIM = 16384

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]])


@dataclass(frozen=True)
class LocalTerm:
    """One bounded Hermitian term acting on a small region of sites."""

    support: Region
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix)
        dim = m.shape[0]
        if m.shape != (dim, dim):
            raise PreconditionError(f"term matrix must be square, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL:
            raise PreconditionError("term matrix is not Hermitian to 1e-12")
        object.__setattr__(self, "matrix", m)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


@dataclass(frozen=True)
class ModelSpec:
    """JSON-facing description of a model; see `from_dict` for the schema."""

    family: str
    n: int
    d: int
    local_dim: int = 2
    k: int = 1
    params: dict = field(default_factory=dict)
    seed: int = 0

    FAMILIES = ("tfim", "heisenberg", "random_klocal", "explicit")

    def __post_init__(self):
        if self.family not in self.FAMILIES:
            raise PreconditionError(f"unknown model family {self.family!r}; expected one of {self.FAMILIES}")
        if self.local_dim < 2:
            raise PreconditionError("local_dim must be >= 2")
        if self.k < 0:
            raise PreconditionError("locality k must be >= 0")
        if self.family in ("tfim", "heisenberg"):
            if self.local_dim != 2:
                raise PreconditionError(f"{self.family} is a qubit model (local_dim 2)")
            if self.k < 1:
                raise PreconditionError(f"{self.family} has two-site bonds; needs k >= 1")

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelSpec":
        known = {"family", "n", "d", "local_dim", "k", "params", "seed"}
        extra = set(obj) - known
        if extra:
            raise PreconditionError(f"unknown model keys: {sorted(extra)}")
        try:
            return cls(
                family=obj["family"],
                n=int(obj["n"]),
                d=int(obj.get("d", 1)),
                local_dim=int(obj.get("local_dim", 2)),
                k=int(obj.get("k", 1)),
                params=dict(obj.get("params", {})),
                seed=int(obj.get("seed", 0)),
            )
        except KeyError as exc:
            raise PreconditionError(f"model spec missing field {exc.args[0]!r}") from exc

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "n": self.n,
            "d": self.d,
            "local_dim": self.local_dim,
            "k": self.k,
            "params": dict(self.params),
            "seed": self.seed,
        }


@dataclass
class Hamiltonian:
    lattice: LatticeSpec
    local_dim: int
    locality: int
    terms: list[LocalTerm]
    dense: np.ndarray

    @property
    def dim(self) -> int:
        return self.dense.shape[0]


@dataclass
class SpectralDecomposition:
    """Ascending eigenvalues and the matching orthonormal eigenvector columns."""

    energies: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.energies.shape[0]


def embed_term(term: LocalTerm, lat: LatticeSpec, local_dim: int) -> np.ndarray:
    """Tensor the term with identities on the complement, in canonical site order."""
    support_idx = list(term.support.indices)
    num_sites = lat.num_sites
    ds = local_dim ** len(support_idx)
    if term.matrix.shape[0] != ds:
        raise PreconditionError(
            f"term matrix dim {term.matrix.shape[0]} != local_dim^|support| = {ds}")
    rest = [i for i in range(num_sites) if i not in support_idx]
    big = np.kron(term.matrix, np.eye(local_dim ** len(rest), dtype=term.matrix.dtype))
    # Axis a of the tensor view currently hosts site (support + rest)[a];
    # permute so axis a hosts site a.
    order = support_idx + rest
    perm = np.argsort(order)
    t = big.reshape([local_dim] * (2 * num_sites))
    t = t.transpose(list(perm) + [num_sites + p for p in perm])
    full_dim = local_dim ** num_sites
    return np.ascontiguousarray(t).reshape(full_dim, full_dim)


def _validate_terms(terms: list[LocalTerm], k: int) -> None:
    for t in terms:
        if t.norm > 1.0 + NORM_TOL:
            raise NormViolation(f"term on {t.support.sites} has norm {t.norm:.6g} > 1")
        if t.support.diameter() > k:
            raise LocalityViolation(
                f"term support {t.support.sites} has diameter {t.support.diameter()} > k={k}")


def _rescale_to_unit_norm(terms: list[LocalTerm]) -> list[LocalTerm]:
    """Divide all couplings by the largest term norm when it exceeds 1."""
    scale = max((t.norm for t in terms), default=0.0)
    if scale <= 1.0:
        return terms
    return [LocalTerm(t.support, t.matrix / scale) for t in terms]


def _bonds(lat: LatticeSpec):
    """Nearest-neighbor pairs of the open box, each once, in canonical order."""
    for site in lat.sites():
        for axis in range(lat.d):
            nb = list(site)
            nb[axis] += 1
            nb = tuple(nb)
            if lat.contains(nb):
                yield site, nb


def _tfim_terms(lat: LatticeSpec, params: dict) -> list[LocalTerm]:
    J = float(params.get("J", 1.0))
    h = float(params.get("h", 1.0))
    terms = []
    for a, b in _bonds(lat):
        terms.append(LocalTerm(Region(lat, (a, b)), -J * np.kron(SIGMA_Z, SIGMA_Z)))
    for site in lat.sites():
        terms.append(LocalTerm(Region(lat, (site,)), -h * SIGMA_X))
    return terms


def _heisenberg_terms(lat: LatticeSpec, params: dict) -> list[LocalTerm]:
    J = float(params.get("J", 1.0))
    h = float(params.get("h", 0.0))
    bond = np.kron(SIGMA_X, SIGMA_X) + np.kron(SIGMA_Y, SIGMA_Y) + np.kron(SIGMA_Z, SIGMA_Z)
    bond = bond.real  # imaginary parts cancel in sigma_y x sigma_y
    terms = []
    for a, b in _bonds(lat):
        terms.append(LocalTerm(Region(lat, (a, b)), J * bond))
    if h != 0.0:
        for site in lat.sites():
            terms.append(LocalTerm(Region(lat, (site,)), -h * SIGMA_Z))
    return terms


def _random_hermitian(rng: np.random.Generator, dim: int, target_norm: float) -> np.ndarray:
    x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    herm = (x + x.conj().T) / 2.0
    return herm * (target_norm / np.linalg.norm(herm, 2))


def _random_klocal_terms(lat: LatticeSpec, D: int, k: int, seed: int) -> list[LocalTerm]:
    """One field term per site plus, for k >= 1, one segment term of diameter <= k."""
    rng = np.random.default_rng(seed)
    terms = []
    for site in lat.sites():
        terms.append(LocalTerm(Region(lat, (site,)),
                               _random_hermitian(rng, D, rng.uniform(0.5, 1.0))))
        if k >= 1:
            axis = int(rng.integers(lat.d))
            run = [site]
            for step in range(1, k + 1):
                nxt = list(site)
                nxt[axis] += step
                nxt = tuple(nxt)
                if lat.contains(nxt):
                    run.append(nxt)
            if len(run) > 1:
                dim = D ** len(run)
                terms.append(LocalTerm(Region(lat, tuple(run)),
                                       _random_hermitian(rng, dim, rng.uniform(0.5, 1.0))))
    return terms


def _explicit_terms(lat: LatticeSpec, params: dict) -> list[LocalTerm]:
    raw = params.get("terms")
    if not raw:
        raise PreconditionError("explicit model needs params.terms (nonempty list)")
    terms = []
    for entry in raw:
        sites = tuple(tuple(int(x) for x in s) for s in entry["sites"])
        terms.append(LocalTerm(Region(lat, sites), _parse_matrix(entry["matrix"])))
    return terms


def _parse_matrix(rows) -> np.ndarray:
    """Nested lists; entries are numbers or [re, im] pairs."""
    def scalar(v):
        if isinstance(v, (list, tuple)):
            return complex(v[0], v[1])
        return complex(v)

    m = np.array([[scalar(v) for v in row] for row in rows])
    if np.max(np.abs(m.imag)) == 0.0:
        m = m.real
    return m


def build_model(spec: ModelSpec) -> Hamiltonian:
    """Construct the dense Hamiltonian for a model spec.

    Built-in families are rescaled so each term norm is <= 1; explicit terms
    that violate the norm or locality bound raise NormViolation /
    LocalityViolation.
    """
    lat = LatticeSpec(spec.n, spec.d)
    if spec.local_dim ** lat.num_sites > MAX_DENSE_DIM:
        raise PreconditionError(
            f"dense construction capped at dimension {MAX_DENSE_DIM}; "
            f"{spec.local_dim}^{lat.num_sites} exceeds it")
    if spec.family == "tfim":
        terms = _rescale_to_unit_norm(_tfim_terms(lat, spec.params))
    elif spec.family == "heisenberg":
        terms = _rescale_to_unit_norm(_heisenberg_terms(lat, spec.params))
    elif spec.family == "random_klocal":
        terms = _random_klocal_terms(lat, spec.local_dim, spec.k, spec.seed)
    else:
        terms = _explicit_terms(lat, spec.params)
    _validate_terms(terms, spec.k)

    full_dim = spec.local_dim ** lat.num_sites
    complex_any = any(np.iscomplexobj(t.matrix) and np.max(np.abs(t.matrix.imag)) > 0
                      for t in terms)
    dense = np.zeros((full_dim, full_dim), dtype=complex if complex_any else float)
    for t in terms:
        emb = embed_term(t, lat, spec.local_dim)
        dense += emb if complex_any else emb.real
    return Hamiltonian(lat, spec.local_dim, spec.k, terms, dense)


def diagonalize(h: Hamiltonian) -> SpectralDecomposition:
    """Full eigensystem of the dense Hamiltonian (ascending eigenvalues).

    Verifies the reconstruction on random probe vectors; tests do the
    exhaustive Frobenius check for D^N <= 4096.
    """
    if h.dim > MAX_DENSE_DIM:
        raise PreconditionError(
            f"dense diagonalization capped at dimension {MAX_DENSE_DIM}, got {h.dim}")
    try:
        energies, vecs = np.linalg.eigh(h.dense)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed on dim {h.dim}: {exc}") from exc
    spec = SpectralDecomposition(energies, vecs)
    _probe_check(h.dense, spec)
    return spec


def _probe_check(dense: np.ndarray, spec: SpectralDecomposition, probes: int = 3) -> None:
    rng = np.random.default_rng(12345)
    scale = max(1.0, float(np.max(np.abs(spec.energies))))
    for _ in range(probes):
        x = rng.standard_normal(spec.dim)
        y1 = dense @ x
        y2 = spec.eigenvectors @ (spec.energies * (spec.eigenvectors.conj().T @ x))
        if np.linalg.norm(y1 - y2) > 1e-8 * scale * np.linalg.norm(x):
            raise NumericalError("eigendecomposition failed the probe reconstruction check")


def sigma_z_chain_energies(num_sites: int) -> tuple[np.ndarray, np.ndarray]:
    """Distinct energies and degeneracy weights of H = sum_i sigma_z^(i).

    Closed form (binomial degeneracies); usable far beyond the dense limit.
    """
    j = np.arange(num_sites + 1)
    energies = (num_sites - 2 * j).astype(float)
    from math import comb

    weights = np.array([comb(num_sites, int(jj)) for jj in j], dtype=float)
    order = np.argsort(energies)
    return energies[order], weights[order]
