"""Exact algebra for Pauli-string Hamiltonians.

Strings are words over {I, X, Y, Z}; character 1 acts on qubit 1, which is
the leftmost (most significant) tensor factor of the dense realization.
Everything here is immutable and side-effect free.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import NonHermitianError, ResourceLimitError, StructureError

PAULI_LABELS = "IXYZ"

SINGLE_QUBIT = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# single-qubit products: (a, b) -> (phase, result)
_MUL = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}

DENSE_QUBIT_CAP = 14

MERGE_TOL = 1e-15
HERMITICITY_TOL = 1e-12


@dataclass(frozen=True, order=True)
class PauliString:
    """A word of single-qubit Pauli labels, one per qubit."""

    ops: str

    def __post_init__(self):
        if not self.ops:
            raise StructureError("Pauli string must act on at least one qubit")
        bad = set(self.ops) - set(PAULI_LABELS)
        if bad:
            raise StructureError(f"invalid Pauli labels {sorted(bad)} in {self.ops!r}")

    def __len__(self):
        return len(self.ops)

    def __str__(self):
        return self.ops

    @property
    def locality(self) -> int:
        """Number of non-identity positions."""
        return sum(ch != "I" for ch in self.ops)

    @property
    def support(self) -> tuple[int, ...]:
        """Zero-based positions of the non-identity factors."""
        return tuple(i for i, ch in enumerate(self.ops) if ch != "I")

    @staticmethod
    def identity(n_qubits: int) -> "PauliString":
        return PauliString("I" * n_qubits)

    @staticmethod
    def from_factors(n_qubits: int, factors: Iterable[tuple[int, str]]) -> "PauliString":
        """Build a string from (zero-based position, label) pairs."""
        ops = ["I"] * n_qubits
        for pos, label in factors:
            if not 0 <= pos < n_qubits:
                raise StructureError(f"qubit position {pos} outside register of {n_qubits}")
            if ops[pos] != "I":
                raise StructureError(f"qubit position {pos} assigned twice")
            ops[pos] = label
        return PauliString("".join(ops))


def multiply(a: PauliString, b: PauliString) -> tuple[complex, PauliString]:
    """Product of two Pauli strings as (phase, string), phase in {1, -1, i, -i}."""
    if len(a) != len(b):
        raise StructureError(f"length mismatch: {len(a)} vs {len(b)}")
    phase = 1 + 0j
    out = []
    for ca, cb in zip(a.ops, b.ops):
        ph, res = _MUL[ca, cb]
        phase *= ph
        out.append(res)
    return phase, PauliString("".join(out))


@dataclass(frozen=True)
class PauliTerm:
    """A complex-weighted Pauli string."""

    coeff: complex
    string: PauliString

    def __post_init__(self):
        if not isinstance(self.string, PauliString):
            object.__setattr__(self, "string", PauliString(self.string))
        object.__setattr__(self, "coeff", complex(self.coeff))


@dataclass(frozen=True)
class PauliHamiltonian:
    """Canonical sum of Pauli terms: unique strings, no zero weights.

    Construct through :func:`assemble`, which merges duplicates and can
    enforce real coefficients; the constructor trusts its input.
    """

    n_qubits: int
    terms: tuple[PauliTerm, ...]

    def __iter__(self):
        return iter(self.terms)

    def __len__(self):
        return len(self.terms)

    @property
    def is_empty(self) -> bool:
        return not self.terms

    def coefficient(self, string: PauliString | str) -> complex:
        target = string.ops if isinstance(string, PauliString) else string
        for t in self.terms:
            if t.string.ops == target:
                return t.coeff
        return 0j

    @property
    def strings(self) -> tuple[PauliString, ...]:
        return tuple(t.string for t in self.terms)

    @property
    def max_locality(self) -> int:
        return max((t.string.locality for t in self.terms), default=0)

    def locality_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for t in self.terms:
            k = t.string.locality
            hist[k] = hist.get(k, 0) + 1
        return hist

    def scaled(self, factor: complex) -> "PauliHamiltonian":
        return assemble([PauliTerm(factor * t.coeff, t.string) for t in self.terms],
                        self.n_qubits, require_hermitian=False)

    def __add__(self, other: "PauliHamiltonian") -> "PauliHamiltonian":
        if self.n_qubits != other.n_qubits:
            raise StructureError("cannot add Hamiltonians on different registers")
        return assemble(list(self.terms) + list(other.terms), self.n_qubits,
                        require_hermitian=False)

    def __sub__(self, other: "PauliHamiltonian") -> "PauliHamiltonian":
        return self + other.scaled(-1.0)

    def __matmul__(self, other: "PauliHamiltonian") -> "PauliHamiltonian":
        """Operator product, expanded term by term through the Pauli algebra."""
        if self.n_qubits != other.n_qubits:
            raise StructureError("cannot multiply Hamiltonians on different registers")
        prods = []
        for ta in self.terms:
            for tb in other.terms:
                phase, s = multiply(ta.string, tb.string)
                prods.append(PauliTerm(ta.coeff * tb.coeff * phase, s))
        return assemble(prods, self.n_qubits, require_hermitian=False)


def assemble(terms: Sequence[PauliTerm | tuple], n_qubits: int,
             require_hermitian: bool = True, merge_tol: float = MERGE_TOL) -> PauliHamiltonian:
    """Canonicalize a list of terms into a PauliHamiltonian.

    Duplicate strings are merged by coefficient addition and terms with
    |coeff| < merge_tol are dropped.  With require_hermitian (the default)
    any surviving imaginary weight raises NonHermitianError; intermediates
    from operator products may disable the check and carry complex weight.
    """
    if n_qubits < 1:
        raise StructureError("n_qubits must be positive")
    acc: dict[str, complex] = {}
    for item in terms:
        t = item if isinstance(item, PauliTerm) else PauliTerm(*item)
        if len(t.string) != n_qubits:
            raise StructureError(
                f"term {t.string.ops!r} has length {len(t.string)}, expected {n_qubits}")
        acc[t.string.ops] = acc.get(t.string.ops, 0j) + t.coeff
    out = []
    for ops in sorted(acc):
        c = acc[ops]
        if abs(c) < merge_tol:
            continue
        if require_hermitian:
            scale = max(1.0, abs(c))
            if abs(c.imag) > HERMITICITY_TOL * scale:
                raise NonHermitianError(
                    f"term {ops!r} has imaginary weight {c.imag:g} after merging")
            c = complex(c.real, 0.0)
        out.append(PauliTerm(c, PauliString(ops)))
    return PauliHamiltonian(n_qubits, tuple(out))


@dataclass(frozen=True)
class HermitianOperator:
    """Dense Hermitian matrix of dimension 2**n for some n."""

    dim: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.dim, self.dim):
            raise StructureError(f"matrix shape {m.shape} does not match dim {self.dim}")
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.conj().T).max() > HERMITICITY_TOL * scale:
            raise StructureError("matrix is not Hermitian within tolerance")
        object.__setattr__(self, "matrix", m)


def string_to_matrix(s: PauliString) -> np.ndarray:
    return reduce(np.kron, (SINGLE_QUBIT[ch] for ch in s.ops))


def dense_matrix(h: PauliHamiltonian, qubit_cap: int = DENSE_QUBIT_CAP) -> np.ndarray:
    """Raw dense realization, also valid for non-Hermitian intermediates."""
    if h.n_qubits > qubit_cap:
        raise ResourceLimitError(
            f"{h.n_qubits} qubits exceeds dense realization cap of {qubit_cap}")
    dim = 2 ** h.n_qubits
    m = np.zeros((dim, dim), dtype=complex)
    for t in h.terms:
        m += t.coeff * string_to_matrix(t.string)
    return m


def to_dense(h: PauliHamiltonian, qubit_cap: int = DENSE_QUBIT_CAP) -> HermitianOperator:
    """Dense 2**N realization of a Hamiltonian; qubit 1 is the leftmost factor."""
    return HermitianOperator(2 ** h.n_qubits, dense_matrix(h, qubit_cap))


DEFAULT_GROUPING_TOL = 1e-8


def degeneracy_groups(eigenvalues: np.ndarray,
                      grouping_tol: float = DEFAULT_GROUPING_TOL) -> list[list[int]]:
    """Partition sorted eigenvalue indices by chaining near-equal neighbours.

    Adjacent values belong to one group when their gap is below
    grouping_tol * max(1, |eigenvalue|).
    """
    groups = [[0]]
    for i in range(1, len(eigenvalues)):
        gap = eigenvalues[i] - eigenvalues[i - 1]
        scale = max(1.0, abs(eigenvalues[i]), abs(eigenvalues[i - 1]))
        if gap < grouping_tol * scale:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition of a Hermitian operator, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # column i pairs with eigenvalues[i]
    groups: tuple[tuple[int, ...], ...]

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def group_of(self, index: int) -> tuple[int, ...]:
        for g in self.groups:
            if index in g:
                return g
        raise StructureError(f"index {index} outside spectrum of dim {self.dim}")


def eig(op: HermitianOperator | np.ndarray,
        grouping_tol: float = DEFAULT_GROUPING_TOL) -> Spectrum:
    """Full Hermitian eigendecomposition with degeneracy grouping."""
    if isinstance(op, HermitianOperator):
        m = op.matrix
    else:
        m = np.asarray(op, dtype=complex)
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.conj().T).max() > HERMITICITY_TOL * scale:
            raise StructureError("eig requires a Hermitian matrix")
    vals, vecs = np.linalg.eigh(m)
    groups = tuple(tuple(g) for g in degeneracy_groups(vals, grouping_tol))
    return Spectrum(vals, vecs, groups)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, positive semidefinite matrix with a declared trace."""

    dim: int
    matrix: np.ndarray = field(repr=False)
    label: str = ""
    normalization: float = 1.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.dim, self.dim):
            raise StructureError(f"matrix shape {m.shape} does not match dim {self.dim}")
        if np.abs(m - m.conj().T).max() > 1e-10 * max(1.0, float(np.abs(m).max())):
            raise StructureError("density matrix is not Hermitian")
        evals = np.linalg.eigvalsh(m)
        if evals.min() < -1e-10 * max(1.0, self.normalization):
            raise StructureError(f"density matrix not PSD (min eigenvalue {evals.min():g})")
        if abs(np.trace(m).real - self.normalization) > 1e-10 * max(1.0, self.normalization):
            raise StructureError(
                f"trace {np.trace(m).real:g} does not match declared "
                f"normalization {self.normalization:g}")
        object.__setattr__(self, "matrix", m)


def partial_trace(rho: DensityMatrix | np.ndarray, keep: Sequence[int],
                  dims: Sequence[int]):
    """Trace out all subsystems not listed in `keep` (zero-based positions).

    `dims` lists every subsystem dimension in tensor order; their product
    must equal the density matrix dimension.  Returns the same flavour of
    object it was given.
    """
    wrapped = isinstance(rho, DensityMatrix)
    m = rho.matrix if wrapped else np.asarray(rho, dtype=complex)
    dims = list(dims)
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise StructureError(f"dims {dims} do not match matrix of shape {m.shape}")
    keep = sorted(set(keep))
    if not keep:
        raise StructureError("keep must name at least one subsystem")
    if any(k < 0 or k >= len(dims) for k in keep):
        raise StructureError(f"keep indices {keep} outside subsystem range")
    n = len(dims)
    t = m.reshape(dims + dims)
    # einsum: traced subsystems share an index between bra and ket side
    src = list(range(n)) + [i + n if i in keep else i for i in range(n)]
    dst = keep + [i + n for i in keep]
    red = np.einsum(t, src, dst)
    kept_dim = int(np.prod([dims[i] for i in keep]))
    red = red.reshape(kept_dim, kept_dim)
    if not wrapped:
        return red
    return DensityMatrix(kept_dim, red, label=rho.label,
                         normalization=rho.normalization)


def subspace_projector(spectrum: Spectrum, group: Sequence[int],
                       label: str = "") -> DensityMatrix:
    """Projector onto the eigenspace spanned by one degeneracy group."""
    g = tuple(group)
    if g not in spectrum.groups:
        raise StructureError(f"{g} is not a degeneracy group of this spectrum")
    V = spectrum.eigenvectors[:, list(g)]
    return DensityMatrix(spectrum.dim, V @ V.conj().T, label=label,
                         normalization=float(len(g)))


# ---------------------------------------------------------------------------
# JSON wire format: {"n_qubits": N, "terms": [{"coeff": c, "pauli": "XZ..."}]}

def hamiltonian_to_dict(h: PauliHamiltonian) -> dict:
    return {
        "n_qubits": h.n_qubits,
        "terms": [{"coeff": t.coeff.real, "pauli": t.string.ops} for t in h.terms],
    }


def hamiltonian_from_dict(data: dict) -> PauliHamiltonian:
    try:
        n = int(data["n_qubits"])
        raw = data["terms"]
    except (KeyError, TypeError) as exc:
        raise StructureError(f"Hamiltonian JSON missing field: {exc}") from exc
    terms = []
    for i, entry in enumerate(raw):
        try:
            terms.append(PauliTerm(float(entry["coeff"]), PauliString(entry["pauli"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise StructureError(f"bad term at index {i}: {exc}") from exc
    return assemble(terms, n, require_hermitian=True)


def save_hamiltonian(h: PauliHamiltonian, path) -> None:
    with open(path, "w") as f:
        json.dump(hamiltonian_to_dict(h), f, indent=2, sort_keys=True)
        f.write("\n")


def load_hamiltonian(path) -> PauliHamiltonian:
    with open(path) as f:
        return hamiltonian_from_dict(json.load(f))
