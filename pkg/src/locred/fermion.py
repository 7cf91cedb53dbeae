"""Second-quantized fermionic Hamiltonians and their qubit encoding.

The encoding maps mode j (1-based) to qubit j with a Z string on all
earlier modes, so annihilation becomes Z^(j-1) (X + iY)/2 and creation its
conjugate.  |0> is the unoccupied state.  Operator convention:

    H = sum_ij t[i,j] adag_i a_j  +  (1/2) sum_ijkl u[i,j,k,l] adag_i adag_j a_l a_k

with real t[i,j] = t[j,i] and real u[i,j,k,l] = u[k,l,i,j].
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import StructureError
from .pauli import PauliHamiltonian, PauliString, PauliTerm, assemble

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class SecondQuantizedProblem:
    """Coefficient tables of a fermionic Hamiltonian over n_modes orbitals.

    one_body maps (i, j) to t_ij and two_body maps (i, j, k, l) to u_ijkl,
    all indices 1-based.  Hermiticity of the tables is validated on
    construction.
    """

    n_modes: int
    one_body: dict[tuple[int, int], float] = field(default_factory=dict)
    two_body: dict[tuple[int, int, int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_modes < 1:
            raise StructureError("n_modes must be positive")
        for key in self.one_body:
            self._check_indices(key)
        for key in self.two_body:
            self._check_indices(key)
        for (i, j), t in self.one_body.items():
            partner = self.one_body.get((j, i))
            if partner is None or abs(partner - t) > SYMMETRY_TOL * max(1.0, abs(t)):
                raise StructureError(
                    f"one-body table not Hermitian: t[{i},{j}]={t:g} vs t[{j},{i}]={partner}")
        for (i, j, k, l), u in self.two_body.items():
            partner = self.two_body.get((k, l, i, j))
            if partner is None or abs(partner - u) > SYMMETRY_TOL * max(1.0, abs(u)):
                raise StructureError(
                    f"two-body table not Hermitian: u[{i},{j},{k},{l}]={u:g} "
                    f"vs u[{k},{l},{i},{j}]={partner}")

    def _check_indices(self, key):
        for idx in key:
            if not 1 <= idx <= self.n_modes:
                raise StructureError(f"mode index {idx} outside 1..{self.n_modes}")


def jw_map_operator(kind: str, mode: int, n_modes: int) -> PauliHamiltonian:
    """Single ladder operator as a (non-Hermitian) two-term Pauli sum.

    kind is "annihilation" or "creation"; mode is 1-based.  The result
    carries complex coefficients and is meant as an intermediate for
    operator products.
    """
    if kind not in ("annihilation", "creation"):
        raise StructureError(f"unknown ladder kind {kind!r}")
    if not 1 <= mode <= n_modes:
        raise StructureError(f"mode {mode} outside 1..{n_modes}")
    prefix = "Z" * (mode - 1)
    suffix = "I" * (n_modes - mode)
    x_string = PauliString(prefix + "X" + suffix)
    y_string = PauliString(prefix + "Y" + suffix)
    sign = 1.0 if kind == "annihilation" else -1.0
    return assemble(
        [PauliTerm(0.5, x_string), PauliTerm(0.5j * sign, y_string)],
        n_modes, require_hermitian=False)


def jw_map(problem: SecondQuantizedProblem) -> PauliHamiltonian:
    """Qubit Hamiltonian of a fermionic problem; result is Hermitian."""
    n = problem.n_modes
    lower = {j: jw_map_operator("annihilation", j, n) for j in range(1, n + 1)}
    raise_ = {j: jw_map_operator("creation", j, n) for j in range(1, n + 1)}

    terms: list[PauliTerm] = []
    for (i, j), t in sorted(problem.one_body.items()):
        prod = raise_[i] @ lower[j]
        terms.extend(PauliTerm(t * term.coeff, term.string) for term in prod)
    for (i, j, k, l), u in sorted(problem.two_body.items()):
        prod = raise_[i] @ raise_[j] @ lower[l] @ lower[k]
        terms.extend(PauliTerm(0.5 * u * term.coeff, term.string) for term in prod)
    return assemble(terms, n, require_hermitian=True)


def locality_histogram(h: PauliHamiltonian) -> dict[int, int]:
    """Term count per locality (number of non-identity factors)."""
    return h.locality_histogram()


# ---------------------------------------------------------------------------
# JSON wire format:
# {"n_modes": N,
#  "one_body": [{"i": .., "j": .., "t": ..}],
#  "two_body": [{"i": .., "j": .., "k": .., "l": .., "u": ..}]}

def problem_to_dict(problem: SecondQuantizedProblem) -> dict:
    return {
        "n_modes": problem.n_modes,
        "one_body": [{"i": i, "j": j, "t": t}
                     for (i, j), t in sorted(problem.one_body.items())],
        "two_body": [{"i": i, "j": j, "k": k, "l": l, "u": u}
                     for (i, j, k, l), u in sorted(problem.two_body.items())],
    }


def problem_from_dict(data: dict) -> SecondQuantizedProblem:
    try:
        n = int(data["n_modes"])
    except (KeyError, TypeError, ValueError) as exc:
        raise StructureError(f"problem JSON missing valid n_modes: {exc}") from exc
    one = {}
    for idx, entry in enumerate(data.get("one_body", [])):
        try:
            one[(int(entry["i"]), int(entry["j"]))] = float(entry["t"])
        except (KeyError, TypeError, ValueError) as exc:
            raise StructureError(f"bad one_body entry at index {idx}: {exc}") from exc
    two = {}
    for idx, entry in enumerate(data.get("two_body", [])):
        try:
            key = (int(entry["i"]), int(entry["j"]), int(entry["k"]), int(entry["l"]))
            two[key] = float(entry["u"])
        except (KeyError, TypeError, ValueError) as exc:
            raise StructureError(f"bad two_body entry at index {idx}: {exc}") from exc
    return SecondQuantizedProblem(n, one, two)


def save_problem(problem: SecondQuantizedProblem, path) -> None:
    with open(path, "w") as f:
        json.dump(problem_to_dict(problem), f, indent=2, sort_keys=True)
        f.write("\n")


def load_problem(path) -> SecondQuantizedProblem:
    with open(path) as f:
        return problem_from_dict(json.load(f))
