"""Analytic perturbative gadget for one 3-local term.

For a target a*(P1 x P2 x P3) on three distinct qubits, one ancilla u and
a penalty scale Delta, the gadget Hamiltonian is

    H0 = Delta |1><1|_u
    V  = mu P3 (x) |1><1|_u + (kappa P1 + lambda P2) (x) X_u + V1 + V2
    V1 = (1/Delta)(kappa P1 + lambda P2)^2 - (1/Delta^2)(kappa^2+lambda^2) mu P3
    V2 = -(1/Delta^3)(kappa P1 + lambda P2)^4

with kappa = sgn(a) (|a|/2)^(1/3) Delta^(3/4), lambda = |kappa| and
mu = (|a|/2)^(1/3) Delta^(1/2).  |1><1|_u is realized as (I - Z_u)/2 and
all powers are expanded through the Pauli algebra, so the canonical form
is strictly 2-local.  Its low spectrum approaches the target's as Delta
grows, at the price of coefficients spreading over the Delta range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GapCollapseError, StructureError
from .pauli import (
    PauliHamiltonian,
    PauliString,
    PauliTerm,
    assemble,
    eig,
    to_dense,
)
from .reduction import classify_branches


@dataclass(frozen=True)
class GadgetSpec:
    """Placement of one 3-local term and the gadget penalty scale.

    p1, p2, p3 are (label, qubit) pairs with 1-based qubit indices; the
    ancilla index is 1-based as well.  n_qubits defaults to the largest
    index mentioned.
    """

    target_coeff: float
    p1: tuple[str, int]
    p2: tuple[str, int]
    p3: tuple[str, int]
    ancilla: int
    delta: float
    n_qubits: int | None = None

    def __post_init__(self):
        if self.delta <= 0:
            raise StructureError("delta must be positive")
        if self.target_coeff == 0:
            raise StructureError("gadget is unnecessary for a vanishing target term")
        qubits = [self.p1[1], self.p2[1], self.p3[1]]
        if len(set(qubits)) != 3 or self.ancilla in qubits:
            raise StructureError("p1, p2, p3 and the ancilla must sit on distinct qubits")
        for label, q in (self.p1, self.p2, self.p3):
            if label not in "XYZ":
                raise StructureError(f"factor label {label!r} must be X, Y or Z")
            if q < 1:
                raise StructureError("qubit indices are 1-based")
        if self.ancilla < 1:
            raise StructureError("qubit indices are 1-based")
        n = self.n_qubits or max(qubits + [self.ancilla])
        if n < max(qubits + [self.ancilla]):
            raise StructureError("n_qubits too small for the given indices")
        object.__setattr__(self, "n_qubits", n)

    @property
    def physical_qubits(self) -> int:
        return self.n_qubits - 1

    def target_hamiltonian(self) -> PauliHamiltonian:
        """The bare 3-local term on the physical register (ancilla removed)."""
        phys = sorted(q for q in range(1, self.n_qubits + 1) if q != self.ancilla)
        pos = {q: i for i, q in enumerate(phys)}
        factors = [(pos[q], label) for label, q in (self.p1, self.p2, self.p3)]
        s = PauliString.from_factors(len(phys), factors)
        return assemble([PauliTerm(self.target_coeff, s)], len(phys))


@dataclass(frozen=True)
class GadgetCoefficients:
    kappa: float
    lam: float
    mu: float


def gadget_coefficients(a: float, delta: float) -> GadgetCoefficients:
    """Coupling strengths of the gadget for target weight a and penalty Delta."""
    if delta <= 0:
        raise StructureError("delta must be positive")
    if a == 0:
        raise StructureError("gadget coefficients are undefined for a = 0")
    base = (abs(a) / 2.0) ** (1.0 / 3.0)
    kappa = math.copysign(base * delta ** 0.75, a)
    lam = base * delta ** 0.75
    mu = base * delta ** 0.5
    return GadgetCoefficients(kappa=kappa, lam=lam, mu=mu)


def _one_factor(spec: GadgetSpec, factor: tuple[str, int]) -> PauliHamiltonian:
    label, qubit = factor
    s = PauliString.from_factors(spec.n_qubits, [(qubit - 1, label)])
    return assemble([PauliTerm(1.0, s)], spec.n_qubits)


def build_gadget(spec: GadgetSpec, include_v1: bool = True,
                 include_v2: bool = True) -> PauliHamiltonian:
    """Canonical 2-local Pauli form of the gadget Hamiltonian.

    The compensation terms V1 and V2 can be ablated for error studies.
    """
    n = spec.n_qubits
    c = gadget_coefficients(spec.target_coeff, spec.delta)
    ident = PauliString.identity(n)
    z_u = PauliString.from_factors(n, [(spec.ancilla - 1, "Z")])
    x_u = PauliString.from_factors(n, [(spec.ancilla - 1, "X")])
    proj1 = assemble([PauliTerm(0.5, ident), PauliTerm(-0.5, z_u)], n)
    p1 = _one_factor(spec, spec.p1)
    p2 = _one_factor(spec, spec.p2)
    p3 = _one_factor(spec, spec.p3)
    xu = assemble([PauliTerm(1.0, x_u)], n)

    kl = p1.scaled(c.kappa) + p2.scaled(c.lam)
    h = proj1.scaled(spec.delta)
    h = h + (p3 @ proj1).scaled(c.mu)
    h = h + (kl @ xu)
    if include_v1:
        h = h + (kl @ kl).scaled(1.0 / spec.delta)
        h = h + p3.scaled(-(c.kappa ** 2 + c.lam ** 2) * c.mu / spec.delta ** 2)
    if include_v2:
        kl2 = kl @ kl
        h = h + (kl2 @ kl2).scaled(-1.0 / spec.delta ** 3)
    return assemble(list(h.terms), n, require_hermitian=True)


def pauli_basis_of_gadget(spec: GadgetSpec) -> list[PauliString]:
    """Distinct non-identity strings of the gadget plus 1-local remainders.

    The remainders are the single-factor strings of the construction
    operators (the three target factors and the ancilla couplings) that do
    not already show up alone in the expansion; for a 3-local term on
    distinct qubits the total comes to nine strings, all of locality <= 2,
    in lexicographic order.
    """
    h = build_gadget(spec)
    ident = PauliString.identity(spec.n_qubits).ops
    strings = {t.string.ops for t in h.terms if t.string.ops != ident}
    for label, qubit in (spec.p1, spec.p2, spec.p3):
        strings.add(PauliString.from_factors(spec.n_qubits, [(qubit - 1, label)]).ops)
    strings.add(PauliString.from_factors(spec.n_qubits, [(spec.ancilla - 1, "X")]).ops)
    strings.add(PauliString.from_factors(spec.n_qubits, [(spec.ancilla - 1, "Z")]).ops)
    return [PauliString(s) for s in sorted(strings)]


def embedding_basis(spec: GadgetSpec, n_terms: int = 9) -> list[PauliString]:
    """Identity-led coefficient basis for numerically embedding the target.

    The 10-term variant is the identity plus every gadget-derived string.
    The 9-term variant drops the bare ancilla-X string, the one gadget
    remainder that never appears in the expansion itself; the identity
    offset replaces it, and exact embeddings exist on this set.
    """
    full = pauli_basis_of_gadget(spec)
    if n_terms == 10:
        chosen = full
    elif n_terms == 9:
        bare_x = PauliString.from_factors(spec.n_qubits, [(spec.ancilla - 1, "X")])
        chosen = [s for s in full if s != bare_x]
    else:
        raise StructureError("embedding basis comes in 9- and 10-term variants")
    return [PauliString.identity(spec.n_qubits)] + chosen


@dataclass(frozen=True)
class GadgetErrorReport:
    delta: float
    spectral_error: float
    spread: float
    min_gap: float
    ancilla_ground_overlap: float


def gadget_error(spec: GadgetSpec, i_m: int | None = None,
                 include_v1: bool = True, include_v2: bool = True,
                 grouping_tol: float = 1e-8) -> GadgetErrorReport:
    """Physical-branch spectral error and coefficient spread of the gadget.

    spectral_error sums |eps_i(gadget physical branch) - eps_i(target)|
    over the i_m lowest levels (all 2**n_p by default).  The spread is
    max - min over the canonical non-identity coefficients.  Raises
    GapCollapseError when the branches cannot be separated.
    """
    n_p = spec.physical_qubits
    i_m = 2 ** n_p if i_m is None else i_m
    if not 1 <= i_m <= 2 ** n_p:
        raise StructureError(f"i_m={i_m} outside 1..{2 ** n_p}")
    h = build_gadget(spec, include_v1=include_v1, include_v2=include_v2)
    spectrum = eig(to_dense(h), grouping_tol)
    branches = classify_branches(spectrum, n_p, 1)
    target_vals = np.linalg.eigvalsh(to_dense(spec.target_hamiltonian()).matrix)
    phys = spectrum.eigenvalues[list(branches.physical)]
    spectral = float(np.sum(np.abs(phys[:i_m] - target_vals[:i_m])))
    ident = PauliString.identity(spec.n_qubits).ops
    coeffs = [t.coeff.real for t in h.terms if t.string.ops != ident]
    spread_val = float(max(coeffs) - min(coeffs)) if coeffs else 0.0
    min_gap = float(spectrum.eigenvalues[list(branches.ancilla)[0]] - phys[i_m - 1])
    return GadgetErrorReport(
        delta=spec.delta, spectral_error=spectral, spread=spread_val,
        min_gap=min_gap, ancilla_ground_overlap=branches.ancilla_ground_overlap)


def delta_sweep(spec: GadgetSpec, deltas, i_m: int | None = None) -> list[GadgetErrorReport]:
    """Gadget error reports over a grid of penalty scales.

    A collapsed branch structure at some grid point yields a report row
    with NaN error fields instead of aborting the sweep.
    """
    out = []
    for delta in deltas:
        spec_d = GadgetSpec(
            target_coeff=spec.target_coeff, p1=spec.p1, p2=spec.p2, p3=spec.p3,
            ancilla=spec.ancilla, delta=float(delta), n_qubits=spec.n_qubits)
        try:
            out.append(gadget_error(spec_d, i_m=i_m))
        except GapCollapseError:
            out.append(GadgetErrorReport(
                delta=float(delta), spectral_error=float("nan"),
                spread=float("nan"), min_gap=float("nan"),
                ancilla_ground_overlap=float("nan")))
    return out


def spec_to_dict(spec: GadgetSpec) -> dict:
    return {
        "target_coeff": spec.target_coeff,
        "p1": list(spec.p1), "p2": list(spec.p2), "p3": list(spec.p3),
        "ancilla": spec.ancilla, "delta": spec.delta, "n_qubits": spec.n_qubits,
    }


def spec_from_dict(data: dict) -> GadgetSpec:
    try:
        return GadgetSpec(
            target_coeff=float(data["target_coeff"]),
            p1=(str(data["p1"][0]), int(data["p1"][1])),
            p2=(str(data["p2"][0]), int(data["p2"][1])),
            p3=(str(data["p3"][0]), int(data["p3"][1])),
            ancilla=int(data["ancilla"]),
            delta=float(data["delta"]),
            n_qubits=data.get("n_qubits"),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise StructureError(f"bad gadget spec JSON: {exc}") from exc
