"""Numerical reduction of k-local Hamiltonians to low-locality form.

The central object is a :class:`ReductionProblem`: a target Hamiltonian on
n_p qubits, a register enlarged by ancilla qubits, and an ordered basis of
candidate Pauli strings whose coefficients are optimized so that the
enlarged Hamiltonian reproduces the target's low spectrum and reduced
density matrices while keeping a protective gap to the ancilla branch.

The cost is

    D = a1*C1 + a2*C2 + a3*C3

with C1 the squared mismatch of the tracked eigenvalues, C2 the summed
Frobenius distance between target degeneracy-group projectors and the
ancilla-traced projectors of the matching enlarged states, and C3 a gap
criterion (hinge or literal, see :class:`ReductionProblem`).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares, minimize

from .errors import GapCollapseError, StructureError, UnconvergedError
from .pauli import (
    DEFAULT_GROUPING_TOL,
    PauliHamiltonian,
    PauliString,
    PauliTerm,
    Spectrum,
    assemble,
    degeneracy_groups,
    hamiltonian_from_dict,
    hamiltonian_to_dict,
    string_to_matrix,
    to_dense,
)

GAP_MODES = ("hinge", "literal")

INFINITE_COST = float("inf")


# ---------------------------------------------------------------------------
# branch classification

@dataclass(frozen=True)
class BranchClassification:
    """Split of an enlarged-space spectrum into physical and ancilla branches."""

    physical: tuple[int, ...]
    ancilla: tuple[int, ...]
    ancilla_ground_overlap: float


def classify_branches(spectrum: Spectrum, n_p: int, n_a: int) -> BranchClassification:
    """Assign the 2**n_p lowest eigenstates to the physical branch.

    The diagnostic overlap is the mean weight of the physical-branch
    eigenvectors' ancilla marginals on the ancilla ground state |0...0>.
    Raises GapCollapseError when a degeneracy group straddles the cut, or
    when the low branch carries no majority weight on the ancilla ground
    state (no penalty separates the branches at all).
    """
    dim_p = 2 ** n_p
    if spectrum.dim != dim_p * 2 ** n_a:
        raise StructureError(
            f"spectrum dim {spectrum.dim} does not match {n_p}+{n_a} qubits")
    if n_a == 0:
        return BranchClassification(tuple(range(dim_p)), (), 1.0)
    for g in spectrum.groups:
        if g[0] < dim_p <= g[-1]:
            raise GapCollapseError(
                f"degeneracy group {g} spans the physical/ancilla cut at {dim_p}")
    dim_a = 2 ** n_a
    overlaps = []
    for i in range(dim_p):
        vec = spectrum.eigenvectors[:, i].reshape(dim_p, dim_a)
        # ancilla marginal diagonal entry for |0...0>
        overlaps.append(float(np.sum(np.abs(vec[:, 0]) ** 2)))
    mean_overlap = float(np.mean(overlaps))
    if mean_overlap <= 0.5:
        raise GapCollapseError(
            f"low branch holds only {mean_overlap:.3f} ancilla-ground weight; "
            "branches are not separated")
    return BranchClassification(
        tuple(range(dim_p)), tuple(range(dim_p, spectrum.dim)), mean_overlap)


# ---------------------------------------------------------------------------
# problem and cost

@dataclass(frozen=True)
class ReductionProblem:
    """Target Hamiltonian plus the enlarged-space coefficient ansatz.

    gap_mode "hinge" penalizes a protective gap smaller than gap_target
    quadratically and is silent beyond it; "literal" scores the absolute
    distance between the ancilla-branch bottom and the tracked physical
    top, which rewards closing the gap and is kept for comparison only.
    gap_target defaults to twice the target's spectral width.
    """

    target: PauliHamiltonian
    n_ancilla: int
    basis: tuple[PauliString, ...]
    i_m: int | None = None
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    gap_mode: str = "hinge"
    gap_target: float | None = None
    grouping_tol: float = DEFAULT_GROUPING_TOL
    max_basis_locality: int = 2

    def __post_init__(self):
        if self.n_ancilla < 0:
            raise StructureError("n_ancilla must be nonnegative")
        basis = tuple(s if isinstance(s, PauliString) else PauliString(s)
                      for s in self.basis)
        object.__setattr__(self, "basis", basis)
        if not basis:
            raise StructureError("basis must not be empty")
        n_total = self.target.n_qubits + self.n_ancilla
        seen = set()
        for s in basis:
            if len(s) != n_total:
                raise StructureError(
                    f"basis string {s.ops!r} has length {len(s)}, expected {n_total}")
            if s.locality > self.max_basis_locality:
                raise StructureError(
                    f"basis string {s.ops!r} exceeds locality {self.max_basis_locality}")
            if s.ops in seen:
                raise StructureError(f"duplicate basis string {s.ops!r}")
            seen.add(s.ops)
        dim_p = 2 ** self.target.n_qubits
        i_m = dim_p if self.i_m is None else int(self.i_m)
        if not 1 <= i_m <= dim_p:
            raise StructureError(f"i_m={i_m} outside 1..{dim_p}")
        object.__setattr__(self, "i_m", i_m)
        if self.gap_mode not in GAP_MODES:
            raise StructureError(f"gap_mode must be one of {GAP_MODES}")
        if any(w < 0 for w in self.weights) or len(self.weights) != 3:
            raise StructureError("weights must be three nonnegative numbers")
        if self.gap_target is not None and self.gap_target <= 0:
            raise StructureError("gap_target must be positive")

    @property
    def n_physical(self) -> int:
        return self.target.n_qubits

    @property
    def n_total(self) -> int:
        return self.target.n_qubits + self.n_ancilla

    def extended(self, extra: PauliString) -> "ReductionProblem":
        return replace(self, basis=self.basis + (extra,))


@dataclass(frozen=True)
class CostBreakdown:
    """Cost value and its three components at one coefficient vector."""

    total: float
    c1: float
    c2: float
    c3: float
    gap: float
    straddled: bool = False

    def __post_init__(self):
        if not self.straddled:
            a_total = self.c1 + self.c2 + self.c3  # only sanity, weights applied upstream
            if not math.isfinite(a_total):
                raise StructureError("non-finite cost components")


class CostEvaluator:
    """Precomputed dense machinery behind cost evaluations for one problem."""

    def __init__(self, problem: ReductionProblem):
        self.problem = problem
        self.n_p = problem.n_physical
        self.n_a = problem.n_ancilla
        self.dim_p = 2 ** self.n_p
        self.dim_a = 2 ** self.n_a
        self.i_m = problem.i_m
        tmat = to_dense(problem.target).matrix
        tvals, tvecs = np.linalg.eigh(tmat)
        self.target_vals = tvals
        groups = degeneracy_groups(tvals, problem.grouping_tol)
        tracked = []
        for g in groups:
            clipped = [i for i in g if i < self.i_m]
            if clipped:
                tracked.append(tuple(clipped))
        self.tracked_groups = tuple(tracked)
        self.target_projectors = []
        for g in self.tracked_groups:
            V = tvecs[:, list(g)]
            self.target_projectors.append(V @ V.conj().T)
        self.stack = np.stack([string_to_matrix(s) for s in problem.basis])
        width = float(tvals[-1] - tvals[0])
        if problem.gap_target is not None:
            self.gap_target = problem.gap_target
        else:
            self.gap_target = 2.0 * max(width, 1e-12)
        self.weights = tuple(float(w) for w in problem.weights)
        self.n_evals = 0

    # -- core ------------------------------------------------------------
    def hamiltonian_matrix(self, d: np.ndarray) -> np.ndarray:
        return np.tensordot(np.asarray(d, dtype=float), self.stack, axes=1)

    def diagonalize(self, d):
        return np.linalg.eigh(self.hamiltonian_matrix(d))

    def _straddled(self, evals) -> bool:
        if self.n_a == 0:
            return False
        lo, hi = evals[self.dim_p - 1], evals[self.dim_p]
        return (hi - lo) < self.problem.grouping_tol * max(1.0, abs(hi), abs(lo))

    def reduced_group_projector(self, evecs, positions) -> np.ndarray:
        V = evecs[:, list(positions)]
        ng = V @ V.conj().T
        ng = ng.reshape(self.dim_p, self.dim_a, self.dim_p, self.dim_a)
        return np.trace(ng, axis1=1, axis2=3)

    def breakdown(self, d) -> CostBreakdown:
        self.n_evals += 1
        evals, evecs = self.diagonalize(d)
        if self._straddled(evals):
            # eigenvalues remain well defined, the projector split does not
            diffs = self.target_vals[:self.i_m] - evals[:self.i_m]
            return CostBreakdown(INFINITE_COST, float(np.sum(diffs ** 2)),
                                 INFINITE_COST, INFINITE_COST, 0.0, straddled=True)
        a1, a2, a3 = self.weights
        diffs = self.target_vals[:self.i_m] - evals[:self.i_m]
        c1 = float(np.sum(diffs ** 2))
        c2 = 0.0
        for g, proj in zip(self.tracked_groups, self.target_projectors):
            red = self.reduced_group_projector(evecs, g)
            c2 += float(np.linalg.norm(proj - red))
        if self.n_a == 0:
            gap = INFINITE_COST
            c3 = 0.0
        else:
            gap = float(evals[self.dim_p] - evals[self.i_m - 1])
            if self.problem.gap_mode == "literal":
                c3 = abs(gap)
            else:
                c3 = max(0.0, self.gap_target - gap) ** 2
        total = a1 * c1 + a2 * c2 + a3 * c3
        return CostBreakdown(total, c1, c2, c3, gap)

    def cost(self, d) -> float:
        return self.breakdown(d).total

    # -- least-squares residual view --------------------------------------
    def residuals(self, d) -> np.ndarray:
        """Residual vector whose squared sum shares the cost's zero set.

        C2 enters through projector-difference entries (their squared sum
        is the squared Frobenius norm), the gap through the hinge value
        itself, so the residuals suit Gauss-Newton style polishing.
        """
        self.n_evals += 1
        evals, evecs = self.diagonalize(d)
        if self._straddled(evals):
            return np.full(self._n_residuals(), 1e6)
        a1, a2, a3 = self.weights
        parts = [np.sqrt(a1) * (self.target_vals[:self.i_m] - evals[:self.i_m])]
        for g, proj in zip(self.tracked_groups, self.target_projectors):
            red = self.reduced_group_projector(evecs, g)
            parts.append(np.sqrt(a2) * (proj - red).view(float).ravel())
        if self.n_a == 0:
            hinge = 0.0
        else:
            gap = float(evals[self.dim_p] - evals[self.i_m - 1])
            if self.problem.gap_mode == "literal":
                hinge = math.sqrt(abs(gap))
            else:
                hinge = max(0.0, self.gap_target - gap)
        parts.append(np.array([np.sqrt(a3) * hinge]))
        return np.concatenate(parts)

    def _n_residuals(self) -> int:
        return self.i_m + sum(2 * self.dim_p ** 2 for _ in self.tracked_groups) + 1


@lru_cache(maxsize=64)
def evaluator_for(problem: ReductionProblem) -> CostEvaluator:
    return CostEvaluator(problem)


def cost(d: Sequence[float], problem: ReductionProblem) -> CostBreakdown:
    """Cost breakdown of one coefficient vector for a reduction problem."""
    d = np.asarray(d, dtype=float)
    if d.shape != (len(problem.basis),):
        raise StructureError(
            f"coefficient vector of length {d.size}, expected {len(problem.basis)}")
    return evaluator_for(problem).breakdown(d)


def spread(d: Sequence[float]) -> float:
    """Largest pairwise difference max_ij |d_i - d_j| of a coefficient vector."""
    arr = np.asarray(d, dtype=float)
    if arr.size < 1:
        raise StructureError("spread needs at least one coefficient")
    return float(arr.max() - arr.min())


# ---------------------------------------------------------------------------
# structure-aware initialization

def _resolve_basis_index(problem: ReductionProblem) -> dict[str, int]:
    return {s.ops: k for k, s in enumerate(problem.basis)}


def sector_seed_coefficients(alpha: float, scale: float) -> dict[str, float]:
    """Closed-form embedding of a product term alpha*(A x B x Cbar).

    Writing the enlarged Hamiltonian as

        d_I + d_C*Cbar + z*Z_u + w*(A + B)*X_u + d_AB*A*B + d_CZ*Cbar*Z_u

    every term commutes with A, B and Cbar, so the matrix is block
    diagonal over their joint eigenvalues (a, b, c); each block is a 2x2
    ancilla problem with eigenvalues f +- sqrt(G_ab + (z + d_CZ*c)^2),
    G_ab = w^2 (a+b)^2.  Matching the lower branch to alpha*a*b*c fixes
    d_CZ through a scalar equation (bisection below) and the remaining
    coefficients through channel averages of the block widths.  Keys of
    the result: "I", "C", "Z", "W" (both X couplings), "AB", "CZ".
    """
    mag = abs(alpha)
    w = 10.0 * scale
    z = 8.0 * scale

    def phi(g, dcz):
        return math.sqrt(g + (z + dcz) ** 2) - math.sqrt(g + (z - dcz) ** 2)

    lo, hi = 0.0, z
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if phi(0.0, mid) - phi(4 * w * w, mid) < 4 * mag:
            lo = mid
        else:
            hi = mid
    dcz = 0.5 * (lo + hi)
    s = {(ab, c): math.sqrt((4 * w * w if ab > 0 else 0.0) + (z + dcz * c) ** 2)
         for ab in (1, -1) for c in (1, -1)}
    d_i = 0.25 * (s[1, 1] + s[1, -1] + s[-1, 1] + s[-1, -1])
    d_c = 0.25 * ((s[1, 1] - s[1, -1]) + (s[-1, 1] - s[-1, -1]))
    d_ab = 0.25 * ((s[1, 1] + s[1, -1]) - (s[-1, 1] + s[-1, -1]))
    if alpha < 0:
        dcz, d_c = -dcz, -d_c
    return {"I": d_i, "C": d_c, "Z": z, "W": w, "AB": d_ab, "CZ": dcz}


def _sector_seeds(problem: ReductionProblem) -> list[np.ndarray]:
    """Exact-embedding starting points for single product-term targets.

    Applicable when the target is one Pauli term of locality >= 3 and the
    basis contains the six strings of the closed-form family for some
    ancilla qubit.  Returns a couple of scale variants (empty list when
    the structure does not apply).
    """
    target = problem.target
    if len(target.terms) != 1 or problem.n_ancilla < 1:
        return []
    term = target.terms[0]
    sup = term.string.support
    if len(sup) < 3:
        return []
    alpha = term.coeff.real
    n_total = problem.n_total
    index = _resolve_basis_index(problem)
    a_fac = (sup[0], term.string.ops[sup[0]])
    b_fac = (sup[1], term.string.ops[sup[1]])
    tail = [(q, term.string.ops[q]) for q in sup[2:]]

    def full(factors):
        return PauliString.from_factors(n_total, factors).ops

    seeds = []
    for anc in range(problem.n_physical, n_total):
        needed = {
            "I": PauliString.identity(n_total).ops,
            "C": full(tail),
            "Z": full([(anc, "Z")]),
            "AX": full([a_fac, (anc, "X")]),
            "BX": full([b_fac, (anc, "X")]),
            "AB": full([a_fac, b_fac]),
            "CZ": full(tail + [(anc, "Z")]),
        }
        if any(ops not in index for ops in needed.values()):
            continue
        ev = evaluator_for(problem)
        base_scale = max(1.0, abs(alpha), ev.gap_target / 4.0)
        for scale in (base_scale, 2.5 * base_scale):
            c = sector_seed_coefficients(alpha, scale)
            d = np.zeros(len(problem.basis))
            d[index[needed["I"]]] = c["I"]
            d[index[needed["C"]]] = c["C"]
            d[index[needed["Z"]]] = c["Z"]
            d[index[needed["AX"]]] = c["W"]
            d[index[needed["BX"]]] = c["W"]
            d[index[needed["AB"]]] = c["AB"]
            d[index[needed["CZ"]]] = c["CZ"]
            seeds.append(d)
        break
    return seeds


@dataclass(frozen=True)
class InitStrategy:
    """Multi-start recipe: uniform levels, seeded jitter, structural seeds.

    levels follow the uniform-coefficient initialization ladder; each level
    additionally spawns jitters_per_level randomized variants (relative
    amplitude jitter_scale, deterministic in seed).  include_seeds adds
    closed-form embedding points where the problem structure supports
    them; extra_points are arbitrary user-supplied warm starts.
    """

    levels: tuple[float, ...] = (1.0, 10.0, 100.0, 1000.0, 10000.0)
    jitters_per_level: int = 2
    jitter_scale: float = 0.5
    include_seeds: bool = True
    extra_points: tuple = ()
    seed: int = 0


@dataclass(frozen=True)
class ReductionReport:
    """Outcome of one coefficient optimization."""

    d: tuple[float, ...]
    basis: tuple[str, ...]
    cost: CostBreakdown
    spectral_abs_error: float
    dm_spread: float
    density_errors: tuple[dict, ...]
    branch_gap: float
    converged: bool
    provenance: dict


def _start_points(problem: ReductionProblem, init: InitStrategy) -> list[tuple[str, np.ndarray]]:
    n = len(problem.basis)
    rng = np.random.default_rng(init.seed)
    starts: list[tuple[str, np.ndarray]] = []
    for lev in init.levels:
        starts.append((f"level:{lev:g}", np.full(n, float(lev))))
        for j in range(init.jitters_per_level):
            noise = rng.uniform(-init.jitter_scale, init.jitter_scale, n)
            starts.append((f"level:{lev:g}/jitter{j}", lev * (1.0 + noise)))
    for k, point in enumerate(init.extra_points):
        arr = np.asarray(point, dtype=float)
        if arr.shape != (n,):
            raise StructureError(f"extra start point {k} has length {arr.size}, need {n}")
        starts.append((f"extra:{k}", arr))
    if init.include_seeds:
        for k, seed_point in enumerate(_sector_seeds(problem)):
            starts.append((f"seed:{k}", seed_point))
    return starts


def _ls_descent(ev: CostEvaluator, x0: np.ndarray, max_nfev: int) -> np.ndarray:
    try:
        res = least_squares(ev.residuals, x0, method="trf", xtol=1e-15,
                            ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
        return res.x
    except Exception:
        return x0


def _nm_descent(ev: CostEvaluator, x0: np.ndarray, maxfev: int) -> np.ndarray:
    res = minimize(ev.cost, x0, method="Nelder-Mead",
                   options=dict(maxfev=maxfev, xatol=1e-11, fatol=1e-15,
                                adaptive=True))
    return res.x


def optimize(problem: ReductionProblem, init: InitStrategy | None = None,
             budget: int = 200_000, tol: float = 1e-8,
             nm_fallback: bool = True) -> ReductionReport:
    """Minimize the reduction cost over the basis coefficients.

    Runs a hybrid local search (Gauss-Newton descent on the residual view,
    with simplex fallback) from every multi-start point, polishes the best
    candidate, and assembles the report.  budget caps cost evaluations per
    start; nm_fallback=False skips the simplex stage, which batch scoring
    uses to keep candidate evaluation cheap.  Deterministic for fixed
    arguments.
    """
    if budget <= 0:
        raise StructureError("budget must be positive")
    init = init or InitStrategy()
    ev = evaluator_for(problem)
    evals_before = ev.n_evals
    starts = _start_points(problem, init)
    if not starts:
        raise StructureError("initialization produced no start points")

    per_start_records = []
    best_label, best_f, best_x = None, INFINITE_COST, None
    for label, x0 in starts:
        x = _ls_descent(ev, x0, max_nfev=min(400, budget))
        f = ev.cost(x)
        f0 = ev.cost(x0)
        if f0 < f:  # a descent in the residual view may not descend in D
            f, x = f0, x0
        per_start_records.append({"start": label, "cost": f})
        if f < best_f:
            best_label, best_f, best_x = label, f, x

    # simplex fallback for landscapes the residual descent cannot leave
    if nm_fallback and best_f > tol and best_x is not None:
        ranked = sorted(range(len(starts)), key=lambda i: per_start_records[i]["cost"])
        for i in ranked[:3]:
            x = _nm_descent(ev, starts[i][1], maxfev=min(20_000, budget))
            x = _ls_descent(ev, x, max_nfev=min(400, budget))
            f = ev.cost(x)
            per_start_records[i]["cost_after_fallback"] = f
            if f < best_f:
                best_label, best_f, best_x = starts[i][0] + "+nm", f, x

    # deep polish of the winner
    x = _ls_descent(ev, best_x, max_nfev=min(1_000, budget))
    f = ev.cost(x)
    if f < best_f:
        best_f, best_x = f, x

    return _build_report(problem, ev, best_x, tol, {
        "method": "hybrid-ls-nm",
        "init": {
            "levels": list(init.levels),
            "jitters_per_level": init.jitters_per_level,
            "jitter_scale": init.jitter_scale,
            "include_seeds": init.include_seeds,
            "n_extra_points": len(init.extra_points),
            "seed": init.seed,
        },
        "budget": budget,
        "tol": tol,
        "starts": per_start_records,
        "chosen_start": best_label,
        "cost_evaluations": ev.n_evals - evals_before,
    })


def _build_report(problem, ev, d, tol, provenance) -> ReductionReport:
    bd = ev.breakdown(d)
    if bd.straddled:
        return ReductionReport(
            d=tuple(float(v) for v in d),
            basis=tuple(s.ops for s in problem.basis),
            cost=bd, spectral_abs_error=INFINITE_COST, dm_spread=spread(d),
            density_errors=(), branch_gap=0.0, converged=False,
            provenance=provenance)
    evals, evecs = ev.diagonalize(d)
    spectral = float(np.sum(np.abs(ev.target_vals[:ev.i_m] - evals[:ev.i_m])))
    density = []
    for g, proj in zip(ev.tracked_groups, ev.target_projectors):
        red = ev.reduced_group_projector(evecs, g)
        diff = proj - red
        density.append({
            "group": list(g),
            "eigenvalue": float(np.mean(ev.target_vals[list(g)])),
            "frobenius": float(np.linalg.norm(diff)),
            "max_entry": float(np.abs(diff).max()),
            "trace_norm": float(np.abs(np.linalg.eigvalsh(diff)).sum()),
        })
    return ReductionReport(
        d=tuple(float(v) for v in d),
        basis=tuple(s.ops for s in problem.basis),
        cost=bd,
        spectral_abs_error=spectral,
        dm_spread=spread(d),
        density_errors=tuple(density),
        branch_gap=bd.gap,
        converged=bool(bd.total <= tol),
        provenance=provenance,
    )


def report_from_coefficients(problem: ReductionProblem, d: Sequence[float],
                             tol: float = 1e-8) -> ReductionReport:
    """Report for an externally supplied coefficient vector (no search)."""
    ev = evaluator_for(problem)
    return _build_report(problem, ev, np.asarray(d, dtype=float), tol,
                         {"method": "direct", "starts": []})


# ---------------------------------------------------------------------------
# greedy basis extension

TIE_RATIO = 10.0
TIE_ABSOLUTE = 1e-12


@dataclass(frozen=True)
class SelectionRound:
    selected: str
    scores: dict
    tie_set: tuple[str, ...]


@dataclass(frozen=True)
class GreedyExtension:
    problem: ReductionProblem
    report: ReductionReport
    rounds: tuple[SelectionRound, ...]


def two_local_pool(n_qubits: int, exclude: Sequence[PauliString] = ()) -> list[PauliString]:
    """Every 1- and 2-local Pauli string on a register, minus exclusions."""
    out = []
    skip = {s.ops if isinstance(s, PauliString) else s for s in exclude}
    for q in range(n_qubits):
        for p in "XYZ":
            s = PauliString.from_factors(n_qubits, [(q, p)])
            if s.ops not in skip:
                out.append(s)
    for qa in range(n_qubits):
        for qb in range(qa + 1, n_qubits):
            for pa in "XYZ":
                for pb in "XYZ":
                    s = PauliString.from_factors(n_qubits, [(qa, pa), (qb, pb)])
                    if s.ops not in skip:
                        out.append(s)
    return sorted(out)


def greedy_extend(problem: ReductionProblem, pool: Sequence[PauliString],
                  count: int, *, base_report: ReductionReport | None = None,
                  candidate_budget: int = 4_000, tol: float = 1e-8,
                  seed: int = 0) -> GreedyExtension:
    """Append `count` pool strings, each chosen by its achieved cost.

    Every candidate is scored by optimizing the extended problem under a
    reduced budget, warm started at the incumbent optimum (zero weight on
    the new string), so the cost can only improve round over round.
    Ties, meaning scores within one order of magnitude of the best (or
    within an absolute 1e-12), resolve to the lexicographically smallest
    string.
    """
    pool = [s if isinstance(s, PauliString) else PauliString(s) for s in pool]
    basis_ops = {s.ops for s in problem.basis}
    clash = [s.ops for s in pool if s.ops in basis_ops]
    if clash:
        raise StructureError(f"pool overlaps basis: {clash}")
    if count < 0:
        raise StructureError("count must be nonnegative")
    if count > 0 and not pool:
        raise StructureError("empty candidate pool")

    if base_report is None:
        base_report = optimize(problem, InitStrategy(seed=seed), tol=tol)
    rounds = []
    remaining = sorted(pool)
    for _ in range(count):
        scores = {}
        best_cand, best = None, (INFINITE_COST, None, None)
        warm = np.asarray(base_report.d, dtype=float)
        for cand in remaining:
            extended = problem.extended(cand)
            init = InitStrategy(levels=(1.0, 100.0), jitters_per_level=1,
                                extra_points=(np.concatenate([warm, [0.0]]),),
                                seed=seed)
            rep = optimize(extended, init, budget=candidate_budget, tol=tol,
                           nm_fallback=False)
            scores[cand.ops] = rep.cost.total
            if rep.cost.total < best[0]:
                best = (rep.cost.total, extended, rep)
                best_cand = cand
        floor = best[0]
        tie = tuple(sorted(ops for ops, v in scores.items()
                           if v <= max(floor * TIE_RATIO, floor + TIE_ABSOLUTE)))
        selected = min(tie)  # lexicographic among tied candidates
        if selected != best_cand.ops:
            extended = problem.extended(PauliString(selected))
            init = InitStrategy(levels=(1.0, 100.0), jitters_per_level=1,
                                extra_points=(np.concatenate([warm, [0.0]]),),
                                seed=seed)
            rep = optimize(extended, init, budget=candidate_budget, tol=tol,
                           nm_fallback=False)
        else:
            extended, rep = best[1], best[2]
        rounds.append(SelectionRound(selected=selected, scores=scores, tie_set=tie))
        problem, base_report = extended, rep
        remaining = [s for s in remaining if s.ops != selected]
    return GreedyExtension(problem=problem, report=base_report, rounds=tuple(rounds))


# ---------------------------------------------------------------------------
# density-matrix validation

@dataclass(frozen=True)
class GroupDensityReport:
    group: tuple[int, ...]
    eigenvalue: float
    target_projector: np.ndarray
    reduced: np.ndarray
    enlarged: np.ndarray
    frobenius_error: float
    max_entry_error: float
    trace_norm_error: float


def density_validation(report_or_d, problem: ReductionProblem,
                       require_converged: bool = True) -> tuple[GroupDensityReport, ...]:
    """Per-group comparison of reduced projectors against the target.

    Accepts a ReductionReport (which must be converged unless
    require_converged is False) or a raw coefficient vector.
    """
    if isinstance(report_or_d, ReductionReport):
        if require_converged and not report_or_d.converged:
            raise UnconvergedError("density validation requires a converged report",
                                   report_or_d)
        d = np.asarray(report_or_d.d, dtype=float)
    else:
        d = np.asarray(report_or_d, dtype=float)
    ev = evaluator_for(problem)
    evals, evecs = ev.diagonalize(d)
    if ev._straddled(evals):
        raise GapCollapseError("cannot validate densities across a collapsed gap")
    out = []
    for g, proj in zip(ev.tracked_groups, ev.target_projectors):
        V = evecs[:, list(g)]
        enlarged = V @ V.conj().T
        red = ev.reduced_group_projector(evecs, g)
        diff = proj - red
        out.append(GroupDensityReport(
            group=tuple(g),
            eigenvalue=float(np.mean(ev.target_vals[list(g)])),
            target_projector=proj,
            reduced=red,
            enlarged=enlarged,
            frobenius_error=float(np.linalg.norm(diff)),
            max_entry_error=float(np.abs(diff).max()),
            trace_norm_error=float(np.abs(np.linalg.eigvalsh(diff)).sum()),
        ))
    return tuple(out)


# ---------------------------------------------------------------------------
# stability of a converged solution under coefficient noise

@dataclass(frozen=True)
class StabilityRow:
    delta_percent: float
    mean_density_err: float
    max_density_err: float
    mean_spectral_err: float
    max_spectral_err: float


@dataclass(frozen=True)
class StabilityReport:
    rows: tuple[StabilityRow, ...]
    samples: int
    seed: int


def stability_sweep(report: ReductionReport, problem: ReductionProblem,
                    magnitudes_percent: Sequence[float] = (1e-6, 1e-4, 1e-2, 1.0, 10.0),
                    samples: int = 32, seed: int = 0) -> StabilityReport:
    """Error response to uniform relative noise on the coefficients.

    Each coefficient is scaled by (1 + eta) with eta drawn uniformly from
    [-delta, +delta].  The density error of a sample is the summed
    trace-norm distortion of the tracked enlarged-space group projectors
    relative to the converged solution, anchored by the converged
    solution's own reduced-density trace-norm error against the target,
    so the row at delta = 0 reproduces the unperturbed errors.  The
    spectral error is the tracked absolute eigenvalue mismatch against
    the target.
    """
    if not report.converged:
        raise UnconvergedError("stability sweep requires a converged report", report)
    if samples < 1:
        raise StructureError("samples must be positive")
    ev = evaluator_for(problem)
    d0 = np.asarray(report.d, dtype=float)
    _, evecs0 = ev.diagonalize(d0)
    refs = [_full_projector(evecs0, g) for g in ev.tracked_groups]
    anchor = 0.0
    for g, proj in zip(ev.tracked_groups, ev.target_projectors):
        red = ev.reduced_group_projector(evecs0, g)
        anchor += float(np.abs(np.linalg.eigvalsh(proj - red)).sum())

    rng = np.random.default_rng(seed)
    rows = []
    for pct in magnitudes_percent:
        delta = float(pct) / 100.0
        dens, spect = [], []
        for _ in range(samples):
            eta = rng.uniform(-delta, delta, d0.size)
            dp = d0 * (1.0 + eta)
            evals, evecs = ev.diagonalize(dp)
            derr = anchor
            for g, ref in zip(ev.tracked_groups, refs):
                diff = _full_projector(evecs, g) - ref
                derr += float(np.abs(np.linalg.eigvalsh(diff)).sum())
            dens.append(derr)
            spect.append(float(np.sum(np.abs(
                ev.target_vals[:ev.i_m] - evals[:ev.i_m]))))
        rows.append(StabilityRow(
            delta_percent=float(pct),
            mean_density_err=float(np.mean(dens)),
            max_density_err=float(np.max(dens)),
            mean_spectral_err=float(np.mean(spect)),
            max_spectral_err=float(np.max(spect)),
        ))
    return StabilityReport(rows=tuple(rows), samples=samples, seed=seed)


def _full_projector(evecs: np.ndarray, positions) -> np.ndarray:
    V = evecs[:, list(positions)]
    return V @ V.conj().T


# ---------------------------------------------------------------------------
# iterative locality ladder

@dataclass(frozen=True)
class LadderConfig:
    step_tol: float = 1e-8
    final_tol: float = 1e-8
    budget: int = 200_000
    seed: int = 0
    refine: bool = True
    locality_cap: int = 6
    include_ancilla_x: bool = True
    grouping_tol: float = DEFAULT_GROUPING_TOL


@dataclass(frozen=True)
class LadderStep:
    term: str
    coefficient: float
    support: tuple[int, ...]
    ancilla: int
    report: ReductionReport


@dataclass(frozen=True)
class LadderResult:
    hamiltonian: PauliHamiltonian
    steps: tuple[LadderStep, ...]
    refinement: ReductionReport | None


def _step_problem(term: PauliTerm, grouping_tol: float,
                  include_x: bool) -> tuple[ReductionProblem, tuple[int, ...]]:
    """Reduction problem for one k-local term on its own support + 1 ancilla.

    The sub-register holds the term's support (in order) plus one fresh
    ancilla at the last position.  The two leading factors couple to the
    ancilla through X, the remaining tail factor block through Z, which
    reproduces the analytic gadget family when the term is 3-local.
    """
    sup = term.string.support
    k = len(sup)
    n_sub = k + 1
    anc = k
    labels = [term.string.ops[q] for q in sup]
    a_fac = (0, labels[0])
    b_fac = (1, labels[1])
    tail = [(i, labels[i]) for i in range(2, k)]

    def fac(pairs):
        return PauliString.from_factors(n_sub, pairs)

    basis = [
        PauliString.identity(n_sub),
        fac([a_fac]),
        fac([b_fac]),
        fac(tail),
        fac([(anc, "Z")]),
        fac([a_fac, (anc, "X")]),
        fac([b_fac, (anc, "X")]),
        fac([a_fac, b_fac]),
        fac(tail + [(anc, "Z")]),
    ]
    if include_x:
        basis.append(fac([(anc, "X")]))
    target_string = PauliString.from_factors(k, [(i, labels[i]) for i in range(k)])
    target = assemble([PauliTerm(term.coeff, target_string)], k, require_hermitian=True)
    problem = ReductionProblem(
        target=target, n_ancilla=1, basis=tuple(basis),
        grouping_tol=grouping_tol, max_basis_locality=max(2, k - 1))
    return problem, sup


def _embed_string(sub: PauliString, positions: Sequence[int], n_total: int) -> PauliString:
    pairs = [(positions[i], ch) for i, ch in enumerate(sub.ops) if ch != "I"]
    if not pairs:
        return PauliString.identity(n_total)
    return PauliString.from_factors(n_total, pairs)


def reduce_ladder(h: PauliHamiltonian, config: LadderConfig | None = None) -> LadderResult:
    """Iteratively rewrite a Hamiltonian to 2-local form, one locality unit
    per step, one fresh ancilla per reduced term.

    After the ladder finishes, a global refinement re-optimizes every
    surviving coefficient directly against the original Hamiltonian (all
    2**n of its eigenvalues tracked), which removes the cross-talk the
    per-term substitutions introduce.  Raises UnconvergedError (carrying
    partial provenance) when a step or the refinement misses tolerance.
    """
    config = config or LadderConfig()
    if h.max_locality > config.locality_cap:
        raise StructureError(
            f"max locality {h.max_locality} exceeds ladder cap {config.locality_cap}")
    if h.max_locality <= 2:
        return LadderResult(hamiltonian=h, steps=(), refinement=None)

    original = h
    n_orig = h.n_qubits
    current = h
    steps: list[LadderStep] = []
    while current.max_locality > 2:
        k = current.max_locality
        term = min((t for t in current.terms if t.string.locality == k),
                   key=lambda t: t.string.ops)
        n_total = current.n_qubits + 1
        sub_problem, support = _step_problem(
            term, config.grouping_tol, config.include_ancilla_x)
        report = optimize(sub_problem, InitStrategy(seed=config.seed),
                          budget=config.budget, tol=config.step_tol)
        steps.append(LadderStep(
            term=term.string.ops, coefficient=term.coeff.real,
            support=tuple(support), ancilla=n_total - 1, report=report))
        if not report.converged:
            raise UnconvergedError(
                f"ladder step for term {term.string.ops} stalled at "
                f"cost {report.cost.total:g}",
                LadderResult(current, tuple(steps), None))
        positions = list(support) + [n_total - 1]
        new_terms = [PauliTerm(t.coeff, PauliString(t.string.ops + "I"))
                     for t in current.terms if t is not term]
        for ops, coeff in zip(report.basis, report.d):
            embedded = _embed_string(PauliString(ops), positions, n_total)
            new_terms.append(PauliTerm(coeff, embedded))
        current = assemble(new_terms, n_total, require_hermitian=True)

    refinement = None
    if config.refine:
        basis = list(current.strings)
        ident = PauliString.identity(current.n_qubits)
        if ident not in basis:
            basis.insert(0, ident)
        warm = np.array([current.coefficient(s).real for s in basis])
        problem = ReductionProblem(
            target=original, n_ancilla=current.n_qubits - n_orig,
            basis=tuple(basis), i_m=2 ** n_orig)
        refinement = optimize(
            problem,
            InitStrategy(extra_points=(warm,), seed=config.seed),
            budget=config.budget, tol=config.final_tol)
        if not refinement.converged:
            raise UnconvergedError(
                f"ladder refinement stalled at cost {refinement.cost.total:g}",
                LadderResult(current, tuple(steps), refinement))
        current = assemble(
            [PauliTerm(c, PauliString(ops))
             for c, ops in zip(refinement.d, refinement.basis)],
            current.n_qubits, require_hermitian=True)
    return LadderResult(hamiltonian=current, steps=tuple(steps), refinement=refinement)


# ---------------------------------------------------------------------------
# JSON wire formats

def problem_to_dict(problem: ReductionProblem) -> dict:
    return {
        "target": hamiltonian_to_dict(problem.target),
        "n_ancilla": problem.n_ancilla,
        "basis": [s.ops for s in problem.basis],
        "i_m": problem.i_m,
        "weights": list(problem.weights),
        "gap_mode": problem.gap_mode,
        "gap_target": problem.gap_target,
        "grouping_tol": problem.grouping_tol,
        "max_basis_locality": problem.max_basis_locality,
    }


def problem_from_dict(data: dict) -> ReductionProblem:
    try:
        return ReductionProblem(
            target=hamiltonian_from_dict(data["target"]),
            n_ancilla=int(data["n_ancilla"]),
            basis=tuple(PauliString(s) for s in data["basis"]),
            i_m=data.get("i_m"),
            weights=tuple(float(w) for w in data.get("weights", (1.0, 1.0, 1.0))),
            gap_mode=data.get("gap_mode", "hinge"),
            gap_target=data.get("gap_target"),
            grouping_tol=float(data.get("grouping_tol", DEFAULT_GROUPING_TOL)),
            max_basis_locality=int(data.get("max_basis_locality", 2)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise StructureError(f"bad reduction problem JSON: {exc}") from exc


def report_to_dict(report: ReductionReport, problem: ReductionProblem | None = None) -> dict:
    data = {
        "d": list(report.d),
        "basis": list(report.basis),
        "cost": {
            "total": report.cost.total, "c1": report.cost.c1,
            "c2": report.cost.c2, "c3": report.cost.c3,
            "gap": report.cost.gap, "straddled": report.cost.straddled,
        },
        "spectral_abs_error": report.spectral_abs_error,
        "dm_spread": report.dm_spread,
        "density_errors": [dict(e) for e in report.density_errors],
        "branch_gap": report.branch_gap,
        "converged": report.converged,
        "provenance": report.provenance,
    }
    if problem is not None:
        data["problem"] = problem_to_dict(problem)
    return data


def report_from_dict(data: dict) -> tuple[ReductionReport, ReductionProblem | None]:
    try:
        cost_d = data["cost"]
        report = ReductionReport(
            d=tuple(float(v) for v in data["d"]),
            basis=tuple(data["basis"]),
            cost=CostBreakdown(
                total=float(cost_d["total"]), c1=float(cost_d["c1"]),
                c2=float(cost_d["c2"]), c3=float(cost_d["c3"]),
                gap=float(cost_d["gap"]), straddled=bool(cost_d["straddled"])),
            spectral_abs_error=float(data["spectral_abs_error"]),
            dm_spread=float(data["dm_spread"]),
            density_errors=tuple(data["density_errors"]),
            branch_gap=float(data["branch_gap"]),
            converged=bool(data["converged"]),
            provenance=data.get("provenance", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise StructureError(f"bad reduction report JSON: {exc}") from exc
    problem = problem_from_dict(data["problem"]) if "problem" in data else None
    return report, problem


def save_report(report: ReductionReport, problem: ReductionProblem, path) -> None:
    with open(path, "w") as f:
        json.dump(report_to_dict(report, problem), f, indent=2, sort_keys=True)
        f.write("\n")


def load_report(path) -> tuple[ReductionReport, ReductionProblem | None]:
    with open(path) as f:
        return report_from_dict(json.load(f))
