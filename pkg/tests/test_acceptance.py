"""Acceptance suite: one test per shipping criterion, one printed verdict line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the verdict lines.
"""
import itertools
import time

import numpy as np
import pytest

from test_fermion import oracle_matrix

from locred.cli import main as cli_main
from locred.fermion import SecondQuantizedProblem, jw_map, jw_map_operator
from locred.gadgets import GadgetSpec, delta_sweep, embedding_basis
from locred.pauli import (
    SINGLE_QUBIT,
    PauliString,
    PauliTerm,
    assemble,
    dense_matrix,
    eig,
    multiply,
    partial_trace,
    to_dense,
)
from locred.reduction import (
    InitStrategy,
    LadderConfig,
    ReductionProblem,
    density_validation,
    greedy_extend,
    optimize,
    reduce_ladder,
    stability_sweep,
    two_local_pool,
)

SEED = 2718


def verdict(number, passed, detail):
    label = "PASS" if passed else "FAIL"
    print(f"ACCEPTANCE {number}: {label} - {detail}")
    assert passed, f"criterion {number}: {detail}"


def xzx_spec(delta=1000.0):
    return GadgetSpec(1.0, ("X", 1), ("Z", 2), ("X", 3), ancilla=4, delta=delta)


@pytest.fixture(scope="module")
def lro9():
    """Converged nine-coefficient run on the canonical 3-local target."""
    problem = ReductionProblem(
        target=xzx_spec().target_hamiltonian(), n_ancilla=1,
        basis=tuple(embedding_basis(xzx_spec(), 9)))
    start = time.perf_counter()
    report = optimize(problem, InitStrategy(seed=SEED))
    elapsed = time.perf_counter() - start
    return problem, report, elapsed


def test_criterion_1_nine_term_reproduction(lro9):
    problem, report, elapsed = lro9
    ok = (report.cost.total <= 1e-8
          and report.spectral_abs_error <= 1e-6
          and report.dm_spread <= 200.0
          and elapsed <= 300.0)
    verdict(1, ok,
            f"cost D={report.cost.total:.3e} (<=1e-8), "
            f"spectral error={report.spectral_abs_error:.3e} (<=1e-6), "
            f"spread={report.dm_spread:.1f} (<=200), "
            f"runtime={elapsed:.1f}s (<=300s)")


def test_criterion_2_greedy_tenth_term(lro9):
    problem9, report9, _ = lro9
    # structural start: the ten-string family with its tail coupling removed,
    # so the relevance scan has to recover that coupling on merit
    ten = embedding_basis(xzx_spec(), 10)
    probe_basis = tuple(s for s in ten if s.ops != "IIXZ")
    probe = ReductionProblem(target=problem9.target, n_ancilla=1, basis=probe_basis)
    probe_report = optimize(probe, InitStrategy(seed=SEED))
    pool = two_local_pool(4, exclude=probe_basis)
    ext = greedy_extend(probe, pool, 1, base_report=probe_report, seed=SEED)
    round0 = ext.rounds[0]
    selected_ok = round0.selected == "IIXZ" or "IIXZ" in round0.tie_set

    # ten coefficients with the nine-term optimum as warm start
    warm = np.array([report9.d[list(report9.basis).index(s.ops)]
                     if s.ops in report9.basis else 0.0 for s in ten])
    problem10 = ReductionProblem(target=problem9.target, n_ancilla=1,
                                 basis=tuple(ten))
    report10 = optimize(problem10, InitStrategy(extra_points=(warm,), seed=SEED))
    cost_ok = report10.cost.total <= report9.cost.total
    verdict(2, selected_ok and cost_ok,
            f"selected={round0.selected} tie_set={round0.tie_set} "
            f"(needs IIXZ), ten-term cost {report10.cost.total:.3e} <= "
            f"nine-term cost {report9.cost.total:.3e}")


def test_criterion_3_density_matrix_validation(lro9):
    problem, report, _ = lro9
    groups = density_validation(report, problem)
    ground = groups[0]
    size_ok = len(ground.group) == 4 and ground.eigenvalue == pytest.approx(-1.0)
    err_ok = ground.max_entry_error <= 1e-6
    verdict(3, size_ok and err_ok,
            f"ground group size={len(ground.group)} at eigenvalue "
            f"{ground.eigenvalue:+.3f} (needs 4 at -1), max-entry density "
            f"error={ground.max_entry_error:.3e} (<=1e-6)")


def test_criterion_4_gadget_baseline():
    deltas = [10.0 ** k for k in range(2, 9)]
    reports = delta_sweep(xzx_spec(), deltas)
    errors = np.array([r.spectral_error for r in reports])
    spreads = np.array([r.spread for r in reports])
    monotone = bool(np.all(errors[:-1] >= errors[1:]))
    spread_ok = 1e7 <= spreads[-1] <= 1e9
    slope = float(np.polyfit(np.log10(deltas), np.log10(spreads), 1)[0])
    slope_ok = 0.75 <= slope <= 1.0
    verdict(4, monotone and spread_ok and slope_ok,
            f"errors monotone={monotone}, spread@1e8={spreads[-1]:.2e} "
            f"(within 10x of 1e8), spread exponent={slope:.3f} (in [0.75, 1])")


def test_criterion_5_stability(lro9):
    problem, report, _ = lro9
    magnitudes = (1e-6, 1e-4, 1e-2, 1.0, 10.0)
    sweep = stability_sweep(report, problem, magnitudes_percent=magnitudes,
                            samples=32, seed=SEED)
    means = {row.delta_percent: row.mean_density_err for row in sweep.rows}
    at_1pct = means[1.0]
    at_tiny = means[1e-4]
    curve = [means[m] for m in magnitudes]
    in_band = 1e-2 <= at_1pct <= 1.0
    tiny_ok = at_tiny <= 1e-5
    monotone = all(a <= b for a, b in zip(curve, curve[1:]))
    verdict(5, in_band and tiny_ok and monotone,
            f"density err @1%={at_1pct:.3e} (in [1e-2, 1]), "
            f"@1e-4%={at_tiny:.3e} (<=1e-5), curve nondecreasing={monotone}, "
            f"32 samples per point")


def test_criterion_6_property_suites():
    details = []

    # (a) occupation-number oracle for every 1- and 2-body placement, <= 4 modes
    worst = 0.0
    for n in range(1, 5):
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                table = {(i, j): 0.8} if i == j else {(i, j): 0.8, (j, i): 0.8}
                problem = SecondQuantizedProblem(n, table)
                diff = np.abs(dense_matrix(jw_map(problem))
                              - oracle_matrix(problem)).max()
                worst = max(worst, diff)
    n = 4
    rng = np.random.default_rng(SEED)
    for i, j, k, l in itertools.product(range(1, n + 1), repeat=4):
        u = float(rng.normal())
        table = {(i, j, k, l): u}
        table.setdefault((k, l, i, j), u)
        problem = SecondQuantizedProblem(n, two_body=table)
        diff = np.abs(dense_matrix(jw_map(problem)) - oracle_matrix(problem)).max()
        worst = max(worst, diff)
    a_ok = worst < 1e-12
    details.append(f"(a) mapping-vs-oracle max diff {worst:.1e}")

    # (b) ladder-operator anticommutators
    worst = 0.0
    eye = np.eye(2 ** n)
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            ai = dense_matrix(jw_map_operator("annihilation", i, n))
            adj = dense_matrix(jw_map_operator("creation", j, n))
            anti = ai @ adj + adj @ ai
            expected = eye if i == j else 0.0
            worst = max(worst, float(np.abs(anti - expected).max()))
    b_ok = worst < 1e-12
    details.append(f"(b) anticommutator max dev {worst:.1e}")

    # (c) Pauli group laws: exhaustive on one qubit, randomized to five
    c_ok = True
    for x, y in itertools.product("IXYZ", repeat=2):
        phase, prod = multiply(PauliString(x), PauliString(y))
        c_ok &= bool(np.allclose(phase * SINGLE_QUBIT[prod.ops],
                                 SINGLE_QUBIT[x] @ SINGLE_QUBIT[y]))
    rng = np.random.default_rng(SEED + 1)
    for _ in range(300):
        nq = int(rng.integers(1, 6))
        a, b, c = (PauliString("".join(rng.choice(list("IXYZ"), size=nq)))
                   for _ in range(3))
        p_ab, ab = multiply(a, b)
        p1, left = multiply(ab, c)
        p_bc, bc = multiply(b, c)
        p2, right = multiply(a, bc)
        c_ok &= left == right and bool(np.isclose(p_ab * p1, p_bc * p2))
        p3, back = multiply(ab, b)
        c_ok &= back == a and bool(np.isclose(p_ab * p3, 1.0))
    details.append("(c) group laws hold")

    # (d) partial-trace laws on random mixed states
    rng = np.random.default_rng(SEED + 2)
    d_ok = True
    for _ in range(20):
        probs = rng.dirichlet(np.ones(3))
        rho = np.zeros((8, 8), dtype=complex)
        for p in probs:
            psi = rng.normal(size=8) + 1j * rng.normal(size=8)
            psi /= np.linalg.norm(psi)
            rho += p * np.outer(psi, psi.conj())
        red = partial_trace(rho, keep=[0, 2], dims=[2, 2, 2])
        d_ok &= abs(np.trace(red) - 1.0) < 1e-12
        d_ok &= float(np.linalg.eigvalsh(red).min()) > -1e-10
        two_step = partial_trace(
            partial_trace(rho, keep=[0, 1], dims=[2, 2, 2]), keep=[0], dims=[2, 2])
        direct = partial_trace(rho, keep=[0], dims=[2, 2, 2])
        d_ok &= bool(np.abs(two_step - direct).max() < 1e-12)
    details.append("(d) partial-trace laws hold")

    # (e) eigendecomposition reconstruction on suite operators
    e_ok = True
    suite = [
        to_dense(assemble([PauliTerm(1.0, PauliString("XZX"))], 3)).matrix,
        to_dense(assemble([PauliTerm(0.3, PauliString("ZZ")),
                           PauliTerm(-0.7, PauliString("XI"))], 2)).matrix,
    ]
    rng = np.random.default_rng(SEED + 3)
    for _ in range(5):
        raw = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
        suite.append((raw + raw.conj().T) / 2)
    for m in suite:
        spec = eig(m)
        V = spec.eigenvectors
        e_ok &= bool(np.abs(V.conj().T @ V - np.eye(m.shape[0])).max() < 1e-10)
        e_ok &= bool(np.abs((V * spec.eigenvalues) @ V.conj().T - m).max() < 1e-10)
    details.append("(e) eig reconstruction <= 1e-10")

    # (f) one 4-local term through the two-step ladder
    config = LadderConfig(seed=SEED)
    h4 = assemble([PauliTerm(0.8, PauliString("XZXZ"))], 4)
    result = reduce_ladder(h4, config)
    two_local = result.hamiltonian.max_locality <= 2
    two_steps = len(result.steps) == 2
    two_ancillas = result.hamiltonian.n_qubits == 6
    final = np.linalg.eigvalsh(to_dense(result.hamiltonian).matrix)
    target = np.linalg.eigvalsh(to_dense(h4).matrix)
    spect_dev = float(np.abs(final[:16] - target).max())
    f_ok = two_local and two_steps and two_ancillas and spect_dev <= config.final_tol * 10
    details.append(f"(f) ladder: steps={len(result.steps)}, "
                   f"ancillas={result.hamiltonian.n_qubits - 4}, "
                   f"max locality={result.hamiltonian.max_locality}, "
                   f"spectrum dev {spect_dev:.2e} (<= {config.final_tol * 10:.0e})")

    ok = a_ok and b_ok and c_ok and d_ok and e_ok and f_ok
    verdict(6, ok, "; ".join(details))


def test_criterion_7_determinism(tmp_path):
    args = ["lro", "--target", "XZX", "--seed", "41", "--output"]
    r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
    assert cli_main(args + [str(r1)]) == 0
    assert cli_main(args + [str(r2)]) == 0
    lro_ok = r1.read_bytes() == r2.read_bytes()

    s1, s2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
    stab = ["stability", "--report", str(r1), "--samples", "32",
            "--seed", "42", "--output"]
    assert cli_main(stab + [str(s1)]) == 0
    assert cli_main(stab + [str(s2)]) == 0
    stab_ok = s1.read_bytes() == s2.read_bytes()
    verdict(7, lro_ok and stab_ok,
            f"lro payload identical={lro_ok}, stability payload identical={stab_ok}")
