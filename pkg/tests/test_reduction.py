import numpy as np
import pytest

from locred.errors import GapCollapseError, StructureError, UnconvergedError
from locred.gadgets import GadgetSpec, embedding_basis
from locred.pauli import PauliHamiltonian, PauliString, PauliTerm, assemble, eig, to_dense
from locred.reduction import (
    InitStrategy,
    LadderConfig,
    ReductionProblem,
    classify_branches,
    cost,
    density_validation,
    greedy_extend,
    optimize,
    problem_from_dict,
    problem_to_dict,
    reduce_ladder,
    report_from_dict,
    report_to_dict,
    sector_seed_coefficients,
    spread,
    stability_sweep,
)


def ham(pairs, n):
    return assemble([PauliTerm(c, PauliString(s)) for c, s in pairs], n)


def canonical_problem(coeff=1.0, n_terms=9, **kwargs):
    spec = GadgetSpec(coeff, ("X", 1), ("Z", 2), ("X", 3), ancilla=4, delta=1000.0)
    return ReductionProblem(
        target=spec.target_hamiltonian(), n_ancilla=1,
        basis=tuple(embedding_basis(spec, n_terms)), **kwargs)


@pytest.fixture(scope="module")
def converged_nine():
    problem = canonical_problem()
    report = optimize(problem, InitStrategy(seed=3))
    assert report.converged
    return problem, report


class TestClassifyBranches:
    def test_penalty_embedding(self):
        h = ham([(1.0, "ZI"), (2.5, "II"), (-2.5, "IZ")], 2)
        spectrum = eig(to_dense(h))
        split = classify_branches(spectrum, 1, 1)
        assert split.physical == (0, 1)
        assert split.ancilla == (2, 3)
        assert np.allclose(spectrum.eigenvalues[list(split.physical)], [-1.0, 1.0])
        assert np.allclose(spectrum.eigenvalues[list(split.ancilla)], [4.0, 6.0])
        assert split.ancilla_ground_overlap == pytest.approx(1.0)

    def test_no_ancillas(self):
        spectrum = eig(np.diag([0.0, 1.0]))
        split = classify_branches(spectrum, 1, 0)
        assert split.physical == (0, 1)
        assert split.ancilla == ()

    def test_zero_penalty_collapse(self):
        spectrum = eig(to_dense(ham([(1.0, "ZI")], 2)))
        with pytest.raises(GapCollapseError):
            classify_branches(spectrum, 1, 1)

    def test_degenerate_straddle(self):
        spectrum = eig(np.zeros((4, 4)))
        with pytest.raises(GapCollapseError):
            classify_branches(spectrum, 1, 1)


class TestProblemValidation:
    def test_duplicate_strings(self):
        target = ham([(1.0, "Z")], 1)
        with pytest.raises(StructureError):
            ReductionProblem(target, 1, (PauliString("ZI"), PauliString("ZI")))

    def test_locality_cap(self):
        target = ham([(1.0, "ZZZ")], 3)
        with pytest.raises(StructureError):
            ReductionProblem(target, 1, (PauliString("ZZZI"),))
        ReductionProblem(target, 1, (PauliString("ZZZI"),), max_basis_locality=3)

    def test_length_and_im(self):
        target = ham([(1.0, "Z")], 1)
        with pytest.raises(StructureError):
            ReductionProblem(target, 1, (PauliString("Z"),))
        with pytest.raises(StructureError):
            ReductionProblem(target, 1, (PauliString("ZI"),), i_m=3)

    def test_json_roundtrip(self):
        problem = canonical_problem(i_m=6, weights=(1.0, 2.0, 0.5),
                                    gap_mode="literal")
        again = problem_from_dict(problem_to_dict(problem))
        assert again == problem


class TestCost:
    def test_exact_penalty_embedding_literal_gap(self):
        problem = ReductionProblem(
            target=ham([(1.0, "Z")], 1), n_ancilla=1,
            basis=(PauliString("ZI"), PauliString("IZ"), PauliString("II")),
            gap_mode="literal")
        bd = cost([1.0, -2.5, 2.5], problem)
        assert bd.c1 == pytest.approx(0.0, abs=1e-24)
        assert bd.c2 == pytest.approx(0.0, abs=1e-12)
        assert bd.c3 == pytest.approx(3.0)
        assert bd.gap == pytest.approx(3.0)
        assert bd.total == pytest.approx(3.0)

    def test_hinge_mode_silent_beyond_target(self):
        problem = ReductionProblem(
            target=ham([(1.0, "Z")], 1), n_ancilla=1,
            basis=(PauliString("ZI"), PauliString("IZ"), PauliString("II")),
            gap_mode="hinge", gap_target=2.0)
        bd = cost([1.0, -2.5, 2.5], problem)
        assert bd.c3 == 0.0
        # penalty 1.2: levels (-1, 0.2 | 1.0, 2.2), so the gap is 0.8
        shallow = cost([1.0, -0.6, 0.6], problem)
        assert shallow.gap == pytest.approx(0.8)
        assert shallow.c3 == pytest.approx((2.0 - 0.8) ** 2)

    def test_zero_vector_straddles_but_c1_defined(self):
        problem = canonical_problem()
        bd = cost(np.zeros(9), problem)
        assert bd.straddled
        assert bd.total == float("inf")
        target_vals = np.linalg.eigvalsh(to_dense(problem.target).matrix)
        assert bd.c1 == pytest.approx(float(np.sum(target_vals ** 2)))

    def test_decomposition_identity(self):
        problem = canonical_problem(weights=(0.7, 2.0, 3.0))
        rng = np.random.default_rng(2)
        d = rng.normal(scale=5.0, size=9)
        bd = cost(d, problem)
        if not bd.straddled:
            assert bd.total == pytest.approx(
                0.7 * bd.c1 + 2.0 * bd.c2 + 3.0 * bd.c3, rel=1e-12)

    def test_exact_embedding_family_one_and_two_qubits(self):
        # target (x) ancilla identity, plus a pure penalty wider than the
        # spectrum: both matching criteria vanish identically
        one = ReductionProblem(
            target=ham([(0.6, "Z")], 1), n_ancilla=1,
            basis=(PauliString("ZI"), PauliString("IZ"), PauliString("II")))
        bd = cost([0.6, -4.0, 4.0], one)
        assert bd.c1 == pytest.approx(0.0, abs=1e-20)
        assert bd.c2 == pytest.approx(0.0, abs=1e-12)

        two = ReductionProblem(
            target=ham([(0.3, "ZZ"), (0.2, "XI")], 2), n_ancilla=1,
            basis=(PauliString("ZZI"), PauliString("XII"),
                   PauliString("IIZ"), PauliString("III")))
        bd2 = cost([0.3, 0.2, -4.0, 4.0], two)
        assert bd2.c1 == pytest.approx(0.0, abs=1e-20)
        assert bd2.c2 == pytest.approx(0.0, abs=1e-10)
        assert bd2.c3 == 0.0

    def test_wrong_length(self):
        with pytest.raises(StructureError):
            cost([1.0], canonical_problem())


class TestSpread:
    def test_examples(self):
        assert spread([1.0, 5.0, -3.0]) == 8.0
        assert spread([2.0, 2.0, 2.0]) == 0.0

    def test_permutation_and_translation(self):
        rng = np.random.default_rng(4)
        d = rng.normal(size=7)
        assert spread(d) == pytest.approx(spread(d[::-1]))
        assert spread(d + 11.3) == pytest.approx(spread(d))

    def test_empty(self):
        with pytest.raises(StructureError):
            spread([])


class TestSectorSeeds:
    def test_seed_is_exact_embedding(self):
        problem = canonical_problem()
        report = optimize(problem,
                          InitStrategy(levels=(), jitters_per_level=0, seed=0))
        assert report.provenance["chosen_start"].startswith("seed")
        assert report.cost.total < 1e-10
        assert report.cost.gap > 2.0

    def test_negative_coefficient(self):
        problem = canonical_problem(coeff=-0.8)
        report = optimize(problem,
                          InitStrategy(levels=(), jitters_per_level=0, seed=0))
        assert report.cost.total < 1e-10

    def test_seed_coefficients_solve_channel_equation(self):
        for alpha in (1.0, 0.35, -2.2):
            c = sector_seed_coefficients(alpha, scale=max(1.0, abs(alpha)))
            z, w, dcz = c["Z"], c["W"], c["CZ"]

            def phi(g):
                return (np.sqrt(g + (z + dcz) ** 2)
                        - np.sqrt(g + (z - dcz) ** 2))

            assert phi(0.0) - phi(4 * w * w) == pytest.approx(4 * alpha, abs=1e-10)


class TestOptimize:
    def test_canonical_nine_term_convergence(self, converged_nine):
        problem, report = converged_nine
        assert report.cost.total <= 1e-10
        assert report.spectral_abs_error <= 1e-8
        assert report.dm_spread < 40.0
        assert report.branch_gap > 2.0

    def test_deterministic(self):
        problem = canonical_problem()
        a = optimize(problem, InitStrategy(seed=11))
        b = optimize(problem, InitStrategy(seed=11))
        assert a.d == b.d
        assert a.cost.total == b.cost.total
        assert report_to_dict(a, problem) == report_to_dict(b, problem)

    def test_level_saturation(self):
        # deeper starting magnitudes do not lose to shallow ones
        problem = canonical_problem()
        results = {}
        for level in (1.0, 10.0, 100.0):
            report = optimize(problem, InitStrategy(levels=(level,), seed=5))
            results[level] = report.cost.total
        assert results[100.0] <= results[1.0] + 1e-12
        assert results[100.0] <= results[10.0] + 1e-12

    def test_gap_criterion_governs_trivial_target(self):
        # empty target: eigenvalue and projector criteria vanish along the
        # whole axis, the hinge picks the analytic optimum of
        # 2 z^2 + (1 - 2|z|)^2 at |z| = 1/3, D = 1/3
        problem = ReductionProblem(
            target=PauliHamiltonian(1, ()), n_ancilla=1,
            basis=(PauliString("IZ"),), gap_target=1.0)
        report = optimize(problem, InitStrategy(levels=(0.5,), seed=0), tol=1e-9)
        assert report.cost.total == pytest.approx(1.0 / 3.0, rel=1e-5)
        assert abs(report.d[0]) == pytest.approx(1.0 / 3.0, rel=1e-3)
        assert not report.converged

    def test_budget_guard(self):
        with pytest.raises(StructureError):
            optimize(canonical_problem(), budget=0)


class TestGreedyExtend:
    def test_count_zero_is_identity(self, converged_nine):
        problem, report = converged_nine
        ext = greedy_extend(problem, [PauliString("IIIX")], 0, base_report=report)
        assert ext.problem == problem
        assert ext.rounds == ()

    def test_pool_clash(self, converged_nine):
        problem, report = converged_nine
        with pytest.raises(StructureError):
            greedy_extend(problem, [problem.basis[0]], 1, base_report=report)

    def test_extension_never_hurts(self, converged_nine):
        problem, report = converged_nine
        pool = [PauliString("IIIX"), PauliString("IIYY")]
        ext = greedy_extend(problem, pool, 1, base_report=report, seed=2)
        assert ext.report.cost.total <= report.cost.total * (1 + 1e-9) + 1e-14
        assert len(ext.problem.basis) == len(problem.basis) + 1
        assert set(ext.rounds[0].scores) == {"IIIX", "IIYY"}


class TestDensityValidation:
    def test_exact_toy_reduces_to_target_projector(self):
        problem = ReductionProblem(
            target=ham([(1.0, "Z")], 1), n_ancilla=1,
            basis=(PauliString("ZI"), PauliString("IZ"), PauliString("II")))
        groups = density_validation([1.0, -2.5, 2.5], problem)
        assert len(groups) == 2
        ground = groups[0]
        assert np.allclose(ground.target_projector, np.diag([0.0, 1.0]))
        assert ground.max_entry_error < 1e-12
        assert ground.frobenius_error < 1e-12

    def test_requires_convergence_for_reports(self, converged_nine):
        problem, report = converged_nine
        groups = density_validation(report, problem)
        assert all(g.max_entry_error < 1e-8 for g in groups)
        bad = report_from_dict(
            {**report_to_dict(report), "converged": False})[0]
        with pytest.raises(UnconvergedError):
            density_validation(bad, problem)


class TestStability:
    def test_zero_magnitude_matches_unperturbed(self, converged_nine):
        problem, report = converged_nine
        sweep = stability_sweep(report, problem, magnitudes_percent=(0.0,),
                                samples=4, seed=9)
        row = sweep.rows[0]
        anchor = sum(e["trace_norm"] for e in report.density_errors)
        assert row.mean_density_err == pytest.approx(anchor, abs=1e-12)
        assert row.max_density_err == pytest.approx(anchor, abs=1e-12)
        assert row.mean_spectral_err == pytest.approx(
            report.spectral_abs_error, abs=1e-10)

    def test_monotone_and_deterministic(self, converged_nine):
        problem, report = converged_nine
        sweep1 = stability_sweep(report, problem,
                                 magnitudes_percent=(1e-4, 1e-2, 1.0),
                                 samples=8, seed=21)
        sweep2 = stability_sweep(report, problem,
                                 magnitudes_percent=(1e-4, 1e-2, 1.0),
                                 samples=8, seed=21)
        assert sweep1 == sweep2
        means = [r.mean_density_err for r in sweep1.rows]
        assert means[0] <= means[1] <= means[2]

    def test_refuses_unconverged(self, converged_nine):
        problem, report = converged_nine
        bad = report_from_dict(
            {**report_to_dict(report), "converged": False})[0]
        with pytest.raises(UnconvergedError):
            stability_sweep(bad, problem)


class TestReduceLadder:
    def test_two_local_input_unchanged(self):
        h = ham([(0.5, "XZ"), (0.25, "ZI")], 2)
        result = reduce_ladder(h)
        assert result.hamiltonian == h
        assert result.steps == ()
        assert result.refinement is None

    def test_three_local_single_step(self):
        h = ham([(1.0, "XZX")], 3)
        result = reduce_ladder(h, LadderConfig(seed=1))
        assert len(result.steps) == 1
        assert result.hamiltonian.n_qubits == 4
        assert result.hamiltonian.max_locality <= 2
        assert result.refinement.converged
        final = np.linalg.eigvalsh(to_dense(result.hamiltonian).matrix)
        target = np.linalg.eigvalsh(to_dense(h).matrix)
        assert np.abs(final[:8] - target).max() < 1e-7

    def test_locality_cap(self):
        h = ham([(1.0, "XZXZXZX")], 7)
        with pytest.raises(StructureError):
            reduce_ladder(h, LadderConfig(locality_cap=4))
