import numpy as np
import pytest

from sospdiff.sdpsolve import preprocess, solve, write_problem_dump
from sospdiff.semialg import ToleranceSet
from sospdiff.sosprog import BlockTriplets, SdpProblem


def lambda_max_problem(A: np.ndarray) -> SdpProblem:
    """min t  s.t.  t*I - A >= 0, encoded as X = t*I - A with X PSD, t free."""
    n = A.shape[0]
    rows, rr, cc, vv, rhs, F = [], [], [], [], [], []
    k = 0
    for i in range(n):
        for j in range(i, n):
            rows.append(k)
            rr.append(i)
            cc.append(j)
            vv.append(1.0)
            if i == j:
                rhs.append(-A[i, i])
                F.append(-1.0)
            else:
                rhs.append(-2 * A[i, j])
                F.append(0.0)
            k += 1
    blocks = [
        BlockTriplets(
            n,
            np.array(rows, dtype=np.int64),
            np.array(rr, dtype=np.int64),
            np.array(cc, dtype=np.int64),
            np.array(vv),
        )
    ]
    return SdpProblem(
        m=k,
        blocks=blocks,
        gram_blocks=[],
        F=np.array(F).reshape(k, 1),
        rhs=np.array(rhs),
        free_cost=np.array([1.0]),
    )


def feasibility_problem(dim, rows, rr, cc, vv, rhs):
    return SdpProblem(
        m=len(rhs),
        blocks=[
            BlockTriplets(
                dim,
                np.array(rows, dtype=np.int64),
                np.array(rr, dtype=np.int64),
                np.array(cc, dtype=np.int64),
                np.array(vv, dtype=float),
            )
        ],
        gram_blocks=[],
        F=np.zeros((len(rhs), 0)),
        rhs=np.array(rhs, dtype=float),
        free_cost=np.zeros(0),
    )


class TestLambdaMax:
    def test_diagonal_by_inspection(self):
        sol = solve(lambda_max_problem(np.diag([1.0, 2.0, 3.0])))
        assert sol.status == "optimal"
        assert sol.free_vars[0] == pytest.approx(3.0, abs=1e-6)

    def test_random_5x5_against_eigensolver(self):
        rng = np.random.default_rng(5)
        A = rng.normal(size=(5, 5))
        A = 0.5 * (A + A.T)
        sol = solve(lambda_max_problem(A))
        assert sol.status == "optimal"
        assert sol.free_vars[0] == pytest.approx(np.linalg.eigvalsh(A).max(), abs=1e-6)

    def test_psd_block_matches_t_identity_minus_A(self):
        A = np.diag([1.0, -1.0])
        sol = solve(lambda_max_problem(A))
        X = sol.block_matrices[0]
        t = sol.free_vars[0]
        np.testing.assert_allclose(X, t * np.eye(2) - A, atol=1e-6)


class TestDegenerateClassification:
    def test_infeasible_trace(self):
        # X >= 0 with trace(X) = -1 has a Farkas certificate y = -1.
        prob = feasibility_problem(2, [0, 0], [0, 1], [0, 1], [1.0, 1.0], [-1.0])
        sol = solve(prob)
        assert sol.status == "infeasible-detected"

    def test_unbounded_ray(self):
        # min -t with X = t (1x1 PSD) is unbounded above in t.
        prob = SdpProblem(
            m=1,
            blocks=[
                BlockTriplets(
                    1,
                    np.array([0], dtype=np.int64),
                    np.array([0], dtype=np.int64),
                    np.array([0], dtype=np.int64),
                    np.array([1.0]),
                )
            ],
            gram_blocks=[],
            F=np.array([[-1.0]]),
            rhs=np.array([0.0]),
            free_cost=np.array([-1.0]),
        )
        sol = solve(prob)
        assert sol.status == "unbounded-detected"


class TestPreprocess:
    def duplicated_problem(self):
        A = np.diag([1.0, 2.0])
        prob = lambda_max_problem(A)
        blk = prob.blocks[0]
        dup = BlockTriplets(
            blk.dim,
            np.concatenate([blk.rows, [prob.m]]),
            np.concatenate([blk.rr, [0]]),
            np.concatenate([blk.cc, [0]]),
            np.concatenate([blk.vv, [1.0]]),
        )
        F = np.vstack([prob.F, prob.F[0]])
        rhs = np.append(prob.rhs, prob.rhs[0])
        return SdpProblem(
            m=prob.m + 1, blocks=[dup], gram_blocks=[], F=F, rhs=rhs,
            free_cost=prob.free_cost,
        ), prob

    def test_duplicate_row_removed_and_solution_identical(self):
        dup_prob, clean_prob = self.duplicated_problem()
        red, rec = preprocess(dup_prob)
        assert rec.m_before == 4 and rec.m_after == 3
        assert not rec.inconsistent
        sol_dup = solve(dup_prob)
        sol_clean = solve(clean_prob)
        assert sol_dup.status == "optimal"
        assert sol_dup.free_vars[0] == pytest.approx(sol_clean.free_vars[0], abs=1e-8)
        assert sol_dup.dual_vector.shape == (4,)

    def test_inconsistent_duplicate_detected(self):
        dup_prob, _ = self.duplicated_problem()
        dup_prob.rhs[-1] += 1.0  # same row, contradictory right-hand side
        sol = solve(dup_prob)
        assert sol.status == "infeasible-detected"

    def test_well_posed_unchanged(self):
        prob = lambda_max_problem(np.diag([1.0, 2.0, 3.0]))
        red, rec = preprocess(prob)
        assert rec.m_after == rec.m_before == prob.m
        assert red is prob

    def test_structural_fast_path_used(self):
        prob = lambda_max_problem(np.diag([1.0, 2.0]))
        _, rec = preprocess(prob)
        assert rec.method == "structural"


class TestSolverInvariants:
    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(11)
        A = rng.normal(size=(4, 4))
        A = 0.5 * (A + A.T)
        prob = lambda_max_problem(A)
        perm = rng.permutation(prob.m)
        inv = np.argsort(perm)
        blk = prob.blocks[0]
        permuted = SdpProblem(
            m=prob.m,
            blocks=[BlockTriplets(blk.dim, inv[blk.rows], blk.rr.copy(), blk.cc.copy(), blk.vv.copy())],
            gram_blocks=[],
            F=prob.F[perm],
            rhs=prob.rhs[perm],
            free_cost=prob.free_cost,
        )
        s1 = solve(prob)
        s2 = solve(permuted)
        assert s1.free_vars[0] == pytest.approx(s2.free_vars[0], abs=1e-8)

    def test_complementarity_at_optimum(self):
        rng = np.random.default_rng(2)
        A = rng.normal(size=(6, 6))
        A = 0.5 * (A + A.T)
        sol = solve(lambda_max_problem(A))
        assert sol.status == "optimal"
        scale = 1.0 + abs(sol.primal_objective) + abs(sol.dual_objective)
        for X, S in zip(sol.block_matrices, sol.dual_slacks):
            assert abs(np.tensordot(X, S)) <= 10 * max(sol.final_gap, 1e-10) * scale * X.shape[0]

    def test_weak_duality_debug_mode(self):
        sol = solve(lambda_max_problem(np.diag([1.0, 2.0, 3.0])), debug=True)
        assert sol.status == "optimal"

    def test_deterministic(self):
        A = np.diag([1.0, -2.0, 0.5])
        s1 = solve(lambda_max_problem(A))
        s2 = solve(lambda_max_problem(A))
        assert s1.free_vars[0] == s2.free_vars[0]
        assert s1.iterations == s2.iterations
        np.testing.assert_array_equal(s1.block_matrices[0], s2.block_matrices[0])

    def test_tolerance_respected_on_optimal(self):
        tol = ToleranceSet(sdp_gap=1e-8)
        sol = solve(lambda_max_problem(np.diag([2.0, 1.0])), tol)
        assert sol.status == "optimal"
        assert sol.final_gap <= 1e-8 or sol.primal_residual <= 1e-8

    def test_max_iters_status(self):
        rng = np.random.default_rng(0)
        A = rng.normal(size=(5, 5))
        A = 0.5 * (A + A.T)
        sol = solve(lambda_max_problem(A), max_iters=2)
        assert sol.status == "max-iterations"
        assert sol.iterations <= 2


def test_problem_dump_round_trip(tmp_path):
    prob = lambda_max_problem(np.diag([1.0, 2.0]))
    path = tmp_path / "dump.txt"
    write_problem_dump(prob, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "SOSPDIFF-SDP 1"
    assert lines[1].split() == ["m", "3", "free", "1", "blocks", "1"]
    a_lines = [l for l in lines if l.startswith("A ")]
    assert len(a_lines) == prob.blocks[0].rows.shape[0]
    rhs_vals = [float(l.split()[2]) for l in lines if l.startswith("rhs ")]
    np.testing.assert_array_equal(rhs_vals, prob.rhs)
