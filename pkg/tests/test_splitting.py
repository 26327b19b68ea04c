import numpy as np
import pytest
from numpy.testing import assert_allclose

import symsplit.splitting as sp
from symsplit.errors import ConfigError, DegenerateProblemError
from symsplit.problem import GenSpec, SymProblem, all_theta, gen_dataset, objective


def lowrank_problem(seed, n=20, k=3):
    return gen_dataset(GenSpec(kind="low_rank", n=n, k=k, seed=seed))


def manual_state(x, y, lam, rho, beta=0.0, xi=1.0):
    return sp.SolverState(X=np.array(x, dtype=float), Y=np.array(y, dtype=float),
                          Lam=np.array(lam, dtype=float), rho=rho, beta=beta, xi=xi)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            sp.SolverConfig(gp_max_iters=0)
        with pytest.raises(ConfigError):
            sp.SolverConfig(stop_eps=0.0)
        with pytest.raises(ConfigError):
            sp.SolverConfig(rho_cap_factor=6.0)
        with pytest.raises(ConfigError):
            sp.SolverConfig(rho_init_mode="nope")
        with pytest.raises(ConfigError):
            sp.SolverConfig(xi_init=1e-4, schedule_eps=1e-3)


class TestInit:
    def test_state_invariants(self):
        prob = lowrank_problem(0)
        st = sp.init(prob, sp.SolverConfig(seed=1))
        assert (st.Y >= 0).all()
        rows = np.einsum("ij,ij->i", st.Y, st.Y)
        assert rows.max() <= prob.tau * (1 + 1e-12)
        assert_allclose(st.X, st.Y)
        assert not st.Lam.any()
        assert st.rho > 0 and st.beta >= 0

    def test_determinism_bitwise(self):
        prob = lowrank_problem(1)
        a = sp.init(prob, sp.SolverConfig(seed=5))
        b = sp.init(prob, sp.SolverConfig(seed=5))
        assert np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)
        assert a.rho == b.rho and a.beta == b.beta

    def test_rho_init_modes(self):
        prob = gen_dataset(GenSpec(kind="full_rank", n=100, k=4, seed=2))
        tau_bar = float(np.mean(all_theta(prob.Z)))
        st1 = sp.init(prob, sp.SolverConfig(rho_init_mode="tau_bar", seed=0))
        st2 = sp.init(prob, sp.SolverConfig(rho_init_mode="sqrt_n_tau_bar", seed=0))
        assert st1.rho == pytest.approx(tau_bar)
        assert st2.rho == pytest.approx(10.0 * tau_bar)

    def test_fixed_rho_mode(self):
        prob = lowrank_problem(3)
        st = sp.init(prob, sp.SolverConfig(use_schedules=False, seed=0))
        assert st.rho == pytest.approx(6.1 * prob.n * prob.tau)

    def test_degenerate_instance_rejected(self):
        prob = SymProblem(Z=np.zeros((4, 4)), K=2, tau=0.0)
        with pytest.raises(DegenerateProblemError):
            sp.init(prob, sp.SolverConfig())


class TestUpdateY:
    def test_zero_data_gives_zero(self):
        z = np.zeros((4, 4))
        prob = SymProblem(Z=z, K=2, tau=10.0)
        st = manual_state(np.zeros((4, 2)), np.abs(np.random.default_rng(0).standard_normal((4, 2))),
                          np.zeros((4, 2)), rho=2.0, beta=0.0)
        sp.update_y(st, prob, sp.SolverConfig())
        assert np.max(np.abs(st.Y)) <= 1e-12

    def test_scalar_closed_form(self):
        rho = 0.5
        prob = SymProblem(Z=np.array([[4.0]]), K=1, tau=100.0)
        st = manual_state([[1.0]], [[1.0]], [[0.0]], rho=rho, beta=0.0)
        sp.update_y(st, prob, sp.SolverConfig())
        assert st.Y[0, 0] == pytest.approx((4 + rho) / (1 + rho), rel=1e-10)

    def test_scalar_clipped_to_ball(self):
        prob = SymProblem(Z=np.array([[4.0]]), K=1, tau=4.0)
        st = manual_state([[1.0]], [[1.0]], [[0.0]], rho=0.5, beta=0.0)
        sp.update_y(st, prob, sp.SolverConfig())
        assert st.Y[0, 0] == pytest.approx(2.0, rel=1e-10)

    def test_against_long_run_oracle(self):
        rng = np.random.default_rng(4)
        n, k = 4, 2
        z = rng.uniform(0, 1, (n, n))
        z = 0.5 * (z + z.T)
        prob = SymProblem.build(z, k)
        x = rng.uniform(0, 1, (n, k))
        y0 = rng.uniform(0, 0.5, (n, k))
        lam = rng.standard_normal((n, k)) * 0.1
        rho, beta = 3.0, 0.4

        def eq8_objective(y):
            return (0.5 * np.linalg.norm(x @ y.T - z) ** 2
                    + 0.5 * rho * np.linalg.norm(y - x - lam / rho) ** 2
                    + 0.5 * beta * np.linalg.norm(y - y0) ** 2)

        st = manual_state(x, y0, lam, rho=rho, beta=beta)
        sp.update_y(st, prob, sp.SolverConfig(gp_max_iters=40))

        # independent 10,000-iteration projected gradient, row by row
        a = x.T @ x + (rho + beta) * np.eye(k)
        b = z.T @ x + rho * x + lam + beta * y0
        alpha = 1.0 / np.linalg.eigvalsh(a)[-1]
        y = y0.copy()
        for _ in range(10_000):
            w = y - alpha * (y @ a - b)
            w = np.maximum(w, 0.0)
            sq = np.einsum("ij,ij->i", w, w)
            over = sq > prob.tau
            w[over] *= np.sqrt(prob.tau / sq[over])[:, None]
            y = w
        assert eq8_objective(st.Y) <= eq8_objective(y) + 1e-6

    def test_feasibility_after_update(self):
        prob = lowrank_problem(5)
        cfg = sp.SolverConfig(seed=2)
        st = sp.init(prob, cfg)
        for _ in range(5):
            sp.step(st, prob, cfg)
            assert (st.Y >= 0).all()
            rows = np.einsum("ij,ij->i", st.Y, st.Y)
            assert rows.max() <= prob.tau * (1 + 1e-12)


class TestUpdateX:
    def test_zero_factors(self):
        prob = SymProblem(Z=np.zeros((3, 3)), K=2, tau=1.0)
        st = manual_state(np.ones((3, 2)), np.zeros((3, 2)), np.zeros((3, 2)), rho=2.0)
        sp.update_x(st, prob)
        assert_allclose(st.X, 0.0)

    def test_zero_y_reduces_to_scaled_dual(self):
        # with Y = 0 the ridge solve leaves X = -Lambda / rho in the stored
        # dual convention
        rng = np.random.default_rng(6)
        lam = rng.standard_normal((4, 2))
        prob = SymProblem(Z=np.zeros((4, 4)), K=2, tau=1.0)
        st = manual_state(np.zeros((4, 2)), np.zeros((4, 2)), lam, rho=2.0)
        sp.update_x(st, prob)
        assert_allclose(st.X, -lam / 2.0, rtol=1e-12)

    def test_first_order_residual(self):
        rng = np.random.default_rng(7)
        prob = lowrank_problem(7, n=10, k=2)
        z = np.asarray(prob.Z)
        st = manual_state(rng.uniform(0, 1, (10, 2)), rng.uniform(0, 1, (10, 2)),
                          rng.standard_normal((10, 2)), rho=4.0)
        sp.update_x(st, prob)
        r = (st.X @ (st.Y.T @ st.Y) - z @ st.Y
             + st.rho * (st.X - st.Y) + st.Lam)
        assert np.linalg.norm(r) <= 1e-8 * (1 + np.linalg.norm(st.X))


class TestUpdateDual:
    def test_consensus_leaves_dual_unchanged(self):
        rng = np.random.default_rng(8)
        x = rng.uniform(0, 1, (5, 2))
        lam = rng.standard_normal((5, 2))
        st = manual_state(x, x, lam.copy(), rho=3.0)
        sp.update_dual(st)
        assert_allclose(st.Lam, lam)

    def test_unit_rho_adds_gap(self):
        rng = np.random.default_rng(9)
        x, y = rng.uniform(0, 1, (5, 2)), rng.uniform(0, 1, (5, 2))
        st = manual_state(x, y, np.zeros((5, 2)), rho=1.0)
        sp.update_dual(st)
        assert_allclose(st.Lam, x - y)

    def test_dual_identity_after_full_iteration(self):
        prob = lowrank_problem(10, n=12, k=2)
        z = np.asarray(prob.Z)
        cfg = sp.SolverConfig(seed=3)
        st = sp.init(prob, cfg)
        for _ in range(10):
            sp.step(st, prob, cfg)
            resid = st.Lam + (st.X @ (st.Y.T @ st.Y) - z @ st.Y)
            assert np.linalg.norm(resid) <= 1e-8 * (1 + np.linalg.norm(st.Lam))


class TestUpdateSchedules:
    def test_rho_recurrence_hand_value(self):
        prob = SymProblem(Z=np.eye(3), K=1, tau=1.0)
        st = manual_state(np.zeros((3, 1)), np.zeros((3, 1)), np.zeros((3, 1)),
                          rho=2.0, xi=0.5)
        st.t = 1
        sp.update_schedules(st, prob, sp.SolverConfig(seed=0))
        assert st.rho == pytest.approx(2.0 / (1 - 0.0005), rel=1e-12)

    def test_rho_cap(self):
        prob = SymProblem(Z=np.eye(3), K=1, tau=1.0)
        cap = 6.1 * 3 * 1.0
        st = manual_state(np.zeros((3, 1)), np.zeros((3, 1)), np.zeros((3, 1)),
                          rho=cap, xi=0.5)
        st.t = 1
        sp.update_schedules(st, prob, sp.SolverConfig(seed=0))
        assert st.rho == pytest.approx(cap)

    def test_xi_clamped_at_one(self):
        prob = SymProblem(Z=np.eye(3), K=1, tau=1.0)
        st = manual_state(np.zeros((3, 1)), np.zeros((3, 1)), np.zeros((3, 1)),
                          rho=2.0, xi=1.0)
        st.t = 1
        sp.update_schedules(st, prob, sp.SolverConfig(seed=0))
        assert st.xi == 1.0

    def test_schedule_denominator_error(self):
        prob = SymProblem(Z=np.eye(3), K=1, tau=1.0)
        st = manual_state(np.zeros((3, 1)), np.zeros((3, 1)), np.zeros((3, 1)),
                          rho=1e-4, xi=0.5)
        st.t = 1
        with pytest.raises(ConfigError):
            sp.update_schedules(st, prob, sp.SolverConfig(seed=0))

    def test_beta_carried_between_refreshes(self):
        prob = lowrank_problem(11, n=10, k=2)
        cfg = sp.SolverConfig(seed=4, beta_update_period=100)
        st = sp.init(prob, cfg)
        beta0 = st.beta
        sp.step(st, prob, cfg)  # t=1, not a refresh iteration
        assert st.beta == beta0

    def test_beta_every_iteration_without_schedules(self):
        prob = lowrank_problem(12, n=10, k=2)
        cfg = sp.SolverConfig(seed=4, use_schedules=False)
        st = sp.init(prob, cfg)
        sp.step(st, prob, cfg)
        expected = 6.0 * sp.xy_residual_fro_sq(st.X, st.Y, prob) / st.rho
        assert st.beta == pytest.approx(expected, rel=1e-12)


class TestStep:
    def test_fixed_point_at_exact_solution(self):
        rng = np.random.default_rng(13)
        xstar = rng.uniform(0.1, 0.8, (10, 2))
        prob = SymProblem.build(xstar @ xstar.T, 2)
        st = manual_state(xstar, xstar, np.zeros((10, 2)), rho=5.0, beta=0.0,
                          xi=0.5)
        sp.step(st, prob, sp.SolverConfig(seed=0))
        assert np.max(np.abs(st.X - xstar)) <= 1e-6
        assert np.max(np.abs(st.Y - xstar)) <= 1e-6

    def test_lagrangian_descent_two_steps(self):
        prob = lowrank_problem(14, n=15, k=2)
        cfg = sp.SolverConfig(use_schedules=False, seed=5)
        st = sp.init(prob, cfg)
        l_prev = sp.augmented_lagrangian(st.X, st.Y, st.Lam, prob, st.rho)
        for _ in range(2):
            sp.step(st, prob, cfg)
            l_cur = sp.augmented_lagrangian(st.X, st.Y, st.Lam, prob, st.rho)
            assert l_cur <= l_prev + 1e-9 * (1 + abs(l_prev))
            l_prev = l_cur

    def test_counter_increments(self):
        prob = lowrank_problem(15, n=8, k=2)
        cfg = sp.SolverConfig(seed=6)
        st = sp.init(prob, cfg)
        rec = sp.step(st, prob, cfg)
        assert rec.t == 1 and st.t == 1
        rec = sp.step(st, prob, cfg)
        assert rec.t == 2


class TestDescentAndBound:
    def test_theory_mode_descent_and_nonnegativity(self):
        # fixed rho = 6.1 N tau, beta from the residual each iteration
        for seed in range(3):
            prob = gen_dataset(GenSpec(kind="full_rank", n=25, k=3, seed=seed))
            cfg = sp.SolverConfig(use_schedules=False, seed=seed + 50)
            st = sp.init(prob, cfg)
            l_prev = sp.augmented_lagrangian(st.X, st.Y, st.Lam, prob, st.rho)
            for _ in range(100):
                sp.step(st, prob, cfg)
                l_cur = sp.augmented_lagrangian(st.X, st.Y, st.Lam, prob, st.rho)
                assert l_cur <= l_prev + 1e-9 * (1 + abs(l_prev))
                assert l_cur >= -1e-9
                l_prev = l_cur


class TestRun:
    def test_lowrank_converges_to_global(self):
        prob = gen_dataset(GenSpec(kind="low_rank", n=50, k=5, seed=0))
        cfg = sp.SolverConfig(max_outer_iters=8000, stop_eps=1e-8,
                              rho_init_mode="tau_bar", seed=1)
        res = sp.run(prob, cfg)
        assert res.stop_reason == "converged"
        assert res.trace[-1].rel_objective <= 1e-6

    def test_zero_budget(self):
        prob = lowrank_problem(16, n=10, k=2)
        res = sp.run(prob, sp.SolverConfig(max_outer_iters=0, seed=0))
        assert res.stop_reason == "budget_exhausted"
        assert len(res.trace) == 1
        assert res.trace[0].t == 0

    def test_envelope_nonincreasing(self):
        prob = lowrank_problem(17, n=15, k=2)
        res = sp.run(prob, sp.SolverConfig(max_outer_iters=50, seed=2))
        ps = [r.p_metric for r in res.trace]
        env = np.minimum.accumulate(ps)
        assert (np.diff(env) <= 0).all()

    def test_consensus_on_converged_run(self):
        prob = gen_dataset(GenSpec(kind="low_rank", n=30, k=3, seed=3))
        res = sp.run(prob, sp.SolverConfig(max_outer_iters=5000, stop_eps=1e-8,
                                           rho_init_mode="tau_bar", seed=3))
        assert res.stop_reason == "converged"
        gap = np.linalg.norm(res.x - res.y)
        assert gap / max(1.0, np.linalg.norm(res.x)) <= 1e-4

    def test_row_bound_strictly_inactive_at_solution(self):
        prob = gen_dataset(GenSpec(kind="low_rank", n=25, k=3, seed=4))
        res = sp.run(prob, sp.SolverConfig(max_outer_iters=5000, stop_eps=1e-10,
                                           rho_init_mode="tau_bar", seed=4))
        rows = np.einsum("ij,ij->i", res.x, res.x)
        assert rows.max() < prob.tau

    def test_trace_determinism(self):
        prob = lowrank_problem(18, n=12, k=2)
        cfg = sp.SolverConfig(max_outer_iters=20, seed=7)
        a = sp.run(prob, cfg)
        b = sp.run(prob, cfg)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
        for ra, rb in zip(a.trace, b.trace):
            assert ra.objective == rb.objective
            assert ra.p_metric == rb.p_metric
            assert ra.rho == rb.rho and ra.beta == rb.beta

    def test_shared_initial_factor(self):
        prob = lowrank_problem(19, n=10, k=2)
        x0 = sp.initial_factor(prob, 11)
        res = sp.run(prob, sp.SolverConfig(max_outer_iters=3, seed=99), x0=x0)
        assert res.trace[0].objective == pytest.approx(objective(x0, prob))


class TestSparseRoute:
    def test_run_on_sparse_matches_dense(self):
        from symsplit.linalg import SparseSym

        prob_d = gen_dataset(GenSpec(kind="adjacency", n=25, k=3,
                                     cluster_sizes=(5, 8, 12), seed=5,
                                     cluster_means=(2.0, 5.0, 8.0)))
        z = np.asarray(prob_d.Z)
        i, j = np.triu_indices(25)
        prob_s = SymProblem.build(SparseSym(25, i, j, z[i, j]), 3)
        assert prob_s.tau == pytest.approx(prob_d.tau, rel=1e-12)
        cfg = sp.SolverConfig(max_outer_iters=300, stop_eps=1e-9, seed=5)
        res_d = sp.run(prob_d, cfg)
        res_s = sp.run(prob_s, cfg)
        assert res_s.trace[-1].rel_objective == pytest.approx(
            res_d.trace[-1].rel_objective, rel=1e-6)
        np.testing.assert_allclose(res_s.x, res_d.x, rtol=1e-5, atol=1e-8)


class TestIterTrace:
    def test_monotone_counter_enforced(self):
        tr = sp.IterTrace()
        tr.append(sp.IterRecord(t=0, elapsed_s=0, objective=1, rel_objective=1,
                                p_metric=1, xy_gap=0, rho=1, beta=0, inner_iters=0))
        with pytest.raises(ValueError):
            tr.append(sp.IterRecord(t=0, elapsed_s=0, objective=1, rel_objective=1,
                                    p_metric=1, xy_gap=0, rho=1, beta=0, inner_iters=0))
