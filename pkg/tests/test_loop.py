import math

import numpy as np
import pytest

from workcap import (BudgetError, DimensionError, PerceptActionLoop,
                     build_global_chain, build_identity, build_memoryless,
                     build_predictive, build_uniform, build_last_action,
                     trajectory_distribution, work_rate)
from workcap.info import entropy_rate
from workcap.loop import (am_predictiveness, future_predictiveness,
                          has_max_entropy_actions, mean_action_entropy,
                          predictiveness_score)
from workcap.random_models import random_agent, random_environment

FIG5_MEA_RATE_BITS = 1.0 - math.log(256 / 27) / math.log(16)


class TestGlobalChain:
    def test_state_count_product(self, rng):
        pal = PerceptActionLoop(random_agent(rng, 2, 2),
                                random_environment(rng, 2, 3))
        assert build_global_chain(pal).n_states == 2 * 2 * 2 * 3

    def test_fig5_memoryless_hand_computed(self, fig5):
        # one memory and one hidden state: the chain lives on (action, percept)
        # pairs and every feasible row equals p(a') * e(s' | a')
        agent = build_memoryless(fig5.alphabet, [0.5, 0.5])
        chain = build_global_chain(PerceptActionLoop(agent, fig5))
        expected_row = np.array([0.5 * 1.0, 0.5 * 0.0, 0.5 * 0.5, 0.5 * 0.5])
        for u in range(4):
            if chain.feasible[u]:
                assert np.allclose(chain.kernel.probs[u], expected_row, atol=1e-15)
        # initial: p(a) * e(s | a)
        assert np.allclose(chain.initial.probs, expected_row, atol=1e-15)

    def test_infeasible_pairs_flagged_and_never_entered(self, fig5):
        agent = build_memoryless(fig5.alphabet, [0.5, 0.5])
        chain = build_global_chain(PerceptActionLoop(agent, fig5))
        # (a=0, s=1) cannot be emitted
        infeasible = [u for u in range(4) if not chain.feasible[u]]
        assert infeasible == [1]
        assert not chain.reachable[1]
        # no feasible state ever transitions into it (only its own
        # placeholder row touches it)
        assert np.max(chain.kernel.probs[chain.feasible][:, 1]) == 0.0

    def test_rows_stochastic_including_placeholders(self, rng):
        pal = PerceptActionLoop(random_agent(rng, 2, 2),
                                random_environment(rng, 2, 2))
        chain = build_global_chain(pal)
        assert np.max(np.abs(chain.kernel.probs.sum(axis=1) - 1.0)) < 1e-12

    def test_alphabet_mismatch_rejected(self, fig5):
        agent = build_uniform(("x", "y"))
        with pytest.raises(DimensionError):
            PerceptActionLoop(agent, fig5)


class TestTrajectory:
    def test_horizon_one_equals_initial(self, fig5, rng):
        pal = PerceptActionLoop(random_agent(rng, 2, 2), fig5)
        chain = build_global_chain(pal)
        traj = trajectory_distribution(pal, 1)
        assert np.allclose(traj.joint.probs.reshape(-1), chain.initial.probs,
                           atol=1e-15)

    def test_markov_property_exact(self, rng):
        pal = PerceptActionLoop(random_agent(rng, 2, 2),
                                random_environment(rng, 2, 2))
        flat = trajectory_distribution(pal, 3).joint.probs.reshape(16, 16, 16)
        j01 = flat.sum(axis=2)
        j12 = flat.sum(axis=0)
        j1 = j01.sum(axis=0)
        for u0 in range(16):
            for u1 in range(16):
                if j01[u0, u1] > 0:
                    lhs = flat[u0, u1] / j01[u0, u1]
                    rhs = j12[u1] / j1[u1]
                    assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_marginal_matches_kernel_power(self, rng):
        pal = PerceptActionLoop(random_agent(rng, 2, 2),
                                random_environment(rng, 2, 2))
        chain = build_global_chain(pal)
        traj = trajectory_distribution(pal, 3).joint
        p2 = chain.initial.probs @ np.linalg.matrix_power(chain.kernel.probs, 2)
        m2 = traj.marginal(("M2", "A2", "S2", "Z2")).probs.reshape(-1)
        assert np.max(np.abs(p2 - m2)) < 1e-12

    def test_normalized(self, golden_mean, rng):
        pal = PerceptActionLoop(random_agent(rng, 2, 2), golden_mean)
        traj = trajectory_distribution(pal, 4).joint
        assert traj.probs.sum() == pytest.approx(1.0, abs=1e-10)

    def test_budget_error_reports_required_size(self, rng):
        pal = PerceptActionLoop(random_agent(rng, 2, 3),
                                random_environment(rng, 2, 3))
        with pytest.raises(BudgetError) as excinfo:
            trajectory_distribution(pal, 5)
        assert excinfo.value.required == (3 * 2 * 2 * 3) ** 5


class TestWorkRate:
    def test_identity_agent_extracts_nothing(self, rng):
        for _ in range(5):
            env = random_environment(rng, 2, 2)
            pal = PerceptActionLoop(build_identity(env.alphabet), env)
            assert abs(work_rate(pal, tol=1e-13).rate) < 1e-10

    def test_fig5_uniform_rate(self, fig5):
        pal = PerceptActionLoop(build_uniform(fig5.alphabet), fig5)
        report = work_rate(pal)
        assert abs(report.rate - FIG5_MEA_RATE_BITS) < 1e-9
        assert report.units == "bits"

    def test_fig5_optimal_rate_matches_closed_form(self, fig5):
        p0 = 2 ** -0.5
        pal = PerceptActionLoop(build_memoryless(fig5.alphabet, [p0, 1 - p0]), fig5)
        rate = work_rate(pal, base="nats").rate
        assert abs(rate - 0.5 * math.log(0.75 + 2 ** -0.5)) < 1e-6

    def test_per_round_within_entropy_bounds(self, rng):
        # -log|S| <= W_t <= log|A| for every round
        pal = PerceptActionLoop(random_agent(rng, 2, 2),
                                random_environment(rng, 2, 2))
        report = work_rate(pal, rounds=12, base="nats")
        for w in report.per_round:
            assert -math.log(2) - 1e-12 <= w <= math.log(2) + 1e-12

    def test_rate_matches_truncated_mean(self, fig5):
        # loops with modest transients: the truncated Cesàro mean carries an
        # O(total transient / N) error, so wild starts need larger N
        gen = np.random.default_rng(2)
        loops = [
            PerceptActionLoop(random_agent(gen, 2, 2), random_environment(gen, 2, 2)),
            PerceptActionLoop(build_last_action(fig5.alphabet, [0.5, 0.5]), fig5),
            PerceptActionLoop(build_uniform(fig5.alphabet), fig5),
        ]
        for pal in loops:
            report = work_rate(pal, base="nats")
            n_rounds = 5000 * report.period_used
            truncated = work_rate(pal, rounds=n_rounds, base="nats")
            assert abs(np.mean(truncated.per_round) - report.rate) < 1e-4

    def test_product_env_decomposition(self, golden_mean):
        # W = <H(A|M)> - h(S) - <predictiveness>, each term computed by its
        # own route, for a loop whose scores vanish identically
        agent = build_predictive(build_uniform(golden_mean.alphabet), golden_mean)
        pal = PerceptActionLoop(agent, golden_mean)
        lhs = work_rate(pal, base="nats").rate
        action_term = mean_action_entropy(pal, base="nats")
        h = entropy_rate(golden_mean, base="nats")
        cmi_term = am_predictiveness(pal, horizon=4, base="nats").mean
        assert abs(lhs - (action_term - h - cmi_term)) < 1e-6

    def test_iid_source_decomposition(self):
        from workcap import EnvironmentModel
        phi = np.zeros((2, 1, 2, 1))
        phi[:, 0, 0, 0] = 0.75
        phi[:, 0, 1, 0] = 0.25
        env = EnvironmentModel(("0", "1"), ("z",), phi, np.array([1.0]))
        pal = PerceptActionLoop(build_uniform(env.alphabet), env)
        lhs = work_rate(pal, base="nats").rate
        rhs = math.log(2) - entropy_rate(env, base="nats") - 0.0
        assert abs(lhs - rhs) < 1e-9


class TestPredictiveness:
    def test_uniform_agent_on_fig5_round_zero(self, fig5):
        pal = PerceptActionLoop(build_uniform(fig5.alphabet), fig5)
        expected = 0.8112781244591328 - 0.5  # I[A_0; S_0] in bits
        assert predictiveness_score(pal, 0) == pytest.approx(expected, abs=1e-6)

    def test_last_action_agent_scores_zero(self, fig5):
        pal = PerceptActionLoop(build_last_action(fig5.alphabet, [0.5, 0.5]), fig5)
        for t in range(4):
            assert abs(predictiveness_score(pal, t)) <= 1e-10

    def test_am_predictiveness_three_loops(self, fig5, golden_mean):
        pred = build_predictive(build_uniform(golden_mean.alphabet), golden_mean)
        est = am_predictiveness(PerceptActionLoop(pred, golden_mean), horizon=4)
        assert est.mean == pytest.approx(0.0, abs=1e-10)

        last = build_last_action(fig5.alphabet, [0.5, 0.5])
        est = am_predictiveness(PerceptActionLoop(last, fig5), horizon=4)
        assert est.mean == pytest.approx(0.0, abs=1e-10)

        uni = build_uniform(fig5.alphabet)
        est = am_predictiveness(PerceptActionLoop(uni, fig5), horizon=4)
        assert est.mean == pytest.approx(0.3112781244591328, abs=1e-3)
        assert est.horizon == 4

    def test_future_predictiveness_zero_for_predictive_agent(self, golden_mean):
        pred = build_predictive(build_uniform(golden_mean.alphabet), golden_mean)
        pal = PerceptActionLoop(pred, golden_mean)
        assert future_predictiveness(pal, t=1, future_len=2) == pytest.approx(
            0.0, abs=1e-10)

    def test_future_predictiveness_zero_on_iid_source(self):
        from workcap import EnvironmentModel
        phi = np.zeros((2, 1, 2, 1))
        phi[:, 0, 0, 0] = 0.75
        phi[:, 0, 1, 0] = 0.25
        env = EnvironmentModel(("0", "1"), ("z",), phi, np.array([1.0]))
        pal = PerceptActionLoop(build_uniform(env.alphabet), env)
        assert future_predictiveness(pal, t=1, future_len=2) == pytest.approx(
            0.0, abs=1e-12)

    def test_future_predictiveness_positive_on_golden_mean(self, golden_mean):
        pal = PerceptActionLoop(build_uniform(golden_mean.alphabet), golden_mean)
        value = future_predictiveness(pal, t=1, future_len=1)
        assert value > 1e-3

    def test_future_predictiveness_monotone_in_k(self, golden_mean):
        pal = PerceptActionLoop(build_uniform(golden_mean.alphabet), golden_mean)
        values = [future_predictiveness(pal, t=1, future_len=k) for k in (1, 2, 3)]
        assert values[0] <= values[1] + 1e-12
        assert values[1] <= values[2] + 1e-12


class TestMaxEntropyActions:
    def test_uniform_agent(self, fig5):
        verdict, estimate = has_max_entropy_actions(
            PerceptActionLoop(build_uniform(fig5.alphabet), fig5))
        assert verdict
        assert estimate == pytest.approx(math.log(2), abs=1e-12)

    def test_last_action_agent_limit_zero(self, fig5):
        verdict, estimate = has_max_entropy_actions(
            PerceptActionLoop(build_last_action(fig5.alphabet, [0.5, 0.5]), fig5))
        assert not verdict
        assert estimate == pytest.approx(0.0, abs=1e-12)

    def test_delta_agent(self, fig5):
        verdict, estimate = has_max_entropy_actions(
            PerceptActionLoop(build_memoryless(fig5.alphabet, [1.0, 0.0]), fig5))
        assert not verdict
        assert estimate == pytest.approx(0.0, abs=1e-12)
