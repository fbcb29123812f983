import math

import numpy as np
import pytest

from workcap import (ConvergenceError, DimensionError, DomainError,
                     TransitionKernel, asymptotic_profile, classify_states,
                     first_passage, state_period)
from workcap.random_models import random_kernel, random_structured_kernel

SWAP = TransitionKernel([[0.0, 1.0], [1.0, 0.0]])
ABSORB = TransitionKernel([[1.0, 0.0], [1.0, 0.0]])
CYCLE3 = TransitionKernel([[0, 1, 0], [0, 0, 1], [1, 0, 0]])


def stationary_by_linear_solve(P: np.ndarray) -> np.ndarray:
    """Independent oracle: solve pi P = pi, sum(pi) = 1 as a linear system."""
    n = P.shape[0]
    A = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    return pi


def brute_force_cesaro(P: np.ndarray, N: int) -> np.ndarray:
    """Independent oracle: (1/N) sum_{t<N} P^t."""
    n = P.shape[0]
    acc = np.zeros((n, n))
    power = np.eye(n)
    for _ in range(N):
        acc += power
        power = power @ P
    return acc / N


class TestClassify:
    def test_swap_is_one_recurrent_class(self):
        cls = classify_states(SWAP)
        assert cls.classes == ((0, 1),)
        assert cls.recurrent.tolist() == [True, True]

    def test_absorbing_chain(self):
        cls = classify_states(ABSORB)
        assert cls.recurrent.tolist() == [True, False]
        assert ((0,) in cls.classes) and ((1,) in cls.classes)

    def test_identity_three_singletons(self):
        cls = classify_states(TransitionKernel(np.eye(3)))
        assert cls.classes == ((0,), (1,), (2,))
        assert all(cls.class_recurrent)

    def test_non_square_rejected(self):
        rect = TransitionKernel([[0.5, 0.25, 0.25]])
        with pytest.raises(DimensionError):
            classify_states(rect)


class TestPeriod:
    def test_swap_period_two(self):
        assert state_period(SWAP, 0) == 2

    def test_three_cycle(self):
        for s in range(3):
            assert state_period(CYCLE3, s) == 3

    def test_self_loop_gives_one(self):
        k = TransitionKernel([[0.5, 0.5], [1.0, 0.0]])
        assert state_period(k, 0) == 1

    def test_non_return_state_rejected(self):
        with pytest.raises(DomainError, match="state 1"):
            state_period(ABSORB, 1)


class TestAsymptoticProfile:
    def test_swap(self):
        profile = asymptotic_profile(SWAP)
        assert profile.period_lcm == 2
        assert np.allclose(profile.cesaro_matrix, 0.5)
        assert np.allclose(profile.subsequence_limits[1], np.eye(2))

    def test_absorbing(self):
        profile = asymptotic_profile(ABSORB)
        # starting from state 1, all time-averaged mass sits on state 0
        assert np.allclose(profile.cesaro_matrix[1], [1.0, 0.0])

    def test_one_state_degenerate(self):
        profile = asymptotic_profile(TransitionKernel([[1.0]]))
        assert profile.period_lcm == 1
        assert np.allclose(profile.cesaro_matrix, [[1.0]])

    def test_random_aperiodic_columns_equal_stationary(self, rng):
        kernel = random_kernel(rng, 4)
        profile = asymptotic_profile(kernel)
        assert profile.period_lcm == 1
        pi = stationary_by_linear_solve(kernel.probs)
        for row in profile.cesaro_matrix:
            assert np.allclose(row, pi, atol=1e-9)

    def test_subsequence_relation(self, rng):
        # Phi^(r)_inf = Phi^r Phi^(d)_inf
        for i in range(6):
            kernel = (random_structured_kernel(rng, 4) if i % 2
                      else random_kernel(rng, 3 + i % 3))
            profile = asymptotic_profile(kernel)
            d = profile.period_lcm
            last = profile.subsequence_limits[d - 1]
            for r in range(1, d + 1):
                expected = np.linalg.matrix_power(kernel.probs, r) @ last
                assert np.max(np.abs(profile.subsequence_limits[r - 1] - expected)) < 1e-9

    def test_cesaro_matches_brute_force(self, rng):
        for n in (2, 4, 6):
            kernel = random_kernel(rng, n)
            profile = asymptotic_profile(kernel)
            oracle = brute_force_cesaro(kernel.probs, 20_000 * profile.period_lcm)
            assert np.max(np.abs(oracle - profile.cesaro_matrix)) < 1e-3

    def test_transient_mass_vanishes(self):
        profile = asymptotic_profile(ABSORB)
        assert np.max(np.abs(profile.cesaro_matrix[:, 1])) < 1e-12

    def test_continuous_functional_cesaro(self, rng):
        # Cesàro mean of g(Phi^t) equals the mean of g over subsequence limits,
        # with g an entropy-of-rows functional
        def g(M):
            with np.errstate(divide="ignore", invalid="ignore"):
                terms = np.where(M > 0, -M * np.log(M), 0.0)
            return float(terms.sum(axis=1).mean())

        kernel = random_structured_kernel(rng, 5)
        profile = asymptotic_profile(kernel)
        d = profile.period_lcm
        N = 5000 * d
        power = np.eye(5)
        acc = 0.0
        for _ in range(N):
            acc += g(power)
            power = power @ kernel.probs
        lhs = acc / N
        rhs = sum(g(L) for L in profile.subsequence_limits) / d
        assert abs(lhs - rhs) < 1e-3

    def test_non_convergence_raises_with_residual(self):
        k = TransitionKernel([[0.5, 0.5], [0.1, 0.9]])
        with pytest.raises(ConvergenceError) as excinfo:
            asymptotic_profile(k, tol=1e-12, max_iter=2)
        assert excinfo.value.residual is not None

    def test_power_rows_sum_to_one(self, rng):
        kernel = random_kernel(rng, 5)
        for n in (1, 3, 10, 50):
            rows = kernel.power(n).sum(axis=1)
            assert np.max(np.abs(rows - 1.0)) < 1e-10


class TestFirstPassage:
    def test_swap(self):
        fp = first_passage(SWAP, horizon=8)
        assert fp.mean_return[0] == pytest.approx(2.0)
        assert fp.hit_prob[0, 1] == pytest.approx(1.0)
        assert np.max(fp.residual) < 1e-12

    def test_absorbing(self):
        fp = first_passage(ABSORB, horizon=8)
        assert fp.hit_prob[1, 1] == pytest.approx(0.0)  # never returns
        assert fp.hit_prob[1, 0] == pytest.approx(1.0)
        assert math.isinf(fp.mean_return[1])

    def test_cesaro_coefficients_formula(self, rng):
        # Pi[i, j] = f(i, j) / m(j, j) for recurrent j, both sides independent
        kernel = random_kernel(rng, 3)
        profile = asymptotic_profile(kernel)
        fp = first_passage(kernel, horizon=2500)
        for j in range(3):
            assert profile.recurrent[j]
            assert fp.residual[:, j].max() < 1e-8
            for i in range(3):
                lhs = profile.cesaro_matrix[i, j]
                rhs = fp.hit_prob[i, j] / fp.mean_return[j]
                assert abs(lhs - rhs) < 1e-6

    def test_horizon_validation(self):
        with pytest.raises(DomainError):
            first_passage(SWAP, horizon=0)


class TestKernelValidation:
    def test_rejects_bad_row_sum(self):
        with pytest.raises(DomainError, match="row 0"):
            TransitionKernel([[0.5, 0.4], [0.5, 0.5]])

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            TransitionKernel([[1.2, -0.2], [0.5, 0.5]])

    def test_immutable(self):
        with pytest.raises(ValueError):
            SWAP.probs[0, 0] = 0.3
