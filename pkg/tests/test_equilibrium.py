import numpy as np
import pytest
from numpy.testing import assert_allclose

from berknash.errors import DegenerateRegressor, InvalidParams, ZeroBaselineCost
from berknash.game.equilibrium import (
    EquilibriumKind,
    aggregate_cost,
    best_response_gap,
    bound_constants,
    consistent_theta,
    mean_field_limit,
    mean_field_sweep,
    perceived_matrix,
    solve_bne,
    solve_nash,
    value_of_misspecification,
    vom_bound_check,
)
from berknash.game.model import AttentionStructure, ConjectureKind, NetworkGame, generate_scenario, sparsify
from berknash.utils.linalg import solve_linear

RING_COST_NE = -0.5 * 3 * 0.625 ** 2
RING_COST_BN = -60.0 / 169.0


@pytest.mark.unit
class TestAggregateCost:
    def test_zero_action(self, pair_game):
        assert aggregate_cost(pair_game, [0.0, 0.0]) == 0.0

    def test_pair_equilibrium(self, pair_game):
        x = np.full(2, 2.0 / 3.0)
        assert aggregate_cost(pair_game, x) == pytest.approx(-4.0 / 9.0, abs=1e-15)
        assert aggregate_cost(pair_game, x) == pytest.approx(-0.5 * x @ x, abs=1e-15)

    def test_decoupled_unit_vector(self):
        game = NetworkGame(G=np.zeros((2, 2)), r=[2.0, 2.0], b=[0.0, 0.0], sigma=[0.0, 0.0])
        assert aggregate_cost(game, [1.0, 0.0]) == pytest.approx(1.0)

    def test_wrong_length(self, pair_game):
        with pytest.raises(InvalidParams):
            aggregate_cost(pair_game, [1.0, 1.0, 1.0])


@pytest.mark.unit
class TestNash:
    def test_decoupled(self, decoupled_game):
        result = solve_nash(decoupled_game)
        assert_allclose(result.x, [1.0, 0.5, 0.5])
        assert result.kind is EquilibriumKind.NE

    def test_pair(self, pair_game):
        assert_allclose(solve_nash(pair_game).x, [2.0 / 3.0] * 2, rtol=1e-14)

    def test_ring(self, ring_game):
        result = solve_nash(ring_game)
        assert_allclose(result.x, [0.625] * 3, rtol=1e-14)
        assert_allclose(result.theta, [0.375] * 3, rtol=1e-14)
        assert result.residual <= 1e-12

    def test_cost_identity_on_random_games(self, random_game):
        rng = np.random.default_rng(10)
        for _ in range(100):
            game = random_game(rng, int(rng.integers(2, 30)))
            x = solve_nash(game).x
            expected = -0.5 * np.dot(game.r * x, x)
            assert abs(aggregate_cost(game, x) - expected) <= 1e-10 * abs(expected)


@pytest.mark.unit
class TestBerkNash:
    def test_constant_and_aggregate_match_nash(self, random_game):
        rng = np.random.default_rng(11)
        for _ in range(100):
            game = random_game(rng, int(rng.integers(3, 30)))
            x_ne = solve_nash(game).x
            for kind in ("constant", "aggregate"):
                x = solve_bne(game, kind).x
                assert np.max(np.abs(x - x_ne)) <= 1e-12 * max(1.0, np.max(np.abs(x_ne)))

    def test_constant_theta_is_true_influence(self, ring_game):
        result = solve_bne(ring_game, "constant")
        assert result.kind is EquilibriumKind.BNE_CONSTANT
        assert_allclose(result.theta, [0.375] * 3, rtol=1e-14)

    def test_global_mean_field_pair(self, pair_game):
        result = solve_bne(pair_game, ConjectureKind.GMF)
        assert_allclose(result.x, [2.0 / 3.0] * 2, rtol=1e-14)
        assert_allclose(result.gamma, [0.5, 0.5])
        assert_allclose(result.theta, [0.5, 0.5])
        assert result.kind is EquilibriumKind.BNE_GMF

    def test_global_mean_field_closed_form_matches_linear_solve(self, random_game):
        rng = np.random.default_rng(12)
        for _ in range(20):
            game = random_game(rng, int(rng.integers(3, 20)), nonnegative=True)
            closed = solve_bne(game, "gmf").x
            H = perceived_matrix(game, "gmf")
            assert_allclose(closed, solve_linear(game.R + H, game.b), rtol=1e-10)

    def test_local_mean_field_ring(self, ring_game, ring_next):
        result = solve_bne(ring_game, "lmf", ring_next)
        assert_allclose(result.x, [10.0 / 13.0] * 3, rtol=1e-14)
        assert result.kind is EquilibriumKind.BNE_LMF
        assert result.residual <= 1e-12

    def test_local_mean_field_full_pair_is_nash(self, pair_game, pair_attention):
        assert_allclose(solve_bne(pair_game, "lmf", pair_attention).x, solve_nash(pair_game).x, rtol=1e-14)

    def test_mixed_profile(self, ring_game, ring_next):
        result = solve_bne(ring_game, ["constant", "lmf", "gmf"], ring_next)
        H = np.array([[0.0, 0.3, 0.3], [0.0, 0.0, 0.3], [0.2, 0.2, 0.2]])
        assert_allclose(perceived_matrix(ring_game, ["constant", "lmf", "gmf"], ring_next), H)
        assert_allclose(result.x, np.linalg.solve(np.eye(3) + H, np.ones(3)), rtol=1e-12)
        assert result.kind is EquilibriumKind.BNE_MIXED

    def test_lmf_needs_attention(self, ring_game):
        with pytest.raises(InvalidParams):
            solve_bne(ring_game, "lmf")


@pytest.mark.unit
class TestConsistentTheta:
    def test_ring_at_nash(self, ring_game, ring_next):
        theta = consistent_theta(ring_game, ring_next, [0.625] * 3)
        assert_allclose(theta, [0.6] * 3, rtol=1e-14)

    def test_full_attention_on_symmetric_profile_recovers_row_sums(self, ring_game):
        theta = consistent_theta(ring_game, AttentionStructure.full(ring_game), [2.0] * 3)
        assert_allclose(theta, ring_game.G.sum(axis=1), rtol=1e-14)

    def test_conjecture_reproduces_the_action(self, ring_game, ring_next):
        x = np.full(3, 0.625)
        theta = consistent_theta(ring_game, ring_next, x)
        z = sparsify(ring_game, ring_next).astype(bool) @ x
        assert_allclose((ring_game.b - theta * z) / ring_game.r, x, rtol=1e-14)

    def test_distortion_shifts_numerator(self, ring_game, ring_next):
        theta = consistent_theta(ring_game, ring_next, [0.625] * 3, distortion=np.full(3, 0.125))
        assert_allclose(theta, [0.8] * 3, rtol=1e-14)

    def test_degenerate_regressor(self, ring_game, ring_next):
        with pytest.raises(DegenerateRegressor):
            consistent_theta(ring_game, ring_next, [1.0, 0.0, 1.0])


@pytest.mark.unit
class TestBestResponseGap:
    def test_true_model_has_no_gap(self, ring_game):
        assert_allclose(best_response_gap(ring_game, [0.625] * 3, ring_game.G), 0.0)

    def test_sparse_perception_at_nash(self, ring_game, ring_next):
        H = sparsify(ring_game, ring_next)
        assert_allclose(best_response_gap(ring_game, [0.625] * 3, H), [-0.1875] * 3, rtol=1e-14)


@pytest.mark.unit
class TestValueOfMisspecification:
    def test_ring(self, ring_game, ring_next):
        report = value_of_misspecification(ring_game, ring_next)
        assert report.cost_ne == pytest.approx(RING_COST_NE, rel=1e-14)
        assert report.cost_bn == pytest.approx(RING_COST_BN, rel=1e-13)
        assert report.vom == pytest.approx((RING_COST_BN - RING_COST_NE) / RING_COST_NE, rel=1e-12)
        assert report.vom == pytest.approx(-0.39408, abs=1e-5)
        assert report.sign_caveat
        assert report.constants.k1 == pytest.approx(6.25, rel=1e-12)
        assert report.cost_bound > 0.0

    def test_full_attention_pair_has_zero_vom(self, pair_game, pair_attention):
        report = value_of_misspecification(pair_game, pair_attention)
        assert report.vom == pytest.approx(0.0, abs=1e-14)
        assert report.delta_g_norm == 0.0

    def test_scale_invariance(self):
        for seed in range(50):
            game, attention = generate_scenario(8, 2, 0.4, seed=seed)
            base = value_of_misspecification(game, attention).vom
            scaled = value_of_misspecification(game.replace(b=2.0 * game.b), attention).vom
            assert scaled == pytest.approx(base, rel=1e-8, abs=1e-14)

    def test_zero_baseline_cost(self, ring_game, ring_next):
        with pytest.raises(ZeroBaselineCost):
            value_of_misspecification(ring_game.replace(b=np.zeros(3)), ring_next)

    def test_constants_absent_for_unstable_games(self):
        game = NetworkGame(G=[[0.0, 2.0], [2.0, 0.0]], r=[1.0, 1.0], b=[1.0, 1.0], sigma=[0.0, 0.0])
        assert bound_constants(game) is None

    def test_to_dict(self, ring_game, ring_next):
        data = value_of_misspecification(ring_game, ring_next).to_dict()
        assert set(data) >= {"vom", "cost_ne", "cost_bn", "sign_caveat", "constants", "cost_bound"}


@pytest.mark.unit
class TestBoundCheck:
    def test_ring_rows(self, ring_game, ring_next):
        report = vom_bound_check(ring_game, ring_next, [1.0, 0.0, 0.5])
        assert [row.scale for row in report.rows] == [0.0, 0.5, 1.0]
        assert report.identity_ok
        assert report.all_ok
        first = report.rows[0]
        assert first.vom == 0.0
        assert first.action_bound == 0.0
        assert first.ratio is None
        assert report.rows[-1].vom == pytest.approx((RING_COST_BN - RING_COST_NE) / RING_COST_NE, rel=1e-12)

    def test_invalid_scale(self, ring_game, ring_next):
        with pytest.raises(InvalidParams):
            vom_bound_check(ring_game, ring_next, [0.5, 1.5])

    def test_unstable_game(self):
        game = NetworkGame(G=[[0.0, 2.0], [2.0, 0.0]], r=[1.0, 1.0], b=[1.0, 1.0], sigma=[0.0, 0.0])
        with pytest.raises(InvalidParams):
            vom_bound_check(game, AttentionStructure(((1,), (0,))), [1.0])

    def test_spread_is_relative_to_smallest_scale(self, ring_game, ring_next):
        report = vom_bound_check(ring_game, ring_next, [0.0, 0.01, 0.5, 1.0])
        ratios = [row.ratio for row in report.rows[1:]]
        assert report.linearity_spread == pytest.approx(max(ratios) / ratios[0])
        assert report.linearity_spread >= 1.0

    def test_generated_instances(self):
        scales = [0.01, 0.1, 0.25, 0.5, 1.0]
        spreads = []
        for seed in range(50):
            game, attention = generate_scenario(12, 3, 0.3, seed=seed)
            report = vom_bound_check(game, attention, scales)
            assert report.all_ok
            spreads.append(report.linearity_spread)
        # a handful of instances land just above 3x
        assert max(spreads) <= 4.0

    def test_ratio_settles_as_scale_shrinks(self):
        game, attention = generate_scenario(12, 3, 0.3, seed=0)
        report = vom_bound_check(game, attention, [0.001, 0.01])
        assert report.linearity_spread == pytest.approx(1.0, abs=0.1)


@pytest.mark.unit
class TestMeanField:
    def test_limit(self):
        assert mean_field_limit(1.0, 1.0, 0.5) == pytest.approx(2.0 / 3.0)
        with pytest.raises(InvalidParams):
            mean_field_limit(1.0, 1.0, -1.0)

    def test_homogeneous_populations_hit_the_limit(self):
        rows = mean_field_sweep([10, 100], heterogeneity=0.0)
        assert all(row.max_gap <= 1e-12 for row in rows)

    def test_gap_shrinks_with_population(self):
        rows = mean_field_sweep([50, 200, 800])
        gaps = [row.max_gap for row in rows]
        assert all(later <= earlier + 1e-12 for earlier, later in zip(gaps, gaps[1:]))
        assert gaps[-1] <= 1e-3
        assert rows[0].limit == pytest.approx(2.0 / 3.0)

    def test_rejects_tiny_population(self):
        with pytest.raises(InvalidParams):
            mean_field_sweep([1])
