import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from berknash.errors import InfeasibleBudget, InvalidParams
from berknash.game.arbitrage import assemble_qcqp, designer_objective
from berknash.game.learning import StepSchedule
from berknash.game.model import generate_scenario
from berknash.game.timescale import TwoScaleConfig, emit_diagnostics, project_budget, run_two_timescale
from berknash.game.trace import Trace
from berknash.utils.file_utils import read_csv


def _deltas(trace):
    return np.vstack(trace.delta)


@pytest.mark.unit
class TestTwoScaleConfig:
    def test_defaults_keep_slow_below_fast(self):
        config = TwoScaleConfig(budget=1.0)
        config.check()
        assert all(config.slow(k) < config.fast(k) for k in range(10000))

    def test_slow_scale_too_large(self):
        with pytest.raises(InvalidParams):
            TwoScaleConfig(budget=1.0, slow=StepSchedule(a=1.0, k0=10.0)).check()

    def test_slow_scale_too_large_at_start(self):
        with pytest.raises(InvalidParams):
            TwoScaleConfig(budget=1.0, slow=StepSchedule(a=0.5, k0=4.0)).check()

    def test_frozen_designer_allowed(self):
        TwoScaleConfig(budget=1.0, slow=StepSchedule(a=0.0)).check()

    def test_inner_steps_tighten_the_ordering(self):
        with pytest.raises(InvalidParams):
            TwoScaleConfig(budget=1.0, inner_steps_per_outer=20).check()
        config = TwoScaleConfig(budget=1.0, inner_steps_per_outer=10)
        config.check()
        m = config.inner_steps_per_outer
        assert all(config.slow(k) < config.fast(k * m) for k in range(10000))

    def test_budget_must_be_positive(self):
        with pytest.raises(InfeasibleBudget):
            TwoScaleConfig(budget=0.0).check()


@pytest.mark.unit
class TestProjectBudget:
    def test_inside_is_untouched(self):
        delta = np.array([0.1, 0.1])
        assert project_budget(delta, np.ones(2), 1.0) is delta

    def test_radial_rescaling(self):
        out = project_budget(np.array([3.0, 4.0]), np.ones(2), 1.0)
        assert_allclose(out, [0.6, 0.8])

    def test_weighted(self):
        out = project_budget(np.array([1.0, 1.0]), np.array([2.0, 2.0]), 1.0)
        assert out @ (2.0 * out) == pytest.approx(1.0)


@pytest.mark.integration
class TestRunTwoTimescale:
    def test_frozen_designer_lets_agents_settle(self, pair_game, pair_attention):
        config = TwoScaleConfig(
            budget=0.08,
            fast=StepSchedule(a=10.0, k0=10.0),
            slow=StepSchedule(a=0.0),
            total_steps=3000,
            initial_delta=np.array([0.2, 0.2]),
        )
        trace, final = run_two_timescale(pair_game, pair_attention, config)
        assert final.dist_delta <= 1e-10
        assert final.dist_x_bn <= 1e-5
        assert_allclose(final.x, [8.0 / 15.0] * 2, atol=1e-5)
        assert final.last_crossing["delta"] == 0

    def test_noiseless_designer_reaches_optimum(self, pair_game, pair_attention):
        config = TwoScaleConfig(budget=0.08, slow=StepSchedule(a=0.5, k0=10.0), total_steps=2000)
        trace, final = run_two_timescale(pair_game, pair_attention, config)
        assert final.lambda_star == pytest.approx(1.0 / 9.0, abs=1e-10)
        assert final.dist_delta <= 1e-4
        assert_allclose(final.delta, [0.2, 0.2], atol=1e-4)
        assert final.f_final == pytest.approx(final.f_opt, abs=1e-8)

    def test_noiseless_network_reaches_optimum(self):
        game, attention = generate_scenario(12, 3, 0.3, seed=7, sigma=0.0)
        config = TwoScaleConfig(
            budget=1.0,
            fast=StepSchedule(a=1000.0, k0=1000.0),
            slow=StepSchedule(a=250.0, k0=1000.0),
            total_steps=5000,
        )
        _, final = run_two_timescale(game, attention, config)
        assert final.dist_delta <= 1e-4
        assert final.f_final == pytest.approx(final.f_opt, abs=1e-6)
        assert final.dist_x_bn <= 1e-3

    def test_iterates_stay_feasible_and_objective_decreases(self, pair_game, pair_attention):
        config = TwoScaleConfig(budget=0.08, slow=StepSchedule(a=0.5, k0=10.0), total_steps=1500)
        trace, _ = run_two_timescale(pair_game, pair_attention, config)
        deltas = _deltas(trace)
        assert np.all(np.sum(deltas ** 2, axis=1) <= 0.08 * (1.0 + 1e-12))
        q = assemble_qcqp(pair_game, pair_attention, np.ones(2), 0.08)
        values = [designer_objective(q, d) for d in deltas]
        assert all(later <= earlier + 1e-15 for earlier, later in zip(values, values[1:]))

    def test_trace_layout(self, pair_game, pair_attention):
        config = TwoScaleConfig(budget=0.08, total_steps=1200, inner_steps_per_outer=2)
        trace, final = run_two_timescale(pair_game, pair_attention, config)
        assert final.steps == 1200
        assert final.fast_steps == 2400
        assert len(trace) == 1020
        frame = trace.to_frame()
        assert list(frame.columns) == [
            "k", "x_1", "x_2", "theta_1", "theta_2", "delta_1", "delta_2",
            "dx_norm", "dtheta_norm", "ddelta_norm",
        ]

    def test_deterministic_given_seed(self):
        game, attention = generate_scenario(6, 2, 0.4, seed=3, sigma=0.05)
        config = TwoScaleConfig(budget=1.0, total_steps=300, seed=9)
        first, _ = run_two_timescale(game, attention, config)
        second, _ = run_two_timescale(game, attention, config)
        pd.testing.assert_frame_equal(first.to_frame(), second.to_frame())


@pytest.mark.unit
class TestEmitDiagnostics:
    def test_single_step(self, pair_game, pair_attention, tmp_path):
        trace, _ = run_two_timescale(pair_game, pair_attention, TwoScaleConfig(budget=0.08, total_steps=1))
        path = emit_diagnostics(trace, tmp_path / "diag.csv")
        frame = read_csv(path)
        assert list(frame.columns) == ["k", "dx_norm", "dtheta_norm", "ddelta_norm"]
        assert len(frame) == 1
        assert frame["ddelta_norm"].iloc[0] == trace.ddelta_norm[0]
        assert path.read_bytes().count(b"\r") == 0

    def test_empty_trace(self, tmp_path):
        with pytest.raises(InvalidParams):
            emit_diagnostics(Trace(n=2, with_delta=True), tmp_path / "diag.csv")


@pytest.mark.slow
class TestTimeScaleSeparation:
    def test_actions_settle_before_distortion(self):
        game, attention = generate_scenario(12, 3, 0.3, seed=7)
        for seed in range(20):
            _, final = run_two_timescale(game, attention, TwoScaleConfig(budget=1.0, seed=seed))
            assert final.last_crossing["x"] < final.last_crossing["delta"]
