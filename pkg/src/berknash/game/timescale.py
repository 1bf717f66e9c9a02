"""
Two-time-scale simulation: agents learn on the fast scale while the designer
moves the distortion on the slow one.

Each outer step runs ``inner_steps_per_outer`` learning steps against the
distorted signal (Gx)_i + delta_i + eta_i, then takes one projected gradient
step delta <- Feas(delta - beta_k grad f(delta)), where Feas rescales radially
onto the budget ellipsoid delta' A delta <= Gamma.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from ..errors import InfeasibleBudget, InvalidParams, NumericalFailure
from ..utils.file_utils import write_csv
from ..utils.linalg import as_vector, solve_linear
from .arbitrage import assemble_qcqp, designer_gradient, designer_objective, solve_arbitrage
from .learning import LearningDynamics, LearningState, StepSchedule
from .model import AttentionStructure, ConjectureClass, ConjectureKind, ConjectureSpec, NetworkGame, validate
from .trace import Trace, should_record

logger = logging.getLogger(__name__)


@dataclass
class TwoScaleConfig:
    budget: float
    fast: StepSchedule = field(default_factory=StepSchedule)
    slow: StepSchedule = field(default_factory=lambda: StepSchedule(a=0.05, k0=10.0))
    a_weights: Optional[np.ndarray] = None
    inner_steps_per_outer: int = 1
    total_steps: int = 5000
    seed: int = 0
    diagnostic_eps: float = 1e-4
    warm_start: bool = True
    initial_delta: Optional[np.ndarray] = None
    blowup_bound: Optional[float] = None

    def check(self) -> None:
        """
        Raises:
            InfeasibleBudget: if the budget is not positive.
            InvalidParams: if beta_k < alpha_{k * inner_steps_per_outer} can fail for some k >= 0.
        """
        if self.budget <= 0.0:
            raise InfeasibleBudget(f"distortion budget must be positive, got {self.budget}")
        if self.inner_steps_per_outer < 1 or self.total_steps < 1:
            raise InvalidParams("inner_steps_per_outer and total_steps must be positive")
        if self.diagnostic_eps <= 0.0:
            raise InvalidParams("diagnostic_eps must be positive")
        # the designer's step k follows the fast step with index k * inner_steps_per_outer
        slow, fast, m = self.slow, self.fast, self.inner_steps_per_outer
        if slow.a > 0.0 and not (slow.a * m < fast.a and slow.a * fast.k0 < fast.a * slow.k0):
            raise InvalidParams(
                "slow steps must stay below fast steps for every k >= 0",
                details={"a": fast.a, "k0": fast.k0, "b_hat": slow.a, "k1": slow.k0, "inner_steps_per_outer": m},
            )


@dataclass
class FinalReport:
    x: np.ndarray
    theta: np.ndarray
    delta: np.ndarray
    delta_star: np.ndarray
    lambda_star: float
    dist_delta: float
    dist_x_bn: float
    dist_x_ne: float
    f_final: float
    f_opt: float
    last_crossing: Dict[str, int]
    steps: int
    fast_steps: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "x": [float(v) for v in self.x],
            "theta": [float(v) for v in self.theta],
            "delta": [float(v) for v in self.delta],
            "delta_star": [float(v) for v in self.delta_star],
            "lambda_star": self.lambda_star,
            "dist_delta": self.dist_delta,
            "dist_x_bn": self.dist_x_bn,
            "dist_x_ne": self.dist_x_ne,
            "f_final": self.f_final,
            "f_opt": self.f_opt,
            "last_crossing": dict(self.last_crossing),
            "steps": self.steps,
            "fast_steps": self.fast_steps,
        }


def project_budget(delta: np.ndarray, a_weights: np.ndarray, budget: float) -> np.ndarray:
    """Radial rescaling onto delta' A delta <= budget (exact projection only for A proportional to I)."""
    used = float(delta @ (a_weights * delta))
    if used <= budget:
        return delta
    return delta * np.sqrt(budget / used)


def run_two_timescale(
    game: NetworkGame,
    attention: Optional[AttentionStructure],
    config: TwoScaleConfig,
    conjecture: Optional[ConjectureSpec] = None,
) -> Tuple[Trace, FinalReport]:
    """
    Coupled fast/slow simulation.

    Raises:
        Diverged: if the fast loop blows up.
        NumericalFailure: if the designer gradient turns non-finite.
    """
    config.check()
    conjecture = ConjectureClass.coerce(conjecture if conjecture is not None else ConjectureKind.LMF, game.n)
    if conjecture.uses(ConjectureKind.LMF):
        report = validate(game, attention, conjecture)
        if report.learning_stable is False:
            logger.warning("rho(R^-1 G~) >= 1; the fast loop is not expected to settle")

    a_weights = np.ones(game.n) if config.a_weights is None else as_vector(config.a_weights, "a_weights")
    q = assemble_qcqp(game, attention, a_weights, config.budget, conjecture)
    target = solve_arbitrage(q)
    dynamics = LearningDynamics(game, conjecture, attention, config.blowup_bound)

    if config.warm_start:
        x0 = solve_linear(game.R + game.G, game.b)
        theta0 = dynamics.fitted_theta(x0)
    else:
        x0, theta0 = game.b / game.r, np.zeros(game.n)
    state = LearningState(k=0, theta=theta0, x=x0, rng=np.random.default_rng(config.seed))
    delta = np.zeros(game.n) if config.initial_delta is None else as_vector(config.initial_delta, "initial_delta")
    delta = project_budget(delta, a_weights, config.budget)

    eps = config.diagnostic_eps
    last = {"x": 0, "theta": 0, "delta": 0}
    trace = Trace(n=game.n, with_delta=True)
    for k in range(config.total_steps):
        x_before, theta_before = state.x, state.theta
        for _ in range(config.inner_steps_per_outer):
            state = dynamics.step(state, config.fast(state.k), delta)

        gradient = designer_gradient(q, delta)
        if not np.all(np.isfinite(gradient)):
            raise NumericalFailure(f"designer gradient is non-finite at outer step {k + 1}")
        new_delta = project_budget(delta - config.slow(k) * gradient, a_weights, config.budget)

        norms = {
            "x": float(np.linalg.norm(state.x - x_before)),
            "theta": float(np.linalg.norm(state.theta - theta_before)),
            "delta": float(np.linalg.norm(new_delta - delta)),
        }
        for name, value in norms.items():
            if value > eps:
                last[name] = k + 1
        if should_record(k + 1):
            trace.record(k + 1, state.x, state.theta, norms["x"], norms["theta"], new_delta, norms["delta"])
        delta = new_delta

    final = FinalReport(
        x=state.x,
        theta=state.theta,
        delta=delta,
        delta_star=target.delta,
        lambda_star=target.lam,
        dist_delta=float(np.linalg.norm(delta - target.delta)),
        dist_x_bn=float(np.linalg.norm(state.x - q.M @ (game.b - target.delta))),
        dist_x_ne=float(np.linalg.norm(state.x - solve_linear(game.R + game.G, game.b - delta))),
        f_final=designer_objective(q, delta),
        f_opt=designer_objective(q, target.delta),
        last_crossing=last,
        steps=config.total_steps,
        fast_steps=state.k,
    )
    logger.info(
        f"Two-time-scale run finished: |delta-delta*|={final.dist_delta:.3e}, last crossings {last}"
    )
    return trace, final


def emit_diagnostics(trace: Trace, path: Union[str, Path]) -> Path:
    """Write k, dx_norm, dtheta_norm, ddelta_norm as CSV."""
    if len(trace) == 0:
        raise InvalidParams("cannot emit diagnostics for an empty trace")
    return write_csv(trace.diagnostics_frame(), path)
