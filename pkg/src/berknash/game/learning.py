"""
Joint learning dynamics of conjectures and actions.

At step k every agent observes y_i = (Gx)_i + eta_i (plus a designer shift
delta_i when the channel is distorted), updates its conjecture by one
stochastic-gradient step on the squared prediction error,

    theta_i(k+1) = theta_i(k) + alpha_k (y_i(k) - theta_i(k) z_i(k)) z_i(k),

and best-responds to the regressor it saw:

    x_i(k+1) = (b_i - theta_i(k+1) z_i(k)) / r_i.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..errors import DegenerateRegressor, Diverged, InvalidParams
from ..utils.linalg import as_vector, solve_linear
from .equilibrium import DEGENERATE_RTOL, perceived_matrix
from .model import (
    AttentionStructure,
    ConjectureClass,
    ConjectureKind,
    ConjectureSpec,
    NetworkGame,
    regressor_operator,
    validate,
)
from .trace import Trace, should_record

logger = logging.getLogger(__name__)

BLOWUP_FACTOR = 1e6
VERDICT_FACTOR = 10.0


@dataclass(frozen=True)
class StepSchedule:
    """Diminishing step sizes a / (k + k0)."""

    a: float = 1.0
    k0: float = 10.0

    def __post_init__(self):
        if not np.isfinite(self.a) or self.a < 0.0:
            raise InvalidParams(f"step scale must be nonnegative, got {self.a}")
        if not np.isfinite(self.k0) or self.k0 < 1.0:
            raise InvalidParams(f"step offset k0 must be at least 1, got {self.k0}")
        if self.a == 0.0:
            logger.warning("Step scale is zero; conjectures will not move")

    def __call__(self, k: int) -> float:
        return self.a / (k + self.k0)


@dataclass
class LearningState:
    """Iterate at step k. The generator is owned by the run and advances in place."""

    k: int
    theta: np.ndarray
    x: np.ndarray
    rng: np.random.Generator


def initial_state(
    game: NetworkGame,
    seed: Optional[int] = None,
    x0: Optional[np.ndarray] = None,
    theta0: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
) -> LearningState:
    """Start at the isolated best response x = b/r with theta = 0 unless given."""
    x = game.b / game.r if x0 is None else as_vector(x0, "x0")
    theta = np.zeros(game.n) if theta0 is None else as_vector(theta0, "theta0")
    if x.shape != (game.n,) or theta.shape != (game.n,):
        raise InvalidParams(f"initial x and theta must have length {game.n}")
    return LearningState(k=0, theta=np.array(theta), x=np.array(x), rng=rng or np.random.default_rng(seed))


def default_blowup_bound(game: NetworkGame) -> float:
    return BLOWUP_FACTOR * (1.0 + float(np.max(np.abs(game.b))) / game.r_min)


class LearningDynamics:
    """Precomputed regressor map for repeated steps on one game."""

    def __init__(
        self,
        game: NetworkGame,
        conjecture: ConjectureSpec,
        attention: Optional[AttentionStructure] = None,
        blowup_bound: Optional[float] = None,
    ):
        self.game = game
        self.conjecture = ConjectureClass.coerce(conjecture, game.n)
        self.attention = attention
        self.W, self.offset = regressor_operator(game, self.conjecture, attention)
        self.blowup_bound = blowup_bound if blowup_bound is not None else default_blowup_bound(game)

    def regressors(self, x: np.ndarray) -> np.ndarray:
        return self.W @ x + self.offset

    def fitted_theta(self, x: np.ndarray, distortion: Optional[np.ndarray] = None) -> np.ndarray:
        """Conjectures with zero noiseless prediction error at x."""
        z = self.regressors(x)
        threshold = DEGENERATE_RTOL * float(np.max(np.abs(x)))
        bad = [i for i in range(self.game.n) if abs(z[i]) <= threshold]
        if bad:
            raise DegenerateRegressor(f"regressor vanishes for agents {bad}", details={"agents": bad})
        influence = self.game.G @ x
        if distortion is not None:
            influence = influence + distortion
        return influence / z

    def step(self, state: LearningState, alpha: float, distortion: Optional[np.ndarray] = None) -> LearningState:
        game = self.game
        z = self.regressors(state.x)
        eta = state.rng.standard_normal(game.n) * game.sigma
        y = game.G @ state.x + eta
        if distortion is not None:
            y = y + distortion
        theta = state.theta + alpha * (y - state.theta * z) * z
        x = (game.b - theta * z) / game.r

        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(theta))):
            raise Diverged(f"non-finite iterate at step {state.k + 1}", details={"step": state.k + 1})
        peak = float(np.max(np.abs(x)))
        if peak > self.blowup_bound:
            raise Diverged(
                f"|x| reached {peak:.3e} at step {state.k + 1}, above bound {self.blowup_bound:.3e}",
                details={"step": state.k + 1, "peak": peak},
            )
        return LearningState(k=state.k + 1, theta=theta, x=x, rng=state.rng)


def step(
    game: NetworkGame,
    attention: Optional[AttentionStructure],
    conjecture: ConjectureSpec,
    state: LearningState,
    schedule: StepSchedule,
    distortion: Optional[np.ndarray] = None,
) -> LearningState:
    """One joint update with step size schedule(state.k)."""
    return LearningDynamics(game, conjecture, attention).step(state, schedule(state.k), distortion)


class Verdict(str, Enum):
    CONVERGED_NE = "converged-to-NE"
    CONVERGED_BN = "converged-to-BN"
    CONVERGED_ELSEWHERE = "converged-elsewhere"
    NOT_CONVERGED = "not-converged"


@dataclass
class RunReport:
    verdict: Verdict
    steps: int
    converged: bool
    dist_ne: float
    dist_bn: float
    x_ne: np.ndarray
    x_bn: np.ndarray
    min_regressor: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "steps": self.steps,
            "converged": self.converged,
            "dist_ne": self.dist_ne,
            "dist_bn": self.dist_bn,
            "x_ne": [float(v) for v in self.x_ne],
            "x_bn": [float(v) for v in self.x_bn],
            "min_regressor": self.min_regressor,
        }


def candidate_limits(
    game: NetworkGame,
    conjecture: ConjectureClass,
    attention: Optional[AttentionStructure],
    distortion: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Nash and perceived-matrix equilibria for the (possibly shifted) bias b - delta."""
    rhs = game.b if distortion is None else game.b - distortion
    x_ne = solve_linear(game.R + game.G, rhs)
    x_bn = solve_linear(game.R + perceived_matrix(game, conjecture, attention), rhs)
    return x_ne, x_bn


def classify(
    converged: bool, dist_ne: float, dist_bn: float, tol: float, mean_field: bool
) -> Verdict:
    if not converged:
        return Verdict.NOT_CONVERGED
    threshold = VERDICT_FACTOR * tol
    near_ne, near_bn = dist_ne <= threshold, dist_bn <= threshold
    if near_ne and near_bn:
        return Verdict.CONVERGED_BN if mean_field else Verdict.CONVERGED_NE
    if near_bn:
        return Verdict.CONVERGED_BN
    if near_ne:
        return Verdict.CONVERGED_NE
    return Verdict.CONVERGED_ELSEWHERE


def run(
    game: NetworkGame,
    attention: Optional[AttentionStructure],
    conjecture: ConjectureSpec,
    schedule: Optional[StepSchedule] = None,
    seed: Optional[int] = None,
    max_steps: int = 200_000,
    tol: float = 1e-6,
    window: int = 100,
    x0: Optional[np.ndarray] = None,
    theta0: Optional[np.ndarray] = None,
    distortion: Optional[np.ndarray] = None,
    blowup_bound: Optional[float] = None,
) -> Tuple[LearningState, Trace, RunReport]:
    """
    Iterate until ||x(k+1) - x(k)||_inf <= tol for ``window`` consecutive
    steps or ``max_steps`` is reached, then compare the terminal profile with
    both candidate limits in the infinity norm.

    Raises:
        Diverged: if an iterate blows up.
    """
    if max_steps < 1 or window < 1:
        raise InvalidParams("max_steps and window must be positive")
    if tol <= 0.0:
        raise InvalidParams("tol must be positive")
    schedule = schedule or StepSchedule()
    dynamics = LearningDynamics(game, conjecture, attention, blowup_bound)
    conjecture = dynamics.conjecture

    if conjecture.uses(ConjectureKind.LMF):
        report = validate(game, attention, conjecture)
        if report.learning_stable is False:
            logger.warning(
                f"rho(R^-1 G~)={report.spectral_radius_rinv_gtilde:.4g} >= 1; convergence is not expected"
            )

    x_ne, x_bn = candidate_limits(game, conjecture, attention, distortion)
    state = initial_state(game, seed, x0, theta0)
    trace = Trace(n=game.n)
    quiet = 0
    min_regressor = np.inf
    converged = False
    while state.k < max_steps:
        min_regressor = min(min_regressor, float(np.min(np.abs(dynamics.regressors(state.x)))))
        new = dynamics.step(state, schedule(state.k), distortion)
        dx = new.x - state.x
        if should_record(new.k):
            trace.record(new.k, new.x, new.theta, np.linalg.norm(dx), np.linalg.norm(new.theta - state.theta))
        quiet = quiet + 1 if np.max(np.abs(dx)) <= tol else 0
        state = new
        if quiet >= window:
            converged = True
            break

    dist_ne = float(np.max(np.abs(state.x - x_ne)))
    dist_bn = float(np.max(np.abs(state.x - x_bn)))
    verdict = classify(converged, dist_ne, dist_bn, tol, conjecture.mean_field)
    logger.info(
        f"Learning run finished after {state.k} steps: {verdict.value} (|x-x_NE|={dist_ne:.3e}, |x-x_BN|={dist_bn:.3e})"
    )
    logger.debug(f"Smallest regressor magnitude seen: {min_regressor:.3e}")
    report = RunReport(
        verdict=verdict,
        steps=state.k,
        converged=converged,
        dist_ne=dist_ne,
        dist_bn=dist_bn,
        x_ne=x_ne,
        x_bn=x_bn,
        min_regressor=min_regressor,
    )
    return state, trace, report
