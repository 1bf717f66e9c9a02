"""
The designer's cognitive-arbitrage problem.

Injecting a mean shift delta into the agents' signals moves the perceived
equilibrium to x(delta) = M (b - delta) with M = (R + G~)^-1. Minimizing the
true aggregate cost over delta under the budget delta' A delta <= Gamma is the
convex QCQP

    min f(delta) = delta' Q delta - 2 b' Q delta + c' delta
    s.t. delta' A delta <= Gamma,

with Q = M' (R/2 + (G + G')/2) M and c = M' b. Its solution is
delta(lambda) = (Q + lambda A)^-1 (Q b - c/2) for the multiplier lambda that
makes the budget tight, or lambda = 0 when the unconstrained minimum fits.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
from scipy.optimize import brentq

from ..errors import DegenerateRegressor, EmptyAttention, InfeasibleBudget, InvalidParams, NumericalFailure
from ..utils.linalg import as_vector, inverse, min_norm_solve, min_symmetric_eigenvalue, solve_linear
from .equilibrium import (
    EquilibriumResult,
    conjecture_profile,
    consistent_theta,
    equilibrium_kind,
    perceived_matrix,
)
from .model import AttentionStructure, ConjectureClass, ConjectureKind, ConjectureSpec, NetworkGame

logger = logging.getLogger(__name__)

PSD_RTOL = 1e-10
STATIONARY_RTOL = 1e-10
MAX_DOUBLINGS = 200
LAMBDA_FLOOR_RTOL = 1e-10


@dataclass
class QcqpData:
    Q: np.ndarray
    c: np.ndarray
    A: np.ndarray
    M: np.ndarray
    b: np.ndarray
    gamma_budget: float
    q_min_eig: float

    @property
    def a_weights(self) -> np.ndarray:
        return np.diag(self.A)

    @property
    def h(self) -> np.ndarray:
        """Right-hand side Q b - c/2 of the stationarity system."""
        return self.Q @ self.b - 0.5 * self.c


def assemble_qcqp(
    game: NetworkGame,
    attention: Optional[AttentionStructure],
    a_weights,
    gamma_budget: float,
    conjecture: Optional[ConjectureSpec] = None,
) -> QcqpData:
    """Build Q, c, A and the induced-response matrix M for the perceived game."""
    a_weights = as_vector(a_weights, "a_weights")
    if a_weights.shape != (game.n,):
        raise InvalidParams(f"a_weights has length {a_weights.shape[0]}, expected {game.n}")
    if np.any(a_weights <= 0.0):
        raise InvalidParams("distortion cost weights must be strictly positive")
    if not np.isfinite(gamma_budget):
        raise InvalidParams("budget must be finite")

    H = perceived_matrix(game, conjecture if conjecture is not None else ConjectureKind.LMF, attention)
    M = inverse(game.R + H)
    P = 0.5 * game.R + 0.5 * (game.G + game.G.T)
    Q = M.T @ P @ M
    Q = 0.5 * (Q + Q.T)
    q_min_eig = min_symmetric_eigenvalue(Q)
    logger.debug(f"Assembled QCQP for n={game.n}: min eig(Q)={q_min_eig:.3e}")
    return QcqpData(
        Q=Q,
        c=M.T @ game.b,
        A=np.diag(a_weights),
        M=M,
        b=np.array(game.b),
        gamma_budget=float(gamma_budget),
        q_min_eig=q_min_eig,
    )


def designer_objective(q: QcqpData, delta) -> float:
    delta = as_vector(delta, "delta")
    return float(delta @ q.Q @ delta - 2.0 * q.b @ q.Q @ delta + q.c @ delta)


def designer_gradient(q: QcqpData, delta: np.ndarray) -> np.ndarray:
    return 2.0 * q.Q @ delta - 2.0 * q.Q @ q.b + q.c


@dataclass
class DistortionPlan:
    delta: np.ndarray
    rho: np.ndarray
    lam: float
    gamma_budget: float
    a_weights: np.ndarray
    active: bool

    @property
    def budget_used(self) -> float:
        return float(self.delta @ (self.a_weights * self.delta))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "delta": [float(v) for v in self.delta],
            "rho": [float(v) for v in self.rho],
            "lambda": self.lam,
            "gamma_budget": self.gamma_budget,
            "a_weights": [float(v) for v in self.a_weights],
            "active": self.active,
            "budget_used": self.budget_used,
        }


def _weighted_min_norm(q: QcqpData) -> tuple:
    """Stationary point of f with the smallest delta' A delta, and its residual."""
    scale = 1.0 / np.sqrt(q.a_weights)
    u, residual = min_norm_solve(q.Q * scale[None, :], q.h)
    return scale * u, residual


def solve_arbitrage(q: QcqpData) -> DistortionPlan:
    """
    Optimal distortion with rho = 0.

    Raises:
        InfeasibleBudget: if Gamma <= 0.
        InvalidParams: if Q is not positive semidefinite.
        NumericalFailure: if the multiplier cannot be bracketed.
    """
    gamma = q.gamma_budget
    if gamma <= 0.0:
        raise InfeasibleBudget(f"distortion budget must be positive, got {gamma}")
    q_scale = max(1.0, float(np.linalg.norm(q.Q, 2)))
    if q.q_min_eig < -PSD_RTOL * q_scale:
        raise InvalidParams(f"Q is not positive semidefinite (min eigenvalue {q.q_min_eig:.3e})")

    a = q.a_weights
    h = q.h
    n = h.shape[0]

    def plan(delta: np.ndarray, lam: float, active: bool) -> DistortionPlan:
        return DistortionPlan(
            delta=delta, rho=np.zeros(n), lam=lam, gamma_budget=gamma, a_weights=np.array(a), active=active
        )

    delta0, residual = _weighted_min_norm(q)
    stationary = residual <= STATIONARY_RTOL * max(1.0, float(np.linalg.norm(h)))
    if stationary and delta0 @ (a * delta0) <= gamma:
        logger.info(f"Budget slack: lambda*=0, delta' A delta={delta0 @ (a * delta0):.6g} <= {gamma:.6g}")
        return plan(delta0, 0.0, False)

    def delta_at(lam: float) -> np.ndarray:
        return solve_linear(q.Q + lam * q.A, h)

    def excess(lam: float) -> float:
        d = delta_at(lam)
        return float(d @ (a * d)) - gamma

    hi = 1.0
    doublings = 0
    while excess(hi) > 0.0:
        hi *= 2.0
        doublings += 1
        if doublings > MAX_DOUBLINGS:
            raise NumericalFailure(f"could not bracket the multiplier within {MAX_DOUBLINGS} doublings")
    lo = hi
    halvings = 0
    while excess(lo) <= 0.0:
        lo *= 0.5
        halvings += 1
        if lo < LAMBDA_FLOOR_RTOL * q_scale and stationary:
            # budget sits at the unconstrained optimum; Q + lam A is too close to singular to refine lam
            used0 = float(delta0 @ (a * delta0))
            delta = delta0 * np.sqrt(gamma / used0)
            logger.info(f"Budget active at lambda*~0: scaled the stationary point from {used0:.10g} to {gamma:.10g}")
            return plan(delta, 0.0, True)
        if halvings > MAX_DOUBLINGS:
            raise NumericalFailure(f"could not bracket the multiplier within {MAX_DOUBLINGS} halvings")
    logger.debug(f"Multiplier bracket [{lo:.3e}, {hi:.3e}]")

    try:
        lam = brentq(excess, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=1000)
    except (ValueError, RuntimeError) as e:
        raise NumericalFailure(f"multiplier root search failed: {e}")
    delta = delta_at(lam)
    used = float(delta @ (a * delta))
    if used > gamma * (1.0 + 1e-8):
        # pull back onto the ellipsoid when the root lands just outside
        delta = delta * np.sqrt(gamma / used)
    logger.info(f"Budget active: lambda*={lam:.10g}, delta' A delta={used:.10g}")
    return plan(delta, float(lam), True)


def induced_equilibrium(
    game: NetworkGame,
    attention: AttentionStructure,
    plan: DistortionPlan,
    conjecture: Optional[ConjectureSpec] = None,
) -> EquilibriumResult:
    """
    x = M (b - delta) with the conjecture diagnostic on the distorted signal.

    For local mean-field agents theta is the consistent conjecture whose
    numerator is the distorted influence (Gx)_i + delta_i.
    """
    conjecture = ConjectureClass.coerce(conjecture if conjecture is not None else ConjectureKind.LMF, game.n)
    H = perceived_matrix(game, conjecture, attention)
    A = game.R + H
    rhs = game.b - plan.delta
    x = solve_linear(A, rhs)
    try:
        if conjecture.kind is ConjectureKind.LMF:
            theta = consistent_theta(game, attention, x, distortion=plan.delta)
        else:
            theta = conjecture_profile(game, conjecture, attention, x, distortion=plan.delta)
    except (DegenerateRegressor, EmptyAttention) as e:
        logger.warning(f"Conjecture diagnostic not reported: {e}")
        theta = None
    return EquilibriumResult(
        x=x,
        theta=theta,
        kind=equilibrium_kind(conjecture),
        residual=float(np.linalg.norm(A @ x - rhs)),
        delta=np.array(plan.delta),
    )


@dataclass
class KktReport:
    stationarity: float
    primal_slack: float
    dual_ok: bool
    complementarity: float
    tol: float

    @property
    def stationarity_ok(self) -> bool:
        return self.stationarity <= self.tol

    @property
    def primal_ok(self) -> bool:
        return self.primal_slack >= -self.tol

    @property
    def complementarity_ok(self) -> bool:
        return self.complementarity <= self.tol

    @property
    def passed(self) -> bool:
        return self.stationarity_ok and self.primal_ok and self.dual_ok and self.complementarity_ok

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stationarity": self.stationarity,
            "primal_slack": self.primal_slack,
            "dual_ok": self.dual_ok,
            "complementarity": self.complementarity,
            "tol": self.tol,
            "passed": self.passed,
        }


def kkt_verify(q: QcqpData, plan: DistortionPlan, tol: float = 1e-8) -> KktReport:
    """Evaluate the four KKT conditions of the QCQP at a plan."""
    delta = as_vector(plan.delta, "delta")
    gradient = 2.0 * (q.Q + plan.lam * q.A) @ delta - 2.0 * q.Q @ q.b + q.c
    used = float(delta @ q.A @ delta)
    return KktReport(
        stationarity=float(np.linalg.norm(gradient)),
        primal_slack=q.gamma_budget - used,
        dual_ok=plan.lam >= 0.0,
        complementarity=abs(plan.lam * (used - q.gamma_budget)),
        tol=tol,
    )
