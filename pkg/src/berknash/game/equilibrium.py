"""
Closed-form equilibrium solvers and the misspecification cost machinery.

The Nash equilibrium solves (R + G) x = b. A Berk-Nash equilibrium solves
(R + H) x = b for the matrix H the agents perceive through their
conjectures: G itself for constant and aggregate regressors, the sparsified
G~ for local mean-field agents, and gamma_i / n on every column for global
mean-field agents.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..errors import DegenerateRegressor, EmptyAttention, InvalidParams, ZeroBaselineCost
from ..utils.linalg import as_vector, operator_norm, solve_linear, spectral_radius
from .model import (
    AttentionStructure,
    ConjectureClass,
    ConjectureKind,
    ConjectureSpec,
    NetworkGame,
    regressor_operator,
    sparsify,
)

logger = logging.getLogger(__name__)

DEGENERATE_RTOL = 1e-12
ZERO_COST_ATOL = 1e-14
IDENTITY_RTOL = 1e-10


class EquilibriumKind(str, Enum):
    NE = "ne"
    BNE_CONSTANT = "bne-const"
    BNE_AGGREGATE = "bne-agg"
    BNE_GMF = "bne-gmf"
    BNE_LMF = "bne-lmf"
    BNE_MIXED = "bne-mixed"


_KIND_BY_CONJECTURE = {
    ConjectureKind.CONSTANT: EquilibriumKind.BNE_CONSTANT,
    ConjectureKind.AGGREGATE: EquilibriumKind.BNE_AGGREGATE,
    ConjectureKind.GMF: EquilibriumKind.BNE_GMF,
    ConjectureKind.LMF: EquilibriumKind.BNE_LMF,
}


def equilibrium_kind(conjecture: ConjectureClass) -> EquilibriumKind:
    return _KIND_BY_CONJECTURE[conjecture.kind] if conjecture.kind else EquilibriumKind.BNE_MIXED


def _floats(a: Optional[np.ndarray]) -> Optional[List[float]]:
    return None if a is None else [float(v) for v in a]


@dataclass
class EquilibriumResult:
    """An action profile with its conjecture profile and solve residual."""

    x: np.ndarray
    theta: Optional[np.ndarray]
    kind: EquilibriumKind
    residual: float
    gamma: Optional[np.ndarray] = None
    delta: Optional[np.ndarray] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "x": _floats(self.x),
            "theta": _floats(self.theta),
            "residual": float(self.residual),
            "gamma": _floats(self.gamma),
            "delta": _floats(self.delta),
        }


def aggregate_cost(game: NetworkGame, x) -> float:
    """Sum of individual costs: x'Rx / 2 + x'Gx - b'x."""
    x = as_vector(x, "x")
    if x.shape != (game.n,):
        raise InvalidParams(f"x has length {x.shape[0]}, expected {game.n}")
    return float(0.5 * np.dot(game.r * x, x) + x @ game.G @ x - game.b @ x)


def _solve_system(game: NetworkGame, H: np.ndarray, rhs: np.ndarray) -> tuple:
    A = game.R + H
    x = solve_linear(A, rhs)
    return x, float(np.linalg.norm(A @ x - rhs))


def solve_nash(game: NetworkGame) -> EquilibriumResult:
    """Solve (R + G) x = b. theta reports the true influence (Gx)_i."""
    x, residual = _solve_system(game, game.G, game.b)
    logger.info(f"Nash equilibrium solved for n={game.n}, residual {residual:.2e}")
    return EquilibriumResult(x=x, theta=game.G @ x, kind=EquilibriumKind.NE, residual=residual)


def perceived_matrix(
    game: NetworkGame,
    conjecture: ConjectureSpec,
    attention: Optional[AttentionStructure] = None,
) -> np.ndarray:
    """Interaction matrix H the agents act on in equilibrium, built row by row."""
    conjecture = ConjectureClass.coerce(conjecture, game.n)
    if conjecture.uses(ConjectureKind.LMF):
        if attention is None:
            raise InvalidParams("local mean-field conjectures require an attention structure")
        H = sparsify(game, attention, conjecture)
    else:
        H = np.array(game.G)
    gamma = game.G.sum(axis=1)
    for i, kind in enumerate(conjecture.kinds):
        if kind is ConjectureKind.GMF:
            H[i] = gamma[i] / game.n
    return H


def _check_regressor(z: np.ndarray, x: np.ndarray, agents: Sequence[int]) -> None:
    threshold = DEGENERATE_RTOL * float(np.max(np.abs(x))) if x.size else 0.0
    bad = [i for i in agents if abs(z[i]) <= threshold]
    if bad:
        raise DegenerateRegressor(
            f"regressor vanishes for agents {bad}; consistent conjecture undefined",
            details={"agents": bad},
        )


def consistent_theta(
    game: NetworkGame,
    attention: AttentionStructure,
    x,
    distortion: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    theta_i = (sum over V_i of g_ij x_j) / (mean of x over S_i).

    With ``distortion`` the numerator becomes the distorted influence
    (Gx)_i + delta_i seen by agents whose signals carry a designer shift.
    """
    x = as_vector(x, "x")
    for i in range(game.n):
        if attention.size(i) == 0:
            raise EmptyAttention(f"agent {i} has an empty attention set")
    W, _ = regressor_operator(game, ConjectureClass.homogeneous(ConjectureKind.LMF, game.n), attention)
    z = W @ x
    _check_regressor(z, x, range(game.n))
    influence = game.G @ x
    if distortion is not None:
        influence = influence + as_vector(distortion, "distortion")
    return influence / z


def conjecture_profile(
    game: NetworkGame,
    conjecture: ConjectureClass,
    attention: Optional[AttentionStructure],
    x: np.ndarray,
    distortion: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Per-agent theta fitted at x: influence over regressor, gamma_i for GMF agents."""
    W, offset = regressor_operator(game, conjecture, attention)
    z = W @ x + offset
    influence = game.G @ x
    if distortion is not None:
        influence = influence + distortion
    theta = np.empty(game.n)
    ratio_agents = []
    for i, kind in enumerate(conjecture.kinds):
        if kind is ConjectureKind.GMF:
            theta[i] = game.G[i].sum()
        elif kind is ConjectureKind.AGGREGATE and not game.neighbors(i):
            theta[i] = 0.0
        else:
            ratio_agents.append(i)
    _check_regressor(z, x, ratio_agents)
    theta[ratio_agents] = influence[ratio_agents] / z[ratio_agents]
    return theta


def solve_bne(
    game: NetworkGame,
    conjecture: ConjectureSpec,
    attention: Optional[AttentionStructure] = None,
) -> EquilibriumResult:
    """
    Berk-Nash equilibrium for a conjecture profile.

    Constant and aggregate profiles coincide with the Nash equilibrium. A
    homogeneous global mean-field profile uses the closed form
    xbar = mean(b/r) / (1 + mean(gamma/r)), x_i = (b_i - gamma_i xbar) / r_i.
    Anything else solves (R + H) x = b with the perceived matrix H.
    """
    conjecture = ConjectureClass.coerce(conjecture, game.n)
    kind = equilibrium_kind(conjecture)
    H = perceived_matrix(game, conjecture, attention)
    gamma = game.G.sum(axis=1) if conjecture.uses(ConjectureKind.GMF) else None

    if conjecture.kind in (ConjectureKind.CONSTANT, ConjectureKind.AGGREGATE):
        ne = solve_nash(game)
        x, residual = ne.x, ne.residual
    elif conjecture.kind is ConjectureKind.GMF:
        x_bar = np.mean(game.b / game.r) / (1.0 + np.mean(gamma / game.r))
        x = (game.b - gamma * x_bar) / game.r
        residual = float(np.linalg.norm((game.R + H) @ x - game.b))
    else:
        x, residual = _solve_system(game, H, game.b)

    try:
        theta = conjecture_profile(game, conjecture, attention, x)
    except DegenerateRegressor as e:
        logger.warning(f"Conjecture profile not reported: {e}")
        theta = None
    logger.info(f"Berk-Nash equilibrium ({kind.value}) solved for n={game.n}, residual {residual:.2e}")
    return EquilibriumResult(x=x, theta=theta, kind=kind, residual=residual, gamma=gamma)


def best_response_gap(game: NetworkGame, x, perceived: np.ndarray) -> np.ndarray:
    """BR under the true model minus BR under the perceived one: ((H - G)x)_i / r_i."""
    x = as_vector(x, "x")
    return ((np.asarray(perceived) - game.G) @ x) / game.r


@dataclass
class BoundConstants:
    """Constants of the linear misspecification bound; valid only when rho(G) < r_min."""

    k1: float
    k2: float
    k3: float
    k4: float

    def to_dict(self) -> Dict[str, float]:
        return {"k1": self.k1, "k2": self.k2, "k3": self.k3, "k4": self.k4}


def bound_constants(game: NetworkGame) -> Optional[BoundConstants]:
    margin = game.r_min - spectral_radius(game.G)
    if margin <= 0.0:
        return None
    k1 = margin ** -2
    k2 = operator_norm(game.R + game.G + game.G.T) / margin + 1.0
    k4 = game.r_min / (2.0 * (operator_norm(game.R) + operator_norm(game.G)) ** 2)
    return BoundConstants(k1=k1, k2=k2, k3=k1 * k2, k4=k4)


@dataclass
class VomReport:
    vom: float
    cost_ne: float
    cost_bn: float
    cost_diff: float
    delta_g_norm: float
    br_gap_norm: float
    sign_caveat: bool
    x_ne: np.ndarray
    x_bn: np.ndarray
    constants: Optional[BoundConstants] = None

    @property
    def cost_bound(self) -> Optional[float]:
        """Informational bound (K3/K4) ||dG|| on |VoM|."""
        if self.constants is None:
            return None
        return self.constants.k3 / self.constants.k4 * self.delta_g_norm

    def to_dict(self) -> Dict[str, Any]:
        return {
            "vom": self.vom,
            "cost_ne": self.cost_ne,
            "cost_bn": self.cost_bn,
            "cost_diff": self.cost_diff,
            "delta_g_norm": self.delta_g_norm,
            "br_gap_norm": self.br_gap_norm,
            "sign_caveat": self.sign_caveat,
            "x_ne": _floats(self.x_ne),
            "x_bn": _floats(self.x_bn),
            "constants": self.constants.to_dict() if self.constants else None,
            "cost_bound": self.cost_bound,
        }


def _relative_deviation(cost_bn: float, cost_ne: float) -> float:
    if abs(cost_ne) < ZERO_COST_ATOL:
        raise ZeroBaselineCost(f"Nash aggregate cost {cost_ne:.3e} is zero; VoM undefined")
    return (cost_bn - cost_ne) / cost_ne


def value_of_misspecification(
    game: NetworkGame,
    attention: AttentionStructure,
    conjecture: Optional[ConjectureSpec] = None,
) -> VomReport:
    """
    VoM = (J(x_BN) - J(x_NE)) / J(x_NE), reported verbatim.

    At a Nash equilibrium J(x_NE) = -x'Rx/2 is typically negative, in which
    case a positive cost difference yields a negative VoM; ``sign_caveat``
    flags that situation.
    """
    conjecture = conjecture if conjecture is not None else ConjectureKind.LMF
    H = perceived_matrix(game, conjecture, attention)
    x_ne = solve_nash(game).x
    x_bn, _ = _solve_system(game, H, game.b)
    cost_ne = aggregate_cost(game, x_ne)
    cost_bn = aggregate_cost(game, x_bn)
    vom = _relative_deviation(cost_bn, cost_ne)
    report = VomReport(
        vom=vom,
        cost_ne=cost_ne,
        cost_bn=cost_bn,
        cost_diff=cost_bn - cost_ne,
        delta_g_norm=operator_norm(H - game.G),
        br_gap_norm=float(np.linalg.norm(best_response_gap(game, x_ne, H))),
        sign_caveat=cost_ne < 0.0,
        x_ne=x_ne,
        x_bn=x_bn,
        constants=bound_constants(game),
    )
    logger.info(f"VoM={vom:.6g} (cost NE {cost_ne:.6g}, cost BN {cost_bn:.6g}, ||dG||={report.delta_g_norm:.4g})")
    return report


@dataclass
class BoundRow:
    scale: float
    vom: float
    cost_ne: float
    cost_bn: float
    delta_g_norm: float
    action_deviation: float
    action_bound: float
    bound_ok: bool
    ratio: Optional[float]

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class BoundCheckReport:
    identity_error: float
    identity_ok: bool
    k1: float
    rows: List[BoundRow] = field(default_factory=list)

    @property
    def linearity_spread(self) -> Optional[float]:
        """
        Largest |VoM(t)| / (t ||dG||), relative to the same ratio at the
        smallest positive scale.
        """
        ratios = [row.ratio for row in self.rows if row.ratio is not None]
        if not ratios or ratios[0] <= 0.0:
            return None
        return max(ratios) / ratios[0]

    @property
    def all_ok(self) -> bool:
        return self.identity_ok and all(row.bound_ok for row in self.rows)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "identity_error": self.identity_error,
            "identity_ok": self.identity_ok,
            "k1": self.k1,
            "linearity_spread": self.linearity_spread,
            "all_ok": self.all_ok,
            "rows": [row.to_dict() for row in self.rows],
        }


def vom_bound_check(
    game: NetworkGame,
    attention: AttentionStructure,
    scales: Sequence[float],
    conjecture: Optional[ConjectureSpec] = None,
) -> BoundCheckReport:
    """
    Check the Nash cost identity and the linear action-deviation bound along
    attenuated perceptions G_t = G + t (H - G), one row per scale, ascending.
    """
    if spectral_radius(game.G) >= game.r_min:
        raise InvalidParams("bound check requires rho(G) < r_min")
    scales = sorted(float(t) for t in scales)
    if any(not 0.0 <= t <= 1.0 for t in scales):
        raise InvalidParams(f"scales must lie in [0, 1], got {scales}")

    conjecture = conjecture if conjecture is not None else ConjectureKind.LMF
    H = perceived_matrix(game, conjecture, attention)
    delta_g = H - game.G
    delta_g_norm = operator_norm(delta_g)
    constants = bound_constants(game)

    x_ne = solve_nash(game).x
    cost_ne = aggregate_cost(game, x_ne)
    identity = -0.5 * float(np.dot(game.r * x_ne, x_ne))
    identity_error = abs(cost_ne - identity) / max(abs(cost_ne), ZERO_COST_ATOL)
    b_norm = float(np.linalg.norm(game.b))

    report = BoundCheckReport(
        identity_error=identity_error,
        identity_ok=identity_error <= IDENTITY_RTOL,
        k1=constants.k1,
    )
    for t in scales:
        x_t, _ = _solve_system(game, game.G + t * delta_g, game.b)
        cost_t = aggregate_cost(game, x_t)
        vom_t = _relative_deviation(cost_t, cost_ne)
        deviation = float(np.linalg.norm(x_t - x_ne))
        bound = constants.k1 * b_norm * t * delta_g_norm
        slack = 1e-12 * max(1.0, float(np.linalg.norm(x_ne)))
        report.rows.append(
            BoundRow(
                scale=t,
                vom=vom_t,
                cost_ne=cost_ne,
                cost_bn=cost_t,
                delta_g_norm=t * delta_g_norm,
                action_deviation=deviation,
                action_bound=bound,
                bound_ok=deviation <= bound + slack,
                ratio=abs(vom_t) / (t * delta_g_norm) if t * delta_g_norm > 0.0 else None,
            )
        )
    if not report.all_ok:
        logger.warning("Misspecification bound check failed on at least one scale")
    return report


def mean_field_limit(b: float, r: float, gamma: float) -> float:
    """Symmetric mean-field game action b / (r + gamma)."""
    if r + gamma <= 0.0:
        raise InvalidParams("r + gamma must be positive")
    return b / (r + gamma)


@dataclass
class MeanFieldRow:
    n: int
    max_gap: float
    mean_action: float
    limit: float

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def mean_field_sweep(
    sizes: Sequence[int],
    gamma: float = 0.5,
    r: float = 1.0,
    b: float = 1.0,
    seed: int = 0,
    heterogeneity: float = 1.0,
) -> List[MeanFieldRow]:
    """
    Global mean-field equilibria of growing dense games against the limit.

    Each game has g_ij = gamma_i / (n - 1) with row sums
    gamma_i = gamma (1 + heterogeneity u_i / n), u_i ~ U(-1, 1).
    """
    limit = mean_field_limit(b, r, gamma)
    rows = []
    for n in sizes:
        n = int(n)
        if n < 2:
            raise InvalidParams(f"population sizes must be at least 2, got {n}")
        rng = np.random.default_rng((seed, n))
        gammas = gamma * (1.0 + heterogeneity * rng.uniform(-1.0, 1.0, size=n) / n)
        G = np.repeat((gammas / (n - 1))[:, None], n, axis=1)
        np.fill_diagonal(G, 0.0)
        game = NetworkGame(G=G, r=np.full(n, r), b=np.full(n, b), sigma=np.zeros(n))
        x = solve_bne(game, ConjectureKind.GMF).x
        rows.append(
            MeanFieldRow(n=n, max_gap=float(np.max(np.abs(x - limit))), mean_action=float(x.mean()), limit=limit)
        )
        logger.debug(f"Mean-field sweep n={n}: max gap {rows[-1].max_gap:.3e}")
    return rows
