"""
The objective network game and the agents' subjective structure.

A NetworkGame holds the true interaction matrix G, private costs r, biases b
and observation-noise scales sigma. Agents perceive it through a conjecture
class (one regressor per agent) and, for local mean-field agents, through an
attention structure S_i of neighbors they average over.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import EmptyAttention, InvalidParams
from ..utils.linalg import as_matrix, as_vector, spectral_radius

logger = logging.getLogger(__name__)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class NetworkGame:
    """Linear-quadratic network game with costs J_i = r_i x_i^2 / 2 + x_i (Gx)_i - b_i x_i."""

    G: np.ndarray
    r: np.ndarray
    b: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        G = as_matrix(self.G, "G")
        r = as_vector(self.r, "r")
        b = as_vector(self.b, "b")
        sigma = as_vector(self.sigma, "sigma")
        n = G.shape[0]
        if n == 0 or G.shape != (n, n):
            raise InvalidParams(f"G must be a non-empty square matrix, got shape {G.shape}")
        for name, vec in (("r", r), ("b", b), ("sigma", sigma)):
            if vec.shape != (n,):
                raise InvalidParams(f"{name} has length {vec.shape[0]}, expected {n}")
        if np.any(np.diag(G) != 0.0):
            raise InvalidParams("G must have a zero diagonal", details={"diag": np.diag(G).tolist()})
        if np.any(r <= 0.0):
            raise InvalidParams("private costs r must be strictly positive")
        if np.any(sigma < 0.0):
            raise InvalidParams("noise scales sigma must be nonnegative")
        object.__setattr__(self, "G", _frozen(G))
        object.__setattr__(self, "r", _frozen(r))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "sigma", _frozen(sigma))

    @property
    def n(self) -> int:
        return self.G.shape[0]

    @property
    def R(self) -> np.ndarray:
        return np.diag(self.r)

    @property
    def r_min(self) -> float:
        return float(self.r.min())

    def neighbors(self, i: int) -> List[int]:
        """V_i: agents with a nonzero impact on agent i."""
        return [j for j in range(self.n) if j != i and self.G[i, j] != 0.0]

    def replace(self, **changes: Any) -> "NetworkGame":
        fields = {"G": self.G, "r": self.r, "b": self.b, "sigma": self.sigma}
        fields.update(changes)
        return NetworkGame(**fields)


@dataclass(frozen=True)
class AttentionStructure:
    """Per-agent ordered attention subsets S_i (0-based neighbor indices)."""

    subsets: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "subsets", tuple(tuple(int(j) for j in s) for s in self.subsets))

    @classmethod
    def full(cls, game: NetworkGame) -> "AttentionStructure":
        """Every agent attends to its whole neighborhood, S_i = V_i."""
        return cls(tuple(tuple(game.neighbors(i)) for i in range(game.n)))

    @property
    def n(self) -> int:
        return len(self.subsets)

    def size(self, i: int) -> int:
        return len(self.subsets[i])

    def validate_for(self, game: NetworkGame, conjecture: Optional["ConjectureClass"] = None) -> None:
        """
        Check S_i is a duplicate-free subset of V_i not containing i.

        Raises:
            InvalidParams: on size mismatch or an index outside V_i.
            EmptyAttention: if a local mean-field agent has an empty subset.
        """
        if self.n != game.n:
            raise InvalidParams(f"attention covers {self.n} agents, game has {game.n}")
        for i, subset in enumerate(self.subsets):
            if len(set(subset)) != len(subset):
                raise InvalidParams(f"attention set of agent {i} has duplicates: {list(subset)}")
            for j in subset:
                if not 0 <= j < game.n or j == i or game.G[i, j] == 0.0:
                    raise InvalidParams(
                        f"agent {i} attends to {j}, which is not one of its neighbors",
                        details={"agent": i, "neighbor": j},
                    )
        kinds = conjecture.kinds if conjecture is not None else (ConjectureKind.LMF,) * self.n
        for i, kind in enumerate(kinds):
            if kind is ConjectureKind.LMF and not self.subsets[i]:
                raise EmptyAttention(f"local mean-field agent {i} has an empty attention set")

    def coverage(self, game: NetworkGame) -> np.ndarray:
        """Share of |g_ij| over V_i captured by S_i; agents without neighbors report 1."""
        out = np.ones(game.n)
        weights = np.abs(game.G)
        for i, subset in enumerate(self.subsets):
            total = weights[i].sum()
            if total > 0.0:
                out[i] = weights[i, list(subset)].sum() / total
        return out

    def to_list(self) -> List[List[int]]:
        return [list(s) for s in self.subsets]


class ConjectureKind(str, Enum):
    CONSTANT = "constant"
    AGGREGATE = "aggregate"
    GMF = "gmf"
    LMF = "lmf"

    @property
    def mean_field(self) -> bool:
        return self in (ConjectureKind.GMF, ConjectureKind.LMF)


ConjectureSpec = Union["ConjectureClass", ConjectureKind, str, Sequence[Union[ConjectureKind, str]]]


@dataclass(frozen=True)
class ConjectureClass:
    """Per-agent regressor choice."""

    kinds: Tuple[ConjectureKind, ...]

    def __post_init__(self):
        try:
            kinds = tuple(ConjectureKind(k) for k in self.kinds)
        except ValueError as e:
            raise InvalidParams(f"unknown conjecture kind: {e}")
        object.__setattr__(self, "kinds", kinds)

    @classmethod
    def homogeneous(cls, kind: Union[ConjectureKind, str], n: int) -> "ConjectureClass":
        return cls((ConjectureKind(kind),) * n)

    @classmethod
    def coerce(cls, spec: ConjectureSpec, n: int) -> "ConjectureClass":
        """Accept a class, a single kind for everyone, or one kind per agent."""
        if isinstance(spec, ConjectureClass):
            conjecture = spec
        elif isinstance(spec, (ConjectureKind, str)):
            try:
                conjecture = cls.homogeneous(spec, n)
            except ValueError:
                raise InvalidParams(f"unknown conjecture kind: {spec!r}")
        else:
            conjecture = cls(tuple(spec))
        if len(conjecture.kinds) != n:
            raise InvalidParams(f"conjecture profile has {len(conjecture.kinds)} entries, expected {n}")
        return conjecture

    @property
    def is_homogeneous(self) -> bool:
        return len(set(self.kinds)) <= 1

    @property
    def kind(self) -> Optional[ConjectureKind]:
        """The shared kind of a homogeneous profile, else None."""
        return self.kinds[0] if self.kinds and self.is_homogeneous else None

    def uses(self, kind: ConjectureKind) -> bool:
        return kind in self.kinds

    @property
    def mean_field(self) -> bool:
        return any(k.mean_field for k in self.kinds)

    def to_spec(self) -> Union[str, List[str]]:
        if self.is_homogeneous and self.kinds:
            return self.kinds[0].value
        return [k.value for k in self.kinds]


def sparsify(
    game: NetworkGame,
    attention: AttentionStructure,
    conjecture: Optional[ConjectureClass] = None,
) -> np.ndarray:
    """
    The perceived matrix G~ of local mean-field agents.

    Row i of an LMF agent keeps g_ij / |S_i| on its attended links and zero
    elsewhere; rows of agents with another conjecture are copied from G.
    """
    attention.validate_for(game, conjecture)
    kinds = conjecture.kinds if conjecture is not None else (ConjectureKind.LMF,) * game.n
    G_tilde = np.array(game.G)
    for i, kind in enumerate(kinds):
        if kind is not ConjectureKind.LMF:
            continue
        subset = list(attention.subsets[i])
        row = np.zeros(game.n)
        row[subset] = game.G[i, subset] / len(subset)
        G_tilde[i] = row
    return G_tilde


def regressor_operator(
    game: NetworkGame,
    conjecture: ConjectureClass,
    attention: Optional[AttentionStructure] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Linear form of the regressors, z = W x + offset.

    constant: z_i = 1; aggregate: sum over V_i; gmf: leave-one-out population
    mean; lmf: mean over S_i.
    """
    n = game.n
    W = np.zeros((n, n))
    offset = np.zeros(n)
    if conjecture.uses(ConjectureKind.LMF):
        if attention is None:
            raise InvalidParams("local mean-field conjectures require an attention structure")
        attention.validate_for(game, conjecture)
    for i, kind in enumerate(conjecture.kinds):
        if kind is ConjectureKind.CONSTANT:
            offset[i] = 1.0
        elif kind is ConjectureKind.AGGREGATE:
            W[i, game.neighbors(i)] = 1.0
        elif kind is ConjectureKind.GMF:
            if n > 1:
                W[i] = 1.0 / (n - 1)
                W[i, i] = 0.0
        else:
            subset = list(attention.subsets[i])
            W[i, subset] = 1.0 / len(subset)
    return W, offset


@dataclass
class ValidationReport:
    n: int
    r_min: float
    spectral_radius_g: float
    spectral_radius_rinv_g: float
    stable: bool
    spectral_radius_rinv_gtilde: Optional[float] = None
    learning_stable: Optional[bool] = None
    coverage: Optional[List[float]] = None
    issues: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "r_min": self.r_min,
            "spectral_radius_g": self.spectral_radius_g,
            "spectral_radius_rinv_g": self.spectral_radius_rinv_g,
            "stable": self.stable,
            "spectral_radius_rinv_gtilde": self.spectral_radius_rinv_gtilde,
            "learning_stable": self.learning_stable,
            "coverage": self.coverage,
            "issues": list(self.issues),
        }


def validate(
    game: NetworkGame,
    attention: Optional[AttentionStructure] = None,
    conjecture: Optional[ConjectureClass] = None,
) -> ValidationReport:
    """
    Stability diagnostics. Unstable games are flagged, never rejected.

    stable means rho(G) < r_min; learning_stable (with attention) means
    rho(R^-1 G~) < 1.
    """
    rho_g = spectral_radius(game.G)
    r_inv = 1.0 / game.r
    report = ValidationReport(
        n=game.n,
        r_min=game.r_min,
        spectral_radius_g=rho_g,
        spectral_radius_rinv_g=spectral_radius(r_inv[:, None] * game.G),
        stable=rho_g < game.r_min,
    )
    if not report.stable:
        report.issues.append(f"rho(G)={rho_g:.6g} >= r_min={game.r_min:.6g}")
        logger.warning(f"Game flagged unstable: {report.issues[-1]}")

    if attention is not None:
        try:
            G_tilde = sparsify(game, attention, conjecture)
        except (EmptyAttention, InvalidParams) as e:
            report.issues.append(str(e))
            logger.warning(f"Attention structure rejected: {e}")
        else:
            rho_tilde = spectral_radius(r_inv[:, None] * G_tilde)
            report.spectral_radius_rinv_gtilde = rho_tilde
            report.learning_stable = rho_tilde < 1.0
            report.coverage = attention.coverage(game).tolist()
            if not report.learning_stable:
                report.issues.append(f"rho(R^-1 G~)={rho_tilde:.6g} >= 1")
    return report


def _greedy_attention(magnitudes: np.ndarray, degree: int) -> AttentionStructure:
    n = magnitudes.shape[0]
    subsets = []
    for i in range(n):
        others = np.array([j for j in range(n) if j != i])
        # primary key: descending weight; ties go to the lower index
        order = np.lexsort((others, -magnitudes[i, others]))
        subsets.append(tuple(sorted(int(j) for j in others[order[:degree]])))
    return AttentionStructure(tuple(subsets))


def _mean_coverage(u: np.ndarray, mask: np.ndarray, p: float) -> float:
    w = u ** p
    return float(np.mean((w * mask).sum(axis=1) / w.sum(axis=1)))


def generate_scenario(
    n: int,
    avg_degree: int,
    weight_coverage: float,
    seed: int,
    r_range: Tuple[float, float] = (2.0, 3.0),
    b_range: Tuple[float, float] = (1.0, 2.0),
    sigma: float = 0.01,
    negative_fraction: float = 0.0,
    symmetric: bool = False,
    stability_ratio: float = 0.8,
) -> Tuple[NetworkGame, AttentionStructure]:
    """
    Draw a dense game and a greedy attention structure.

    Off-diagonal magnitudes are u_ij^p with u_ij ~ U(0, 1]; the exponent p is
    tuned by bisection so the mean share of weight captured by the top
    ``avg_degree`` neighbors matches ``weight_coverage`` as closely as
    p in [0.05, 20] allows. G is then rescaled so rho(G) = stability_ratio * r_min.
    """
    if n < 2:
        raise InvalidParams("n must be at least 2")
    if not 0 < avg_degree < n:
        raise InvalidParams(f"avg_degree must lie in (0, {n}), got {avg_degree}")
    if not 0.0 < weight_coverage <= 1.0:
        raise InvalidParams(f"weight_coverage must lie in (0, 1], got {weight_coverage}")
    if not 0.0 <= negative_fraction <= 1.0:
        raise InvalidParams("negative_fraction must lie in [0, 1]")
    if not 0.0 < r_range[0] <= r_range[1]:
        raise InvalidParams("r_range must be a positive interval")
    if b_range[0] > b_range[1]:
        raise InvalidParams("b_range must be an interval")
    if sigma < 0.0:
        raise InvalidParams("sigma must be nonnegative")
    if not 0.0 < stability_ratio < 1.0:
        raise InvalidParams("stability_ratio must lie in (0, 1)")

    rng = np.random.default_rng(seed)
    u = 1.0 - rng.uniform(size=(n, n))
    flips = rng.uniform(size=(n, n)) < negative_fraction
    if symmetric:
        u = np.triu(u, 1) + np.triu(u, 1).T
        flips = np.triu(flips, 1) | np.triu(flips, 1).T
    np.fill_diagonal(u, 1.0)
    r = rng.uniform(r_range[0], r_range[1], size=n)
    b = rng.uniform(b_range[0], b_range[1], size=n)

    attention = _greedy_attention(u, avg_degree)
    mask = np.zeros((n, n))
    for i, subset in enumerate(attention.subsets):
        mask[i, list(subset)] = 1.0
    off = ~np.eye(n, dtype=bool)
    u_off = np.where(off, u, 0.0)

    lo, hi = 0.05, 20.0
    cov_lo, cov_hi = _mean_coverage(u_off, mask, lo), _mean_coverage(u_off, mask, hi)
    if weight_coverage <= cov_lo:
        p = lo
    elif weight_coverage >= cov_hi:
        p = hi
    else:
        for _ in range(200):
            p = 0.5 * (lo + hi)
            if _mean_coverage(u_off, mask, p) < weight_coverage:
                lo = p
            else:
                hi = p
            if hi - lo <= 1e-12:
                break
        p = 0.5 * (lo + hi)
    achieved = _mean_coverage(u_off, mask, p)
    if abs(achieved - weight_coverage) > 1e-6:
        logger.warning(
            f"Coverage target {weight_coverage:.3f} unattainable, achieved {achieved:.3f} (range {cov_lo:.3f}-{cov_hi:.3f})"
        )

    G = np.where(flips, -1.0, 1.0) * u_off ** p
    np.fill_diagonal(G, 0.0)
    rho = spectral_radius(G)
    if rho <= 0.0:
        raise InvalidParams("generated interaction matrix has zero spectral radius")
    G *= stability_ratio * r.min() / rho

    game = NetworkGame(G=G, r=r, b=b, sigma=np.full(n, float(sigma)))
    logger.info(
        f"Generated scenario n={n}, degree={avg_degree}, seed={seed}: exponent {p:.4f}, mean coverage {achieved:.4f}"
    )
    return game, attention
