"""
berknash - Berk-Nash equilibria of linear-quadratic network games.
"""

__version__ = "0.1.0"
__description__ = "Misspecified learning, value of misspecification and cognitive arbitrage in network games"

from .errors import BerkNashError
from .game.model import (
    AttentionStructure,
    ConjectureClass,
    ConjectureKind,
    NetworkGame,
    generate_scenario,
    sparsify,
    validate,
)
from .game.equilibrium import (
    aggregate_cost,
    best_response_gap,
    consistent_theta,
    mean_field_limit,
    mean_field_sweep,
    solve_bne,
    solve_nash,
    value_of_misspecification,
    vom_bound_check,
)
from .game.arbitrage import assemble_qcqp, designer_objective, induced_equilibrium, kkt_verify, solve_arbitrage
from .game.learning import StepSchedule, run, step
from .game.timescale import TwoScaleConfig, emit_diagnostics, run_two_timescale
from .config import ScenarioConfig, load_config, save_config

# Main API exports
__all__ = [
    # Model
    "NetworkGame",
    "AttentionStructure",
    "ConjectureClass",
    "ConjectureKind",
    "generate_scenario",
    "sparsify",
    "validate",

    # Equilibria and misspecification
    "aggregate_cost",
    "solve_nash",
    "solve_bne",
    "consistent_theta",
    "best_response_gap",
    "value_of_misspecification",
    "vom_bound_check",
    "mean_field_limit",
    "mean_field_sweep",

    # Designer
    "assemble_qcqp",
    "designer_objective",
    "solve_arbitrage",
    "induced_equilibrium",
    "kkt_verify",

    # Dynamics
    "StepSchedule",
    "step",
    "run",
    "TwoScaleConfig",
    "run_two_timescale",
    "emit_diagnostics",

    # Configuration
    "ScenarioConfig",
    "load_config",
    "save_config",

    "BerkNashError",
    "__version__",
]


def get_version() -> str:
    """Get the current version of the package."""
    return __version__


def get_package_info() -> dict:
    """Get package information."""
    return {
        "name": "berknash",
        "version": __version__,
        "description": __description__,
        "python_requires": ">=3.9",
        "license": "MIT",
    }
