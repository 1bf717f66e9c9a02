import json

import numpy as np
import pytest

from berknash.game.model import AttentionStructure, NetworkGame


@pytest.fixture
def pair_game():
    """Two agents, g = 0.5 both ways, r = b = 1, noiseless."""
    return NetworkGame(G=[[0.0, 0.5], [0.5, 0.0]], r=[1.0, 1.0], b=[1.0, 1.0], sigma=[0.0, 0.0])


@pytest.fixture
def pair_attention():
    return AttentionStructure(((1,), (0,)))


@pytest.fixture
def ring_game():
    """Three agents, every off-diagonal weight 0.3, r = b = 1, noiseless."""
    G = np.full((3, 3), 0.3)
    np.fill_diagonal(G, 0.0)
    return NetworkGame(G=G, r=np.ones(3), b=np.ones(3), sigma=np.zeros(3))


@pytest.fixture
def ring_next():
    """Each agent attends only to the next one."""
    return AttentionStructure(((1,), (2,), (0,)))


@pytest.fixture
def decoupled_game():
    return NetworkGame(G=np.zeros((3, 3)), r=[1.0, 2.0, 4.0], b=[1.0, 1.0, 2.0], sigma=np.zeros(3))


@pytest.fixture
def random_game():
    """Factory for stable random games with rho(G) = ratio * r_min."""

    def make(rng, n, ratio=0.7, symmetric=False, nonnegative=False, sigma=0.0):
        G = rng.uniform(0.0, 1.0, size=(n, n)) if nonnegative else rng.normal(size=(n, n))
        if symmetric:
            G = 0.5 * (G + G.T)
        np.fill_diagonal(G, 0.0)
        r = rng.uniform(1.0, 3.0, size=n)
        rho = np.max(np.abs(np.linalg.eigvals(G)))
        G *= ratio * r.min() / rho
        b = rng.uniform(0.5, 2.0, size=n)
        return NetworkGame(G=G, r=r, b=b, sigma=np.full(n, sigma))

    return make


def scenario_document(game, attention=None, conjecture="lmf", designer=None, learning=None, simulation=None):
    data = {
        "game": {
            "G": np.asarray(game.G).tolist(),
            "r": np.asarray(game.r).tolist(),
            "b": np.asarray(game.b).tolist(),
            "sigma": np.asarray(game.sigma).tolist(),
        },
        "conjecture": {"kind": conjecture},
    }
    if attention is not None:
        data["attention"] = {"subsets": attention.to_list()}
    if designer is not None:
        data["designer"] = designer
    if learning is not None:
        data["learning"] = learning
    if simulation is not None:
        data["simulation"] = simulation
    return data


@pytest.fixture
def write_scenario(tmp_path):
    """Write a scenario document to a temp file and return its path."""

    def write(data, name="scenario.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return write


@pytest.fixture
def pair_document(pair_game, pair_attention):
    return scenario_document(
        pair_game,
        pair_attention,
        designer={"budget": 0.08, "alpha": [1.0, 1.0], "beta": [1.0, 1.0]},
        learning={"a": 10.0, "k0": 10.0, "max_steps": 20000},
    )


@pytest.fixture
def ring_document(ring_game, ring_next):
    return scenario_document(ring_game, ring_next)
