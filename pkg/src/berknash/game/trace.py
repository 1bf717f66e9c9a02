"""
Time-indexed record of learning iterates and their step-difference norms.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

DENSE_UNTIL = 1000
STRIDE = 10


def should_record(k: int, dense_until: int = DENSE_UNTIL, stride: int = STRIDE) -> bool:
    """Every step up to ``dense_until``, every ``stride``-th step afterwards."""
    return k <= dense_until or k % stride == 0


@dataclass
class Trace:
    n: int
    with_delta: bool = False
    k: List[int] = field(default_factory=list)
    x: List[np.ndarray] = field(default_factory=list)
    theta: List[np.ndarray] = field(default_factory=list)
    delta: List[np.ndarray] = field(default_factory=list)
    dx_norm: List[float] = field(default_factory=list)
    dtheta_norm: List[float] = field(default_factory=list)
    ddelta_norm: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.k)

    def record(
        self,
        k: int,
        x: np.ndarray,
        theta: np.ndarray,
        dx_norm: float,
        dtheta_norm: float,
        delta: Optional[np.ndarray] = None,
        ddelta_norm: float = 0.0,
    ) -> None:
        self.k.append(int(k))
        self.x.append(np.array(x))
        self.theta.append(np.array(theta))
        self.dx_norm.append(float(dx_norm))
        self.dtheta_norm.append(float(dtheta_norm))
        if self.with_delta:
            self.delta.append(np.array(delta))
            self.ddelta_norm.append(float(ddelta_norm))

    def to_frame(self) -> pd.DataFrame:
        """Full trace: k, x_1..x_n, theta_1..theta_n, [delta_1..delta_n], norms."""
        columns = {"k": np.array(self.k, dtype=int)}
        blocks = [("x", self.x), ("theta", self.theta)]
        if self.with_delta:
            blocks.append(("delta", self.delta))
        for name, rows in blocks:
            values = np.vstack(rows) if rows else np.empty((0, self.n))
            for i in range(self.n):
                columns[f"{name}_{i + 1}"] = values[:, i]
        columns["dx_norm"] = np.array(self.dx_norm)
        columns["dtheta_norm"] = np.array(self.dtheta_norm)
        if self.with_delta:
            columns["ddelta_norm"] = np.array(self.ddelta_norm)
        return pd.DataFrame(columns)

    def diagnostics_frame(self) -> pd.DataFrame:
        """Norm columns only: k, dx_norm, dtheta_norm, ddelta_norm."""
        ddelta = self.ddelta_norm if self.with_delta else [0.0] * len(self)
        return pd.DataFrame(
            {
                "k": np.array(self.k, dtype=int),
                "dx_norm": np.array(self.dx_norm),
                "dtheta_norm": np.array(self.dtheta_norm),
                "ddelta_norm": np.array(ddelta),
            }
        )
