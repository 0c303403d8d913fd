"""Classic test functions for exercising the optimizers.

All functions follow the toolkit's maximization convention: they return a
fitness that is 0 at the optimum and negative elsewhere.
"""

from __future__ import annotations

import numpy as np

__all__ = ["sphere", "rosenbrock", "forrester", "FORRESTER_ARGMAX"]


def sphere(x: np.ndarray, optimum: np.ndarray | float = 0.0) -> float:
    """Negated squared distance to the optimum."""
    x = np.asarray(x, dtype=float)
    return -float(np.sum((x - optimum) ** 2))


def rosenbrock(x: np.ndarray) -> float:
    """Negated Rosenbrock valley; maximum 0 at the all-ones vector."""
    x = np.asarray(x, dtype=float)
    return -float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


def forrester(x: float | np.ndarray) -> float:
    """Negated 1-D multimodal curve (6x-2)^2 sin(12x-4) over [0, 1].

    The global maximum of the negated form is near x = 0.7572 with a
    shallower local optimum near the left edge.
    """
    x = np.asarray(x, dtype=float)
    val = (6.0 * x - 2.0) ** 2 * np.sin(12.0 * x - 4.0)
    return -float(val) if val.ndim == 0 else -val


# Grid-search argmax of the negated curve, frozen at 1e-6 resolution.
FORRESTER_ARGMAX = 0.757249
