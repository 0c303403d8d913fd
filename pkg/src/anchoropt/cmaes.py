"""Covariance matrix adaptation evolution strategy with an ask/tell interface.

Maximization convention: higher fitness wins.  The strategy constants
(recombination weights, path and covariance learning rates) follow the
standard tutorial defaults; population size, step size, initial vector and
budget are campaign parameters.

One generation is one ask/tell pair: ``ask`` samples lambda candidates from
N(mean, sigma^2 C), ``tell`` ranks them by fitness and updates mean, the
evolution paths, the covariance matrix (rank-one plus rank-mu) and the step
size (cumulative step-size adaptation).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .space import HyperParamSpace

__all__ = ["CmaesParams", "CmaEs", "default_lambda", "ProtocolError"]

_SIGMA_COLLAPSE = 1e-12
_MAX_CONDITION = 1e14


class ProtocolError(RuntimeError):
    """Raised when ask/tell is used out of order or with a mismatched batch."""


def default_lambda(n: int) -> int:
    """Default population size 4 + floor(3 ln n)."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    return 4 + int(math.floor(3.0 * math.log(n)))


@dataclass
class CmaesParams:
    """Campaign-level strategy parameters."""

    sigma0: float
    lam: int
    mean0: np.ndarray
    max_evaluations: int
    seed: int = 0

    def __post_init__(self) -> None:
        self.mean0 = np.asarray(self.mean0, dtype=float)
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        if self.lam < 2:
            raise ValueError("population size must be at least 2")
        if self.max_evaluations < self.lam:
            raise ValueError("max_evaluations must cover at least one generation")


class CmaEs:
    """Optimizer state plus the ask/tell update loop.

    ``space`` is optional; when given, sampled candidates are clipped into
    its bounds before being returned (ranking then happens on the true
    fitness of the clipped points).
    """

    def __init__(self, params: CmaesParams, space: HyperParamSpace | None = None):
        self.params = params
        self.space = space
        n = params.mean0.shape[0]
        if space is not None and space.n != n:
            raise ValueError(f"mean0 has dimension {n}, space has {space.n}")
        self.n = n
        self.lam = params.lam

        # Log-rank recombination weights over the top half.
        self.mu = params.lam // 2
        raw = np.log((params.lam + 1) / 2.0) - np.log(np.arange(1, self.mu + 1))
        self.weights = raw / raw.sum()
        self.mu_eff = 1.0 / np.sum(self.weights**2)

        # Tutorial-default adaptation constants.
        self.c_sigma = (self.mu_eff + 2.0) / (n + self.mu_eff + 5.0)
        self.d_sigma = (
            1.0
            + 2.0 * max(0.0, math.sqrt((self.mu_eff - 1.0) / (n + 1.0)) - 1.0)
            + self.c_sigma
        )
        self.c_c = (4.0 + self.mu_eff / n) / (n + 4.0 + 2.0 * self.mu_eff / n)
        self.c_1 = 2.0 / ((n + 1.3) ** 2 + self.mu_eff)
        self.c_mu = min(
            1.0 - self.c_1,
            2.0 * (self.mu_eff - 2.0 + 1.0 / self.mu_eff) / ((n + 2.0) ** 2 + self.mu_eff),
        )
        self.chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n**2))

        self.mean = params.mean0.copy()
        self.sigma = params.sigma0
        self.C = np.eye(n)
        self.p_sigma = np.zeros(n)
        self.p_c = np.zeros(n)
        self.generation = 0
        self.evaluations = 0
        self.rng = np.random.default_rng(params.seed)
        self._pending: np.ndarray | None = None

    # -- sampling ---------------------------------------------------------

    def _decompose(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigendecomposition of C with a positivity floor."""
        eigvals, B = np.linalg.eigh(self.C)
        eigvals = np.maximum(eigvals, 1e-30)
        return B, np.sqrt(eigvals)

    def ask(self) -> np.ndarray:
        """Sample the next generation; shape (lambda, n)."""
        if self._pending is not None:
            raise ProtocolError("ask called again before tell")
        B, D = self._decompose()
        z = self.rng.standard_normal((self.lam, self.n))
        y = z @ (B * D).T
        x = self.mean + self.sigma * y
        if self.space is not None:
            x = np.array([self.space.clip(row) for row in x])
        self._pending = x.copy()
        return x

    # -- update -----------------------------------------------------------

    def tell(self, candidates: np.ndarray, fitnesses) -> None:
        """Rank the last batch by fitness (descending) and update the state."""
        if self._pending is None:
            raise ProtocolError("tell called without a pending ask")
        candidates = np.asarray(candidates, dtype=float)
        if candidates.shape != self._pending.shape or not np.array_equal(
            candidates, self._pending
        ):
            raise ProtocolError("candidates do not match the batch from the last ask")
        f = np.asarray(fitnesses, dtype=float)
        if f.shape != (self.lam,):
            raise ProtocolError(f"expected {self.lam} fitness values, got {f.shape}")
        if np.isnan(f).any():
            warnings.warn("NaN fitness ranked as worst candidate", stacklevel=2)
            f = np.where(np.isnan(f), -np.inf, f)

        order = np.argsort(-f, kind="stable")
        selected = candidates[order[: self.mu]]

        old_mean = self.mean
        new_mean = self.weights @ selected
        y_w = (new_mean - old_mean) / self.sigma

        B, D = self._decompose()
        c_inv_sqrt = (B / D) @ B.T

        self.p_sigma = (1.0 - self.c_sigma) * self.p_sigma + math.sqrt(
            self.c_sigma * (2.0 - self.c_sigma) * self.mu_eff
        ) * (c_inv_sqrt @ y_w)

        norm_ps = float(np.linalg.norm(self.p_sigma))
        decay = 1.0 - (1.0 - self.c_sigma) ** (2 * (self.generation + 1))
        h_sigma = 1.0 if norm_ps / math.sqrt(decay) < (1.4 + 2.0 / (self.n + 1)) * self.chi_n else 0.0

        self.p_c = (1.0 - self.c_c) * self.p_c + h_sigma * math.sqrt(
            self.c_c * (2.0 - self.c_c) * self.mu_eff
        ) * y_w

        y_sel = (selected - old_mean) / self.sigma
        rank_mu = y_sel.T @ (self.weights[:, None] * y_sel)
        rank_one = np.outer(self.p_c, self.p_c)
        self.C = (
            (1.0 - self.c_1 - self.c_mu) * self.C
            + self.c_1 * (rank_one + (1.0 - h_sigma) * self.c_c * (2.0 - self.c_c) * self.C)
            + self.c_mu * rank_mu
        )
        self.C = (self.C + self.C.T) / 2.0
        self._repair_covariance()

        self.sigma *= math.exp((self.c_sigma / self.d_sigma) * (norm_ps / self.chi_n - 1.0))
        self.mean = new_mean
        self.generation += 1
        self.evaluations += self.lam
        self._pending = None

    def _repair_covariance(self) -> None:
        """Floor eigenvalues so the conditioning stays within 1e14."""
        eigvals, B = np.linalg.eigh(self.C)
        top = float(eigvals.max())
        if top <= 0:
            self.C = np.eye(self.n) * 1e-30
            return
        floor = top / _MAX_CONDITION
        if eigvals.min() < floor:
            eigvals = np.maximum(eigvals, floor)
            self.C = (B * eigvals) @ B.T
            self.C = (self.C + self.C.T) / 2.0

    # -- termination --------------------------------------------------------

    def should_stop(self) -> tuple[bool, str]:
        """Budget, step-size collapse, or covariance ill-conditioning."""
        if self.evaluations >= self.params.max_evaluations:
            return True, "budget"
        eigvals = np.linalg.eigvalsh(self.C)
        if self.sigma * math.sqrt(float(eigvals.max())) < _SIGMA_COLLAPSE:
            return True, "sigma-collapse"
        if float(eigvals.max()) / max(float(eigvals.min()), 1e-300) > _MAX_CONDITION:
            return True, "ill-conditioned"
        return False, ""

    # -- persistence --------------------------------------------------------

    def snapshot(self) -> dict:
        """JSON-ready state, sufficient to resume a campaign bit-exactly."""
        if self._pending is not None:
            raise ProtocolError("cannot snapshot with an outstanding generation")
        return {
            "n": self.n,
            "lam": self.lam,
            "sigma0": self.params.sigma0,
            "max_evaluations": self.params.max_evaluations,
            "seed": self.params.seed,
            "mean0": self.params.mean0.tolist(),
            "mean": self.mean.tolist(),
            "sigma": self.sigma,
            "C": self.C.ravel().tolist(),
            "p_sigma": self.p_sigma.tolist(),
            "p_c": self.p_c.tolist(),
            "generation": self.generation,
            "evaluations": self.evaluations,
            "rng_state": self.rng.bit_generator.state,
        }

    @classmethod
    def from_snapshot(cls, snap: dict, space: HyperParamSpace | None = None) -> "CmaEs":
        params = CmaesParams(
            sigma0=snap["sigma0"],
            lam=snap["lam"],
            mean0=np.array(snap["mean0"]),
            max_evaluations=snap["max_evaluations"],
            seed=snap["seed"],
        )
        opt = cls(params, space=space)
        n = snap["n"]
        opt.mean = np.array(snap["mean"])
        opt.sigma = float(snap["sigma"])
        opt.C = np.array(snap["C"]).reshape(n, n)
        opt.p_sigma = np.array(snap["p_sigma"])
        opt.p_c = np.array(snap["p_c"])
        opt.generation = int(snap["generation"])
        opt.evaluations = int(snap["evaluations"])
        opt.rng.bit_generator.state = snap["rng_state"]
        return opt
