"""Post-hoc analytics: IoU k-means anchor baseline, linear-regression
importance of hyper-parameters, and per-generation fitness statistics.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .objective import shape_iou_matrix
from .space import HyperParamSpace
from .trials import Trial

__all__ = [
    "KmeansResult",
    "RegressionReport",
    "GenerationStats",
    "kmeans_iou",
    "fit_importance_regression",
    "generation_stats",
    "stats_to_csv",
]


# ---------------------------------------------------------------------------
# IoU k-means
# ---------------------------------------------------------------------------


@dataclass
class KmeansResult:
    centroids: np.ndarray        # (k, 2)
    assignment: np.ndarray       # (N,)
    objective: float             # total within-cluster distance
    n_iters: int
    objective_trace: list[float]


def _distances(shapes: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """1 - IoU between each shape and each centroid, co-centered."""
    return 1.0 - shape_iou_matrix(shapes, centroids)


def kmeans_iou(shapes, k: int, seed: int = 0, max_iters: int = 100) -> KmeansResult:
    """Lloyd iteration under the 1 - IoU distance.

    Seeding is k-means++-style with the IoU distance as the sampling
    weight; the centroid update is the element-wise mean of the assigned
    shapes.  An emptied cluster is re-seeded at the point farthest from
    its nearest centroid.  Runs until the assignment stabilizes or
    max_iters; deterministic for a fixed seed.
    """
    shapes = np.atleast_2d(np.asarray(shapes, dtype=float))
    n = len(shapes)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= number of shapes, got k={k}, n={n}")
    if np.any(shapes <= 0):
        raise ValueError("shape extents must be positive")
    rng = np.random.default_rng(seed)

    # Seeding: first centroid uniform, the rest sampled proportional to the
    # distance to the nearest already-chosen centroid.
    centroids = [shapes[rng.integers(n)]]
    for _ in range(1, k):
        d_near = _distances(shapes, np.array(centroids)).min(axis=1)
        total = d_near.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d_near / total))
        centroids.append(shapes[idx])
    centroids = np.array(centroids)

    assignment = np.full(n, -1)
    trace: list[float] = []
    iters = 0
    for iters in range(1, max_iters + 1):
        dist = _distances(shapes, centroids)
        new_assignment = dist.argmin(axis=1)

        # Re-seed empty clusters at the farthest point from its nearest centroid.
        for c in range(k):
            if not np.any(new_assignment == c):
                nearest = dist[np.arange(n), new_assignment]
                far = int(np.argmax(nearest))
                centroids[c] = shapes[far]
                dist = _distances(shapes, centroids)
                new_assignment = dist.argmin(axis=1)

        converged = np.array_equal(new_assignment, assignment)
        assignment = new_assignment

        for c in range(k):
            centroids[c] = shapes[assignment == c].mean(axis=0)

        trace.append(float(_distances(shapes, centroids)[np.arange(n), assignment].sum()))
        if converged:
            break

    objective = trace[-1]
    return KmeansResult(centroids, assignment, objective, iters, trace)


# ---------------------------------------------------------------------------
# Regression importance
# ---------------------------------------------------------------------------


@dataclass
class RegressionReport:
    """OLS fit of normalized fitness on normalized hyper-parameters."""

    r_squared: float
    coefficients: dict[str, float]
    intercept: float
    n_samples: int
    ranking: list[str] = field(default_factory=list)
    zero_variance: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "r_squared": self.r_squared,
            "coefficients": self.coefficients,
            "intercept": self.intercept,
            "n_samples": self.n_samples,
            "ranking": self.ranking,
            "zero_variance": self.zero_variance,
        }


def _minmax(col: np.ndarray) -> tuple[np.ndarray, bool]:
    lo, hi = col.min(), col.max()
    if hi - lo < 1e-15:
        return np.zeros_like(col), True
    return (col - lo) / (hi - lo), False


def fit_importance_regression(trials: list[Trial], space: HyperParamSpace) -> RegressionReport:
    """Min-max normalize parameters and fitness to [0, 1], fit ordinary
    least squares, and rank dimensions by absolute coefficient."""
    good = [t for t in trials if math.isfinite(t.fitness)]
    if len(good) < space.n + 2:
        raise ValueError(
            f"need at least {space.n + 2} finite-fitness trials, got {len(good)}"
        )
    # canonical order makes the report bit-exact under input permutation
    good.sort(key=lambda t: t.trial_id)
    P = np.array([t.params_scaled for t in good])
    f = np.array([t.fitness for t in good])

    cols, flags = [], []
    for j in range(space.n):
        col, flat = _minmax(P[:, j])
        cols.append(col)
        flags.append(flat)
    X = np.column_stack(cols)
    y, y_flat = _minmax(f)

    active = [j for j in range(space.n) if not flags[j]]
    coefs = np.zeros(space.n)
    if active and not y_flat:
        design = np.column_stack([np.ones(len(y))] + [X[:, j] for j in active])
        beta, *_ = np.linalg.lstsq(design, y, rcond=None)
        intercept = float(beta[0])
        for pos, j in enumerate(active):
            coefs[j] = beta[pos + 1]
        residuals = y - design @ beta
        ss_res = float(residuals @ residuals)
        ss_tot = float(((y - y.mean()) ** 2).sum())
        r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    else:
        intercept = float(y.mean()) if len(y) else 0.0
        r_squared = 0.0

    names = space.names
    coefficients = {names[j]: float(coefs[j]) for j in range(space.n)}
    ranking = sorted(names, key=lambda nm: -abs(coefficients[nm]))
    return RegressionReport(
        r_squared=r_squared,
        coefficients=coefficients,
        intercept=intercept,
        n_samples=len(good),
        ranking=ranking,
        zero_variance=[names[j] for j in range(space.n) if flags[j]],
    )


# ---------------------------------------------------------------------------
# Generation statistics
# ---------------------------------------------------------------------------


@dataclass
class GenerationStats:
    generation: int
    min_fitness: float
    median_fitness: float
    max_fitness: float
    best_so_far: float
    failures: int


def generation_stats(trials: list[Trial]) -> list[GenerationStats]:
    """Per-generation min/median/max plus a running best; NaN fitness is
    excluded from the statistics but counted as a failure."""
    by_gen: dict[int, list[Trial]] = {}
    for t in trials:
        by_gen.setdefault(t.generation, []).append(t)
    stats: list[GenerationStats] = []
    best = float("nan")
    for gen in sorted(by_gen):
        values = np.array([t.fitness for t in by_gen[gen]])
        finite = values[np.isfinite(values)]
        failures = int(len(values) - len(finite))
        if len(finite):
            gen_max = float(finite.max())
            best = gen_max if math.isnan(best) else max(best, gen_max)
            stats.append(
                GenerationStats(
                    generation=gen,
                    min_fitness=float(finite.min()),
                    median_fitness=float(np.median(finite)),
                    max_fitness=gen_max,
                    best_so_far=best,
                    failures=failures,
                )
            )
        else:
            stats.append(
                GenerationStats(gen, float("nan"), float("nan"), float("nan"), best, failures)
            )
    return stats


def stats_to_csv(stats: list[GenerationStats]) -> str:
    out = io.StringIO()
    out.write("generation,min,median,max,best_so_far,failures\n")
    for s in stats:
        out.write(
            f"{s.generation},{s.min_fitness:.10g},{s.median_fitness:.10g},"
            f"{s.max_fitness:.10g},{s.best_so_far:.10g},{s.failures}\n"
        )
    return out.getvalue()
