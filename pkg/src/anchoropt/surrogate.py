"""Sequential model-based optimization: GP and random-forest surrogates
driving an expected-improvement acquisition.

The GP uses a Matern-5/2 kernel with per-dimension lengthscales, fitted by
maximizing the marginal likelihood from several random starts.  The forest
is an ensemble of regression trees on bootstrap samples; its predictive
mean/variance are the mean and variance of the per-tree predictions.
Everything is seeded and reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from time import perf_counter

import numpy as np
from scipy import optimize, stats
from scipy.linalg import LinAlgError, cho_solve, cholesky
from sklearn.tree import DecisionTreeRegressor

from .space import HyperParamSpace
from .trials import Trial

__all__ = [
    "BoConfig",
    "GpSurrogate",
    "RfConfig",
    "RfSurrogate",
    "gp_fit",
    "gp_predict",
    "rf_fit",
    "rf_predict",
    "expected_improvement",
    "propose_next",
    "run_sequential_bo",
]

_NOISE_FLOOR = 1e-8
_NOISE_CEIL = 1e-2
_VAR_FLOOR = 1e-12

# Box constraints for the marginal-likelihood search, in log space.
_LOG_LS_BOUNDS = (math.log(1e-2), math.log(1e2))
_LOG_SF2_BOUNDS = (math.log(1e-4), math.log(1e4))
_LOG_NOISE_BOUNDS = (math.log(_NOISE_FLOOR), math.log(_NOISE_CEIL))


# ---------------------------------------------------------------------------
# Gaussian process
# ---------------------------------------------------------------------------


def _matern52(X1: np.ndarray, X2: np.ndarray, lengthscales: np.ndarray, signal_var: float) -> np.ndarray:
    diff = (X1[:, None, :] - X2[None, :, :]) / lengthscales
    r = np.sqrt(np.maximum(np.sum(diff * diff, axis=-1), 0.0))
    sr = math.sqrt(5.0) * r
    return signal_var * (1.0 + sr + sr * sr / 3.0) * np.exp(-sr)


@dataclass
class GpSurrogate:
    """Fitted GP: training data, kernel hyper-parameters, cached factorization."""

    X: np.ndarray
    y: np.ndarray
    lengthscales: np.ndarray
    signal_var: float
    noise_var: float
    y_mean: float
    y_std: float
    chol: np.ndarray          # lower Cholesky factor of K + noise I
    alpha: np.ndarray         # (K + noise I)^-1 y_standardized

    @property
    def prior_variance(self) -> float:
        """Prior predictive variance in raw fitness units."""
        return self.signal_var * self.y_std**2

    def predict(self, Xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        k_star = _matern52(self.X, Xq, self.lengthscales, self.signal_var)
        mu_std = k_star.T @ self.alpha
        v = cho_solve((self.chol, True), k_star)
        var_std = self.signal_var - np.sum(k_star * v, axis=0)
        var_std = np.maximum(var_std, 0.0)
        mu = self.y_mean + self.y_std * mu_std
        var = var_std * self.y_std**2
        return mu, var


def _nll_and_grad(
    log_theta: np.ndarray, X: np.ndarray, y_std: np.ndarray, fixed_noise: float | None
) -> tuple[float, np.ndarray]:
    """Negative log marginal likelihood and its gradient in log-parameter space."""
    n, n_dim = X.shape
    ls = np.exp(log_theta[:n_dim])
    sf2 = math.exp(log_theta[n_dim])
    noise = fixed_noise if fixed_noise is not None else math.exp(log_theta[n_dim + 1])

    diff = (X[:, None, :] - X[None, :, :]) / ls
    sq = diff * diff
    r = np.sqrt(np.maximum(sq.sum(axis=-1), 0.0))
    a = math.sqrt(5.0) * r
    decay = np.exp(-a)
    K_f = sf2 * (1.0 + a + a * a / 3.0) * decay
    K = K_f + noise * np.eye(n)
    try:
        L = cholesky(K, lower=True)
    except LinAlgError:
        return 1e25, np.zeros_like(log_theta)
    alpha = cho_solve((L, True), y_std)
    nll = float(
        0.5 * y_std @ alpha + np.sum(np.log(np.diag(L))) + 0.5 * n * math.log(2 * math.pi)
    )

    # d nll / d theta = 0.5 tr((K^-1 - alpha alpha^T) dK/dtheta)
    K_inv = cho_solve((L, True), np.eye(n))
    W = K_inv - np.outer(alpha, alpha)
    grad = np.empty_like(log_theta)
    ls_common = sf2 * (5.0 / 3.0) * (1.0 + a) * decay
    for d in range(n_dim):
        grad[d] = 0.5 * np.sum(W * (ls_common * sq[:, :, d]))
    grad[n_dim] = 0.5 * np.sum(W * K_f)
    if fixed_noise is None:
        grad[n_dim + 1] = 0.5 * noise * np.trace(W)
    return nll, grad


def _chol_with_escalation(K_f: np.ndarray, noise: float) -> tuple[np.ndarray, float]:
    """Cholesky of K_f + noise I, escalating noise by decades up to the ceiling."""
    n = K_f.shape[0]
    while noise <= _NOISE_CEIL:
        try:
            return cholesky(K_f + noise * np.eye(n), lower=True), noise
        except LinAlgError:
            noise *= 10.0
    raise LinAlgError(f"kernel matrix singular even at noise {_NOISE_CEIL}")


def gp_fit(
    X: np.ndarray,
    y: np.ndarray,
    noise: float | None = None,
    seed=0,
    restarts: int = 5,
) -> GpSurrogate:
    """Fit kernel hyper-parameters by maximum marginal likelihood.

    ``noise`` pins the noise variance (floored at 1e-8) instead of
    optimizing it.  Targets are standardized internally; a constant target
    column falls back to unit scale.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) != len(y):
        raise ValueError("X and y must have the same length")
    if len(y) < 2:
        raise ValueError("need at least 2 observations to fit")
    n_dim = X.shape[1]

    y_mean = float(np.mean(y))
    y_sd = float(np.std(y))
    if y_sd < 1e-12:
        y_sd = 1.0
    y_standardized = (y - y_mean) / y_sd

    fixed_noise = max(noise, _NOISE_FLOOR) if noise is not None else None
    rng = np.random.default_rng(seed)

    bounds = [_LOG_LS_BOUNDS] * n_dim + [_LOG_SF2_BOUNDS]
    default_start = [math.log(0.5)] * n_dim + [0.0]
    if fixed_noise is None:
        bounds.append(_LOG_NOISE_BOUNDS)
        default_start.append(math.log(1e-4))

    starts = [np.array(default_start)]
    for _ in range(restarts):
        s = [rng.uniform(math.log(0.05), math.log(5.0)) for _ in range(n_dim)]
        s.append(rng.uniform(math.log(0.1), math.log(10.0)))
        if fixed_noise is None:
            s.append(rng.uniform(*_LOG_NOISE_BOUNDS))
        starts.append(np.array(s))

    best_theta, best_val = None, np.inf
    for start in starts:
        res = optimize.minimize(
            _nll_and_grad,
            start,
            args=(X, y_standardized, fixed_noise),
            method="L-BFGS-B",
            jac=True,
            bounds=bounds,
            options={"maxiter": 60},
        )
        if res.fun < best_val:
            best_val, best_theta = float(res.fun), res.x
    assert best_theta is not None

    ls = np.exp(best_theta[:n_dim])
    sf2 = math.exp(best_theta[n_dim])
    noise_var = fixed_noise if fixed_noise is not None else math.exp(best_theta[n_dim + 1])
    noise_var = min(max(noise_var, _NOISE_FLOOR), _NOISE_CEIL)

    K_f = _matern52(X, X, ls, sf2)
    L, noise_var = _chol_with_escalation(K_f, noise_var)
    alpha = cho_solve((L, True), y_standardized)
    return GpSurrogate(
        X=X.copy(),
        y=y.copy(),
        lengthscales=ls,
        signal_var=sf2,
        noise_var=noise_var,
        y_mean=y_mean,
        y_std=y_sd,
        chol=L,
        alpha=alpha,
    )


def gp_predict(model: GpSurrogate, x: np.ndarray) -> tuple[float, float] | tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance; scalars for a single point."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    mu, var = model.predict(x)
    if single:
        return float(mu[0]), float(var[0])
    return mu, var


# ---------------------------------------------------------------------------
# Random forest
# ---------------------------------------------------------------------------


@dataclass
class RfConfig:
    n_trees: int = 25
    max_depth: int | None = None
    min_samples_leaf: int = 1
    max_features: float = 0.8
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 2:
            raise ValueError("need at least 2 trees for a variance estimate")


@dataclass
class RfSurrogate:
    """Bagged regression trees with across-tree predictive variance."""

    trees: list
    X: np.ndarray
    y: np.ndarray
    sample_indices: list[np.ndarray]

    def predict(self, Xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        # sorting makes the reduction exactly invariant to tree order
        preds = np.sort(np.stack([t.predict(Xq) for t in self.trees]), axis=0)
        mu = preds.mean(axis=0)
        var = np.maximum(((preds - mu) ** 2).mean(axis=0), _VAR_FLOOR)
        return mu, var


def rf_fit(X: np.ndarray, y: np.ndarray, config: RfConfig | None = None) -> RfSurrogate:
    """Fit the tree ensemble on bootstrap samples of (X, y)."""
    config = config or RfConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) != len(y):
        raise ValueError("X and y must have the same length")
    if len(y) < 2:
        raise ValueError("need at least 2 observations to fit")
    rng = np.random.default_rng(config.seed)
    n = len(y)
    trees, indices = [], []
    for _ in range(config.n_trees):
        idx = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
        tree = DecisionTreeRegressor(
            max_depth=config.max_depth,
            min_samples_leaf=config.min_samples_leaf,
            max_features=config.max_features,
            random_state=int(rng.integers(0, 2**31 - 1)),
        )
        tree.fit(X[idx], y[idx])
        trees.append(tree)
        indices.append(idx)
    return RfSurrogate(trees=trees, X=X.copy(), y=y.copy(), sample_indices=indices)


def rf_predict(model: RfSurrogate, x: np.ndarray) -> tuple[float, float] | tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    mu, var = model.predict(x)
    if single:
        return float(mu[0]), float(var[0])
    return mu, var


# ---------------------------------------------------------------------------
# Acquisition
# ---------------------------------------------------------------------------


def expected_improvement(mu, var, best: float, xi: float = 0.0):
    """Closed-form EI for maximization: E[max(f - best - xi, 0)].

    With zero variance this degrades to max(mu - best - xi, 0).
    """
    mu = np.asarray(mu, dtype=float)
    var = np.asarray(var, dtype=float)
    if np.any(var < 0):
        raise ValueError("variance must be nonnegative")
    d = mu - best - xi
    s = np.sqrt(var)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(s > 0, d / np.where(s > 0, s, 1.0), 0.0)
    ei = np.where(s > 0, d * stats.norm.cdf(z) + s * stats.norm.pdf(z), np.maximum(d, 0.0))
    if ei.ndim == 0:
        return float(ei)
    return ei


@dataclass
class BoConfig:
    budget: int
    initial_design_size: int | None = None
    acquisition_samples: int = 2048
    xi: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        if self.initial_design_size is not None and self.initial_design_size < 2:
            raise ValueError("initial design needs at least 2 points")
        if self.initial_design_size is not None and self.budget <= self.initial_design_size:
            raise ValueError("budget must exceed the initial design size")

    def resolved_design_size(self, n_dim: int) -> int:
        if self.initial_design_size is not None:
            return self.initial_design_size
        return min(max(10, 2 * (n_dim + 1)), self.budget - 1)


def propose_next(
    surrogate,
    space: HyperParamSpace,
    best: float,
    config: BoConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Maximize EI over random candidates plus local perturbations of the
    best points seen so far; ties break to the lowest candidate index."""
    lo, hi = space.lo, space.hi
    cands = np.array([space.sample_uniform(rng) for _ in range(config.acquisition_samples)])
    order = np.argsort(-surrogate.y, kind="stable")[:10]
    if len(order):
        local = surrogate.X[order] + rng.normal(0.0, 0.01 * (hi - lo), size=(len(order), space.n))
        local = np.array([space.clip(row) for row in local])
        cands = np.vstack([cands, local])
    mu, var = surrogate.predict(cands)
    ei = expected_improvement(mu, var, best, config.xi)
    return cands[int(np.argmax(ei))]


def latin_hypercube(space: HyperParamSpace, size: int, seed) -> np.ndarray:
    """Space-filling design over (lo, hi], deterministic per seed."""
    sampler = stats.qmc.LatinHypercube(d=space.n, seed=np.random.default_rng(seed))
    unit = sampler.random(size)
    return space.hi - unit * (space.hi - space.lo)


def run_sequential_bo(
    objective,
    space: HyperParamSpace,
    config: BoConfig,
    surrogate_kind: str = "gp",
    initial_history: list[Trial] | None = None,
    rf_config: RfConfig | None = None,
) -> list[Trial]:
    """Initial space-filling design, then fit / propose / evaluate until the
    budget is spent.  Failed evaluations are recorded as NaN trials and left
    out of the surrogate.  Deterministic for a fixed seed and objective."""
    if surrogate_kind not in ("gp", "rf"):
        raise ValueError(f"unknown surrogate kind {surrogate_kind!r}")
    history: list[Trial] = list(initial_history or [])
    n_init = config.resolved_design_size(space.n)
    design = latin_hypercube(space, n_init, [config.seed, 0xD351])

    def evaluate(t: int, x: np.ndarray) -> Trial:
        x = space.clip(x)
        start = perf_counter()
        try:
            fitness = float(objective(x))
            status = "ok" if math.isfinite(fitness) else "failed"
        except Exception:
            fitness, status = float("nan"), "failed"
        return Trial(
            trial_id=t,
            generation=t,
            params_scaled=[float(v) for v in x],
            params_physical=space.transform(x),
            fitness=fitness,
            status=status,
            wall_time_s=perf_counter() - start,
        )

    while len(history) < config.budget:
        t = len(history)
        if t < n_init:
            x = design[t]
        else:
            good = [tr for tr in history if tr.ok]
            rng = np.random.default_rng([config.seed, t])
            if len(good) < 2:
                x = space.sample_uniform(rng)
            else:
                X = np.array([tr.params_scaled for tr in good])
                y = np.array([tr.fitness for tr in good])
                if surrogate_kind == "gp":
                    model = gp_fit(X, y, seed=[config.seed, t, 1])
                else:
                    cfg = rf_config or RfConfig()
                    model = rf_fit(X, y, RfConfig(
                        n_trees=cfg.n_trees,
                        max_depth=cfg.max_depth,
                        min_samples_leaf=cfg.min_samples_leaf,
                        max_features=cfg.max_features,
                        bootstrap=cfg.bootstrap,
                        seed=int(np.random.default_rng([config.seed, t, 2]).integers(2**31)),
                    ))
                x = propose_next(model, space, float(y.max()), config, rng)
        history.append(evaluate(t, x))
    return history
