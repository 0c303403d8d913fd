"""Sequential model-based optimization with both surrogates.

Fits the Gaussian process and the random forest to the same 1-D multimodal
curve, prints their expected-improvement landscapes, then runs the full
budgeted loop and compares how quickly each surrogate finds the optimum.
"""

import numpy as np

from anchoropt import BoConfig, expected_improvement, gp_fit, rf_fit, run_sequential_bo
from anchoropt.benchmarks import FORRESTER_ARGMAX, forrester
from anchoropt.space import HyperParam, HyperParamSpace
from anchoropt.surrogate import RfConfig, latin_hypercube

space = HyperParamSpace((HyperParam("x", 0.0, 1.0),))

# --- surrogates on a small design -------------------------------------------

X = latin_hypercube(space, 8, seed=0)
y = np.array([forrester(x[0]) for x in X])
best = float(y.max())
print("design points:", np.round(X.ravel(), 3).tolist())
print("fitness      :", np.round(y, 2).tolist())

gp = gp_fit(X, y, seed=0)
rf = rf_fit(X, y, RfConfig(n_trees=25, seed=0))
print(f"\nGP kernel after marginal-likelihood fit: lengthscale {gp.lengthscales[0]:.3f}, "
      f"signal var {gp.signal_var:.3f}, noise {gp.noise_var:.2e}")

grid = np.linspace(0.01, 1.0, 9)[:, None]
mu_g, var_g = gp.predict(grid)
mu_r, var_r = rf.predict(grid)
ei_g = expected_improvement(mu_g, var_g, best, xi=0.01)
ei_r = expected_improvement(mu_r, var_r, best, xi=0.01)
print("\n   x      true      GP mu+-sd         EI(GP)    RF mu+-sd         EI(RF)")
for i, x in enumerate(grid.ravel()):
    print(f"  {x:.2f}  {forrester(x):8.3f}   {mu_g[i]:7.3f}+-{np.sqrt(var_g[i]):5.3f}   "
          f"{ei_g[i]:8.4f}  {mu_r[i]:7.3f}+-{np.sqrt(var_r[i]):5.3f}   {ei_r[i]:8.4f}")

# --- full loops ---------------------------------------------------------------

print(f"\ntrue optimum near x = {FORRESTER_ARGMAX}")
for kind in ("gp", "rf"):
    cfg = BoConfig(budget=30, initial_design_size=8, seed=4)
    history = run_sequential_bo(lambda v: forrester(v[0]), space, cfg, surrogate_kind=kind)
    best_trial = max(history, key=lambda t: t.fitness)
    first_hit = next(
        (t.trial_id for t in history
         if abs(t.params_scaled[0] - FORRESTER_ARGMAX) < 0.01),
        None,
    )
    print(f"  {kind}: best x = {best_trial.params_scaled[0]:.4f} "
          f"(fitness {best_trial.fitness:.4f}), "
          f"first within 0.01 at evaluation {first_hit}")
