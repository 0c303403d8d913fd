"""Exercise the evolution strategy on the classic benchmark functions.

Shows the ask/tell loop, the population-size default, rank invariance, and
the stopping conditions.  Fitness follows the maximization convention:
both benchmarks peak at 0.
"""

import numpy as np

from anchoropt import CmaEs, CmaesParams, default_lambda
from anchoropt.benchmarks import rosenbrock, sphere

# --- 7-D sphere -------------------------------------------------------------

n = 7
lam = default_lambda(n)
print(f"population size for n={n}: lambda = 4 + floor(3 ln n) = {lam}")

params = CmaesParams(sigma0=0.3, lam=lam, mean0=np.full(n, 0.9), max_evaluations=lam * 200, seed=1)
opt = CmaEs(params)

target = np.full(n, 0.5)
best = -np.inf
print("\nsphere, target 0.5*ones:")
for gen in range(200):
    X = opt.ask()
    fitnesses = [sphere(x, target) for x in X]
    opt.tell(X, fitnesses)
    best = max(best, max(fitnesses))
    if gen % 20 == 0:
        print(f"  gen {gen:>3}   best {best:12.3e}   sigma {opt.sigma:.3e}")
    if best > -1e-10:
        break
print(f"converged at generation {opt.generation}: best fitness {best:.3e}")
stop, reason = opt.should_stop()
print(f"should_stop -> {stop} ({reason or 'still running'})")

# --- rank invariance ---------------------------------------------------------

# The updates use only fitness ranks, so any strictly increasing transform
# of the fitness leaves the candidate stream bit-identical.
a = CmaEs(CmaesParams(0.3, lam, np.zeros(n), lam * 50, seed=7))
b = CmaEs(CmaesParams(0.3, lam, np.zeros(n), lam * 50, seed=7))
for _ in range(10):
    Xa, Xb = a.ask(), b.ask()
    f = np.array([sphere(x) for x in Xa])
    a.tell(Xa, f)
    b.tell(Xb, np.tanh(f / 10.0) * 5 + 2)  # monotone, very different values
print("\nrank invariance: candidate streams identical =", np.array_equal(a.ask(), b.ask()))

# --- 5-D Rosenbrock ----------------------------------------------------------

lam5 = default_lambda(5)
opt = CmaEs(CmaesParams(0.3, lam5, np.zeros(5), lam5 * 500, seed=3))
best = -np.inf
while not opt.should_stop()[0]:
    X = opt.ask()
    f = [rosenbrock(x) for x in X]
    opt.tell(X, f)
    best = max(best, max(f))
    if best > -1e-6:
        break
print(f"\nrosenbrock 5-D: best {best:.2e} after {opt.generation} generations "
      f"({opt.evaluations} evaluations), mean near ones: {np.round(opt.mean, 3).tolist()}")
