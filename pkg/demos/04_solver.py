"""Recovering the minimizer from a straight-line guess.

Gradient descent with backtracking on the discretized functional, started
from the line between y(a) and y(b). Takes a few seconds.
"""

import numpy as np

from fracvar import SolverConfig, builtin_example, make_reference, minimize

spec = builtin_example(alpha=0.5, n=128)
res = minimize(spec, SolverConfig(init="linear-interpolant"))
ref = make_reference(spec)

print(f"iterations: {res.iterations}  converged: {res.converged}")
print(f"J: {res.J_init:.4e} -> {res.J_final:.4e}")
print(f"max |y - y_ref|: {np.max(np.abs(res.trajectory.values - ref.values)):.2e}")
for k in (0, 10, 100, 1000, len(res.J_history) - 1):
    if k < len(res.J_history):
        print(f"    J[{k:4d}] = {res.J_history[k]:.4e}")
print("\nresiduals at the computed minimizer:")
print(f"    inner {res.el.inner_norm:.3e}  outer {res.el.outer_norm:.3e}")
