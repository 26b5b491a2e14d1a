"""Exact-oracle tour of a 3x3 hazard grid.

Builds the enumerable model, compares the unconstrained optimum with the
primal-dual solution, then runs the property suite used by ``oracle-check``.

    python demos/oracle_walkthrough.py
"""

import numpy as np

from objsupp.approx import TabularSoftmaxPolicy
from objsupp.checks import run_suite
from objsupp.envs import HazardGridConfig, grid_to_cmdp
from objsupp.oracle import exact_objective, max_violation, primal_dual_solve, value_iteration

EPS = 0.05

grid = HazardGridConfig(3, 3, goal_cell=(2, 0), hazard_cells=((1, 0),), start_cell=(0, 0), max_steps=30)
spec = grid_to_cmdp(grid, 0.95, (0.9, 0.9), (1.0, 1.0), EPS)
print(f"{spec.state_count} states, {spec.action_count} actions, {spec.n_constraints} constraints")

# the shortest path to the goal crosses the hazard
_, greedy = value_iteration(spec)
print(f"unconstrained: return {exact_objective(spec, greedy):.3f}, "
      f"worst Q_C on support {np.max(max_violation(spec, greedy, 0.0)):.3f}")

pol, dual, trace = primal_dual_solve(spec, TabularSoftmaxPolicy(spec.state_count, 4), EPS, 3000, 20.0, 50.0)
print(f"primal-dual:   return {trace.task_objective[-1]:.3f}, "
      f"worst Q_C on support {np.max(max_violation(spec, pol, 0.0)):.4f}, ||lambda|| {trace.lambda_norm[-1]:.2f}")

suite = run_suite(spec, seed=0, gradient_points=5)
for name, res in suite["properties"].items():
    print(f"  {name:24s} {'ok ' if res['passed'] else 'BAD'}  error {res['error']:.2e}  tol {res['tolerance']:.0e}")

# a biased safety critic breaks the zero-risk reduction
bad = run_suite(spec, seed=0, corrupt=0.25, gradient_points=2)["properties"]["reduction"]
print(f"corrupted critic: reduction passed={bad['passed']}, error {bad['error']:.3f}")
