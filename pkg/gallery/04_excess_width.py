"""How fast the floodgate interval tightens around the surrogate's own bound.

The excess width subtracts the estimated MSE ratio from the interval width.
Its log-log slope against the budget should sit near -1/2.
"""

from floodgate import ExperimentConfig, run_width_curve

config = ExperimentConfig(
    model={"name": "ishigami"},
    surrogate={"kind": "krr", "target_rel_mse": 0.05},
    methods=["floodgate"],
    budgets=[100, 1000, 10_000],
    trials=50,
    seed=8,
)
curve = run_width_curve(config)
for row in curve.rows:
    print(f"{row['name']:>4} N={row['N']:>6} mean width {row['mean_width']:.4f} excess {row['mean_excess']:.4f}")
for name, slope in curve.slopes.items():
    print(f"{name}: slope {slope:.3f}")
