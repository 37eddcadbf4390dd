"""Monte Carlo coverage of the interval methods on an analytic model.

Each trial draws fresh data from its own seeded stream, so the study can be
rerun exactly. The summary rows are the same ones the ``coverage`` command
writes to coverage.csv.
"""

from floodgate import ExperimentConfig, run_coverage_experiment

config = ExperimentConfig(
    model={"name": "ishigami"},
    surrogate={"kind": "krr", "target_rel_mse": 0.05},
    methods=["floodgate", "spf", "panin"],
    budgets=[500, 2000],
    trials=100,
    seed=7,
)
report = run_coverage_experiment(config)
print(f"{'method':>10} {'input':>6} {'N':>6} {'coverage':>9} {'mean width':>11}")
for row in report.rows():
    print(f"{row['method']:>10} {row['name']:>6} {row['N']:>6} {row['coverage']:9.3f} {row['mean_width']:11.4f}")
