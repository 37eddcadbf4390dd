"""Sensitivity of a rainfall-runoff calibration score to Hymod parameters.

The response is the Nash-Sutcliffe efficiency of a year of simulated flow
against synthetic observations. A surrogate is trained to the high accuracy
tier, then floodgate and pick-freeze intervals are compared at N = 1000.
"""

from floodgate import BudgetPlan, EvaluatedDataset, build_paired_dataset, floodgate_all_inputs, sample_iid, spf_jansen
from floodgate.harness import make_model, train_surrogate

model = make_model({"name": "hymod"})
bundle = train_surrogate(model, {"kind": "krr", "tier": "high"}, seed=11)
print(f"surrogate: {bundle.info['train_size']} training runs, relative MSE {bundle.info['rel_mse']:.4f}")

N = 1000
space = model.space
x = sample_iid(space, N, seed=12).values
fg = floodgate_all_inputs(EvaluatedDataset(x, model(x)), bundle.surrogate, space, seed=13)
pairs = build_paired_dataset(model, space, BudgetPlan(N, space.d).n("spf"), seed=14)
for j, r in enumerate(fg):
    s = spf_jansen(pairs, j)
    print(f"{r.name:>5}: floodgate [{r.lower:.3f}, {r.upper:.3f}]  pick-freeze [{s.lower:.3f}, {s.upper:.3f}]")
