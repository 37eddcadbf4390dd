"""Floodgate, Panin bounds and Jansen pick-freeze on the same model budget.

Floodgate and the Panin bounds share one sample of N runs. Pick-freeze
spends the same N on about N / (d + 1) base rows plus their d frozen copies,
so it sees far fewer independent points.
"""

from floodgate import (BudgetPlan, EvaluatedDataset, build_paired_dataset, floodgate_all_inputs, panin_all_inputs,
                       sample_iid, spf_jansen, train_surrogate)
from floodgate.models import Ishigami

N = 1000
model = Ishigami()
space = model.space
surrogate = train_surrogate(model, {"kind": "krr", "target_rel_mse": 0.05}, seed=1).surrogate

x = sample_iid(space, N, seed=4).values
data = EvaluatedDataset(x, model(x))
fg = floodgate_all_inputs(data, surrogate, space, seed=5)
pn = panin_all_inputs(data, surrogate, space, seed=5)

plan = BudgetPlan(N, space.d)
pairs = build_paired_dataset(model, space, plan.n("spf"), seed=6)
spf = [spf_jansen(pairs, j, name=space.names[j]) for j in range(space.d)]
print(f"pick-freeze uses {plan.n('spf')} base rows, {plan.model_evaluations('spf')} runs")

truth = model.total_indices()
for j, name in enumerate(space.names):
    print(f"{name}: truth {truth[j]:.3f}")
    for label, r in (("floodgate", fg[j]), ("panin", pn[j]), ("pick-freeze", spf[j])):
        print(f"   {label:>11} [{r.lower:.3f}, {r.upper:.3f}] width {r.width:.3f}")
