"""Latin hypercube designs with batch-means variance estimates.

Rows inside one hypercube are dependent, so the interval treats each batch
as a single observation. With 100 batches of 32 the interval is built from
100 batch means.
"""

from floodgate import EvaluatedDataset, floodgate_all_inputs, sample_lhs_batches, train_surrogate
from floodgate.models import Ishigami

model = Ishigami()
surrogate = train_surrogate(model, {"kind": "krr", "target_rel_mse": 0.05}, seed=1).surrogate
design = sample_lhs_batches(model.space, batch_size=32, num_batches=100, seed=9)
data = EvaluatedDataset(design.values, model(design.values), batch_ids=design.batch_ids)
print(f"{data.n} rows in {data.num_batches} batches")
for r, t in zip(floodgate_all_inputs(data, surrogate, model.space, seed=10), model.total_indices()):
    print(f"{r.name}: [{r.lower:.3f}, {r.upper:.3f}] truth {t:.3f} (n used: {r.diagnostics['n']})")
