"""Intervals from a dataset that already holds model outputs.

The dataset is written to the package CSV format and read back, then the
surrogate is applied without any new model runs.
"""

import tempfile
from pathlib import Path

from floodgate import EvaluatedDataset, apply_to_existing_dataset, load_dataset, sample_iid, save_dataset
from floodgate import LinearSurrogate
from floodgate.models import AdditiveLinear

model = AdditiveLinear([1.0, 2.0, 0.5])
x = sample_iid(model.space, 5000, seed=15).values
with tempfile.TemporaryDirectory() as tmp:
    path = save_dataset(EvaluatedDataset(x, model(x)), Path(tmp) / "runs.csv")
    print(path.read_text().splitlines()[0])
    data = load_dataset(path)

surrogate = LinearSurrogate([0.9, 2.1, 0.4])
for r, t in zip(apply_to_existing_dataset(data, surrogate, model.space, seed=16), model.total_indices()):
    print(f"{r.name}: [{r.lower:.3f}, {r.upper:.3f}] truth {t:.3f}")
