from __future__ import annotations

from typing import Optional

import numpy as np

from floodgate.space import InputSpace


class ModelFunction:
    """A deterministic scalar model ``f*: R^d -> R`` with its default input space.

    Subclasses implement :meth:`_evaluate` on an ``(n, d)`` array. Calling the
    model accepts a single point or a batch.
    """

    name = "model"

    def __init__(self, space: InputSpace):
        self.space = space

    @property
    def d(self) -> int:
        return self.space.d

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x2 = np.atleast_2d(x)
        if x2.shape[1] != self.d:
            raise ValueError(f"{self.name} expects {self.d} inputs, got {x2.shape[1]}")
        y = np.asarray(self._evaluate(x2), dtype=float)
        return y[0] if single else y

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def total_indices(self) -> Optional[np.ndarray]:
        """Closed-form total-order indices, or None when not available."""
        return None

    def describe(self) -> dict:
        return {"name": self.name}

    def __repr__(self):
        return f"{type(self).__name__}(d={self.d})"


class CountingModel:
    """Wraps a model and counts every point it evaluates."""

    def __init__(self, model):
        self.model = model
        self.count = 0

    def __getattr__(self, item):
        return getattr(self.model, item)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        self.count += 1 if x.ndim == 1 else x.shape[0]
        return self.model(x)
