"""Input distributions, i.i.d. and Latin hypercube sampling, conditional resampling."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from floodgate.rng import derive_seed, substream


class Distribution(enum.Enum):
    UNIFORM = "uniform"


@dataclass(frozen=True)
class InputMarginal:
    """One model input and its marginal law."""

    name: str
    low: float
    high: float
    distribution: Distribution = Distribution.UNIFORM

    def __post_init__(self):
        if not (math.isfinite(self.low) and math.isfinite(self.high)):
            raise ValueError(f"input {self.name!r}: bounds must be finite")
        if not self.low < self.high:
            raise ValueError(f"input {self.name!r}: need low < high, got [{self.low}, {self.high}]")

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        """Map points of [0, 1) through the inverse CDF."""
        out = self.low + (self.high - self.low) * np.asarray(u, dtype=float)
        # guard against rounding up to high + ulp
        return np.clip(out, self.low, self.high)

    def to_unit(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.low) / (self.high - self.low)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.from_unit(rng.random(size))

    @property
    def mean(self) -> float:
        return 0.5 * (self.low + self.high)

    @property
    def variance(self) -> float:
        return (self.high - self.low) ** 2 / 12.0


ConditionalSampler = Callable[[np.random.Generator, np.ndarray, int, int], np.ndarray]


@dataclass(frozen=True)
class InputSpace:
    """Joint input distribution.

    Only independent inputs are sampled natively. For dependent inputs, pass
    ``independent=False`` together with ``conditional_sampler(rng, values, j, K)``
    returning an ``(n, K)`` array of draws of input ``j`` given the other
    columns of ``values``; :func:`sample_iid` then still draws from the product
    of marginals, so dependent joint sampling is the caller's job.
    """

    inputs: tuple
    independent: bool = True
    conditional_sampler: Optional[ConditionalSampler] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if len(self.inputs) < 1:
            raise ValueError("an input space needs at least one input")
        names = [m.name for m in self.inputs]
        if len(set(names)) != len(names):
            raise ValueError(f"input names must be unique, got {names}")
        if not self.independent and self.conditional_sampler is None:
            raise ValueError("dependent inputs require a conditional_sampler")

    @classmethod
    def uniform(cls, bounds: Sequence[Sequence[float]], names: Optional[Sequence[str]] = None):
        if names is None:
            names = [f"x_{i + 1}" for i in range(len(bounds))]
        if len(names) != len(bounds):
            raise ValueError("names and bounds differ in length")
        return cls(tuple(InputMarginal(str(nm), float(lo), float(hi)) for nm, (lo, hi) in zip(names, bounds)))

    @property
    def d(self) -> int:
        return len(self.inputs)

    @property
    def names(self) -> list:
        return [m.name for m in self.inputs]

    @property
    def bounds(self) -> np.ndarray:
        return np.array([[m.low, m.high] for m in self.inputs])

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.column_stack([m.from_unit(u[:, j]) for j, m in enumerate(self.inputs)])

    def to_unit(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.column_stack([m.to_unit(x[:, j]) for j, m in enumerate(self.inputs)])

    def contains(self, x: np.ndarray) -> bool:
        b = self.bounds
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= b[:, 0]) & (x <= b[:, 1])))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SampleMatrix:
    """An ``(n, d)`` block of input draws with its seed and optional batch labels."""

    values: np.ndarray
    seed: int
    batch_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("sample values must be a 2-d array")
        object.__setattr__(self, "values", _frozen(values))
        if self.batch_ids is not None:
            ids = np.asarray(self.batch_ids, dtype=np.int64)
            check_batches(ids, values.shape[0])
            object.__setattr__(self, "batch_ids", _frozen(ids))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def num_batches(self) -> int:
        return 0 if self.batch_ids is None else int(self.batch_ids.max()) + 1


@dataclass(frozen=True)
class ResampleBlock:
    """``K`` conditional redraws of input ``j`` for every row of a sample."""

    j: int
    values: np.ndarray
    seed: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[1] < 1:
            raise ValueError("resample block must be (n, K) with K >= 1")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def K(self) -> int:
        return self.values.shape[1]


def check_batches(batch_ids: np.ndarray, n: int) -> int:
    """Validate contiguous equal-sized batches labelled 0..B-1; return B."""
    ids = np.asarray(batch_ids)
    if ids.shape != (n,):
        raise ValueError(f"batch_ids must have length {n}")
    if n == 0:
        raise ValueError("empty batch labelling")
    starts = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1]])
    labels = ids[starts]
    if not np.array_equal(labels, np.arange(len(labels))):
        raise ValueError("batches must be contiguous and labelled 0, 1, 2, ... in order")
    sizes = np.diff(np.r_[starts, n])
    if np.any(sizes != sizes[0]):
        raise ValueError("batches must be equal-sized")
    return len(labels)


def sample_iid(space: InputSpace, n: int, seed: int) -> SampleMatrix:
    """Draw ``n`` independent rows from the product of marginals."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = substream(seed, "iid")
    u = rng.random((n, space.d))
    return SampleMatrix(space.from_unit(u), seed=seed)


def lhs_unit(rng: np.random.Generator, batch_size: int, d: int) -> np.ndarray:
    """One randomized Latin hypercube on the unit cube."""
    strata = np.argsort(rng.random((d, batch_size)), axis=1).T
    jitter = rng.random((batch_size, d))
    return (strata + jitter) / batch_size


def sample_lhs_batches(space: InputSpace, batch_size: int, num_batches: int, seed: int) -> SampleMatrix:
    """Stack ``num_batches`` independent randomized Latin hypercubes.

    In each batch and each dimension every one of the ``batch_size``
    equal-probability strata holds exactly one point, placed uniformly
    within it. Rows of batch ``b`` are contiguous and labelled ``b``.
    """
    if batch_size < 2:
        raise ValueError(f"batch_size must be >= 2, got {batch_size}")
    if num_batches < 1:
        raise ValueError(f"num_batches must be >= 1, got {num_batches}")
    rng = substream(seed, "lhs")
    u = np.vstack([lhs_unit(rng, batch_size, space.d) for _ in range(num_batches)])
    ids = np.repeat(np.arange(num_batches), batch_size)
    return SampleMatrix(space.from_unit(u), seed=seed, batch_ids=ids)


def resample_conditional(space: InputSpace, samples, j: int, K: int, seed: int) -> ResampleBlock:
    """Draw ``K`` copies of input ``j`` from its law given the other inputs.

    For independent inputs the conditional law is the marginal, so draws do
    not look at ``samples`` beyond its row count.
    """
    if not 0 <= j < space.d:
        raise ValueError(f"input index {j} out of range for d={space.d}")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    values = samples.values if isinstance(samples, SampleMatrix) else np.asarray(samples, dtype=float)
    n = values.shape[0]
    rng = substream(seed, "resample", j)
    if space.independent:
        draws = space.inputs[j].sample(rng, (n, K))
    else:
        draws = np.asarray(space.conditional_sampler(rng, values, j, K), dtype=float).reshape(n, K)
    return ResampleBlock(j, draws, seed=derive_seed(seed, "resample", j))
