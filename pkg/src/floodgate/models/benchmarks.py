"""Analytic benchmark functions with known total-order indices."""

from __future__ import annotations

import math
import warnings

import numpy as np

from floodgate.models.base import ModelFunction
from floodgate.rng import substream
from floodgate.space import InputSpace


class Ishigami(ModelFunction):
    """``sin x1 + a sin^2 x2 + b x3^4 sin x1`` on ``(-pi, pi)^3``."""

    name = "ishigami"

    def __init__(self, a: float = 7.0, b: float = 0.1):
        super().__init__(InputSpace.uniform([(-math.pi, math.pi)] * 3))
        self.a = float(a)
        self.b = float(b)

    def _evaluate(self, x):
        s1 = np.sin(x[:, 0])
        return s1 + self.a * np.sin(x[:, 1]) ** 2 + self.b * x[:, 2] ** 4 * s1

    def variance_terms(self):
        a, b, pi = self.a, self.b, math.pi
        v1 = 0.5 * (1 + b * pi**4 / 5) ** 2
        v2 = a**2 / 8
        v13 = b**2 * pi**8 * (1 / 18 - 1 / 50)
        return v1, v2, v13

    def total_indices(self):
        v1, v2, v13 = self.variance_terms()
        v = v1 + v2 + v13
        return np.array([(v1 + v13) / v, v2 / v, v13 / v])

    def describe(self):
        return {"name": self.name, "a": self.a, "b": self.b}


class AdditiveLinear(ModelFunction):
    """``sum_i a_i x_i`` with independent uniform(0, 1) inputs."""

    name = "additive_linear"

    def __init__(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float).ravel()
        if coeffs.size < 1:
            raise ValueError("need at least one coefficient")
        super().__init__(InputSpace.uniform([(0.0, 1.0)] * coeffs.size))
        self.coeffs = coeffs
        self.degenerate = not np.any(coeffs)
        if self.degenerate:
            warnings.warn("all-zero coefficients: model is constant and every index is 0", stacklevel=2)

    def _evaluate(self, x):
        return x @ self.coeffs

    def total_indices(self):
        sq = self.coeffs**2
        total = sq.sum()
        if total == 0:
            return np.zeros_like(sq)
        return sq / total

    def describe(self):
        return {"name": self.name, "coeffs": self.coeffs.tolist()}


class SparseInteraction(ModelFunction):
    """Seeded sparse additive-plus-pairwise function on uniform(0, 1)^d.

    Construction, with ``c_j = x_j - 1/2`` and all randomness from
    ``substream(seed, "highdim")``:

    * ``max(3, d // 10)`` active coordinates chosen without replacement;
    * each active coordinate gets a main-effect coefficient ``a_j ~ N(0, 1)``
      (inactive ones get 0);
    * ``max(1, n_active // 2)`` distinct pairs of active coordinates get an
      interaction coefficient ``b_jk ~ N(0, 1)``;
    * ``f(x) = sum_j a_j c_j + sum_(j,k) b_jk c_j c_k``.

    Centred monomials of independent uniforms are orthogonal, so the
    variance splits into ``a_j^2 / 12`` per main effect and ``b_jk^2 / 144``
    per pair, giving closed-form total indices. Evaluation is O(d) per point.
    """

    name = "synthetic_highdim"

    def __init__(self, d: int, seed: int = 0):
        if d < 10:
            raise ValueError(f"synthetic_highdim needs d >= 10, got {d}")
        super().__init__(InputSpace.uniform([(0.0, 1.0)] * d))
        self.seed = int(seed)
        rng = substream(seed, "highdim")
        n_active = max(3, d // 10)
        active = np.sort(rng.choice(d, size=n_active, replace=False))
        self.main = np.zeros(d)
        self.main[active] = rng.standard_normal(n_active)
        all_pairs = [(int(active[p]), int(active[q])) for p in range(n_active) for q in range(p + 1, n_active)]
        n_pairs = max(1, n_active // 2)
        picks = rng.choice(len(all_pairs), size=n_pairs, replace=False)
        self.pairs = np.array(sorted(all_pairs[i] for i in picks), dtype=np.int64)
        self.pair_coeffs = rng.standard_normal(n_pairs)
        self.active = active

    def _evaluate(self, x):
        c = x - 0.5
        y = c @ self.main
        y += (c[:, self.pairs[:, 0]] * c[:, self.pairs[:, 1]]) @ self.pair_coeffs
        return y

    def total_indices(self):
        part = self.main**2 / 12.0
        inter = self.pair_coeffs**2 / 144.0
        total = part.sum() + inter.sum()
        num = part.copy()
        np.add.at(num, self.pairs[:, 0], inter)
        np.add.at(num, self.pairs[:, 1], inter)
        return num / total

    def describe(self):
        return {"name": self.name, "d": self.d, "seed": self.seed}


class Constant(ModelFunction):
    name = "constant"

    def __init__(self, d: int = 2, value: float = 1.0):
        super().__init__(InputSpace.uniform([(0.0, 1.0)] * d))
        self.value = float(value)

    def _evaluate(self, x):
        return np.full(x.shape[0], self.value)

    def total_indices(self):
        return np.zeros(self.d)

    def describe(self):
        return {"name": self.name, "d": self.d, "value": self.value}


def ishigami(a: float = 7.0, b: float = 0.1) -> Ishigami:
    return Ishigami(a, b)


def additive_linear(coeffs) -> AdditiveLinear:
    return AdditiveLinear(coeffs)


def synthetic_highdim(d: int, seed: int = 0) -> SparseInteraction:
    return SparseInteraction(d, seed)
