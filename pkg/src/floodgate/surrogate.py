"""Surrogates: the callable interface, kernel ridge regression, and relative-MSE estimation.

Any object with ``__call__(x: (n, d) array) -> (n,) array`` works as a
surrogate. :class:`KrrModel` is the built-in trainable one; its JSON file
layout is::

    {"format_version": 1, "kind": "krr",
     "centers": [[...], ...],   # (m, d), unit-cube coordinates divided by lengthscales
     "weights": [...],          # (m,)
     "gamma": 0.31, "ridge": 0.002, "intercept": 1.7,
     "low": [...], "high": [...],   # affine map x -> (x - low) / (high - low)
     "lengthscales": [...],         # (d,) per-dimension multipliers, all 1 = isotropic
     "metadata": {...}}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
from scipy import linalg

from floodgate.dataset import EvaluatedDataset
from floodgate.errors import DegenerateInputError, FormatError, NumericalError
from floodgate.rng import substream

FORMAT_VERSION = 1
_PREDICT_CHUNK = 4096


class FunctionSurrogate:
    """Wrap a plain vectorized function as a surrogate with metadata."""

    def __init__(self, fn: Callable, d: int, metadata: Optional[dict] = None):
        self.fn = fn
        self.d = d
        self.metadata = metadata or {}

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        y = np.asarray(self.fn(np.atleast_2d(x)), dtype=float)
        return y[0] if single else y


class LinearSurrogate:
    """``intercept + x @ coeffs``; handy for analytic checks on linear models."""

    def __init__(self, coeffs, intercept: float = 0.0):
        self.coeffs = np.asarray(coeffs, dtype=float).ravel()
        self.intercept = float(intercept)
        self.d = self.coeffs.size
        self.metadata = {"kind": "linear", "coeffs": self.coeffs.tolist(), "intercept": self.intercept}

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.intercept + x @ self.coeffs


def _sq_dists(a: np.ndarray, b: np.ndarray, b_sq: Optional[np.ndarray] = None) -> np.ndarray:
    if b_sq is None:
        b_sq = np.einsum("ij,ij->i", b, b)
    a_sq = np.einsum("ij,ij->i", a, a)
    d2 = a_sq[:, None] + b_sq[None, :] - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


@dataclass
class KrrModel:
    """Fitted RBF kernel ridge regression ``f(x) = intercept + sum_i w_i k(u(x), c_i)``.

    ``k(a, b) = exp(-|(a - b) / ls|^2 / (2 gamma^2))`` where ``u`` maps inputs
    to the unit cube and ``ls`` holds per-dimension length-scale multipliers.
    Centers are stored already divided by ``ls``.
    """

    centers: np.ndarray
    weights: np.ndarray
    gamma: float
    ridge: float
    intercept: float
    low: np.ndarray
    high: np.ndarray
    lengthscales: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        self.low = np.asarray(self.low, dtype=float).ravel()
        self.high = np.asarray(self.high, dtype=float).ravel()
        if self.lengthscales is None:
            self.lengthscales = np.ones(self.centers.shape[1])
        self.lengthscales = np.asarray(self.lengthscales, dtype=float).ravel()
        if np.any(self.lengthscales <= 0) or self.lengthscales.size != self.centers.shape[1]:
            raise ValueError("need one positive length scale per input")
        if self.centers.ndim != 2 or self.centers.shape[0] < 1:
            raise ValueError("KRR needs at least one center")
        if self.weights.size != self.centers.shape[0]:
            raise ValueError("one weight per center required")
        if not self.gamma > 0:
            raise ValueError("bandwidth must be positive")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")
        if not np.all(np.isfinite(self.weights)):
            raise NumericalError("non-finite KRR weights")
        self._c_sq = np.einsum("ij,ij->i", self.centers, self.centers)

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    def scale(self, x: np.ndarray) -> np.ndarray:
        return (x - self.low) / ((self.high - self.low) * self.lengthscales)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        u = self.scale(np.atleast_2d(x))
        out = np.empty(u.shape[0])
        inv = -0.5 / self.gamma**2
        for s in range(0, u.shape[0], _PREDICT_CHUNK):
            block = _sq_dists(u[s:s + _PREDICT_CHUNK], self.centers, self._c_sq)
            np.multiply(block, inv, out=block)
            np.exp(block, out=block)
            out[s:s + _PREDICT_CHUNK] = block @ self.weights
        out += self.intercept
        return out[0] if single else out

    predict = __call__

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "krr",
            "centers": self.centers.tolist(),
            "weights": self.weights.tolist(),
            "gamma": self.gamma,
            "ridge": self.ridge,
            "intercept": self.intercept,
            "low": self.low.tolist(),
            "high": self.high.tolist(),
            "lengthscales": self.lengthscales.tolist(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "KrrModel":
        if doc.get("kind") != "krr":
            raise FormatError(f"not a KRR model file (kind={doc.get('kind')!r})")
        if doc.get("format_version", 0) > FORMAT_VERSION:
            raise FormatError(f"unsupported KRR format version {doc.get('format_version')}")
        try:
            return cls(doc["centers"], doc["weights"], float(doc["gamma"]), float(doc["ridge"]),
                       float(doc["intercept"]), doc["low"], doc["high"], doc.get("lengthscales"),
                       doc.get("metadata", {}))
        except KeyError as exc:
            raise FormatError(f"KRR model file lacks {exc}") from None

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), sort_keys=True), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "KrrModel":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON in {path}: {exc}") from None
        return cls.from_dict(doc)


def median_heuristic(u: np.ndarray, max_points: int = 1000, seed: int = 0) -> float:
    """Median pairwise Euclidean distance over a subsample of rows."""
    if u.shape[0] > max_points:
        idx = substream(seed, "median-heuristic").choice(u.shape[0], size=max_points, replace=False)
        u = u[idx]
    d2 = _sq_dists(u, u)
    iu = np.triu_indices(u.shape[0], k=1)
    if iu[0].size == 0:
        return 1.0
    med = float(np.sqrt(np.median(d2[iu])))
    return med if med > 0 else 1.0


def fit_krr(train: Union[EvaluatedDataset, tuple], gamma: Union[float, str] = "median-heuristic",
            ridge: Optional[float] = None, max_centers: int = 2000, bounds=None, lengthscales=None,
            seed: int = 0) -> KrrModel:
    """Fit RBF kernel ridge regression.

    Solves ``(K + ridge I) w = y - mean(y)`` by Cholesky on unit-cube-scaled
    inputs. ``ridge`` defaults to ``1e-6 * m``. Training sets larger than
    ``max_centers`` are uniformly subsampled first. ``bounds`` (``(d, 2)``)
    fixes the unit-cube map; otherwise the training min/max is used.
    ``lengthscales`` stretches each unit-cube axis (see :func:`tune_lengthscales`).
    """
    if isinstance(train, EvaluatedDataset):
        if train.outputs is None:
            raise ValueError("training data has no outputs")
        x, y = train.inputs, train.outputs
    else:
        x, y = (np.asarray(a, dtype=float) for a in train)
    x = np.atleast_2d(x)
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] < 1:
        raise ValueError("empty training set")
    if x.shape[0] != y.size:
        raise ValueError("inputs and targets differ in length")
    if x.shape[0] > max_centers:
        idx = np.sort(substream(seed, "krr-centers").choice(x.shape[0], size=max_centers, replace=False))
        x, y = x[idx], y[idx]
    m = x.shape[0]
    if bounds is not None:
        bounds = np.asarray(bounds, dtype=float)
        low, high = bounds[:, 0], bounds[:, 1]
    else:
        low, high = x.min(axis=0), x.max(axis=0)
        high = np.where(high > low, high, low + 1.0)
    ls = np.ones(x.shape[1]) if lengthscales is None else np.asarray(lengthscales, dtype=float).ravel()
    u = (x - low) / ((high - low) * ls)
    if isinstance(gamma, str):
        if gamma not in ("median-heuristic", "median"):
            raise ValueError(f"unknown bandwidth rule {gamma!r}")
        gamma = median_heuristic(u, seed=seed)
    gamma = float(gamma)
    if not gamma > 0:
        raise ValueError("bandwidth must be positive")
    ridge = 1e-6 * m if ridge is None else float(ridge)
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    if ridge == 0 and np.unique(u, axis=0).shape[0] < m:
        raise NumericalError("duplicate training points make the kernel system singular; use ridge > 0")
    intercept = float(y.mean())
    gram = np.exp(-_sq_dists(u, u) / (2.0 * gamma**2))
    gram[np.diag_indices(m)] += ridge
    try:
        factor = linalg.cho_factor(gram, lower=True, check_finite=False)
        w = linalg.cho_solve(factor, y - intercept, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"kernel system is not positive definite ({exc}); increase ridge") from None
    if not np.all(np.isfinite(w)):
        raise NumericalError("kernel solve produced non-finite weights; increase ridge")
    meta = {"training_size": m, "gamma": gamma, "ridge": ridge, "provenance": "fit_krr"}
    return KrrModel(u, w, gamma, ridge, intercept, low, high, ls, meta)


LENGTHSCALE_GRID = (0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)


def tune_lengthscales(x, y, bounds, grid=LENGTHSCALE_GRID, gamma: float = 0.5, ridge: float = 1e-6,
                      sweeps: int = 2, max_points: int = 600) -> tuple:
    """Coordinate-wise grid search of per-dimension length scales.

    Fits on the first half of at most ``2 * max_points`` rows and scores
    squared error on the second half. Each sweep visits every dimension and
    keeps the grid value with the lowest hold-out error, others fixed.
    Returns ``(lengthscales, holdout_mse)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    half = min(max_points, x.shape[0] // 2)
    if half < 2:
        raise ValueError("need at least 4 rows to tune length scales")
    xt, yt, xh, yh = x[:half], y[:half], x[half:2 * half], y[half:2 * half]
    d = x.shape[1]
    ls = np.ones(d)

    def score(cand):
        k = fit_krr((xt, yt), gamma=gamma, ridge=ridge, bounds=bounds, lengthscales=cand, max_centers=half)
        return float(np.mean((k(xh) - yh) ** 2))

    best = score(ls)
    for _ in range(sweeps):
        for k in range(d):
            for g in grid:
                if g == ls[k]:
                    continue
                cand = ls.copy()
                cand[k] = g
                try:
                    err = score(cand)
                except NumericalError:
                    continue
                if err < best:
                    best, ls = err, cand
    return ls, best


def ratio_of_means_se(num: np.ndarray, den: np.ndarray) -> tuple:
    """Ratio of sample means and its delta-method standard error."""
    n = num.size
    a, b = num.mean(), den.mean()
    r = a / b
    cov = np.cov(np.vstack([num, den]), ddof=1)
    var = (cov[0, 0] - 2 * r * cov[0, 1] + r * r * cov[1, 1]) / b**2
    return float(r), float(math.sqrt(max(var, 0.0) / n))


def estimate_relative_mse(surrogate, data: EvaluatedDataset) -> tuple:
    """Estimate ``MSE(f) / Var(f*)`` on held-out rows; returns ``(value, stderr)``."""
    if data.outputs is None or data.n < 2:
        raise ValueError("need at least 2 rows with model outputs")
    y = data.outputs
    pred = data.surrogate_outputs if data.surrogate_outputs is not None else surrogate(data.inputs)
    n = y.size
    v = n / (n - 1) * (y - y.mean()) ** 2
    if v.mean() == 0:
        raise DegenerateInputError("model outputs have zero sample variance; relative MSE undefined")
    return ratio_of_means_se((y - pred) ** 2, v)


def load_surrogate(path) -> KrrModel:
    return KrrModel.load(path)
