"""Total-order index estimators and confidence intervals.

Methods, by tag:

``floodgate``
    Surrogate-assisted interval ``[L, U]`` built from per-row terms
    ``(M^z_i, M_i, V_i)`` on an existing dataset of model runs.
``spf``
    Jansen pick-freeze estimate from model pairs, delta-method interval.
``spf-surrogate``
    The same estimate computed on surrogate pairs.
``panin``
    Surrogate pick-freeze estimate widened by the Panin bound on
    ``|S^f - S|`` with a plug-in for the unknown index.

Every interval is clipped to ``[0, 1]``. Zero mean output variance returns
``[0, 1]``. When batch labels are present, per-batch means replace
per-row terms and the effective sample size is the number of batches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Optional, Sequence

import numpy as np

from floodgate.dataset import EvaluatedDataset
from floodgate.space import InputSpace, ResampleBlock, SampleMatrix, resample_conditional, sample_iid

METHODS = ("floodgate", "spf", "spf-surrogate", "panin")


def normal_quantile(alpha: float) -> float:
    """Upper ``alpha / 2`` standard normal quantile ``z_{alpha/2}``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return NormalDist().inv_cdf(1.0 - alpha / 2.0)


@dataclass(frozen=True)
class IntervalResult:
    input_index: int
    method: str
    lower: float
    upper: float
    point_lower: float
    point_upper: float
    diagnostics: dict = field(default_factory=dict)
    name: Optional[str] = None

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class FloodgateTerms:
    """Per-row floodgate terms for one input."""

    j: int
    m_z: np.ndarray
    m: np.ndarray
    v: np.ndarray
    K: int
    batch_ids: Optional[np.ndarray] = None
    surrogate_evals: int = 0

    def __post_init__(self):
        n = np.shape(self.m_z)[0]
        if not (np.shape(self.m)[0] == np.shape(self.v)[0] == n):
            raise ValueError("floodgate term arrays differ in length")
        if self.batch_ids is not None and np.shape(self.batch_ids)[0] != n:
            raise ValueError("batch_ids length differs from terms")

    @property
    def n(self) -> int:
        return self.m.shape[0]

    def stacked(self) -> np.ndarray:
        return np.column_stack([self.m_z, self.m, self.v])


def _summarize(w: np.ndarray, batch_ids: Optional[np.ndarray]):
    """Means and sample covariance (divisor n - 1) of term rows or of batch means."""
    if batch_ids is not None:
        nb = int(batch_ids[-1]) + 1
        w = w.reshape(nb, -1, w.shape[1]).mean(axis=1)
    n_eff = w.shape[0]
    if n_eff < 2:
        raise ValueError("need at least two rows (or batches) for a covariance estimate")
    means = w.mean(axis=0)
    cov = np.atleast_2d(np.cov(w, rowvar=False, ddof=1))
    return means, cov, n_eff


def _quad_form_var(grad: np.ndarray, cov: np.ndarray) -> float:
    """``grad' cov grad``; tiny negative round-off is zeroed, anything larger is a bug."""
    val = float(grad @ cov @ grad)
    scale = float(np.abs(grad) @ np.abs(cov) @ np.abs(grad))
    if val < 0:
        assert val >= -1e-10 * max(scale, 1e-300), f"negative variance {val} from covariance quadratic form"
        val = 0.0
    return val


def _clip01(x: float) -> float:
    return min(1.0, max(0.0, x))


def _resampled_mean(surrogate, x: np.ndarray, j: int, draws: np.ndarray) -> np.ndarray:
    n, K = draws.shape
    pts = np.repeat(x, K, axis=0)
    pts[:, j] = draws.ravel()
    return np.asarray(surrogate(pts), dtype=float).reshape(n, K).mean(axis=1)


def floodgate_terms(data: EvaluatedDataset, surrogate, space: InputSpace, j: int, K: int = 1, seed: int = 0,
                    resamples: Optional[ResampleBlock] = None,
                    f_base: Optional[np.ndarray] = None) -> FloodgateTerms:
    """Per-row terms for input ``j``.

    With ``F_i`` the mean of the surrogate over ``K`` conditional redraws
    of input ``j`` (other inputs frozen), ``y_i`` the model output and
    ``f_i`` the surrogate at the original row::

        M_i   = (y_i - f_i)^2
        M^z_i = (y_i - F_i)^2 - (f_i - F_i)^2 / (K + 1)
        V_i   = n / (n - 1) * (y_i - mean(y))^2

    Uses ``n K`` surrogate calls on redrawn rows, plus ``n`` at the original
    rows unless ``f_base`` or ``data.surrogate_outputs`` supplies them. No
    model calls. ``resamples`` overrides the seeded redraws (shared-draw mode).
    """
    if data.outputs is None:
        raise ValueError("dataset has no model outputs")
    n = data.n
    if n < 2:
        raise ValueError(f"need n >= 2 rows, got {n}")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if data.d != space.d:
        raise ValueError(f"dataset has {data.d} inputs, space has {space.d}")
    x = data.inputs
    y = data.outputs
    if resamples is None:
        resamples = resample_conditional(space, x, j, K, seed)
    elif resamples.j != j or resamples.values.shape[0] != n:
        raise ValueError("shared resamples do not match this input / dataset")
    draws = resamples.values
    K = draws.shape[1]
    evals = n * K
    if f_base is None:
        f_base = data.surrogate_outputs
    if f_base is None:
        f_base = np.asarray(surrogate(x), dtype=float)
        evals += n
    fz = _resampled_mean(surrogate, x, j, draws)
    m = (y - f_base) ** 2
    m_z = (y - fz) ** 2 - (f_base - fz) ** 2 / (K + 1)
    v = n / (n - 1) * (y - y.mean()) ** 2
    return FloodgateTerms(j, m_z, m, v, K, data.batch_ids, evals)


def floodgate_interval(terms: FloodgateTerms, alpha: float = 0.05, name: Optional[str] = None) -> IntervalResult:
    """Confidence interval for the total-order index from floodgate terms.

    ``l = (mean M^z - mean M) / mean V`` and ``u = mean M^z / mean V`` with
    delta-method standard errors from the 3x3 term covariance; returns
    ``[max(0, l - z s_l / sqrt(n)), min(1, u + z s_u / sqrt(n))]``.
    """
    z = normal_quantile(alpha)
    means, cov, n_eff = _summarize(terms.stacked(), terms.batch_ids)
    mz, mm, vv = (float(v) for v in means)
    diag = {
        "mean_m_z": mz, "mean_m": mm, "mean_v": vv, "cov": cov.tolist(),
        "n": n_eff, "n_rows": terms.n, "K": terms.K, "alpha": alpha, "z": z,
        "batched": terms.batch_ids is not None, "surrogate_evals": terms.surrogate_evals,
    }
    if vv == 0:
        diag.update(degenerate=True, s_l=0.0, s_u=0.0, mse_ratio=0.0)
        return IntervalResult(terms.j, "floodgate", 0.0, 1.0, 0.0, 0.0, diag, name)
    u = mz / vv
    lo = (mz - mm) / vv
    s_u2 = _quad_form_var(np.array([1.0, 0.0, -u]), cov) / vv**2
    s_l2 = _quad_form_var(np.array([1.0, -1.0, -lo]), cov) / vv**2
    s_u, s_l = math.sqrt(s_u2), math.sqrt(s_l2)
    half = z / math.sqrt(n_eff)
    L = _clip01(lo - half * s_l)
    U = _clip01(u + half * s_u)
    diag.update(degenerate=False, s_l=s_l, s_u=s_u, mse_ratio=mm / vv)
    return IntervalResult(terms.j, "floodgate", L, U, lo, u, diag, name)


def floodgate_all_inputs(data: EvaluatedDataset, surrogate, space: InputSpace, K: int = 1, seed: int = 0,
                         alpha: float = 0.05, inputs: Optional[Sequence[int]] = None) -> list:
    """Floodgate intervals for every input (or the listed ones) from one dataset.

    Each input draws from its own seeded redraw stream, so results do not
    depend on the order inputs are processed in.
    """
    f_base = data.surrogate_outputs
    if f_base is None:
        f_base = np.asarray(surrogate(data.inputs), dtype=float)
    idx = range(space.d) if inputs is None else inputs
    out = []
    for j in idx:
        terms = floodgate_terms(data, surrogate, space, j, K, seed, f_base=f_base)
        out.append(floodgate_interval(terms, alpha, name=space.names[j]))
    return out


@dataclass(frozen=True)
class PairedDataset:
    """Pick-freeze design: base rows, one redrawn column per input, and outputs.

    ``x_tilde[:, j]`` is the redraw of input ``j``; ``y_pick[:, j]`` is the
    output at the base row with column ``j`` replaced by it.
    """

    base: SampleMatrix
    y: np.ndarray
    x_tilde: np.ndarray
    y_pick: np.ndarray

    @property
    def n(self) -> int:
        return self.y.size

    def pick_inputs(self, j: int) -> np.ndarray:
        pts = np.array(self.base.values, copy=True)
        pts[:, j] = self.x_tilde[:, j]
        return pts

    def resample_block(self, j: int) -> ResampleBlock:
        """The redraws of input ``j`` as a block, for shared-draw floodgate runs."""
        return ResampleBlock(j, self.x_tilde[:, j:j + 1], self.base.seed)


def build_paired_dataset(model, space: InputSpace, n: int, seed: int = 0) -> PairedDataset:
    """Evaluate ``model`` on a pick-freeze design; costs ``n (d + 1)`` calls.

    Base rows come from :func:`sample_iid` and redraws from
    :func:`resample_conditional` with the same seed, so a floodgate run
    with that seed on the base rows and ``K = 1`` reuses these redraws.
    """
    if n < 2:
        raise ValueError(f"need n >= 2 pairs, got {n}")
    base = sample_iid(space, n, seed)
    y = np.asarray(model(base.values), dtype=float)
    x_tilde = np.empty((n, space.d))
    y_pick = np.empty((n, space.d))
    for j in range(space.d):
        block = resample_conditional(space, base, j, 1, seed)
        x_tilde[:, j] = block.values[:, 0]
        pts = np.array(base.values, copy=True)
        pts[:, j] = x_tilde[:, j]
        y_pick[:, j] = model(pts)
    return PairedDataset(base, y, x_tilde, y_pick)


def _spf(y: np.ndarray, y_pick: np.ndarray, j: int, alpha: float, method: str, name=None) -> IntervalResult:
    n = y.size
    if n < 2:
        raise ValueError(f"need n >= 2 pairs, got {n}")
    z = normal_quantile(alpha)
    a = 0.5 * (y - y_pick) ** 2
    v = n / (n - 1) * (y - y.mean()) ** 2
    means, cov, _ = _summarize(np.column_stack([a, v]), None)
    am, vm = float(means[0]), float(means[1])
    diag = {"mean_a": am, "mean_v": vm, "cov": cov.tolist(), "n": n, "alpha": alpha, "z": z}
    if vm == 0:
        diag.update(degenerate=True, se=0.0)
        return IntervalResult(j, method, 0.0, 1.0, 0.0, 0.0, diag, name)
    s = am / vm
    se = math.sqrt(_quad_form_var(np.array([1.0, -s]), cov) / vm**2 / n)
    diag.update(degenerate=False, se=se)
    return IntervalResult(j, method, _clip01(s - z * se), _clip01(s + z * se), s, s, diag, name)


def spf_jansen(pairs: PairedDataset, j: int, alpha: float = 0.05, name=None) -> IntervalResult:
    """Jansen estimate ``mean(0.5 (y - y~)^2) / var(y)`` with a delta-method interval."""
    return _spf(pairs.y, pairs.y_pick[:, j], j, alpha, "spf", name)


def spf_surrogate(pairs: PairedDataset, j: int, alpha: float = 0.05, name=None) -> IntervalResult:
    """:func:`spf_jansen` on pairs evaluated by the surrogate instead of the model."""
    return _spf(pairs.y, pairs.y_pick[:, j], j, alpha, "spf-surrogate", name)


def panin_bound(e: float, s: float) -> tuple:
    """``min{1, e + 2 sqrt(s), e + 2 sqrt(1 - s)} * e`` and the index of the active branch."""
    cands = (1.0, e + 2.0 * math.sqrt(s), e + 2.0 * math.sqrt(1.0 - s))
    k = int(np.argmin(cands))
    return cands[k] * e, k


@dataclass(frozen=True)
class PaninTerms:
    """Per-row terms for the Panin-bound interval of one input.

    ``a_f = (f - f~)^2 / 2`` and ``v_f`` are the surrogate pick-freeze terms,
    ``m = (y - f)^2`` and ``v`` the model residual and variance terms.
    """

    j: int
    a_f: np.ndarray
    v_f: np.ndarray
    m: np.ndarray
    v: np.ndarray
    batch_ids: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.m.shape[0]


def panin_terms(data: EvaluatedDataset, surrogate, space: InputSpace, j: int, seed: int = 0,
                f_base: Optional[np.ndarray] = None) -> PaninTerms:
    """Terms on the rows of ``data``: one redraw of input ``j`` per row, no model calls."""
    if data.outputs is None:
        raise ValueError("dataset has no model outputs")
    n = data.n
    if n < 2:
        raise ValueError(f"need n >= 2 rows, got {n}")
    y = data.outputs
    if f_base is None:
        f_base = data.surrogate_outputs
    if f_base is None:
        f_base = np.asarray(surrogate(data.inputs), dtype=float)
    block = resample_conditional(space, data.inputs, j, 1, seed)
    f_pick = _resampled_mean(surrogate, data.inputs, j, block.values)
    a_f = 0.5 * (f_base - f_pick) ** 2
    v_f = n / (n - 1) * (f_base - f_base.mean()) ** 2
    m = (y - f_base) ** 2
    v = n / (n - 1) * (y - y.mean()) ** 2
    return PaninTerms(j, a_f, v_f, m, v, data.batch_ids)


def panin_interval(terms: PaninTerms, alpha: float = 0.05, name=None) -> IntervalResult:
    """Surrogate estimate ``S^f`` plus/minus the plug-in Panin bound, widened by a normal margin.

    ``E = sqrt(mean m / mean v)``, ``B = panin_bound(E, clip(S^f, 0, 1))``.
    Each endpoint ``S^f -/+ B`` is a smooth function of the four term means
    (on the active branch of the min), so its standard error comes from the
    delta method with the 4x4 term covariance.
    """
    z = normal_quantile(alpha)
    w = np.column_stack([terms.a_f, terms.v_f, terms.m, terms.v])
    means, cov, n_eff = _summarize(w, terms.batch_ids)
    af, vf, mm, vv = (float(x) for x in means)
    diag = {"means": means.tolist(), "cov": cov.tolist(), "n": n_eff, "alpha": alpha, "z": z,
            "plugin": "clip(S_f, 0, 1)", "endpoint_se": "delta method on term means"}
    if vv == 0 or vf == 0:
        diag.update(degenerate=True)
        return IntervalResult(terms.j, "panin", 0.0, 1.0, 0.0, 1.0, diag, name)
    s_f = af / vf
    e = math.sqrt(mm / vv)
    s_plug = _clip01(s_f)
    bound, branch = panin_bound(e, s_plug)

    g_s = np.array([1.0 / vf, -s_f / vf, 0.0, 0.0])
    g_e = np.array([0.0, 0.0, 0.5 / (e * vv), -0.5 * e / vv]) if e > 0 else np.zeros(4)
    ds_plug = 1.0 if 0.0 < s_f < 1.0 else 0.0
    if branch == 0:
        db_de, db_ds = 1.0, 0.0
    elif branch == 1:
        db_de = 2.0 * e + 2.0 * math.sqrt(s_plug)
        db_ds = e / math.sqrt(s_plug) if s_plug > 0 else 0.0
    else:
        db_de = 2.0 * e + 2.0 * math.sqrt(1.0 - s_plug)
        db_ds = -e / math.sqrt(1.0 - s_plug) if s_plug < 1 else 0.0
    g_b = db_de * g_e + db_ds * ds_plug * g_s
    se_lo = math.sqrt(_quad_form_var(g_s - g_b, cov) / n_eff)
    se_hi = math.sqrt(_quad_form_var(g_s + g_b, cov) / n_eff)
    lo = s_f - bound
    hi = s_f + bound
    L = _clip01(lo - z * se_lo)
    U = _clip01(hi + z * se_hi)
    diag.update(degenerate=False, s_f=s_f, e_hat=e, bound=bound, branch=branch, se_lower=se_lo, se_upper=se_hi)
    return IntervalResult(terms.j, "panin", L, U, lo, hi, diag, name)


def panin_all_inputs(data: EvaluatedDataset, surrogate, space: InputSpace, seed: int = 0, alpha: float = 0.05,
                     inputs: Optional[Sequence[int]] = None) -> list:
    f_base = data.surrogate_outputs
    if f_base is None:
        f_base = np.asarray(surrogate(data.inputs), dtype=float)
    idx = range(space.d) if inputs is None else inputs
    return [panin_interval(panin_terms(data, surrogate, space, j, seed, f_base), alpha, space.names[j])
            for j in idx]
