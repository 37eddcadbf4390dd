"""Experiment orchestration: budgets, ground truth, coverage and width studies.

Seed derivation, all through :func:`floodgate.rng.derive_seed` from the
config's master seed:

* surrogate training / validation rows: ``(seed, "surrogate-train")``,
  ``(seed, "surrogate-validate")``;
* ground truth: ``(seed, "truth")`` then per chunk;
* trial ``t`` at budget ``N``: ``(seed, "trial", t, "budget", N)`` then one
  label per method. In ``fixed-inputs`` mode the floodgate / Panin base rows
  come from ``(seed, "fixed-inputs", N)`` for every trial.

Trials are independent given their seeds, so results do not depend on how
many worker processes run them.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from floodgate.dataset import EvaluatedDataset
from floodgate.errors import FormatError
from floodgate.estimators import (
    METHODS,
    build_paired_dataset,
    floodgate_all_inputs,
    panin_all_inputs,
    spf_jansen,
    spf_surrogate,
)
from floodgate.models import (
    AdditiveLinear,
    Constant,
    CountingModel,
    HymodParams,
    Ishigami,
    SparseInteraction,
    hymod_nse_response,
    synthetic_forcing,
)
from floodgate.rng import derive_seed
from floodgate.space import InputSpace, sample_iid, sample_lhs_batches
from floodgate.surrogate import (
    KrrModel,
    LinearSurrogate,
    estimate_relative_mse,
    fit_krr,
    tune_lengthscales,
)

log = logging.getLogger(__name__)

TIER_TARGETS = {"high": 0.01, "low": 0.07}
TRAIN_SIZES = (50, 75, 100, 150, 200, 300, 400, 600, 800, 1000, 1500, 2000, 3000, 4000)


@dataclass(frozen=True)
class BudgetPlan:
    """Per-method sample sizes for a budget of ``N`` model evaluations over ``d`` inputs."""

    N: int
    d: int

    def n(self, method: str) -> int:
        if method == "spf":
            return self.N // (self.d + 1)
        if method in METHODS:
            return self.N
        raise ValueError(f"unknown method {method!r}")

    def feasible(self, method: str) -> bool:
        return self.n(method) >= 2

    def model_evaluations(self, method: str) -> int:
        """Model evaluations charged to ``method`` (floodgate and Panin share one dataset of ``N``)."""
        if method == "spf":
            return self.n("spf") * (self.d + 1)
        if method == "spf-surrogate":
            return 0
        return self.N


# -- configuration -----------------------------------------------------------------

_MODEL_KEYS = {
    "ishigami": {"a", "b"},
    "additive_linear": {"coeffs"},
    "synthetic_highdim": {"d", "seed"},
    "constant": {"d", "value"},
    "hymod": {"forcing", "forcing_path"},
}
_FORCING_KEYS = {"T", "seed", "noise_sd", "true_params"}
_SURROGATE_KEYS = {
    "kind", "tier", "target_rel_mse", "train_size", "gamma", "ridge", "max_centers", "lengthscales",
    "n_validate", "path", "coeffs", "intercept",
}
_DESIGN_KEYS = {"kind", "batch_size"}


def _strict(doc: dict, allowed: set, where: str):
    if not isinstance(doc, dict):
        raise FormatError(f"{where} must be a JSON object")
    unknown = set(doc) - allowed
    if unknown:
        raise FormatError(f"unknown key(s) {sorted(unknown)} in {where}")


@dataclass
class ExperimentConfig:
    """Everything needed to rerun an experiment. JSON schema = these fields.

    ``model``: ``{"name": ..., <params>}``; names ``ishigami`` (a, b),
    ``additive_linear`` (coeffs), ``synthetic_highdim`` (d, seed),
    ``constant`` (d, value), ``hymod`` (``forcing``: {T, seed, noise_sd,
    true_params} or ``forcing_path``).

    ``surrogate``: ``{"kind": "krr" | "file" | "exact" | "linear", ...}``.
    KRR takes ``tier`` (high / low) or ``target_rel_mse`` to grow the
    training set until held-out relative MSE reaches the target, or a fixed
    ``train_size``; plus ``gamma``, ``ridge``, ``max_centers``,
    ``lengthscales`` ("grid" or "none"), ``n_validate``.

    ``design``: ``{"kind": "iid"}`` or ``{"kind": "lhs", "batch_size": B}``.
    ``mode``: ``fresh`` (new inputs every trial) or ``fixed-inputs``.
    """

    model: dict
    surrogate: dict = field(default_factory=lambda: {"kind": "krr", "tier": "high"})
    methods: list = field(default_factory=lambda: list(METHODS))
    budgets: list = field(default_factory=lambda: [1000])
    trials: int = 100
    alpha: float = 0.05
    K: int = 1
    seed: int = 0
    ground_truth_n: int = 1_000_000
    design: dict = field(default_factory=lambda: {"kind": "iid"})
    mode: str = "fresh"
    dataset: Optional[str] = None
    n_jobs: int = 1
    format_version: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        _strict(self.model, {"name"} | _MODEL_KEYS.get(self.model.get("name"), set()), "model")
        if self.model.get("name") not in _MODEL_KEYS:
            raise FormatError(f"unknown model {self.model.get('name')!r}; choose from {sorted(_MODEL_KEYS)}")
        if "forcing" in self.model:
            _strict(self.model["forcing"], _FORCING_KEYS, "model.forcing")
        _strict(self.surrogate, _SURROGATE_KEYS, "surrogate")
        _strict(self.design, _DESIGN_KEYS, "design")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise FormatError(f"unknown method(s) {bad}; choose from {list(METHODS)}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not self.budgets or any(b < 2 for b in self.budgets):
            raise ValueError("budgets must be a non-empty list of integers >= 2")
        if list(self.budgets) != sorted(self.budgets):
            raise ValueError("budgets must be ascending")
        if self.mode not in ("fresh", "fixed-inputs"):
            raise FormatError(f"mode must be 'fresh' or 'fixed-inputs', got {self.mode!r}")
        if self.design.get("kind", "iid") not in ("iid", "lhs"):
            raise FormatError("design.kind must be 'iid' or 'lhs'")
        if self.design.get("kind") == "lhs":
            b = self.design.get("batch_size")
            if not isinstance(b, int) or b < 2:
                raise FormatError("lhs design needs integer batch_size >= 2")
            if any(N % b or N // b < 2 for N in self.budgets):
                raise ValueError("with an lhs design every budget must be a multiple of batch_size with >= 2 batches")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        names = {f for f in cls.__dataclass_fields__}
        _strict(doc, names, "config")
        if "model" not in doc:
            raise FormatError("config needs a 'model' entry")
        if doc.get("format_version", 1) > 1:
            raise FormatError(f"unsupported config format version {doc['format_version']}")
        return cls(**doc)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def make_model(spec: dict):
    name = spec.get("name")
    if name == "ishigami":
        return Ishigami(spec.get("a", 7.0), spec.get("b", 0.1))
    if name == "additive_linear":
        return AdditiveLinear(spec["coeffs"])
    if name == "synthetic_highdim":
        return SparseInteraction(spec.get("d", 100), spec.get("seed", 0))
    if name == "constant":
        return Constant(spec.get("d", 2), spec.get("value", 1.0))
    if name == "hymod":
        if "forcing_path" in spec:
            from floodgate.io import load_forcing

            forcing = load_forcing(spec["forcing_path"])
        else:
            f = dict(spec.get("forcing", {}))
            if "true_params" in f:
                f["true_params"] = HymodParams(**f["true_params"])
            f.setdefault("noise_sd", 0.1)
            forcing = synthetic_forcing(**f)
        return hymod_nse_response(forcing)
    raise FormatError(f"unknown model {name!r}")


# -- surrogates --------------------------------------------------------------------


@dataclass
class SurrogateBundle:
    surrogate: object
    info: dict
    train_inputs: Optional[np.ndarray] = None


def train_surrogate(model, spec: dict, seed: int = 0, space: Optional[InputSpace] = None) -> SurrogateBundle:
    """Build the surrogate described by ``spec``; training rows never overlap trial rows.

    For KRR with a ``tier`` or ``target_rel_mse``, training sizes from
    :data:`TRAIN_SIZES` (capped by ``max_centers``) are tried in order and
    the first whose held-out relative MSE is at or below the target wins.
    The achieved value is logged and returned in ``info``.
    """
    space = space or model.space
    kind = spec.get("kind", "krr")
    if kind == "exact":
        return SurrogateBundle(model, {"kind": "exact"})
    if kind == "linear":
        return SurrogateBundle(LinearSurrogate(spec["coeffs"], spec.get("intercept", 0.0)), {"kind": "linear"})
    if kind == "file":
        s = KrrModel.load(spec["path"])
        if s.d != space.d:
            raise ValueError(f"surrogate file has d={s.d}, model has d={space.d}")
        return SurrogateBundle(s, {"kind": "file", "path": str(spec["path"])})
    if kind != "krr":
        raise FormatError(f"unknown surrogate kind {kind!r}")

    target = spec.get("target_rel_mse", TIER_TARGETS.get(spec.get("tier")) if "tier" in spec else None)
    if "tier" in spec and spec["tier"] not in TIER_TARGETS:
        raise FormatError(f"tier must be one of {sorted(TIER_TARGETS)}")
    max_centers = int(spec.get("max_centers", 4000))
    gamma = spec.get("gamma", 0.5)
    ridge = spec.get("ridge", 1e-6)
    n_validate = int(spec.get("n_validate", 5000))
    if target is None:
        sizes = [int(spec.get("train_size", 1000))]
    else:
        sizes = [s for s in TRAIN_SIZES if s <= max_centers] or [max_centers]
    pool_n = max(max(sizes), 1200 if spec.get("lengthscales", "grid") == "grid" else 0)
    pool = sample_iid(space, pool_n, derive_seed(seed, "surrogate-train")).values
    y_pool = np.asarray(model(pool), dtype=float)
    val = sample_iid(space, n_validate, derive_seed(seed, "surrogate-validate")).values
    val_data = EvaluatedDataset(val, model(val))
    ls = None
    if spec.get("lengthscales", "grid") == "grid":
        ls, _ = tune_lengthscales(pool, y_pool, space.bounds, gamma=gamma if isinstance(gamma, float) else 0.5,
                                  ridge=ridge if ridge is not None else 1e-6)
    def fit(m):
        krr = fit_krr((pool[:m], y_pool[:m]), gamma=gamma, ridge=ridge, max_centers=max_centers,
                      bounds=space.bounds, lengthscales=ls, seed=seed)
        return (krr, m) + estimate_relative_mse(krr, val_data)

    best = None
    lo = 1
    for m in sizes:
        best = fit(m)
        if target is not None and best[2] <= target:
            break
        lo = m
    if target is not None and best[2] <= target:
        # smallest passing size between the last failing and first passing grid points
        hi = best[1]
        while hi - lo > max(2, hi // 50):
            mid = (lo + hi) // 2
            cand = fit(mid)
            if cand[2] <= target:
                hi, best = mid, cand
            else:
                lo = mid
    krr, m, e2, se = best
    info = {"kind": "krr", "train_size": m, "rel_mse": e2, "rel_mse_se": se, "target": target,
            "achieved": target is None or e2 <= target, "gamma": krr.gamma, "ridge": krr.ridge,
            "lengthscales": krr.lengthscales.tolist(), "training_evaluations": pool_n + n_validate}
    krr.metadata.update(info)
    if target is not None:
        log.info("surrogate tier target %.3g: relative MSE %.4f +/- %.4f with %d training rows (%s)",
                 target, e2, se, m, "met" if info["achieved"] else "NOT met")
    return SurrogateBundle(krr, info, pool[:m])


# -- ground truth ------------------------------------------------------------------


@dataclass
class GroundTruth:
    estimates: np.ndarray
    stderr: np.ndarray
    closed_form: Optional[np.ndarray]
    n_large: int
    seed: int
    evaluations: int

    @property
    def values(self) -> np.ndarray:
        """Closed form when known, else the large-sample estimate."""
        return self.closed_form if self.closed_form is not None else self.estimates

    def to_dict(self) -> dict:
        return {
            "estimates": self.estimates.tolist(), "stderr": self.stderr.tolist(),
            "closed_form": None if self.closed_form is None else self.closed_form.tolist(),
            "n_large": self.n_large, "seed": self.seed, "evaluations": self.evaluations,
        }

    @classmethod
    def from_dict(cls, doc) -> "GroundTruth":
        cf = doc.get("closed_form")
        return cls(np.array(doc["estimates"]), np.array(doc["stderr"]), None if cf is None else np.array(cf),
                   doc["n_large"], doc["seed"], doc["evaluations"])


def _truth_key(model, n_large, seed) -> str:
    desc = json.dumps({"model": model.describe(), "bounds": model.space.bounds.tolist(), "n": n_large,
                       "seed": seed, "v": 1}, sort_keys=True)
    return hashlib.sha256(desc.encode()).hexdigest()[:20]


def ground_truth(model, n_large: int = 1_000_000, seed: int = 0, chunk: int = 100_000,
                 cache_dir=None, space: Optional[InputSpace] = None) -> GroundTruth:
    """Jansen pick-freeze estimates of every total index from ``n_large`` pairs.

    Works in chunks with streaming moment sums (shifted by the first chunk's
    mean), so memory does not grow with ``n_large``. Standard errors come
    from the delta method. Costs ``n_large (d + 1)`` model calls.
    """
    if n_large < 100_000:
        raise ValueError(f"n_large must be >= 1e5, got {n_large}")
    space = space or model.space
    d = space.d
    if cache_dir is not None:
        path = Path(cache_dir) / f"truth-{_truth_key(model, n_large, seed)}.json"
        if path.exists():
            return GroundTruth.from_dict(json.loads(path.read_text()))
    log.info("ground truth: %d model evaluations (n_large=%d, d=%d)", n_large * (d + 1), n_large, d)
    shift = None
    s = np.zeros(5)  # n, sum y, y^2, y^3, y^4 (shifted)
    sa = np.zeros((4, d))  # sum A, A^2, A y, A y^2
    for c, start in enumerate(range(0, n_large, chunk)):
        size = min(chunk, n_large - start)
        pairs = build_paired_dataset(model, space, size, derive_seed(seed, "truth", c))
        if shift is None:
            shift = float(pairs.y.mean())
        y = pairs.y - shift
        a = 0.5 * (pairs.y[:, None] - pairs.y_pick) ** 2
        s += [size, y.sum(), (y**2).sum(), (y**3).sum(), (y**4).sum()]
        sa += [a.sum(0), (a**2).sum(0), (a * y[:, None]).sum(0), (a * (y**2)[:, None]).sum(0)]
    n = s[0]
    mu = s[1] / n
    c2 = s[2] - n * mu**2
    c4 = s[4] - 4 * mu * s[3] + 6 * mu**2 * s[2] - 4 * mu**3 * s[1] + n * mu**4
    vbar = c2 / (n - 1)
    closed = model.total_indices() if hasattr(model, "total_indices") else None
    if vbar <= 0:
        est = np.zeros(d)
        se = np.zeros(d)
    else:
        k = n / (n - 1)
        var_v = (k**2 * c4 - n * vbar**2) / (n - 1)
        abar = sa[0] / n
        var_a = (sa[1] - n * abar**2) / (n - 1)
        sum_av = k * (sa[3] - 2 * mu * sa[2] + mu**2 * sa[0])
        cov_av = (sum_av - n * abar * vbar) / (n - 1)
        est = abar / vbar
        se = np.sqrt(np.maximum(var_a - 2 * est * cov_av + est**2 * var_v, 0.0) / (vbar**2 * n))
    truth = GroundTruth(est, se, None if closed is None else np.asarray(closed, dtype=float), n_large, seed,
                        n_large * (d + 1))
    if cache_dir is not None:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(truth.to_dict(), sort_keys=True))
    return truth


# -- trials ------------------------------------------------------------------------


@dataclass
class CoverageReport:
    """Per-trial intervals plus summary statistics.

    Arrays are indexed ``[trial, budget, method, input]``; skipped
    (infeasible) entries are NaN.
    """

    methods: list
    budgets: list
    names: list
    truth: np.ndarray
    alpha: float
    lower: np.ndarray
    upper: np.ndarray
    point_lower: np.ndarray
    point_upper: np.ndarray
    mse_ratio: np.ndarray  # floodgate mean M / mean V, [trial, budget, input]
    e_hat: np.ndarray  # panin relative RMSE estimate, [trial, budget, input]
    s_f: np.ndarray  # panin surrogate index estimate, [trial, budget, input]
    model_evals: dict  # method -> [trial, budget] counted model evaluations
    config: dict = field(default_factory=dict)
    surrogate_info: dict = field(default_factory=dict)

    @property
    def trials(self) -> int:
        return self.lower.shape[0]

    def plan(self, N) -> BudgetPlan:
        return BudgetPlan(N, len(self.names))

    def covered(self) -> np.ndarray:
        t = self.truth[None, None, None, :]
        return (self.lower <= t) & (t <= self.upper)

    def coverage(self, method: str, N: int) -> np.ndarray:
        m, b = self.methods.index(method), self.budgets.index(N)
        return self.covered()[:, b, m, :].mean(axis=0)

    def widths(self, method: str, N: int) -> np.ndarray:
        m, b = self.methods.index(method), self.budgets.index(N)
        return self.upper[:, b, m, :] - self.lower[:, b, m, :]

    def rows(self) -> list:
        """One summary row per (method, input, budget) with means and standard errors."""
        out = []
        T = self.trials
        cov = self.covered()

        def mean_se(a):
            mean = float(np.mean(a))
            se = float(np.std(a, ddof=1) / math.sqrt(T)) if T > 1 else float("nan")
            return mean, se

        for mi, method in enumerate(self.methods):
            for j, name in enumerate(self.names):
                for bi, N in enumerate(self.budgets):
                    plan = self.plan(N)
                    skipped = not plan.feasible(method)
                    row = {"method": method, "input": j, "name": name, "N": N, "n": plan.n(method),
                           "trials": T, "truth": float(self.truth[j]), "nominal": 1.0 - self.alpha,
                           "skipped": skipped, "model_evaluations": plan.model_evaluations(method)}
                    if skipped:
                        for k in ("mean_L", "se_L", "mean_U", "se_U", "mean_width", "se_width", "coverage",
                                  "coverage_se"):
                            row[k] = float("nan")
                    else:
                        L, U = self.lower[:, bi, mi, j], self.upper[:, bi, mi, j]
                        row["mean_L"], row["se_L"] = mean_se(L)
                        row["mean_U"], row["se_U"] = mean_se(U)
                        row["mean_width"], row["se_width"] = mean_se(U - L)
                        c = cov[:, bi, mi, j].astype(float)
                        row["coverage"] = float(c.mean())
                        row["coverage_se"] = float(math.sqrt(c.mean() * (1 - c.mean()) / T)) if T > 1 else float("nan")
                    out.append(row)
        return out


def _trial(args):
    (t, config, model, surrogate, train_keys) = args
    space = model.space
    d = space.d
    methods = config.methods
    nb, nm = len(config.budgets), len(methods)
    res = {k: np.full((nb, nm, d), np.nan) for k in ("lower", "upper", "point_lower", "point_upper")}
    aux = {k: np.full((nb, d), np.nan) for k in ("mse_ratio", "e_hat", "s_f")}
    evals = {m: np.zeros(nb, dtype=np.int64) for m in methods}
    for bi, N in enumerate(config.budgets):
        plan = BudgetPlan(N, d)
        seed = derive_seed(config.seed, "trial", t, "budget", N)
        counter = CountingModel(model)
        results = {}
        if "floodgate" in methods or "panin" in methods:
            base_seed = derive_seed(config.seed, "fixed-inputs", N) if config.mode == "fixed-inputs" else seed
            if config.design.get("kind") == "lhs":
                B = config.design["batch_size"]
                sm = sample_lhs_batches(space, B, N // B, derive_seed(base_seed, "base"))
            else:
                sm = sample_iid(space, N, derive_seed(base_seed, "base"))
            if train_keys and any(r.tobytes() in train_keys for r in sm.values):
                raise AssertionError("trial rows overlap surrogate training rows")
            data = EvaluatedDataset(sm.values, counter(sm.values), batch_ids=sm.batch_ids)
            data = data.with_surrogate_outputs(np.asarray(surrogate(data.inputs), dtype=float))
            if counter.count != N:
                raise AssertionError(f"budget ledger: base dataset used {counter.count} model calls, plan {N}")
            for m in ("floodgate", "panin"):
                if m in methods:
                    evals[m][bi] = counter.count
            if "floodgate" in methods:
                results["floodgate"] = floodgate_all_inputs(data, surrogate, space, config.K,
                                                            derive_seed(seed, "floodgate"), config.alpha)
            if "panin" in methods:
                results["panin"] = panin_all_inputs(data, surrogate, space, derive_seed(seed, "panin"), config.alpha)
        if "spf" in methods and plan.feasible("spf"):
            before = counter.count
            pairs = build_paired_dataset(counter, space, plan.n("spf"), derive_seed(seed, "spf"))
            used = counter.count - before
            if used != plan.model_evaluations("spf"):
                raise AssertionError(f"budget ledger: spf used {used} model calls, plan {plan.model_evaluations('spf')}")
            evals["spf"][bi] = used
            results["spf"] = [spf_jansen(pairs, j, config.alpha, space.names[j]) for j in range(d)]
        if "spf-surrogate" in methods:
            before = counter.count
            pairs = build_paired_dataset(surrogate, space, N, derive_seed(seed, "spf-surrogate"))
            evals["spf-surrogate"][bi] = counter.count - before
            results["spf-surrogate"] = [spf_surrogate(pairs, j, config.alpha, space.names[j]) for j in range(d)]
        for m, rs in results.items():
            mi = methods.index(m)
            for r in rs:
                res["lower"][bi, mi, r.input_index] = r.lower
                res["upper"][bi, mi, r.input_index] = r.upper
                res["point_lower"][bi, mi, r.input_index] = r.point_lower
                res["point_upper"][bi, mi, r.input_index] = r.point_upper
                if m == "floodgate":
                    aux["mse_ratio"][bi, r.input_index] = r.diagnostics["mse_ratio"]
                elif m == "panin" and not r.diagnostics["degenerate"]:
                    aux["e_hat"][bi, r.input_index] = r.diagnostics["e_hat"]
                    aux["s_f"][bi, r.input_index] = r.diagnostics["s_f"]
    return res, aux, evals


def prepare(config: ExperimentConfig, model=None, surrogate=None, truth=None, cache_dir=None):
    """Resolve the model, surrogate bundle and ground truth for ``config``.

    Models with closed-form indices use them as the truth; others get a
    large-sample estimate at ``config.ground_truth_n``.
    """
    model = model if model is not None else make_model(config.model)
    if surrogate is None:
        bundle = train_surrogate(model, config.surrogate, derive_seed(config.seed, "surrogate"))
    elif isinstance(surrogate, SurrogateBundle):
        bundle = surrogate
    else:
        bundle = SurrogateBundle(surrogate, {"kind": "supplied"})
    if truth is None and getattr(model, "total_indices", lambda: None)() is not None:
        truth = np.asarray(model.total_indices(), dtype=float)
    if truth is None:
        truth = ground_truth(model, config.ground_truth_n, derive_seed(config.seed, "truth"), cache_dir=cache_dir)
    return model, bundle, truth


def run_coverage_experiment(config: ExperimentConfig, model=None, surrogate=None, truth=None,
                            n_jobs: Optional[int] = None, cache_dir=None) -> CoverageReport:
    """Repeat every method over ``config.trials`` independent trials at each budget.

    ``surrogate`` may be a callable, a :class:`SurrogateBundle`, or None to
    train one from ``config.surrogate``; ``truth`` a :class:`GroundTruth`,
    an array of index values, or None to compute one.
    """
    model, bundle, truth = prepare(config, model, surrogate, truth, cache_dir)
    truth_values = truth.values if isinstance(truth, GroundTruth) else np.asarray(truth, dtype=float)
    train_keys = None
    if bundle.train_inputs is not None:
        train_keys = {r.tobytes() for r in np.asarray(bundle.train_inputs, dtype=float)}
    jobs = [(t, config, model, bundle.surrogate, train_keys) for t in range(config.trials)]
    n_jobs = config.n_jobs if n_jobs is None else n_jobs
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            outs = list(ex.map(_trial, jobs, chunksize=max(1, len(jobs) // (4 * n_jobs))))
    else:
        outs = [_trial(j) for j in jobs]
    stack = lambda k, part: np.stack([o[part][k] for o in outs])  # noqa: E731
    return CoverageReport(
        methods=list(config.methods), budgets=list(config.budgets), names=list(model.space.names),
        truth=np.asarray(truth_values, dtype=float), alpha=config.alpha,
        lower=stack("lower", 0), upper=stack("upper", 0),
        point_lower=stack("point_lower", 0), point_upper=stack("point_upper", 0),
        mse_ratio=stack("mse_ratio", 1), e_hat=stack("e_hat", 1), s_f=stack("s_f", 1),
        model_evals={m: np.stack([o[2][m] for o in outs]) for m in config.methods},
        config=config.to_dict(), surrogate_info=dict(bundle.info),
    )


def loglog_slope(n: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of ``log(values)`` against ``log(n)``."""
    x = np.log(np.asarray(n, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class WidthCurve:
    rows: list
    slopes: dict  # input name -> fitted log-log slope of mean floodgate excess width
    report: CoverageReport


def width_table(report: CoverageReport) -> WidthCurve:
    rows = []
    slopes = {}
    T = report.trials
    for mi, method in enumerate(report.methods):
        for j, name in enumerate(report.names):
            excess_means = []
            for bi, N in enumerate(report.budgets):
                plan = report.plan(N)
                w = report.upper[:, bi, mi, j] - report.lower[:, bi, mi, j]
                row = {"method": method, "input": j, "name": name, "N": N, "n": plan.n(method), "trials": T,
                       "skipped": not plan.feasible(method)}
                row["mean_width"] = float(np.mean(w))
                row["se_width"] = float(np.std(w, ddof=1) / math.sqrt(T)) if T > 1 else float("nan")
                if method == "floodgate":
                    ex = w - report.mse_ratio[:, bi, j]
                    row["mean_excess"] = float(np.mean(ex))
                    row["se_excess"] = float(np.std(ex, ddof=1) / math.sqrt(T)) if T > 1 else float("nan")
                    excess_means.append(row["mean_excess"])
                else:
                    row["mean_excess"] = row["se_excess"] = float("nan")
                rows.append(row)
            if method == "floodgate" and len(report.budgets) >= 2:
                ok = np.all(np.asarray(excess_means) > 0)
                slopes[name] = loglog_slope(report.budgets, excess_means) if ok else float("nan")
    return WidthCurve(rows, slopes, report)


def run_width_curve(config: ExperimentConfig, model=None, surrogate=None, truth=None,
                    n_jobs: Optional[int] = None, cache_dir=None) -> WidthCurve:
    """Mean interval widths against budget, with floodgate's excess width ``(U - L) - mean M / mean V``."""
    report = run_coverage_experiment(config, model, surrogate, truth, n_jobs, cache_dir)
    return width_table(report)


def apply_to_existing_dataset(data: EvaluatedDataset, surrogate, space: InputSpace, alpha: float = 0.05,
                              K: int = 1, seed: int = 0) -> list:
    """Floodgate on a dataset already holding model outputs; no new model calls.

    Batch labels in ``data`` switch on the batch-means path.
    """
    if data.outputs is None:
        raise FormatError("dataset has no model outputs column 'y'")
    if data.n < 2:
        raise ValueError(f"need at least 2 rows, got {data.n}")
    if data.batch_ids is not None and data.num_batches < 2:
        raise ValueError("batch-means path needs at least 2 batches")
    return floodgate_all_inputs(data, surrogate, space, K, seed, alpha)
