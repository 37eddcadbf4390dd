"""Hymod conceptual rainfall-runoff model and the NSE response used for sensitivity runs.

State equations (daily explicit step, all stores start empty):

Soil moisture (probability-distributed storage). With ``b = beta + 1`` the
point capacities follow ``F(c) = 1 - (1 - c / Sm)^b`` so the basin store
holds at most ``Sm / b``. Given store ``s`` the critical capacity is
``c = Sm (1 - (1 - b s / Sm)^(1/b))``. Rain ``P`` then produces

* ``ER1 = max(P + c - Sm, 0)``: overflow of the deepest point store;
* the store refills to ``s' = Sm / b * (1 - (1 - min((c + P - ER1) / Sm, 1))^b)``;
* ``ER2 = (P - ER1) - (s' - s)``: rain falling on saturated area.

Actual ET is taken after partitioning: ``ET = min(s' * PET * b / Sm, s')``.

Routing: ``ER1 + alfa * ER2`` enters a cascade of three linear reservoirs
with rate ``Rf``; ``(1 - alfa) * ER2`` enters one slow reservoir with rate
``Rs``. A linear reservoir with store ``x`` and inflow ``q`` releases
``R (x + q)`` and keeps ``(1 - R)(x + q)``. Streamflow is quick plus slow
outflow. ``Sm = 0`` means no soil store: all rain becomes ``ER1``.
"""

from __future__ import annotations

import hashlib
from dataclasses import astuple, dataclass
from typing import Optional

import numpy as np

from floodgate.errors import DegenerateInputError
from floodgate.models.base import ModelFunction
from floodgate.rng import substream
from floodgate.space import InputSpace

HYMOD_NAMES = ("Sm", "beta", "alfa", "Rs", "Rf")
HYMOD_RANGES = ((0.0, 400.0), (0.0, 2.0), (0.0, 1.0), (0.0, 0.1), (0.1, 1.0))

_CHUNK = 8192


@dataclass(frozen=True)
class HymodParams:
    Sm: float
    beta: float
    alfa: float
    Rs: float
    Rf: float

    def __post_init__(self):
        check_params(np.array([astuple(self)]))

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


@dataclass(frozen=True)
class ForcingSeries:
    """Daily precipitation and potential ET in mm/day, optionally with observed flow."""

    precipitation: np.ndarray
    pet: np.ndarray
    observed_flow: Optional[np.ndarray] = None

    def __post_init__(self):
        cols = {"precipitation": self.precipitation, "pet": self.pet}
        if self.observed_flow is not None:
            cols["observed_flow"] = self.observed_flow
        T = None
        for name, col in cols.items():
            arr = np.array(col, dtype=float)
            if arr.ndim != 1 or arr.size < 1:
                raise ValueError(f"{name} must be a non-empty 1-d series")
            if T is not None and arr.size != T:
                raise ValueError("forcing series differ in length")
            T = arr.size
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError(f"{name} must be finite and non-negative")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def T(self) -> int:
        return self.precipitation.size


def hymod_space() -> InputSpace:
    return InputSpace.uniform(HYMOD_RANGES, HYMOD_NAMES)


def check_params(params: np.ndarray) -> np.ndarray:
    params = np.atleast_2d(np.asarray(params, dtype=float))
    if params.shape[1] != 5:
        raise ValueError(f"Hymod takes 5 parameters, got {params.shape[1]}")
    lo = np.array([r[0] for r in HYMOD_RANGES])
    hi = np.array([r[1] for r in HYMOD_RANGES])
    bad = ~np.all((params >= lo) & (params <= hi), axis=1)
    if np.any(bad):
        row = int(np.flatnonzero(bad)[0])
        raise ValueError(f"Hymod parameters out of range at row {row}: {params[row].tolist()}")
    return params


def _run(params, prec, pet, obs=None, keep_flow=True):
    """Simulate every parameter row at once.

    Returns a dict with ``flow`` (n, T) if requested, ``sse`` (n,) if ``obs``
    is given, and water-balance totals ``et``, ``storage`` (final soil +
    routing stores).
    """
    n = params.shape[0]
    T = prec.size
    Sm, beta, alfa, Rs, Rf = (params[:, k] for k in range(5))
    b = beta + 1.0
    has_store = Sm > 0
    Sm_safe = np.where(has_store, Sm, 1.0)
    smax = np.where(has_store, Sm / b, 0.0)
    inv_b = 1.0 / b

    soil = np.zeros(n)
    slow = np.zeros(n)
    quick = np.zeros((3, n))
    et_total = np.zeros(n)
    flow = np.empty((n, T)) if keep_flow else None
    sse = np.zeros(n) if obs is not None else None

    for t in range(T):
        P = prec[t]
        ratio = np.clip(1.0 - b * soil / Sm_safe, 0.0, 1.0)
        crit = np.where(has_store, Sm_safe * (1.0 - ratio**inv_b), 0.0)
        er1 = np.where(has_store, np.maximum(P + crit - Sm_safe, 0.0), P)
        p_in = P - er1
        fill = np.minimum((crit + p_in) / Sm_safe, 1.0)
        new_soil = np.where(has_store, smax * (1.0 - (1.0 - fill) ** b), 0.0)
        er2 = p_in - (new_soil - soil)
        # storage cannot gain more than the rain that reached it
        over = er2 < 0
        if np.any(over):
            new_soil = np.where(over, soil + p_in, new_soil)
            er2 = np.where(over, 0.0, er2)
        demand = np.where(has_store, new_soil / np.where(has_store, smax, 1.0), 0.0) * pet[t]
        et = np.minimum(demand, new_soil)
        soil = new_soil - et
        et_total += et

        to_quick = er1 + alfa * er2
        to_slow = (1.0 - alfa) * er2
        s = slow + to_slow
        q_slow = Rs * s
        slow = s - q_slow
        inflow = to_quick
        for k in range(3):
            s = quick[k] + inflow
            inflow = Rf * s
            quick[k] = s - inflow
        q = q_slow + inflow
        if keep_flow:
            flow[:, t] = q
        if obs is not None:
            sse += (q - obs[t]) ** 2

    storage = soil + slow + quick.sum(axis=0)
    return {"flow": flow, "sse": sse, "et": et_total, "storage": storage}


def hymod_simulate(params, forcing: ForcingSeries, return_balance: bool = False):
    """Daily streamflow (mm/day) for one parameter set or a batch of them.

    ``params`` may be a :class:`HymodParams`, a length-5 vector, or an
    ``(n, 5)`` array; the output is ``(T,)`` or ``(n, T)`` accordingly. With
    ``return_balance`` also returns ``{"et": total actual ET, "storage":
    final storage}`` for water-balance checks.
    """
    if isinstance(params, HymodParams):
        params = params.as_array()
    params = np.asarray(params, dtype=float)
    single = params.ndim == 1
    params = check_params(params)
    if forcing.T < 1:
        raise ValueError("empty forcing")
    out = _run(params, forcing.precipitation, forcing.pet)
    flow = out["flow"][0] if single else out["flow"]
    if not return_balance:
        return flow
    balance = {k: (out[k][0] if single else out[k]) for k in ("et", "storage")}
    return flow, balance


def nse(simulated, observed) -> float:
    """Nash-Sutcliffe efficiency ``1 - sum (sim - obs)^2 / sum (obs - mean obs)^2``."""
    sim = np.asarray(simulated, dtype=float)
    obs = np.asarray(observed, dtype=float)
    if sim.shape != obs.shape:
        raise ValueError("simulated and observed series differ in shape")
    denom = np.sum((obs - obs.mean()) ** 2)
    if denom == 0:
        raise DegenerateInputError("observed series is constant; NSE is undefined")
    return float(1.0 - np.sum((sim - obs) ** 2) / denom)


class HymodNSE(ModelFunction):
    """NSE of Hymod streamflow against a fixed observed series, as a 5-input model."""

    name = "hymod"

    def __init__(self, forcing: ForcingSeries):
        if forcing.observed_flow is None:
            raise ValueError("the NSE response needs observed_flow in the forcing")
        super().__init__(hymod_space())
        obs = forcing.observed_flow
        denom = np.sum((obs - obs.mean()) ** 2)
        if denom == 0:
            raise DegenerateInputError("observed series is constant; NSE is undefined")
        self.forcing = forcing
        self._denom = denom

    def _evaluate(self, x):
        x = check_params(x)
        out = np.empty(x.shape[0])
        f = self.forcing
        for start in range(0, x.shape[0], _CHUNK):
            chunk = x[start:start + _CHUNK]
            res = _run(chunk, f.precipitation, f.pet, obs=f.observed_flow, keep_flow=False)
            out[start:start + _CHUNK] = 1.0 - res["sse"] / self._denom
        return out

    def describe(self):
        f = self.forcing
        h = hashlib.sha256()
        for arr in (f.precipitation, f.pet, f.observed_flow):
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return {"name": self.name, "T": f.T, "forcing_sha256": h.hexdigest()}


def hymod_nse_response(forcing: ForcingSeries) -> HymodNSE:
    return HymodNSE(forcing)


DEFAULT_TRUE_PARAMS = HymodParams(Sm=100.0, beta=0.5, alfa=0.8, Rs=0.05, Rf=0.9)


def synthetic_forcing(T: int = 365, seed: int = 0, true_params: HymodParams = DEFAULT_TRUE_PARAMS,
                      noise_sd: float = 0.0) -> ForcingSeries:
    """Seeded stand-in for catchment forcing data.

    PET is a seasonal sinusoid ``3 + 2.5 sin(2 pi (t - 80) / 365)`` (so
    between 0.5 and 5.5 mm/day). Each day is wet with probability 0.5 and
    wet-day rain is Gamma(shape 0.75, scale 15) mm. Observed flow is Hymod
    run at ``true_params`` plus Gaussian noise of sd ``noise_sd``, truncated
    at zero.
    """
    if T < 30:
        raise ValueError(f"T must be >= 30, got {T}")
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    rng = substream(seed, "forcing")
    t = np.arange(T)
    pet = 3.0 + 2.5 * np.sin(2 * np.pi * (t - 80) / 365.0)
    wet = rng.random(T) < 0.5
    rain = np.where(wet, rng.gamma(0.75, 15.0, size=T), 0.0)
    base = ForcingSeries(rain, pet)
    q = hymod_simulate(true_params, base)
    noise = rng.standard_normal(T) * noise_sd
    obs = np.maximum(q + noise, 0.0)
    return ForcingSeries(rain, pet, obs)
