import math
import warnings

import numpy as np
import pytest

from floodgate.errors import DegenerateInputError
from floodgate.models import (
    AdditiveLinear,
    Constant,
    CountingModel,
    ForcingSeries,
    HymodParams,
    Ishigami,
    SparseInteraction,
    hymod_nse_response,
    hymod_simulate,
    hymod_space,
    nse,
    synthetic_forcing,
)
from floodgate.space import sample_iid

# quadrature oracle (scipy nquad over the 4-d pick-freeze integral), frozen
ISHIGAMI_TOTALS = (0.5575888552099593, 0.4424111447900409, 0.24368366406214775)
ISHIGAMI_VARIANCE = 13.844587940719258


class TestIshigami:
    def test_closed_form_matches_quadrature_oracle(self):
        m = Ishigami(7.0, 0.1)
        np.testing.assert_allclose(m.total_indices(), ISHIGAMI_TOTALS, rtol=1e-12)
        assert sum(m.variance_terms()) == pytest.approx(ISHIGAMI_VARIANCE, rel=1e-12)

    def test_point_values(self):
        m = Ishigami()
        assert m([0.0, 0.0, 0.0]) == 0.0
        assert m([math.pi / 2, math.pi / 2, 1.0]) == pytest.approx(1 + 7 + 0.1)

    def test_wrong_width(self):
        with pytest.raises(ValueError):
            Ishigami()(np.zeros((2, 4)))


class TestAdditiveLinear:
    def test_indices(self):
        np.testing.assert_allclose(AdditiveLinear([1, 2]).total_indices(), [0.2, 0.8])

    def test_all_zero_warns_and_is_degenerate(self):
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            m = AdditiveLinear([0, 0, 0])
        assert w and m.degenerate
        np.testing.assert_array_equal(m.total_indices(), 0.0)


class TestSparseInteraction:
    def test_deterministic_and_sparse(self):
        a, b = SparseInteraction(100, seed=3), SparseInteraction(100, seed=3)
        np.testing.assert_array_equal(a.main, b.main)
        s = a.total_indices()
        assert np.count_nonzero(s) == 10
        assert s.sum() >= 1.0 - 1e-12

    def test_closed_form_vs_variance_decomposition(self):
        # inactive-input check plus a brute-force pick-freeze on the active set
        m = SparseInteraction(20, seed=1)
        x = sample_iid(m.space, 200_000, 0).values
        y = m(x)
        s = m.total_indices()
        j = int(m.active[0])
        x2 = x.copy()
        x2[:, j] = sample_iid(m.space, 200_000, 1).values[:, j]
        est = 0.5 * np.mean((y - m(x2)) ** 2) / y.var()
        assert est == pytest.approx(s[j], abs=0.01)

    def test_needs_d10(self):
        with pytest.raises(ValueError):
            SparseInteraction(5)


def test_constant_and_counter():
    c = CountingModel(Constant(3, 2.5))
    np.testing.assert_array_equal(c(np.zeros((4, 3))), 2.5)
    c(np.zeros(3))
    assert c.count == 5
    assert c.d == 3


class TestHymod:
    def test_param_validation(self):
        with pytest.raises(ValueError):
            HymodParams(500, 0.5, 0.5, 0.05, 0.5)
        with pytest.raises(ValueError):
            HymodParams(100, 0.5, 0.5, 0.05, 0.05)

    def test_mass_balance(self):
        f = synthetic_forcing(T=365, seed=2)
        q, bal = hymod_simulate(HymodParams(150, 0.5, 0.6, 0.04, 0.5), f, return_balance=True)
        total_in = f.precipitation.sum()
        out = q.sum() + bal["et"].sum() + bal["storage"]
        assert out == pytest.approx(total_in, rel=1e-10)
        assert np.all(q >= 0)

    def test_no_soil_store_passes_rain(self):
        f = ForcingSeries(np.r_[10.0, np.zeros(99)], np.zeros(100))
        q = hymod_simulate(HymodParams(0.0, 0.5, 1.0, 0.05, 1.0), f)
        # Rf = 1 drains each quick reservoir within the step
        assert q[0] == pytest.approx(10.0)

    def test_vectorized_matches_single(self):
        f = synthetic_forcing(T=100, seed=0)
        model = hymod_nse_response(f)
        x = sample_iid(hymod_space(), 7, 0).values
        batch = model(x)
        single = [nse(hymod_simulate(HymodParams(*row), f), f.observed_flow) for row in x]
        np.testing.assert_allclose(batch, single, rtol=1e-12)

    def test_true_params_near_perfect_fit(self):
        f = synthetic_forcing(T=365, seed=0, noise_sd=0.0)
        from floodgate.models import DEFAULT_TRUE_PARAMS

        assert hymod_nse_response(f)(DEFAULT_TRUE_PARAMS.as_array()) == pytest.approx(1.0)

    def test_nse_definition(self):
        assert nse([1, 2, 3], [1, 2, 3]) == 1.0
        assert nse([2, 2, 2], [1, 2, 3]) == 0.0
        with pytest.raises(DegenerateInputError):
            nse([1, 2], [3, 3])

    def test_forcing_validation(self):
        with pytest.raises(ValueError):
            ForcingSeries([1.0, -1.0], [1.0, 1.0])
        with pytest.raises(ValueError):
            ForcingSeries([1.0, 1.0], [1.0])

    def test_synthetic_forcing_seeded(self):
        a, b = synthetic_forcing(seed=5), synthetic_forcing(seed=5)
        np.testing.assert_array_equal(a.precipitation, b.precipitation)
        assert a.T == 365
        assert np.all(a.pet > 0)
