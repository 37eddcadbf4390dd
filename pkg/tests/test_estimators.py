import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floodgate.dataset import EvaluatedDataset
from floodgate.estimators import (
    FloodgateTerms,
    build_paired_dataset,
    floodgate_all_inputs,
    floodgate_interval,
    floodgate_terms,
    normal_quantile,
    panin_all_inputs,
    panin_bound,
    panin_interval,
    panin_terms,
    spf_jansen,
    spf_surrogate,
)
from floodgate.models import AdditiveLinear, Constant, CountingModel, Ishigami
from floodgate.space import InputSpace, ResampleBlock, sample_iid, sample_lhs_batches
from floodgate.surrogate import FunctionSurrogate, LinearSurrogate


def _hand_case():
    # y = (1, 2, 3) at x = (1, 2, 3); f = f* = identity on one input; redraws give f(X~) = (2, 1, 3)
    space = InputSpace.uniform([(0.0, 4.0)])
    model = FunctionSurrogate(lambda x: x[:, 0], 1)
    data = EvaluatedDataset(np.array([[1.0], [2.0], [3.0]]), [1.0, 2.0, 3.0])
    block = ResampleBlock(0, np.array([[2.0], [1.0], [3.0]]), seed=0)
    return space, model, data, block


class TestHandExample:
    def test_terms(self):
        space, f, data, block = _hand_case()
        t = floodgate_terms(data, f, space, 0, resamples=block)
        np.testing.assert_array_equal(t.m, [0, 0, 0])
        np.testing.assert_array_equal(t.m_z, [0.5, 0.5, 0])
        np.testing.assert_array_equal(t.v, [1.5, 0, 1.5])

    def test_interval_points(self):
        space, f, data, block = _hand_case()
        r = floodgate_interval(floodgate_terms(data, f, space, 0, resamples=block))
        # Fraction oracle: (1/3) / 1
        assert Fraction(r.point_lower).limit_denominator(100) == Fraction(1, 3)
        assert r.point_lower == r.point_upper == pytest.approx(1 / 3, abs=1e-15)
        assert 0.0 <= r.lower <= r.upper <= 1.0


class TestFloodgate:
    def test_exact_surrogate_has_zero_m(self, ishigami_model):
        x = sample_iid(ishigami_model.space, 200, 0).values
        data = EvaluatedDataset(x, ishigami_model(x))
        t = floodgate_terms(data, ishigami_model, ishigami_model.space, 0, K=3, seed=1)
        np.testing.assert_array_equal(t.m, 0.0)
        assert t.surrogate_evals == 200 * 3 + 200

    def test_no_model_calls_and_surrogate_count(self, ishigami_model):
        x = sample_iid(ishigami_model.space, 100, 0).values
        model = CountingModel(ishigami_model)
        data = EvaluatedDataset(x, ishigami_model(x))
        sur = CountingModel(LinearSurrogate([1.0, 0.5, 0.0]))
        floodgate_all_inputs(data, sur, ishigami_model.space, K=2, seed=0)
        assert model.count == 0
        assert sur.count == 100 + 100 * 3 * 2

    def test_zero_variance_gives_unit_interval(self):
        m = Constant(2)
        x = sample_iid(m.space, 50, 0).values
        r = floodgate_all_inputs(EvaluatedDataset(x, m(x)), LinearSurrogate([0.3, 0.1]), m.space)
        for res in r:
            assert (res.lower, res.upper) == (0.0, 1.0)
            assert res.diagnostics["degenerate"]

    def test_needs_two_rows(self, ishigami_model):
        with pytest.raises(ValueError):
            floodgate_terms(EvaluatedDataset(np.zeros((1, 3)), [1.0]), ishigami_model, ishigami_model.space, 0)

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            normal_quantile(1.5)
        assert normal_quantile(0.05) == pytest.approx(1.959963984540054, abs=1e-12)

    def test_permutation_invariance(self, rng):
        n = 60
        terms = FloodgateTerms(0, rng.normal(1, 1, n), rng.random(n), rng.random(n) * 3, 1, None, 0)
        perm = rng.permutation(n)
        shuffled = FloodgateTerms(0, terms.m_z[perm], terms.m[perm], terms.v[perm], 1, None, 0)
        a, b = floodgate_interval(terms), floodgate_interval(shuffled)
        assert a.lower == pytest.approx(b.lower, abs=1e-13)
        assert a.upper == pytest.approx(b.upper, abs=1e-13)

    def test_interval_invariants_and_diagnostics(self, ishigami_model):
        x = sample_iid(ishigami_model.space, 300, 2).values
        data = EvaluatedDataset(x, ishigami_model(x))
        for r in floodgate_all_inputs(data, LinearSurrogate([1.0, 0.0, 0.0]), ishigami_model.space, seed=3):
            assert 0.0 <= r.lower <= r.upper <= 1.0
            assert r.point_lower <= r.point_upper
            assert np.array(r.diagnostics["cov"]).shape == (3, 3)
            assert r.diagnostics["n"] == 300

    def test_input_order_independent(self, ishigami_model):
        x = sample_iid(ishigami_model.space, 100, 2).values
        data = EvaluatedDataset(x, ishigami_model(x))
        sur = LinearSurrogate([1.0, 0.2, 0.1])
        fwd = floodgate_all_inputs(data, sur, ishigami_model.space, seed=5)
        rev = floodgate_all_inputs(data, sur, ishigami_model.space, seed=5, inputs=[2, 1, 0])
        assert fwd[0].lower == rev[2].lower and fwd[2].upper == rev[0].upper

    def test_batch_means_path(self, ishigami_model):
        sm = sample_lhs_batches(ishigami_model.space, 16, 10, 0)
        data = EvaluatedDataset(sm.values, ishigami_model(sm.values), batch_ids=sm.batch_ids)
        r = floodgate_all_inputs(data, LinearSurrogate([1.0, 0.0, 0.0]), ishigami_model.space)[0]
        assert r.diagnostics["n"] == 10 and r.diagnostics["n_rows"] == 160
        assert r.diagnostics["batched"]

    def test_batch_means_match_manual(self, rng):
        n, B = 40, 8
        t = FloodgateTerms(0, rng.random(n), rng.random(n) * 0.2, rng.random(n), 1, np.repeat(np.arange(B), n // B), 0)
        r = floodgate_interval(t)
        w = np.column_stack([t.m_z, t.m, t.v]).reshape(B, n // B, 3).mean(axis=1)
        np.testing.assert_allclose(r.diagnostics["cov"], np.cov(w.T, ddof=1), rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(3, 200), d=st.integers(1, 5), seed=st.integers(0, 2**32 - 1))
def test_equivalence_with_jansen_property(n, d, seed):
    a = np.linspace(1.0, 2.0, d)
    model = FunctionSurrogate(lambda x: np.sin(x @ a) + x[:, 0] ** 2, d)
    space = InputSpace.uniform([(0.0, 1.0)] * d)
    pairs = build_paired_dataset(model, space, n, seed)
    data = EvaluatedDataset(pairs.base.values, pairs.y)
    for j in range(d):
        s = spf_jansen(pairs, j)
        r = floodgate_interval(floodgate_terms(data, model, space, j, K=1, resamples=pairs.resample_block(j)))
        if s.diagnostics["degenerate"]:
            continue
        assert r.point_lower == pytest.approx(s.point_lower, rel=1e-12, abs=1e-300)
        assert r.point_upper == pytest.approx(s.point_lower, rel=1e-12, abs=1e-300)


class TestSpf:
    def test_hand_case(self):
        space = InputSpace.uniform([(0.0, 4.0)])
        model = FunctionSurrogate(lambda x: x[:, 0], 1)
        pairs = build_paired_dataset(model, space, 3, 0)
        # overwrite to the worked example via a private constructor
        from floodgate.estimators import PairedDataset

        p = PairedDataset(pairs.base, np.array([1.0, 2.0, 3.0]), pairs.x_tilde, np.array([[2.0], [1.0], [3.0]]))
        assert spf_jansen(p, 0).point_lower == pytest.approx(1 / 3, abs=1e-15)

    def test_cost(self):
        m = CountingModel(Ishigami())
        build_paired_dataset(m, m.space, 100, 0)
        assert m.count == 400

    def test_freeze_columns_shared(self, ishigami_model):
        p = build_paired_dataset(ishigami_model, ishigami_model.space, 20, 0)
        pts = p.pick_inputs(1)
        np.testing.assert_array_equal(pts[:, [0, 2]], p.base.values[:, [0, 2]])
        np.testing.assert_allclose(p.y_pick[:, 1], ishigami_model(pts))

    def test_converges_on_linear(self, linear_model):
        p = build_paired_dataset(linear_model, linear_model.space, 1_000_000, 7)
        assert spf_jansen(p, 0).point_lower == pytest.approx(0.2, abs=0.005)
        assert spf_jansen(p, 1).point_lower == pytest.approx(0.8, abs=0.005)

    def test_null_input_small(self):
        m = AdditiveLinear([1.0, 0.0])
        p = build_paired_dataset(m, m.space, 5000, 1)
        assert spf_jansen(p, 1).point_lower == 0.0

    def test_surrogate_identity(self, ishigami_model):
        p = build_paired_dataset(ishigami_model, ishigami_model.space, 50, 0)
        a, b = spf_jansen(p, 0), spf_surrogate(p, 0)
        assert (a.lower, a.upper) == (b.lower, b.upper)
        assert b.method == "spf-surrogate"

    def test_width_shrinks_with_n(self, linear_model):
        w = [spf_jansen(build_paired_dataset(linear_model, linear_model.space, n, 3), 0).width for n in (1000, 100_000)]
        assert w[0] / w[1] == pytest.approx(10.0, rel=0.25)

    def test_degenerate(self):
        m = Constant(2)
        r = spf_jansen(build_paired_dataset(m, m.space, 10, 0), 0)
        assert (r.lower, r.upper, r.point_lower) == (0.0, 1.0, 0.0)


class TestPanin:
    def test_bound_branches(self):
        assert panin_bound(0.0, 0.4) == (0.0, 0)
        b, k = panin_bound(1.0, 0.5)
        assert b == 1.0 and k == 0
        b, k = panin_bound(0.1, 0.01)
        assert k == 1 and b == pytest.approx((0.1 + 0.2) * 0.1)
        b, k = panin_bound(0.1, 0.99)
        assert k == 2 and b == pytest.approx((0.1 + 2 * math.sqrt(0.01)) * 0.1)

    def test_exact_surrogate_matches_spf_ci_width(self, ishigami_model):
        # E = 0: interval is the S^f delta-method CI
        x = sample_iid(ishigami_model.space, 2000, 0).values
        data = EvaluatedDataset(x, ishigami_model(x))
        r = panin_all_inputs(data, ishigami_model, ishigami_model.space, seed=1)
        for res in r:
            assert res.diagnostics["e_hat"] == 0.0
            assert res.diagnostics["bound"] == 0.0

    def test_useless_surrogate_saturates(self, ishigami_model):
        x = sample_iid(ishigami_model.space, 500, 0).values
        data = EvaluatedDataset(x, ishigami_model(x))
        far = FunctionSurrogate(lambda z: 50.0 * z[:, 0], 3)
        for r in panin_all_inputs(data, far, ishigami_model.space, seed=1):
            assert (r.lower, r.upper) == (0.0, 1.0)

    def test_no_model_calls(self, ishigami_model):
        x = sample_iid(ishigami_model.space, 50, 0).values
        data = EvaluatedDataset(x, ishigami_model(x))
        sur = CountingModel(LinearSurrogate([1.0, 0.0, 0.0]))
        t = panin_terms(data, sur, ishigami_model.space, 0, seed=0)
        r = panin_interval(t)
        assert 0.0 <= r.lower <= r.upper <= 1.0

    def test_wider_than_floodgate(self, ishigami_model):
        x = sample_iid(ishigami_model.space, 5000, 0).values
        data = EvaluatedDataset(x, ishigami_model(x))
        sur = FunctionSurrogate(lambda z: ishigami_model(z) + 0.5 * np.sin(3 * z[:, 2]), 3)
        fg = floodgate_all_inputs(data, sur, ishigami_model.space, seed=1)
        pn = panin_all_inputs(data, sur, ishigami_model.space, seed=2)
        for a, b in zip(fg, pn):
            assert a.width < b.width
