import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from weakctl.consumers import EqualSplit, case_study_consumers
from weakctl.errors import (DimensionMismatch, ImproperQ, InvalidWeights,
                            NonMinimumPhaseModel, UnstableSystem, ZeroBudget)
from weakctl.imc import (GammaBounds, IMCController, InternalModel, Request, build_youla,
                         controller_step, design_gamma, expand, gamma_budget, model_sum)
from weakctl.lti import TransferFunction, dc_gain, discretize, hinf_norm
from weakctl.scenario import PlantSet, first_order_plants, run_closed_loop, unity_plants

F = TransferFunction([1.0], [1.5, 1.0])
ONE = TransferFunction([1.0], [1.0])
SURROGATE_TAUS = (0.05, 0.0875, 0.125, 0.1625, 0.2)


def same_tf(a, b, points=(0.0, 0.3j, 2.0j, 1 + 1j, 40j)):
    return all(abs(a(s) - b(s)) <= 1e-10 * max(1.0, abs(b(s))) for s in points)


class TestBuildYoula:
    def test_unity_models(self):
        q = build_youla(unity_plants(5), F).q
        assert same_tf(q, F)

    def test_single_identity(self):
        q = build_youla([ONE], ONE).q
        assert same_tf(q, ONE)

    def test_two_lags(self):
        g = TransferFunction([1.0], [1.0, 1.0])
        q = build_youla([g, g], TransferFunction([1.0], [2.0, 1.0])).q
        assert same_tf(q, TransferFunction([1.0, 1.0], [2.0, 1.0]))
        assert q.order == 1

    @pytest.mark.parametrize("models", [unity_plants(5), first_order_plants(SURROGATE_TAUS),
                                        [TransferFunction([2.0], [1.0, 2.0]), ONE]])
    def test_dc_condition(self, models):
        q = build_youla(models, F).q
        assert dc_gain(q) * sum(dc_gain(g) for g in models) == pytest.approx(len(models), abs=1e-9)

    def test_rejects_non_unit_filter(self):
        with pytest.raises(ValueError, match="unit DC gain"):
            build_youla(unity_plants(2), TransferFunction([2.0], [1.0, 1.0]))

    def test_rejects_unstable_filter(self):
        with pytest.raises(UnstableSystem):
            build_youla(unity_plants(2), TransferFunction([-1.0], [1.0, -1.0]))

    def test_rejects_rhp_zero(self):
        g = TransferFunction([-1.0, 1.0], [1.0, 1.0])   # zero at s = 1
        with pytest.raises(NonMinimumPhaseModel):
            build_youla([g], F)

    def test_rejects_improper_q(self):
        g = TransferFunction([1.0], [1.0, 2.0, 1.0])   # relative degree 2, F only 1
        with pytest.raises(ImproperQ):
            build_youla([g], F)

    def test_model_sum(self):
        a, b = TransferFunction([1.0], [1.0, 1.0]), TransferFunction([1.0], [1.0, 2.0])
        total = model_sum([a, b])
        for s in (0.0, 1j, 3 + 2j):
            assert total(s) == pytest.approx(a(s) + b(s))
        assert same_tf(model_sum(unity_plants(3)), TransferFunction([3.0], [1.0]))


class TestExpand:
    def test_zero_gamma_singleton(self):
        req = expand(10.0, GammaBounds.zero(5), 5)
        assert req.center == 2.0 and req.sum_target == 10.0
        assert req.lo == req.hi == (2.0,) * 5

    def test_zero_v(self):
        req = expand(0.0, GammaBounds.symmetric([0.3, 1.0, 7.0, 0.0, 2.0]), 5)
        assert req.lo == req.hi == (0.0,) * 5

    def test_half_width(self):
        req = expand(10.0, GammaBounds.symmetric([0.5] * 5), 5)
        assert req.center == 2.0 and req.sum_target == 10.0
        assert req.lo == (1.0,) * 5 and req.hi == (3.0,) * 5

    def test_negative_v_uses_magnitude(self):
        req = expand(-10.0, GammaBounds((0.5,) * 5, (1.0,) * 5), 5)
        assert req.lo == (-3.0,) * 5 and req.hi == (0.0,) * 5

    def test_unbounded_sentinel(self):
        req = expand(10.0, GammaBounds.unbounded(3), 3)
        assert req.lo == (-math.inf,) * 3 and req.hi == (math.inf,) * 3
        # only the coupling constraint is left, also at v = 0
        req0 = expand(0.0, GammaBounds.unbounded(3), 3)
        assert req0.contains([5.0, -2.0, -3.0])

    def test_errors(self):
        with pytest.raises(ValueError):
            expand(1.0, GammaBounds.zero(1), 0)
        with pytest.raises(DimensionMismatch):
            expand(1.0, GammaBounds.zero(3), 4)
        with pytest.raises(ValueError):
            GammaBounds((-0.1,), (0.0,))
        with pytest.raises(DimensionMismatch):
            GammaBounds((0.1, 0.2), (0.0,))

    @given(st.floats(-1e6, 1e6), st.lists(st.floats(0, 100), min_size=1, max_size=8), st.data())
    def test_center_and_coupling_admissible(self, v, gl, data):
        gu = data.draw(st.lists(st.floats(0, 100), min_size=len(gl), max_size=len(gl)))
        n = len(gl)
        req = expand(v, GammaBounds(gl, gu), n)
        assert all(lo <= req.center <= hi for lo, hi in zip(req.lo, req.hi))
        tol = 1e-12 * max(1.0, abs(v))
        assert math.fsum(req.lo) <= v + tol and math.fsum(req.hi) >= v - tol
        assert req.contains([v / n] * n)

    @given(st.floats(-1e6, 1e6), st.integers(1, 10))
    def test_zero_gamma_bit_identical(self, v, n):
        req = expand(v, GammaBounds.zero(n), n)
        assert req.lo == req.hi == (v / n,) * n


class TestDesignGamma:
    def test_case_study_budget(self):
        q = build_youla(unity_plants(5), F).q
        g = design_gamma(unity_plants(5), q, 10.0, 2.0)
        assert gamma_budget(q, 10.0, 2.0, 5) == pytest.approx(1.0, abs=1e-6)
        np.testing.assert_allclose(g.lower, [0.2] * 5, atol=1e-6)
        assert g.lower == g.upper

    def test_single_consumer(self):
        g = design_gamma([ONE], ONE, 1.0, 0.5, [1.0])
        assert g.lower == (0.5,) and g.upper == (0.5,)

    def test_small_epsilon(self):
        q = build_youla(unity_plants(5), F).q
        assert design_gamma(unity_plants(5), q, 10.0, 1e-12).max_gain() < 1e-12

    def test_errors(self):
        q = build_youla(unity_plants(2), F).q
        with pytest.raises(InvalidWeights):
            design_gamma(unity_plants(2), q, 1.0, 1.0, [0.7, 0.7])
        with pytest.raises(InvalidWeights):
            design_gamma(unity_plants(2), q, 1.0, 1.0, [1.5, -0.5])
        with pytest.raises(InvalidWeights):
            design_gamma(unity_plants(2), q, 1.0, 1.0, [1.0])
        with pytest.raises(ValueError):
            design_gamma(unity_plants(2), q, 1.0, 0.0)
        with pytest.raises(ValueError):
            design_gamma(unity_plants(2), q, -1.0, 1.0)
        with pytest.raises(ZeroBudget):
            design_gamma(unity_plants(2), q, 1e300, 1e-300)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0.01, 5.0), min_size=1, max_size=6),
           st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.data())
    def test_budget_inequality(self, taus, d_l2, eps, data):
        plants = first_order_plants(taus)
        raw = data.draw(st.lists(st.floats(0.0, 1.0), min_size=len(taus), max_size=len(taus)))
        assume(sum(raw) > 1e-3)
        w = [x / sum(raw) for x in raw]
        w[-1] = 1.0 - sum(w[:-1])
        assume(w[-1] >= 0)
        q = build_youla(plants, F).q
        g = design_gamma(plants, q, d_l2, eps, w)
        lhs = sum(gi * hinf_norm(p) for gi, p in zip(g.lower, plants))
        rhs = eps * len(plants) / (hinf_norm(q) * d_l2)
        assert lhs <= rhs * (1 + 1e-9) + 1e-12

    def test_monotone_in_epsilon(self):
        plants = first_order_plants(SURROGATE_TAUS)
        q = build_youla(plants, F).q
        gs = [design_gamma(plants, q, 5.0, e).lower for e in (0.5, 1.0, 2.0)]
        assert np.all(np.diff(np.array(gs), axis=0) >= 0)

    def test_scaled(self):
        g = GammaBounds.symmetric([0.1, 0.2])
        assert g.scaled(10).upper == pytest.approx((1.0, 2.0))
        assert g.scaled(0).upper == (0.0, 0.0)
        assert GammaBounds.unbounded(2).scaled(0) == GammaBounds.zero(2)
        assert GammaBounds.unbounded(2).scaled(0.5) == GammaBounds.unbounded(2)


class TestControllerStep:
    def make(self, models, f=F, gamma=None):
        gamma = gamma or GammaBounds.zero(len(models))
        return InternalModel(models), build_youla(models, f), gamma

    def test_zero_response(self):
        model, q, _ = self.make(unity_plants(5))
        v, req = controller_step(model, q, 0.0, 0.0, np.zeros(5))
        assert v == 0.0 and req.sum_target == 0.0

    def test_static_unity(self):
        model, q, _ = self.make(unity_plants(5), f=ONE)
        v, req = controller_step(model, q, 10.0, 0.0, np.zeros(5))
        assert v == 10.0
        assert req.lo == (2.0,) * 5

    def test_dimension_mismatch(self):
        model, q, g = self.make(unity_plants(3))
        with pytest.raises(DimensionMismatch):
            IMCController(model, q, g).step(0.0, 0.0, np.zeros(2))
        with pytest.raises(DimensionMismatch):
            IMCController(model, q, GammaBounds.zero(2))

    @pytest.mark.parametrize("models", [unity_plants(5), first_order_plants(SURROGATE_TAUS)])
    def test_v_settles_to_r_minus_d(self, models):
        model, q, g = self.make(models)
        ctrl = IMCController(model, q, g)
        plants = PlantSet(models)
        r0, d0 = 50.0, 5.0
        y, u = 0.0, np.zeros(len(models))
        for _ in range(4000):
            v, req = ctrl.step(r0, y, u)
            u = np.array(req.lo)
            y = float(plants.step(u).sum()) + d0
        assert v == pytest.approx(r0 - d0, abs=1e-9)
        assert y == pytest.approx(r0, abs=1e-9)

    def test_model_output_tracks_consumers(self):
        models = first_order_plants(SURROGATE_TAUS)
        im = InternalModel(models)
        sims = [discretize(m, 0.01) for m in models]
        rng = np.random.default_rng(0)
        for _ in range(100):
            u = rng.normal(size=5)
            assert im.step(u) == pytest.approx(sum(s.step(x) for s, x in zip(sims, u)), abs=1e-12)

    def test_reset(self):
        model, q, g = self.make(unity_plants(2))
        ctrl = IMCController(model, q, g)
        first = [ctrl.step(1.0, 0.0, np.zeros(2))[0] for _ in range(5)]
        ctrl.reset()
        assert [ctrl.step(1.0, 0.0, np.zeros(2))[0] for _ in range(5)] == first

    def test_nominal_map_static_plants(self):
        # exact model, no deviation, no disturbance: y is F applied to r
        models = unity_plants(5)
        model, q, g = self.make(models)
        r = np.ones(1501)
        trace = run_closed_loop(PlantSet(models), IMCController(model, q, g),
                                [s.uncapped() for s in case_study_consumers()], EqualSplit(),
                                r, np.zeros(1501), 1500)
        expected = discretize(F, 0.01).simulate(r)
        assert np.max(np.abs(trace.y - expected)) <= 1e-6

    def test_nominal_map_dynamic_plants(self):
        # with lags the product of two ZOH maps differs from ZOH(G Q) by O(step)
        models = first_order_plants(SURROGATE_TAUS)
        model, q, g = self.make(models)
        r = np.ones(1501)
        trace = run_closed_loop(PlantSet(models), IMCController(model, q, g),
                                [s.uncapped() for s in case_study_consumers()], EqualSplit(),
                                r, np.zeros(1501), 1500)
        expected = discretize(F, 0.01).simulate(r)
        assert np.max(np.abs(trace.y - expected)) <= 5e-3


def test_request_contains():
    req = Request(2.0, 10.0, (1.0,) * 5, (3.0,) * 5)
    assert req.n == 5
    assert req.contains([2.0] * 5)
    assert req.contains([3.0, 3.0, 1.0, 1.0, 2.0])
    assert not req.contains([3.5, 2.5, 1.0, 1.0, 2.0])
    assert not req.contains([2.0] * 4 + [2.1])
