"""Inequality verdicts on Gaussian equality cases and non-Gaussian pairs."""

import json
import math
from functools import lru_cache

import numpy as np
import pytest

from lcepi import (
    ContractError,
    Name,
    PreconditionError,
    analyze,
    analyze_pair,
    discretize,
    gaussian_mixture,
    make_family,
    make_gaussian,
    verify_pair,
)
from lcepi.densities import dilate, translate
from lcepi.functionals import Estimate
from lcepi.inequalities import (
    chain_d4_rhs,
    evaluate,
    verify_blachman_stam,
    verify_cross_bound,
    verify_epi,
    verify_ine_main,
    verify_j_geq_i2,
    verify_mean1,
    verify_new1_new11_ex1,
    verify_sharp2,
    verify_single,
)
from reference_values import REF

G6 = make_family("gamma", {"shape": 6.0})
G4 = make_family("gamma", {"shape": 4.0})
G3 = make_family("gamma", {"shape": 3.0})
LO = make_family("logistic")
M1 = make_gaussian(1.0)

J_G6, I_G6 = 5.0 / 24.0, 0.25
J_LO = 2.0 / 15.0


@lru_cache(maxsize=None)
def _pair(name_f, name_g):
    table = {"G6": G6, "G4": G4, "G3": G3, "LO": LO, "M1": M1}
    return analyze_pair(table[name_f], table[name_g])


@lru_cache(maxsize=None)
def _gauss_pair(a, b, n=1):
    return analyze_pair(make_gaussian(a, n), make_gaussian(b, n))


class TestEvaluate:
    def test_noise_from_perturbation(self):
        q = {"x": Estimate(1.0, 0.1), "y": Estimate(1.05, 0.0)}
        v = evaluate(Name.EPI, q, lambda v: v["x"], lambda v: v["y"])
        np.testing.assert_allclose(v.slack, 0.05)
        np.testing.assert_allclose(v.noise, 0.1, rtol=1e-9)
        assert v.holds and v.near_equality and not v.strict

    def test_violation_beyond_noise(self):
        q = {"x": Estimate(2.0, 0.01), "y": Estimate(1.0, 0.01)}
        v = evaluate(Name.EPI, q, lambda v: v["x"], lambda v: v["y"])
        assert not v.holds
        np.testing.assert_allclose(v.rel_slack, -0.5)

    def test_infinite_side_indeterminate(self):
        q = {"x": Estimate(math.inf, 0.0), "y": Estimate(math.inf, 0.0)}
        v = evaluate(Name.EPI, q, lambda v: v["x"], lambda v: v["y"])
        assert not v.determinate and not v.holds and not v.strict

    def test_infinite_rhs_holds(self):
        q = {"x": Estimate(1.0, 0.0), "y": Estimate(math.inf, 0.0)}
        v = evaluate(Name.EPI, q, lambda v: v["x"], lambda v: v["y"])
        assert v.holds and v.strict and v.rel_slack == 1.0

    def test_json_round_trip(self):
        v = verify_epi(M1, make_gaussian(2.0), pair=_gauss_pair(1.0, 2.0))
        d = json.loads(json.dumps(v.to_dict()))
        assert d["name"] == "EPI"
        assert set(d) >= {"lhs", "rhs", "slack", "rel_slack", "noise", "holds",
                          "near_equality", "determinate", "inputs"}
        assert d["inputs"]["f"]["family"].lower() == "gaussian"


class TestIneMain:
    @pytest.mark.parametrize("a,b", [(1.0, 2.0), (1.0, 1.0), (2.0, 5.0)])
    def test_matched_gaussians(self, a, b):
        v = verify_ine_main(make_gaussian(a), make_gaussian(b), a, b, pair=_gauss_pair(a, b))
        np.testing.assert_allclose([v.lhs, v.rhs], 1.0 / (a + b) ** 2, rtol=1e-5)
        assert v.holds and v.near_equality

    def test_one_ninth(self):
        v = verify_ine_main(M1, make_gaussian(2.0), 1.0, 2.0, pair=_gauss_pair(1.0, 2.0))
        np.testing.assert_allclose(v.rhs, 1.0 / 9.0, rtol=1e-5)

    def test_identical_standard_gaussians(self):
        v = verify_ine_main(M1, M1, 1.0, 1.0, pair=_gauss_pair(1.0, 1.0))
        np.testing.assert_allclose([v.lhs, v.rhs], 0.25, rtol=1e-5)

    def test_gamma6_with_gaussian(self):
        v = verify_ine_main(G6, M1, 1.0, 1.0, pair=_pair("G6", "M1"))
        ref = REF["gamma6_conv_m1"]["J"]
        assert abs(v.lhs - ref) <= 1e-5 * ref
        np.testing.assert_allclose(v.rhs, (J_G6 + 1.0 + 2 * I_G6) / 16.0, rtol=1e-5)
        assert v.strict

    def test_swap_symmetry(self):
        p, q = _pair("G6", "LO"), _pair("LO", "G6")
        v = verify_ine_main(G6, LO, 1.0, 2.0, pair=p)
        w = verify_ine_main(LO, G6, 2.0, 1.0, pair=q)
        np.testing.assert_allclose([v.lhs, v.rhs], [w.lhs, w.rhs], rtol=1e-8)

    def test_bad_weights(self):
        with pytest.raises(ContractError):
            verify_ine_main(M1, M1, 0.0, 1.0)
        with pytest.raises(ContractError):
            verify_ine_main(M1, M1, 1.0, math.inf)

    def test_mixture_rejected(self):
        mix = gaussian_mixture([-3.0, 3.0], sigma=0.5)
        with pytest.raises(PreconditionError):
            verify_ine_main(mix, mix, 1.0, 1.0)


class TestSharp2:
    @pytest.mark.parametrize("n", [1, 2])
    def test_gaussians(self, n):
        a, b = 1.0, 3.0
        v = verify_sharp2(make_gaussian(a, n), make_gaussian(b, n), pair=_gauss_pair(a, b, n))
        np.testing.assert_allclose([v.lhs, v.rhs], (a + b) / math.sqrt(n), rtol=1e-5)
        assert v.holds and v.near_equality

    def test_gamma6_logistic(self):
        v = verify_sharp2(G6, LO, pair=_pair("G6", "LO"))
        np.testing.assert_allclose(v.lhs, 1 / math.sqrt(J_G6) + 1 / math.sqrt(J_LO), rtol=1e-5)
        np.testing.assert_allclose(v.rhs, 1 / math.sqrt(REF["gamma6_conv_logistic"]["J"]), rtol=1e-5)
        assert v.strict


class TestEpi:
    @pytest.mark.parametrize("a,b", [(1.0, 2.0), (0.5, 5.0)])
    def test_gaussians(self, a, b):
        v = verify_epi(make_gaussian(a), make_gaussian(b), pair=_gauss_pair(a, b))
        np.testing.assert_allclose([v.lhs, v.rhs], 2 * math.pi * math.e * (a + b), rtol=1e-5)
        assert v.near_equality

    def test_gamma3_gaussian(self):
        v = verify_epi(G3, M1, pair=_pair("G3", "M1"))
        np.testing.assert_allclose(v.rhs, math.exp(2 * REF["gamma3_conv_m1"]["H"]), rtol=1e-5)
        np.testing.assert_allclose(
            v.lhs, math.exp(2 * REF["gamma3_entropy"]) + 2 * math.pi * math.e, rtol=1e-5)
        assert v.strict

    def test_swap(self):
        v = verify_epi(G6, LO, pair=_pair("G6", "LO"))
        w = verify_epi(LO, G6, pair=_pair("LO", "G6"))
        np.testing.assert_allclose([v.lhs, v.rhs], [w.lhs, w.rhs], rtol=1e-8)


class TestBlachmanStam:
    @pytest.mark.parametrize("n", [1, 2])
    def test_gaussians(self, n):
        a, b = 1.0, 3.0
        v = verify_blachman_stam(make_gaussian(a, n), make_gaussian(b, n), pair=_gauss_pair(a, b, n))
        np.testing.assert_allclose([v.lhs, v.rhs], (a + b) / n, rtol=1e-5)
        assert v.near_equality

    def test_gamma4_gaussian(self):
        v = verify_blachman_stam(G4, M1, pair=_pair("G4", "M1"))
        np.testing.assert_allclose(v.lhs, 2.0 + 1.0, rtol=1e-5)
        np.testing.assert_allclose(v.rhs, 1 / REF["gamma4_conv_m1"]["I"], rtol=1e-5)
        assert v.strict


class TestSingle:
    @pytest.mark.parametrize("sigma", [0.5, 2.0])
    def test_gaussian_equality(self, sigma):
        v = verify_j_geq_i2(make_gaussian(sigma))
        assert v.near_equality
        np.testing.assert_allclose(v.rhs, 1 / sigma**2, rtol=1e-6)

    def test_gamma6(self):
        v = verify_j_geq_i2(G6)
        np.testing.assert_allclose([v.lhs, v.rhs], [I_G6**2, J_G6], rtol=1e-5)
        assert v.strict

    def test_dilation_invariant_ratio(self):
        base = verify_j_geq_i2(LO)
        for alpha in (0.5, 3.0):
            v = verify_j_geq_i2(dilate(LO, alpha))
            np.testing.assert_allclose(v.rel_slack, base.rel_slack, rtol=1e-5)
            np.testing.assert_allclose(v.rhs / base.rhs, alpha**4, rtol=1e-5)
            assert v.holds == base.holds

    def test_grid_and_translate(self):
        g = discretize(translate(G6, 4.0))
        v = verify_j_geq_i2(g)
        assert v.strict

    def test_mean1_gaussian_2d(self):
        v = verify_mean1(make_gaussian(2.0, 2))
        np.testing.assert_allclose([v.lhs, v.rhs], 0.5, rtol=1e-5)
        assert v.near_equality

    def test_mean1_logistic(self):
        v = verify_mean1(LO)
        np.testing.assert_allclose([v.lhs, v.rhs], [1 / 9, J_LO], rtol=1e-5)
        assert v.strict

    def test_verify_single_reuses_report(self):
        r = analyze(G6)
        out = verify_single(G6, report=r)
        assert [v.name for v in out] == [Name.J_GEQ_I2, Name.MEAN1]


class TestRefinements:
    def test_gaussians_equality(self):
        a, b = 1.0, 2.0
        res = verify_new1_new11_ex1(make_gaussian(a), make_gaussian(b), a, b, pair=_gauss_pair(a, b))
        for key in ("new1", "new11", "ex1"):
            assert res[key].near_equality, key
        assert abs(res["calR"] - 1.0) <= 1e-3
        assert abs(res["bracket"]) <= 1e-5

    def test_gamma6_self(self):
        res = verify_new1_new11_ex1(G6, G6, 1.0, 1.0, pair=_pair("G6", "G6"))
        np.testing.assert_allclose(res["calR"], 1 / math.sqrt(0.65), rtol=1e-4)
        assert res["ex1"].strict
        assert res["new1"].strict
        assert res["new11"].holds and res["bracket"] >= 0

    @pytest.mark.parametrize("a,b", [(1.0, 1.0), (1.0, 2.0), (2.0, 1.0), (1.0, 5.0)])
    def test_chain(self, a, b):
        p = _pair("G6", "LO")
        res = verify_new1_new11_ex1(G6, LO, a, b, pair=p)
        slack = res["new1"].noise + res["new11"].noise
        assert res["new11"].rhs <= res["new1"].rhs + slack
        assert chain_d4_rhs(p, a, b) <= res["new1"].rhs + res["new1"].noise
        main = verify_ine_main(G6, LO, a, b, pair=p)
        assert main.rhs <= chain_d4_rhs(p, a, b) + main.noise

    def test_two_dimensional_rejected(self):
        with pytest.raises(ContractError):
            verify_new1_new11_ex1(make_gaussian(1.0, 2), make_gaussian(1.0, 2), 1.0, 1.0,
                                  pair=_gauss_pair(1.0, 1.0, 2))


class TestCrossBound:
    def test_gaussians_2d(self):
        a, b = 1.0, 3.0
        v = verify_cross_bound(make_gaussian(a, 2), make_gaussian(b, 2))
        np.testing.assert_allclose([v.lhs, v.rhs], 2 / (a * b), rtol=1e-5)
        assert v.near_equality

    def test_gamma6_logistic(self):
        v = verify_cross_bound(G6, LO)
        np.testing.assert_allclose([v.lhs, v.rhs], [1 / 12, 1 / 6], rtol=1e-5)
        assert v.strict

    def test_self_pair(self):
        v = verify_cross_bound(LO, LO)
        np.testing.assert_allclose([v.lhs, v.rhs], [1 / 9, J_LO], rtol=1e-5)

    def test_dimension_mismatch(self):
        with pytest.raises(ContractError):
            verify_cross_bound(M1, make_gaussian(1.0, 2))


class TestVerifyPair:
    def test_gaussian_pair_all_near_equality(self):
        out = verify_pair(M1, make_gaussian(2.0), ab=((1.0, 2.0),), pair=_gauss_pair(1.0, 2.0))
        assert all(v.holds and v.near_equality for v in out)

    def test_non_gaussian_pair_strict(self):
        out = verify_pair(G6, LO, pair=_pair("G6", "LO"))
        names = {v.name for v in out}
        assert {Name.INE_MAIN, Name.SHARP2, Name.EPI, Name.BLACHMAN_STAM, Name.NEW1,
                Name.NEW11, Name.CROSS_BOUND, Name.EX1} <= names
        for v in out:
            assert v.holds, v.name
            if v.name in (Name.INE_MAIN, Name.SHARP2, Name.EPI, Name.BLACHMAN_STAM):
                assert v.strict, v.name

    def test_dilation_covariance(self):
        base = verify_pair(G6, LO, ab=((1.0, 1.0),), pair=_pair("G6", "LO"))
        f, g = dilate(G6, 2.0), dilate(LO, 2.0)
        out = verify_pair(f, g, ab=((1.0, 1.0),))
        for v, w in zip(base, out):
            assert v.name == w.name and v.holds == w.holds
            np.testing.assert_allclose(w.rel_slack, v.rel_slack, rtol=1e-3, atol=1e-6)

    def test_translation_invariance(self):
        base = verify_pair(G6, LO, ab=((1.0, 1.0),), pair=_pair("G6", "LO"))
        out = verify_pair(translate(G6, -2.0), translate(LO, 1.5), ab=((1.0, 1.0),))
        for v, w in zip(base, out):
            np.testing.assert_allclose([w.lhs, w.rhs], [v.lhs, v.rhs], rtol=1e-6)

    def test_dimension_mismatch(self):
        with pytest.raises(ContractError):
            analyze_pair(M1, make_gaussian(1.0, 2))
