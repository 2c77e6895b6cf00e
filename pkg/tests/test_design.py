import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from plants import random_pip_plant
from rti_stab import design
from rti_stab.errors import LogDomainError, SingularSystemError
from rti_stab.examples import EXAMPLES, LARGE_EXPONENT
from rti_stab.plant import coprime_factorize
from rti_stab.ratfun import RationalTF, poly_from_roots

seeds = st.integers(0, 2**32 - 1)


def random_params(rng, n):
    return np.sort(1.0 + rng.uniform(0.05, 60.0, n)) * rng.uniform(0.7, 1.3, n)


def solved_design(cf, a, M=None):
    m = design.exponents_for(cf, a, M)
    return design.make_u(cf, a, m, M)


class TestFactors:
    def test_log_f_is_log_of_ratio(self):
        f = design.FactorPair(2.0, 7.0, 1.5)
        s = 0.3 + 1.2j
        assert np.exp(f.log_f(s)) == pytest.approx((s + 2.0) / (s + 7.0))

    def test_log_f_keeps_precision_for_close_parameters(self):
        f = design.FactorPair(3.0, 3.0 + 1e-12, 1.0)
        # log((s+a)/(s+a+d)) ~ -d/(s+a+d)
        assert f.log_f(1.0).real == pytest.approx(-1e-12 / 4.0, rel=1e-6)

    def test_parameters_must_be_positive(self):
        with pytest.raises(ValueError):
            design.FactorPair(0.0, 1.0, 1.0)

    def test_u_eval_integer_matches_direct_product(self):
        U = design.UProduct.from_params([1, 5, 2, 9], [3, -2], integerized=True)
        s = -0.7 + 2.1j
        ref = ((s + 1) / (s + 5)) ** 3 * ((s + 2) / (s + 9)) ** -2
        assert design.u_eval(U, s) == pytest.approx(ref)

    def test_u_eval_real_exponent_principal_branch(self):
        U = design.UProduct.from_params([1, 5], [0.5])
        assert design.u_eval(U, 3.0) == pytest.approx(math.sqrt(4 / 8))

    def test_integerized_rejects_fractional_exponent(self):
        with pytest.raises(ValueError):
            design.UProduct.from_params([1, 5], [0.5], integerized=True)

    def test_premultiplier_value(self):
        pre = design.Premultiplier(2.0, 9.0)
        assert pre.value(1.0) == pytest.approx(0.3)
        assert pre.log_derivative(1.0, 1) == pytest.approx(1 / 3 - 1 / 10)


class TestSystem:
    def test_default_initial_parameters(self):
        # 1 + 9**k / 100; the tabulated start agrees where it was not rounded
        assert design.default_initial_a(5) == pytest.approx(EXAMPLES["9"].initial_a[:5])

    def test_shape_and_tags_complex_pair(self):
        cf = EXAMPLES["7"].factorization()
        S = design.build_system(cf, EXAMPLES["7"].initial_a)
        assert S.matrix.shape == (2, 2)
        assert S.row_tags == ("re:value@z0", "im:value@z0")

    def test_shape_with_derivative_rows(self):
        cf = EXAMPLES["9"].factorization()
        S = design.build_system(cf, EXAMPLES["9"].initial_a)
        assert S.matrix.shape == (4, 4)
        assert S.row_tags[2:] == ("re:deriv1@z0", "im:deriv1@z0")

    def test_degree_two_row(self):
        ex = EXAMPLES["11"]
        S = design.build_system(ex.factorization(), ex.initial_a, ex.M)
        a = np.asarray(ex.initial_a)
        assert S.row_tags[-1] == "inf-order2"
        assert S.matrix[-1] == pytest.approx(a[0::2] - a[1::2])
        assert S.rhs[-1] == 0.0

    def test_wrong_parameter_count(self):
        with pytest.raises(ValueError):
            design.build_system(EXAMPLES["5"].factorization(), [1.0, 2.0, 3.0])

    def test_singular_when_factors_are_trivial(self):
        with pytest.raises(SingularSystemError):
            design.build_system(EXAMPLES["4"].factorization(), [2, 2, 3, 3])

    def test_negative_d_at_real_zero(self):
        P = RationalTF(poly_from_roots([2.0]), poly_from_roots([1.0, 3.0]))
        cf = coprime_factorize(P, force=True)
        with pytest.raises(LogDomainError):
            design.build_system(cf, [1.0, 2.0])

    def test_choose_M_makes_shift_positive(self):
        cf = EXAMPLES["13"].factorization()
        M = design.choose_M(cf)
        assert cf.inv_s_coefficient + M > 0
        assert design.premultiplier_for(cf, 9.0).shift == pytest.approx(1.0)

    def test_rejects_nonpositive_shift(self):
        cf = EXAMPLES["13"].factorization()
        with pytest.raises(ValueError):
            design.premultiplier_for(cf, 1.0)

    @pytest.mark.parametrize("key", ["5", "4", "7", "8", "9", "11", "13"])
    def test_initial_exponents(self, key):
        ex = EXAMPLES[key]
        m = design.exponents_for(ex.factorization(), ex.initial_a, ex.M)
        assert m == pytest.approx(ex.initial_m, abs=5e-5)

    @pytest.mark.parametrize("key", ["5", "4", "7", "8", "9", "11", "13"])
    def test_adjusted_exponents_are_integers(self, key):
        ex = EXAMPLES[key]
        m = design.exponents_for(ex.factorization(), ex.adjusted_a, ex.M)
        assert np.max(np.abs(m - np.asarray(ex.adjusted_m))) < 1e-6


class TestInterpolation:
    @pytest.mark.parametrize("key", ["5", "4", "7", "8", "9", "11", "13"])
    def test_tabulated_starts_interpolate(self, key):
        ex = EXAMPLES[key]
        cf = ex.factorization()
        U = solved_design(cf, ex.initial_a, ex.M)
        assert max(design.interpolation_residuals(cf, U)) < 1e-8

    @given(seeds, st.sampled_from(["8", "9", "13"]))
    @settings(max_examples=40)
    def test_repeated_zeros_random_parameters(self, seed, key):
        ex = EXAMPLES[key]
        cf = ex.factorization()
        rng = np.random.default_rng(seed)
        a = random_params(rng, 2 * design.n_factors(cf))
        try:
            U = solved_design(cf, a, ex.M)
        except SingularSystemError:
            assume(False)
        assert max(design.interpolation_residuals(cf, U)) < 1e-8

    @given(seeds)
    @settings(max_examples=60)
    def test_random_plants(self, seed):
        rng = np.random.default_rng(seed)
        cf = coprime_factorize(random_pip_plant(rng))
        assume(cf.q > 0)
        a = random_params(rng, 2 * design.n_factors(cf))
        try:
            U = solved_design(cf, a)
        except SingularSystemError:
            assume(False)
        assert max(design.interpolation_residuals(cf, U)) < 1e-8


class TestDegreeTwo:
    @given(seeds)
    @settings(max_examples=40)
    def test_infinity_row_on_solved_systems(self, seed):
        rng = np.random.default_rng(seed)
        cf = coprime_factorize(random_pip_plant(rng, rel_degree=2, q=int(rng.integers(1, 4))))
        a = random_params(rng, 2 * design.n_factors(cf))
        try:
            U = solved_design(cf, a)
        except SingularSystemError:
            assume(False)
        m = U.exponents
        d = a[0::2] - a[1::2]
        assert abs(np.sum(m * d)) < 1e-9 * (1 + np.sum(np.abs(m * d)))
        # with the row satisfied the 1/s coefficients of U and D agree exactly
        pre = U.premultiplier
        assert np.sum(m * d) + pre.shift - pre.M == pytest.approx(cf.inv_s_coefficient, abs=1e-8)

    @pytest.mark.parametrize("key", ["10", "11", "13"])
    def test_inv_s_coefficient_of_worked_designs(self, key):
        ex = EXAMPLES[key]
        cf = ex.factorization()
        if cf.q == 0:
            U = design.trivial_U(cf, ex.M)
        else:
            U = design.make_u(cf, ex.adjusted_a, ex.adjusted_m, ex.M)

        def g(s):
            return s * (design.u_eval(U, s) - cf.d_value(s))

        # one Richardson step removes the s**-2 term that dominates g(1e6)
        # when the factor parameters are large
        assert abs(2 * g(2e6) - g(1e6)) < 1e-3

    def test_trivial_unit_matches_large_s(self):
        cf = EXAMPLES["10"].factorization()
        U = design.trivial_U(cf, 3.0)
        assert U.premultiplier.shift == pytest.approx(1.0)
        s = 1e6
        assert abs(s * (design.u_eval(U, s) - cf.d_value(s))) < 1e-3


class TestAsymptotic:
    def test_large_exponent_prediction(self):
        L = LARGE_EXPONENT
        res = design.asymptotic_epsilons(L.factorization(), L.centers, L.targets)
        assert np.max(np.abs(res.x - L.x) / np.abs(L.x)) < 5e-10
        assert res.eps == pytest.approx(L.eps, abs=1e-12)
        assert res.achieved_m == pytest.approx(L.achieved_m, rel=1e-6)
        assert res.refined_m == pytest.approx(L.targets, abs=5e-8)
        assert res.refined_eps == pytest.approx(L.refined_eps, abs=1e-9)

    def test_system_is_separation_free_limit(self):
        # at tiny separations m_k * 2 eps_k approaches x_k
        L = LARGE_EXPONENT
        cf = L.factorization()
        x = design.solve_exponents(design.asymptotic_system(cf, L.centers))
        eps = np.full(4, 1e-6) * np.sign(x)
        m = design.exponents_for(cf, design.params_from_eps(L.centers, eps))
        assert 2 * eps * m == pytest.approx(x, rel=1e-4)

    def test_zero_target_rejected(self):
        L = LARGE_EXPONENT
        with pytest.raises(ValueError):
            design.asymptotic_epsilons(L.factorization(), L.centers, [0, 1, 2, 3])
