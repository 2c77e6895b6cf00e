import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plants import random_pip_plant, random_pip_violating_plant
from rti_stab.errors import ImproperPlantError, PIPViolationError
from rti_stab.examples import EXAMPLES
from rti_stab.plant import (analyze, check_pip, cluster_roots, coprime_factorize,
                            default_padding_root, factorization_from_pair, sign_rule_applies)
from rti_stab.ratfun import RationalTF, poly_from_roots

seeds = st.integers(0, 2**32 - 1)
PROBES = (0.3 + 0.7j, -0.4 + 2.0j, 1.5 - 0.5j, 2.2 + 0.1j)


def plant(zeros, poles, gain=1.0):
    return RationalTF(poly_from_roots(zeros, gain), poly_from_roots(poles))


class TestAnalyze:
    def test_classifies_roots(self):
        pz = analyze(plant([3, -2], [4, 5]))
        assert pz.relative_degree == 0
        assert [z.real for z, _ in pz.rhp_zeros] == pytest.approx([3.0])
        assert sorted(p.real for p, _ in pz.rhp_poles) == pytest.approx([4.0, 5.0])

    def test_repeated_roots_cluster(self):
        pz = analyze(plant([2 + 6j, 2 - 6j, 2 + 6j, 2 - 6j], [-1, -2, -3, -4, -5]))
        assert sorted(mu for _, mu in pz.rhp_zeros) == [2, 2]
        assert cluster_roots([1.0, 1.0 + 1e-9, 3.0]) == [(1.0 + 5e-10 + 0j, 2), (3 + 0j, 1)]

    def test_improper_rejected(self):
        with pytest.raises(ImproperPlantError):
            analyze(RationalTF([1, 0, 0], [1, 1]))

    def test_zero_plant_rejected(self):
        with pytest.raises(ValueError):
            analyze(RationalTF([0], [1, 1]))


class TestPIP:
    def test_example_5_satisfied(self):
        assert check_pip(analyze(EXAMPLES["5"].plant)).satisfied

    def test_odd_count_between_finite_zeros(self):
        rep = check_pip(analyze(plant([1, 4], [2, -1, -2])))
        assert not rep.satisfied and rep.witness == (1.0, 4.0)

    def test_zero_at_infinity_counts_when_strictly_proper(self):
        P = plant([2], [1, 3])
        assert not check_pip(analyze(P)).satisfied
        assert check_pip(analyze(plant([2, -1], [1, 3]))).satisfied  # biproper: (3, inf) open

    def test_pole_left_of_smallest_zero_is_free(self):
        assert check_pip(analyze(plant([3], [1, -2]))).satisfied

    def test_zero_at_origin_is_nonnegative(self):
        rep = check_pip(analyze(plant([0.0], [1.0, -2.0])))
        assert not rep.satisfied and rep.witness == (0.0, math.inf)

    @given(seeds)
    @settings(max_examples=50)
    def test_violations_rejected_with_witness(self, seed):
        P, (z1, z2) = random_pip_violating_plant(np.random.default_rng(seed))
        rep = check_pip(analyze(P))
        assert not rep.satisfied
        lo, hi = rep.witness
        assert lo == pytest.approx(z1) and (hi == pytest.approx(z2) or hi == z2)
        with pytest.raises(PIPViolationError) as exc:
            coprime_factorize(P)
        assert exc.value.report.witness == rep.witness


class TestSignRule:
    def test_biproper_odd_poles_right_of_zero(self):
        P = plant([1.0], [2.0])
        assert sign_rule_applies(analyze(P))
        cf = coprime_factorize(P)
        assert cf.sign_flipped and cf.D.num.lead / cf.D.den.lead == -1.0

    def test_even_count_keeps_sign(self):
        assert not sign_rule_applies(analyze(EXAMPLES["5"].plant))

    def test_strictly_proper_never_flips(self):
        assert not sign_rule_applies(analyze(plant([1.0], [2.0, 3.0])))


class TestCoprime:
    def test_example_4_layout(self):
        cf = coprime_factorize(EXAMPLES["4"].plant)
        assert sorted(z.real for z in cf.d_zeros) == pytest.approx([2.0, 3.0])
        # the LHP zero at -3 moves into D's denominator; one padding root fills the rest
        assert -3.0 in [p.real for p in cf.d_poles]
        assert cf.q == 2 and cf.relative_degree == 1

    def test_padding_rule(self):
        pz = analyze(EXAMPLES["10"].plant)
        assert default_padding_root(pz) == -4.0

    def test_full_padding_keeps_lhp_zeros(self):
        pad = [-0.5 + math.sqrt(6.75) * 1j, -0.5 - math.sqrt(6.75) * 1j]
        cf = coprime_factorize(EXAMPLES["10"].plant, padding=pad)
        ref = EXAMPLES["10"].D
        assert cf.D.num.allclose(ref.num) and cf.D.den.allclose(ref.den)

    def test_padding_must_be_lhp(self):
        with pytest.raises(ValueError):
            coprime_factorize(EXAMPLES["10"].plant, padding=[1.0])

    def test_force_marks_uncertified(self):
        cf = coprime_factorize(plant([2], [1, 3]), force=True)
        assert not cf.certified

    @given(seeds)
    @settings(max_examples=60)
    def test_factorization_invariants(self, seed):
        P = random_pip_plant(np.random.default_rng(seed))
        cf = coprime_factorize(P)
        for s in PROBES:
            assert complex(cf.N(s) / cf.D(s)) == pytest.approx(complex(P(s)), rel=1e-7, abs=1e-9)
        assert cf.D.is_biproper() and cf.N.is_proper()
        assert cf.N.relative_degree == P.relative_degree
        assert all(p.real < 0 for p in (*cf.N.poles(), *cf.D.poles()))
        assert cf.q == sum(1 for z in P.zeros() if z.real >= 0)
        assert len(cf.rhp_zeros) == cf.q
        # PIP plus the sign rule make D positive at every real RHP zero
        for z, _ in cf.zero_groups:
            if z.imag == 0:
                assert cf.d_value(z).real > 0

    def test_from_pair_reconstructs_plant(self):
        ex = EXAMPLES["9"]
        cf = factorization_from_pair(ex.N, ex.D)
        assert cf.q == 4 and [mu for _, mu in cf.zero_groups] == [2]
        for s in PROBES:
            assert complex(cf.plant(s)) == pytest.approx(complex(ex.plant(s)), rel=1e-8)

    def test_from_pair_rejects_unstable_factor(self):
        with pytest.raises(ValueError):
            factorization_from_pair(RationalTF([1], [1, -1]), RationalTF([1, 1], [1, 2]))
