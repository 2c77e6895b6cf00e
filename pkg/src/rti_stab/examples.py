"""Built-in worked examples with their published parameter tables."""

from __future__ import annotations

from dataclasses import dataclass

from .plant import CoprimeFactorization, factorization_from_pair
from .ratfun import Polynomial, RationalTF


def _p(*factors) -> Polynomial:
    out = Polynomial([1.0])
    for f in factors:
        out = out * Polynomial(f)
    return out


@dataclass(frozen=True)
class WorkedExample:
    key: str
    title: str
    N: RationalTF
    D: RationalTF
    plant: RationalTF
    M: float | None = None
    initial_a: tuple | None = None
    initial_m: tuple | None = None
    adjusted_a: tuple | None = None
    adjusted_m: tuple | None = None
    controller: RationalTF | None = None

    def factorization(self) -> CoprimeFactorization:
        return factorization_from_pair(self.N, self.D, self.plant)


def _tf(num, den) -> RationalTF:
    return RationalTF(num, den)


def _build() -> dict[str, WorkedExample]:
    ex = {}

    N = _tf(_p([1, -1]), _p([1, 7]))
    D = _tf(_p([1, 5]), _p([1, 11]))
    ex["motivating"] = WorkedExample(
        "motivating", "single real zero, square of one factor",
        N, D, _tf(_p([1, -1], [1, 11]), _p([1, 7], [1, 5])),
        adjusted_a=(12.0, 17.38477631085), adjusted_m=(2,),
        controller=_tf([-4.769552, -106.234631, -509.934342],
                       [1.0, 45.769553, 684.695526, 3324.534921]),
    )

    ex["4"] = WorkedExample(
        "4", "relative degree 1, complex zero pair",
        _tf(_p([1, -3, 7]), _p([1, 4, 8], [1, 11])),
        _tf(_p([1, -2], [1, -3]), _p([1, 3], [1, 11])),
        _tf(_p([1, -3, 7], [1, 3]), _p([1, 4, 8], [1, -2], [1, -3])),
        initial_a=(10, 37, 82, 145), initial_m=(-27.9055, 63.4279),
        adjusted_a=(1.000000000, 8.565360692, 12.05378853, 178.9280213), adjusted_m=(-7, 4),
    )

    ex["5"] = WorkedExample(
        "5", "relative degree 0, one real zero",
        _tf(_p([1, -3]), _p([1, 3])),
        _tf(_p([1, -4], [1, -5]), _p([1, 2], [1, 3])),
        _tf(_p([1, -3], [1, 2]), _p([1, -4], [1, -5])),
        initial_a=(1, 17), initial_m=(1.68261,),
        adjusted_a=(1.000000000, 57.00000000), adjusted_m=(1,),
    )

    ex["6"] = WorkedExample(
        "6", "relative degree 1, no RHP zeros",
        _tf(_p([1, 1]), _p([1, 1, 5])),
        _tf(_p([1, -1, 5]), _p([1, 1, 5])),
        _tf(_p([1, 1]), _p([1, -1, 5])),
        controller=_tf([2.0, 0.0], [1.0, 1.0]),
    )

    ex["7"] = WorkedExample(
        "7", "relative degree 1, complex zero pair",
        _tf(_p([1, -2, 5]), _p([1, 2.5], [1, 2, 5])),
        _tf(_p([1, -2.5]), _p([1, 2.5])),
        _tf(_p([1, -2, 5]), _p([1, -2.5], [1, 2, 5])),
        initial_a=(5, 101, 226, 901), initial_m=(5.8606, -11.4661),
        adjusted_a=(1.000000000, 12.65454035, 14.62249082, 132.6597271), adjusted_m=(3, -2),
    )

    ex["8"] = WorkedExample(
        "8", "double real zero",
        _tf(_p([1, -2], [1, -2]), _p([1, 6], [1, 3], [1, 4])),
        _tf(_p([1, -3], [1, -4]), _p([1, 3], [1, 4])),
        _tf(_p([1, -2], [1, -2]), _p([1, 6], [1, -3], [1, -4])),
        initial_a=(5, 101, 226, 901), initial_m=(-14.7788, 30.8386),
        adjusted_a=(1.000000000, 9.207908073, 12.31517239, 261.8400886), adjusted_m=(-9, 5),
    )

    num9 = _p([1, -4, 40], [1, -4, 40])
    ex["9"] = WorkedExample(
        "9", "double complex zero pair",
        _tf(num9, _p([1, 2], [1, 6], [1, 8], [1, 10], [1, 4])),
        _tf(_p([1, -4]), _p([1, 4])),
        _tf(num9, _p([1, 2], [1, 6], [1, 8], [1, 10], [1, -4])),
        initial_a=(1.01, 1.09, 1.81, 8.29, 66.61, 577, 5185, 46657),
        initial_m=(186.9702, -2.7053, 5.4911, -5.0108),
        adjusted_a=(1.000000000, 3.125685736, 3.020123314, 11.00083916,
                    13.14342623, 67.80945410, 383.9773935, 77.84899459),
        adjusted_m=(12, -7, 5, 3),
    )

    ex["10"] = WorkedExample(
        "10", "relative degree 2, no RHP zeros",
        _tf(_p([1, 1]), _p([1, 1, 7], [1, 3])),
        _tf(_p([1, -1, 4]), _p([1, 1, 7])),
        _tf(_p([1, 1]), _p([1, -1, 4], [1, 3])),
        M=3.0, controller=_tf([7.0, -5.0], [1.0, 1.0]),
    )

    ex["11"] = WorkedExample(
        "11", "relative degree 2, two real zeros",
        _tf(_p([1, -5], [1, -2]), _p([1, 3], [1, 4], [1, 2.5], [1, 1.5])),
        _tf(_p([1, -7, 12]), _p([1, 7, 12])),
        _tf(_p([1, -5], [1, -2]), _p([1, -3], [1, -4], [1, 2.5], [1, 1.5])),
        M=15.0,
        initial_a=(2, 10, 82, 730, 6562, 57601), initial_m=(-4.4306, 2.7321, -0.0340),
        adjusted_a=(1.000000000, 8.488509423, 9.252626592, 94.36909940, 405.8562852, 102.8329410),
        adjusted_m=(-5, 4, 1),
    )

    ex["13"] = WorkedExample(
        "13", "relative degree 2, double complex zero pair",
        _tf(num9, _p([1, 4], [1, 2], [1, 6], [1, 8], [1, 10], [1, 12])),
        _tf(_p([1, -4]), _p([1, 4])),
        _tf(num9, _p([1, -4], [1, 2], [1, 6], [1, 8], [1, 10], [1, 12])),
        M=9.0,
        initial_a=(1, 5, 17, 37, 65, 101, 145, 197, 257, 325),
        initial_m=(3.6973, -38.9268, 319.3825, -601.2791, 301.9484),
        adjusted_a=(1.000006671, 2.936514430, 2.664991202, 241.2744419, 12.86646544,
                    78.89989125, 64.17384002, 210.3103283, 221.8268170, 689.1918246),
        adjusted_m=(12, -7, 13, -1, 2),
    )
    return ex


EXAMPLES: dict[str, WorkedExample] = _build()

#: Keys of the examples that yield a controller.
DESIGN_KEYS = ("motivating", "4", "5", "6", "7", "8", "9", "10", "11", "13")
#: Keys with a parameter table.
TABLE_KEYS = ("5", "4", "7", "8", "9", "11", "13")


@dataclass(frozen=True)
class LargeExponentExample:
    """Plant and data for the asymptotic separation predictor."""

    plant: RationalTF
    N: RationalTF
    D: RationalTF
    centers: tuple
    targets: tuple
    x: tuple
    eps: tuple
    achieved_m: tuple
    refined_eps: tuple

    def factorization(self) -> CoprimeFactorization:
        return factorization_from_pair(self.N, self.D, self.plant)


def _large() -> LargeExponentExample:
    zn = _p([1, -4.1, 5.9], [1, -2.6, 5.3])
    lhp = _p([1, 4.1, 5.9], [1, 2.6, 5.3])
    return LargeExponentExample(
        plant=RationalTF(zn, _p([1, -5.8]) * lhp),
        N=RationalTF(zn, _p([1, 5.8]) * lhp),
        D=_tf(_p([1, -5.8]), _p([1, 5.8])),
        centers=(2.0, 4.0, 8.0, 16.0),
        targets=(6000, 32000, 75000, 65000),
        x=(598.6609674630, -3220.323300969, 7469.405659544, -6450.310943517),
        eps=(0.049888413955255, -0.050317551577652, 0.049796037730294, -0.049617776488599),
        achieved_m=(5995.358742, 31978.54572, 74958.13240, 64968.66745),
        refined_eps=(0.049849885843271, -0.050283869393989, 0.049768282530780, -0.049593895055261),
    )


LARGE_EXPONENT = _large()
