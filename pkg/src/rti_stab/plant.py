"""Plant analysis: pole/zero classification, parity interlacing, coprime factors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ImproperPlantError, PIPViolationError
from .ratfun import RHP_TOL, RationalTF, is_rhp, poly_from_roots

#: Roots closer than this (relative) are treated as one repeated root.
CLUSTER_TOL = 1e-6


def cluster_roots(roots: Sequence[complex], rtol: float = CLUSTER_TOL) -> list[tuple[complex, int]]:
    """Group nearly-equal roots into ``(mean, multiplicity)`` pairs."""
    clusters: list[list[complex]] = []
    for r in sorted((complex(x) for x in roots), key=lambda z: (z.real, z.imag)):
        for cl in clusters:
            center = sum(cl) / len(cl)
            if abs(r - center) <= rtol * (1.0 + abs(center)):
                cl.append(r)
                break
        else:
            clusters.append([r])
    out = []
    for cl in clusters:
        mean = sum(cl) / len(cl)
        if all(c.imag == 0.0 for c in cl):
            mean = complex(mean.real, 0.0)
        out.append((mean, len(cl)))
    # conjugate clusters must stay exact mirror images
    for i, (m, mu) in enumerate(out):
        if m.imag < 0:
            mates = [(abs(u - m.conjugate()), u) for u, nu in out if u.imag > 0 and nu == mu]
            if mates:
                out[i] = (min(mates, key=lambda t: t[0])[1].conjugate(), mu)
    return out


def _expand(groups: Sequence[tuple[complex, int]]) -> list[complex]:
    return [z for z, mu in groups for _ in range(mu)]


def _is_real(z: complex) -> bool:
    return complex(z).imag == 0.0


@dataclass(frozen=True)
class PoleZeroData:
    zeros: tuple
    poles: tuple
    gain: float
    relative_degree: int
    rhp_zeros: tuple
    rhp_poles: tuple

    @property
    def lhp_zeros(self) -> list[complex]:
        return [z for z in self.zeros if not is_rhp(z)]

    @property
    def lhp_poles(self) -> list[complex]:
        return [p for p in self.poles if not is_rhp(p)]


@dataclass(frozen=True)
class PipReport:
    satisfied: bool
    witness: tuple | None
    real_rhp_zero_list: tuple
    pole_counts_between: tuple


def analyze(P: RationalTF) -> PoleZeroData:
    """Classify roots of ``P`` and cluster repeated ones."""
    k = P.relative_degree
    if P.num.is_zero():
        raise ValueError("plant numerator is identically zero")
    if k < 0:
        raise ImproperPlantError("relative degree negative")
    zg = cluster_roots(P.zeros())
    pg = cluster_roots(P.poles())
    return PoleZeroData(
        zeros=tuple(_expand(zg)),
        poles=tuple(_expand(pg)),
        gain=P.num.lead / P.den.lead,
        relative_degree=k,
        rhp_zeros=tuple((z, mu) for z, mu in zg if is_rhp(z)),
        rhp_poles=tuple((p, mu) for p, mu in pg if is_rhp(p)),
    )


def _real_nonneg(values, tol=RHP_TOL):
    return sorted(v.real for v in values if _is_real(v) and v.real >= -tol)


def check_pip(pz: PoleZeroData) -> PipReport:
    """Parity interlacing: even count of real positive poles between real
    non-negative zeros, with a zero at infinity when strictly proper."""
    zs = _real_nonneg(pz.zeros)
    if pz.relative_degree > 0:
        zs.append(math.inf)
    pos_poles = [p.real for p in pz.poles if _is_real(p) and p.real > RHP_TOL]
    counts = []
    witness = None
    for lo, hi in zip(zs[:-1], zs[1:]):
        c = sum(1 for p in pos_poles if lo < p < hi)
        counts.append(c)
        if c % 2 and witness is None:
            witness = (lo, hi)
    return PipReport(
        satisfied=witness is None,
        witness=witness,
        real_rhp_zero_list=tuple(zs),
        pole_counts_between=tuple(counts),
    )


def sign_rule_applies(pz: PoleZeroData) -> bool:
    """True when D must tend to -1: biproper plant, at least one real RHP
    zero, and an odd number of real poles right of the rightmost one."""
    if pz.relative_degree != 0:
        return False
    real_z = _real_nonneg(pz.zeros)
    if not real_z:
        return False
    rightmost = real_z[-1]
    q_p = sum(1 for p in pz.poles if _is_real(p) and p.real > rightmost)
    return q_p % 2 == 1


@dataclass(frozen=True)
class CoprimeFactorization:
    """``P = N / D`` with ``N``, ``D`` stable and proper, ``D`` biproper.

    Root lists of both factors are kept alongside the polynomials so that
    ``D`` and its log-derivatives can be evaluated without re-rooting.
    """

    N: RationalTF
    D: RationalTF
    sign_flipped: bool
    q: int
    zero_groups: tuple
    relative_degree: int
    n_zeros: tuple
    n_poles: tuple
    n_gain: float
    d_zeros: tuple
    d_poles: tuple
    d_gain: float
    plant: RationalTF
    certified: bool = True
    pip: PipReport | None = field(default=None, compare=False)

    def d_value(self, s: complex) -> complex:
        v = complex(self.d_gain)
        for r in self.d_zeros:
            v *= s - r
        for p in self.d_poles:
            v /= s - p
        return v

    def d_log_derivative(self, s: complex, j: int) -> complex:
        """``j``-th derivative (``j >= 1``) of ``ln D`` at ``s``."""
        c = (-1) ** (j - 1) * math.factorial(j - 1)
        acc = 0j
        for r in self.d_zeros:
            acc += c / (s - r) ** j
        for p in self.d_poles:
            acc -= c / (s - p) ** j
        return acc

    @property
    def rhp_zeros(self) -> list[complex]:
        """Finite RHP zeros of ``N`` with multiplicity, conjugates included."""
        out = []
        for z, mu in self.zero_groups:
            out.extend([z] * mu)
            if not _is_real(z):
                out.extend([z.conjugate()] * mu)
        return out

    @property
    def inv_s_coefficient(self) -> float:
        """``b1 - c1`` of the monic-normalized ``D``."""
        return float(sum(-r for r in self.d_zeros).real - sum(-p for p in self.d_poles).real)


def _zero_groups(rhp: Sequence[complex]) -> tuple:
    groups = [(z, mu) for z, mu in cluster_roots(rhp) if z.imag >= 0]
    groups = [(complex(z.real, 0.0) if z.imag == 0 else z, mu) for z, mu in groups]
    return tuple(sorted(groups, key=lambda g: (g[0].real, g[0].imag)))


def default_padding_root(pz: PoleZeroData) -> float:
    """Padding pole location ``-c`` with ``c = ceil(1 + max |re|)`` over the plant roots."""
    res = [abs(r.real) for r in (*pz.zeros, *pz.poles)]
    x = 1.0 + max(res, default=0.0)
    # root-finding noise must not push an integer bound up by one
    return -float(math.ceil(x - 1e-9 * x))


def _movable_units(lhp_zeros: Sequence[complex]) -> list[list[complex]]:
    reals = sorted((z for z in lhp_zeros if _is_real(z)), key=abs)
    cplx = sorted((z for z in lhp_zeros if z.imag > 0), key=abs)
    return [[z] for z in reals] + [[z, z.conjugate()] for z in cplx]


def coprime_factorize(P: RationalTF, padding: Sequence[complex] | None = None,
                      force: bool = False) -> CoprimeFactorization:
    """Coprime factorization of a proper plant.

    ``N`` keeps the RHP zeros and takes the LHP poles of ``P``; ``D`` takes the
    RHP poles as zeros and as many LHP zeros of ``P`` as poles as its degree
    allows.  The remaining degree of ``D``'s denominator is filled with
    padding roots, shared with ``N``'s denominator.  A caller-supplied
    ``padding`` may instead fill the whole denominator, in which case no LHP
    zeros move.  Both factors are negated
    when :func:`sign_rule_applies`.

    With ``force=True`` a PIP violation does not raise; the result is marked
    ``certified=False``.
    """
    pz = analyze(P)
    report = check_pip(pz)
    if not report.satisfied and not force:
        raise PIPViolationError(report)

    rhp_z = [z for z in pz.zeros if is_rhp(z)]
    rhp_p = [p for p in pz.poles if is_rhp(p)]
    lhp_z = pz.lhp_zeros
    lhp_p = pz.lhp_poles

    room = len(rhp_p)
    moved: list[complex] = []
    # a full-length padding list keeps every LHP zero in N
    if padding is None or len(padding) != room:
        for unit in _movable_units(lhp_z):
            if len(unit) <= room - len(moved):
                moved.extend(unit)
    kept = list(lhp_z)
    for z in moved:
        kept.pop(int(np.argmin([abs(w - z) for w in kept])))
    n_pad = room - len(moved)
    if padding is None:
        pad = [complex(default_padding_root(pz))] * n_pad
    else:
        pad = [complex(p) for p in padding]
        if len(pad) != n_pad:
            raise ValueError(f"expected {n_pad} or {room} padding roots, got {len(pad)}")
        if any(p.real >= 0 for p in pad):
            raise ValueError("padding roots must lie in the open left half plane")

    flip = sign_rule_applies(pz)
    sgn = -1.0 if flip else 1.0
    n_zeros = tuple(rhp_z + kept)
    n_poles = tuple(lhp_p + pad)
    d_zeros = tuple(rhp_p)
    d_poles = tuple(moved + pad)
    n_gain = sgn * pz.gain
    d_gain = sgn
    N = RationalTF(poly_from_roots(n_zeros, n_gain), poly_from_roots(n_poles))
    D = RationalTF(poly_from_roots(d_zeros, d_gain), poly_from_roots(d_poles))
    return CoprimeFactorization(
        N=N, D=D, sign_flipped=flip, q=len(rhp_z),
        zero_groups=_zero_groups(rhp_z), relative_degree=pz.relative_degree,
        n_zeros=n_zeros, n_poles=n_poles, n_gain=n_gain,
        d_zeros=d_zeros, d_poles=d_poles, d_gain=d_gain,
        plant=P, certified=report.satisfied, pip=report,
    )


def factorization_from_pair(N: RationalTF, D: RationalTF,
                            plant: RationalTF | None = None) -> CoprimeFactorization:
    """Wrap a caller-supplied ``(N, D)`` pair, e.g. one quoted from a worked example.

    Checks that both factors are stable and proper and that ``D`` is biproper.
    """
    if not D.is_biproper():
        raise ValueError("D must be biproper")
    if N.relative_degree < 0:
        raise ValueError("N must be proper")
    nz = cluster_roots(N.zeros())
    n_zeros = tuple(_expand(nz))
    n_poles = tuple(_expand(cluster_roots(N.poles())))
    d_zeros = tuple(_expand(cluster_roots(D.zeros())))
    d_poles = tuple(_expand(cluster_roots(D.poles())))
    if any(is_rhp(p) for p in (*n_poles, *d_poles)):
        raise ValueError("N and D must be stable")
    n_gain = N.num.lead / N.den.lead
    d_gain = D.num.lead / D.den.lead
    if plant is None:
        from .ratfun import rf_cancel
        plant = rf_cancel(RationalTF(N.num * D.den, N.den * D.num), 1e-8)
    rhp_z = [z for z in n_zeros if is_rhp(z)]
    pz = analyze(plant)
    return CoprimeFactorization(
        N=N, D=D, sign_flipped=d_gain < 0, q=len(rhp_z),
        zero_groups=_zero_groups(rhp_z), relative_degree=N.relative_degree,
        n_zeros=n_zeros, n_poles=n_poles, n_gain=n_gain,
        d_zeros=d_zeros, d_poles=d_poles, d_gain=d_gain,
        plant=plant, certified=check_pip(pz).satisfied, pip=check_pip(pz),
    )
