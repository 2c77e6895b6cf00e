"""Real-coefficient polynomials and rational functions of the Laplace variable.

Coefficients are stored highest degree first everywhere, matching
``numpy.polyval``.  All values are immutable once built.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import RootFindingError

#: Relative tolerance for snapping nearly-real roots onto the real axis and
#: for pairing complex conjugates.
PAIR_TOL = 1e-9

#: A root counts as RHP (extended right half plane) iff ``re >= -RHP_TOL``.
RHP_TOL = 1e-9

#: Default relative tolerance for numeric pole-zero cancellation.
CANCEL_TOL = 1e-4


def _as_coeffs(coeffs) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(coeffs, dtype=float)).ravel()
    if arr.size == 0:
        return np.zeros(1)
    if not np.all(np.isfinite(arr)):
        raise ValueError("polynomial coefficients must be finite")
    nz = np.flatnonzero(arr)
    if nz.size == 0:
        return np.zeros(1)
    return arr[nz[0]:].copy()


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Polynomial with real coefficients, highest degree first.

    Leading zeros are trimmed on construction; the zero polynomial is ``[0.]``.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        arr = _as_coeffs(self.coeffs)
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def constant(cls, value: float) -> "Polynomial":
        return cls([value])

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def lead(self) -> float:
        return float(self.coeffs[0])

    def is_zero(self) -> bool:
        return self.coeffs.size == 1 and self.coeffs[0] == 0.0

    def __call__(self, s):
        return poly_eval(self, s)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(np.polyadd(self.coeffs, other.coeffs))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(np.polysub(self.coeffs, other.coeffs))

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return Polynomial(np.polymul(self.coeffs, other.coeffs))
        return Polynomial(self.coeffs * float(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Polynomial":
        return Polynomial(-self.coeffs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def monic(self) -> "Polynomial":
        return Polynomial(self.coeffs / self.coeffs[0])

    def roots(self) -> np.ndarray:
        return poly_roots(self)

    def allclose(self, other: "Polynomial", rtol=1e-9, atol=0.0) -> bool:
        if self.degree != other.degree:
            return False
        return np.allclose(self.coeffs, other.coeffs, rtol=rtol, atol=atol)

    def __repr__(self):
        return f"Polynomial({self.coeffs.tolist()!r})"


def poly_eval(p: Polynomial, s):
    """Evaluate ``p`` at ``s`` (scalar or array) by Horner's scheme."""
    c = p.coeffs
    if c.size == 1:
        return c[0] + 0 * s
    acc = 0
    for coef in c:
        acc = acc * s + coef
    return acc


def snap_real(r: complex, tol: float = PAIR_TOL) -> complex:
    if abs(r.imag) < tol * (1.0 + abs(r.real)):
        return complex(r.real, 0.0)
    return r


def _symmetrize(roots: np.ndarray, tol: float) -> np.ndarray:
    """Snap near-real roots and make complex roots exact conjugate pairs."""
    roots = np.array([snap_real(complex(r), tol) for r in roots], dtype=complex)
    upper = [i for i, r in enumerate(roots) if r.imag > 0]
    lower = [i for i, r in enumerate(roots) if r.imag < 0]
    used = set()
    for i in upper:
        best, best_d = None, np.inf
        for j in lower:
            if j in used:
                continue
            d = abs(roots[j] - np.conj(roots[i]))
            if d < best_d:
                best, best_d = j, d
        if best is None:
            continue
        used.add(best)
        avg = 0.5 * (roots[i] + np.conj(roots[best]))
        roots[i], roots[best] = avg, np.conj(avg)
    return roots


def poly_roots(p: Polynomial, tol: float = PAIR_TOL) -> np.ndarray:
    """All roots of ``p`` from the eigenvalues of its balanced companion matrix.

    Roots whose imaginary part is below ``tol * (1 + |re|)`` are snapped to
    the real axis and complex roots are returned as exact conjugate pairs.
    """
    if p.degree < 1:
        raise ValueError("poly_roots needs degree >= 1")
    c = p.coeffs / p.coeffs[0]
    n = p.degree
    # zero roots are exact; strip them before the companion solve
    n_zero = 0
    while c[-1 - n_zero] == 0.0 and n_zero < n:
        n_zero += 1
    c = c[: c.size - n_zero]
    if c.size > 1:
        comp = np.zeros((c.size - 1, c.size - 1))
        comp[0, :] = -c[1:]
        comp[1:, :-1] = np.eye(c.size - 2)
        try:
            vals = np.linalg.eigvals(comp)
        except np.linalg.LinAlgError as exc:
            raise RootFindingError(f"companion eigenvalue solve failed: {exc}") from exc
    else:
        vals = np.zeros(0, dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise RootFindingError("non-finite roots from companion matrix")
    vals = np.concatenate([vals.astype(complex), np.zeros(n_zero, dtype=complex)])
    return _symmetrize(vals, tol)


def poly_from_roots(roots: Iterable[complex], leading: float = 1.0,
                    tol: float = PAIR_TOL) -> Polynomial:
    """Real polynomial ``leading * prod(s - r)``.

    Non-real roots must come in conjugate pairs (relative tolerance ``tol``).
    """
    roots = [snap_real(complex(r), tol) for r in roots]
    reals = [r.real for r in roots if r.imag == 0.0]
    upper = sorted((r for r in roots if r.imag > 0), key=lambda r: (r.real, r.imag))
    lower = [r for r in roots if r.imag < 0]
    pairs = []
    for r in upper:
        match = None
        for j, w in enumerate(lower):
            if abs(w - r.conjugate()) <= tol * (1.0 + abs(r)):
                match = j
                break
        if match is None:
            raise ValueError(f"complex root {r} has no conjugate partner")
        pairs.append(0.5 * (r + lower.pop(match).conjugate()))
    if lower:
        raise ValueError(f"complex root {lower[0]} has no conjugate partner")
    coeffs = np.array([float(leading)])
    for r in reals:
        coeffs = np.convolve(coeffs, [1.0, -r])
    for r in pairs:
        coeffs = np.convolve(coeffs, [1.0, -2.0 * r.real, abs(r) ** 2])
    return Polynomial(coeffs)


def poly_power_of_linear(root: float, power: int) -> np.ndarray:
    """Coefficients of ``(s - root)**power`` by repeated multiplication."""
    c = np.array([1.0])
    for _ in range(power):
        c = np.convolve(c, [1.0, -root])
    return c


@dataclass(frozen=True, eq=False)
class RationalTF:
    """Ratio ``num(s) / den(s)`` of real polynomials."""

    num: Polynomial
    den: Polynomial = field(default_factory=lambda: Polynomial([1.0]))

    def __post_init__(self):
        if not isinstance(self.num, Polynomial):
            object.__setattr__(self, "num", Polynomial(self.num))
        if not isinstance(self.den, Polynomial):
            object.__setattr__(self, "den", Polynomial(self.den))
        if self.den.is_zero():
            raise ZeroDivisionError("denominator is the zero polynomial")

    @classmethod
    def from_coeffs(cls, num: Sequence[float], den: Sequence[float]) -> "RationalTF":
        return cls(Polynomial(num), Polynomial(den))

    @classmethod
    def from_zpk(cls, zeros, poles, gain: float) -> "RationalTF":
        return cls(poly_from_roots(zeros, gain), poly_from_roots(poles, 1.0))

    @property
    def relative_degree(self) -> int:
        if self.num.is_zero():
            return self.den.degree  # conventionally "fully strictly proper"
        return self.den.degree - self.num.degree

    def is_proper(self) -> bool:
        return self.relative_degree >= 0

    def is_biproper(self) -> bool:
        return not self.num.is_zero() and self.relative_degree == 0

    def __call__(self, s):
        return poly_eval(self.num, s) / poly_eval(self.den, s)

    def zeros(self) -> np.ndarray:
        if self.num.degree < 1:
            return np.zeros(0, dtype=complex)
        return poly_roots(self.num)

    def poles(self) -> np.ndarray:
        if self.den.degree < 1:
            return np.zeros(0, dtype=complex)
        return poly_roots(self.den)

    def monic(self) -> tuple[float, "RationalTF"]:
        """Return ``(gain, tf)`` with both polynomials of ``tf`` monic."""
        gain = self.num.lead / self.den.lead
        return gain, RationalTF(self.num.monic(), self.den.monic())

    def normalized(self) -> "RationalTF":
        """Same function with a monic denominator."""
        d = self.den.lead
        return RationalTF(Polynomial(self.num.coeffs / d), Polynomial(self.den.coeffs / d))

    def dc_gain(self) -> float:
        return float(np.real(self(0.0)))

    def __add__(self, other):
        return rf_add(self, _lift(other))

    def __radd__(self, other):
        return rf_add(_lift(other), self)

    def __sub__(self, other):
        return rf_sub(self, _lift(other))

    def __rsub__(self, other):
        return rf_sub(_lift(other), self)

    def __mul__(self, other):
        return rf_mul(self, _lift(other))

    __rmul__ = __mul__

    def __neg__(self):
        return RationalTF(-self.num, self.den)

    def __repr__(self):
        return f"RationalTF(num={self.num.coeffs.tolist()!r}, den={self.den.coeffs.tolist()!r})"


def _lift(x) -> RationalTF:
    if isinstance(x, RationalTF):
        return x
    if isinstance(x, Polynomial):
        return RationalTF(x)
    return RationalTF(Polynomial([float(x)]))


def rf_add(x: RationalTF, y: RationalTF) -> RationalTF:
    num = x.num * y.den + y.num * x.den
    return RationalTF(num, x.den * y.den)


def rf_sub(x: RationalTF, y: RationalTF) -> RationalTF:
    num = x.num * y.den - y.num * x.den
    return RationalTF(num, x.den * y.den)


def rf_mul(x: RationalTF, y: RationalTF) -> RationalTF:
    return RationalTF(x.num * y.num, x.den * y.den)


def match_roots(a: Sequence[complex], b: Sequence[complex], tol: float) -> list[tuple[int, int]]:
    """Greedy nearest-pair matching of ``a`` against ``b``.

    A pair qualifies when ``|a_i - b_j| <= tol * (1 + |b_j|)``.  Pairs are
    accepted in order of increasing distance, each root used at most once.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.size == 0 or b.size == 0:
        return []
    dist = np.abs(a[:, None] - b[None, :])
    ok = dist <= tol * (1.0 + np.abs(b))[None, :]
    cand = sorted(zip(*np.nonzero(ok)), key=lambda ij: dist[ij])
    used_a, used_b, pairs = set(), set(), []
    for i, j in cand:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append((int(i), int(j)))
    return pairs


def _close_under_conjugation(roots: list[complex], tol: float) -> list[complex]:
    """Make a root list conjugate-closed; unpaired near-real roots go real."""
    out = []
    pending = [complex(r) for r in roots]
    while pending:
        r = pending.pop(0)
        if r.imag == 0.0:
            out.append(r)
            continue
        j = min(range(len(pending)), key=lambda k: abs(pending[k] - r.conjugate()),
                default=None)
        if j is not None and abs(pending[j] - r.conjugate()) <= max(tol, PAIR_TOL) * (1 + abs(r)):
            w = pending.pop(j)
            avg = 0.5 * (r + w.conjugate())
            out.extend([avg, avg.conjugate()])
        else:
            out.append(complex(r.real, 0.0))
    return out


def rf_cancel(x: RationalTF, tol: float = CANCEL_TOL) -> RationalTF:
    """Numeric minimal realization by cancelling near-coincident roots.

    Every numerator root within ``tol * (1 + |p|)`` of a denominator root
    ``p`` is cancelled against it, nearest pairs first.  The result is rebuilt
    from the surviving roots and the ratio of leading coefficients.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if x.num.is_zero() or x.num.degree < 1 or x.den.degree < 1:
        return x
    zs = list(x.zeros())
    ps = list(x.poles())
    pairs = match_roots(zs, ps, tol)
    if not pairs:
        return x
    drop_z = {i for i, _ in pairs}
    drop_p = {j for _, j in pairs}
    zs = _close_under_conjugation([z for i, z in enumerate(zs) if i not in drop_z], tol)
    ps = _close_under_conjugation([p for j, p in enumerate(ps) if j not in drop_p], tol)
    gain = x.num.lead / x.den.lead
    return RationalTF(poly_from_roots(zs, gain, tol=max(tol, PAIR_TOL)),
                      poly_from_roots(ps, 1.0, tol=max(tol, PAIR_TOL)))


def rf_inv_s_coefficient(x: RationalTF) -> float:
    """Coefficient of ``1/s`` in the large-``s`` expansion of a biproper ``x``.

    With ``x`` monic-normalized as ``(s^p + b1 s^(p-1) + ...)/(s^p + c1 s^(p-1) + ...)``
    this is ``b1 - c1``.
    """
    if not x.is_biproper():
        raise ValueError("rf_inv_s_coefficient needs a biproper rational function")
    if x.num.degree == 0:
        return 0.0
    b1 = x.num.coeffs[1] / x.num.coeffs[0]
    c1 = x.den.coeffs[1] / x.den.coeffs[0]
    return float(b1 - c1)


def is_rhp(r: complex, tol: float = RHP_TOL) -> bool:
    return complex(r).real >= -tol
