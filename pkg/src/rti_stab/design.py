"""The product-of-powers unit U(s) and the linear systems fixing its exponents.

U(s) = [(s + shift)/(s + M)] * prod_k ((s + a_{2k-1}) / (s + a_{2k}))**m_k

The bracketed premultiplier is present only for relative degree two.  For
fixed positive parameters the interpolation conditions U = D at the finite
RHP zeros of N (plus derivative conditions for repeated zeros) are linear in
the exponents after taking logarithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import LogDomainError, SingularSystemError
from .plant import CoprimeFactorization

#: Interpolation matrices with a larger 2-norm condition number are rejected.
COND_LIMIT = 1e12


@dataclass(frozen=True)
class FactorPair:
    """One factor ``((s + a_num) / (s + a_den))**m``."""

    a_num: float
    a_den: float
    m: float

    def __post_init__(self):
        if not (self.a_num > 0 and self.a_den > 0):
            raise ValueError("factor parameters must be strictly positive")

    def log_f(self, s: complex) -> complex:
        # log1p keeps precision when a_num ~ a_den
        return np.log1p((self.a_num - self.a_den) / (s + self.a_den))


@dataclass(frozen=True)
class Premultiplier:
    """``(s + shift) / (s + M)``, used for relative degree two."""

    shift: float
    M: float

    def __post_init__(self):
        if not (self.shift > 0 and self.M > 0):
            raise ValueError("premultiplier needs shift > 0 and M > 0")

    def value(self, s):
        return (s + self.shift) / (s + self.M)

    def log_value(self, s) -> complex:
        return np.log1p((self.shift - self.M) / (s + self.M))

    def log_derivative(self, s, j: int) -> complex:
        c = (-1) ** (j - 1) * math.factorial(j - 1)
        return c * ((s + self.shift) ** -j - (s + self.M) ** -j)


@dataclass(frozen=True)
class UProduct:
    factors: tuple = ()
    premultiplier: Premultiplier | None = None
    integerized: bool = False

    def __post_init__(self):
        if self.integerized:
            for f in self.factors:
                if f.m != round(f.m) or abs(f.m) > 1e6:
                    raise ValueError(f"non-integer or oversized exponent {f.m}")

    @classmethod
    def from_params(cls, a: Sequence[float], m: Sequence[float],
                    premultiplier: Premultiplier | None = None,
                    integerized: bool = False) -> "UProduct":
        a = np.asarray(a, dtype=float)
        if a.size != 2 * len(m):
            raise ValueError("need two parameters per exponent")
        pairs = tuple(FactorPair(float(a[2 * k]), float(a[2 * k + 1]), float(mk))
                      for k, mk in enumerate(m))
        return cls(pairs, premultiplier, integerized)

    @property
    def params(self) -> np.ndarray:
        return np.array([v for f in self.factors for v in (f.a_num, f.a_den)])

    @property
    def exponents(self) -> np.ndarray:
        return np.array([f.m for f in self.factors])

    def log_derivative(self, s: complex, j: int) -> complex:
        """``j``-th derivative (``j >= 1``) of ``ln U`` at ``s``."""
        c = (-1) ** (j - 1) * math.factorial(j - 1)
        acc = 0j
        for f in self.factors:
            acc += f.m * c * ((s + f.a_num) ** -j - (s + f.a_den) ** -j)
        if self.premultiplier is not None:
            acc += self.premultiplier.log_derivative(s, j)
        return acc


def u_eval(U: UProduct, s: complex) -> complex:
    """Value of ``U`` at ``s`` on the principal branch."""
    s = complex(s)
    out = 1.0 + 0j
    log_sum = 0j
    for f in U.factors:
        if s == -f.a_den or s == -f.a_num:
            raise ZeroDivisionError(f"s = {s} is a pole or zero of a factor")
        if U.integerized:
            out *= ((s + f.a_num) / (s + f.a_den)) ** int(f.m)
        else:
            # one exp of the summed logs: single factors may overflow
            log_sum += f.m * f.log_f(s)
    if log_sum:
        out *= np.exp(log_sum)
    if U.premultiplier is not None:
        if s == -U.premultiplier.M:
            raise ZeroDivisionError(f"s = {s} is the premultiplier pole")
        out *= U.premultiplier.value(s)
    return complex(out)


@dataclass(frozen=True)
class InterpolationSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    row_tags: tuple = field(default=())

    @property
    def size(self) -> int:
        return self.rhs.size


def choose_M(cf: CoprimeFactorization) -> float:
    """Smallest convenient ``M`` with ``b1 - c1 + M > 0``."""
    return float(max(1, math.ceil(abs(cf.inv_s_coefficient)) + 1))


def premultiplier_for(cf: CoprimeFactorization, M: float | None = None) -> Premultiplier:
    if M is None:
        M = choose_M(cf)
    shift = cf.inv_s_coefficient + M
    if shift <= 0:
        raise ValueError(f"M = {M} gives a non-positive premultiplier shift {shift}")
    return Premultiplier(shift, float(M))


def n_factors(cf: CoprimeFactorization) -> int:
    """Number of factor pairs ``r`` the ansatz needs for this plant."""
    return cf.q + (1 if cf.relative_degree == 2 else 0)


def default_initial_a(n: int) -> np.ndarray:
    """Ascending, widely spread starting parameters ``1 + 9**(k-1)/100``."""
    return 1.0 + 9.0 ** np.arange(n) / 100.0


def _log_d(cf: CoprimeFactorization, z: complex) -> complex:
    dz = cf.d_value(z)
    if z.imag == 0.0:
        if abs(dz.imag) > 1e-12 * (1 + abs(dz)) or dz.real <= 0:
            raise LogDomainError(
                f"log of non-positive value: PIP/sign-rule violated (D({z.real:g}) = {dz.real:g})")
        return complex(math.log(dz.real), 0.0)
    return complex(np.log(dz))


def build_system(cf: CoprimeFactorization, a: Sequence[float], M: float | None = None,
                 check_conditioning: bool = True) -> InterpolationSystem:
    """Assemble the real linear system for the exponents at parameters ``a``.

    One row per real zero and two (real and imaginary parts) per complex
    zero, with derivative rows for repeated zeros.  Relative degree two adds
    the premultiplier terms and the row ``sum m_k (a_{2k-1} - a_{2k}) = 0``.
    """
    a = np.asarray(a, dtype=float)
    r = n_factors(cf)
    if a.size != 2 * r:
        raise ValueError(f"expected {2 * r} parameters, got {a.size}")
    if np.any(a <= 0) or not np.all(np.isfinite(a)):
        raise ValueError("parameters must be finite and strictly positive")
    if r == 0:
        return InterpolationSystem(np.zeros((0, 0)), np.zeros(0), ())
    a_num, a_den = a[0::2], a[1::2]
    pre = premultiplier_for(cf, M) if cf.relative_degree == 2 else None

    rows, rhs, tags = [], [], []
    for gi, (z, mu) in enumerate(cf.zero_groups):
        for j in range(mu):
            if j == 0:
                row = np.log1p((a_num - a_den) / (z + a_den))
                b = _log_d(cf, z)
                if pre is not None:
                    b -= pre.log_value(z)
                kind = "value"
            else:
                c = (-1) ** (j - 1) * math.factorial(j - 1)
                row = c * ((z + a_num) ** -j - (z + a_den) ** -j)
                b = cf.d_log_derivative(z, j)
                if pre is not None:
                    b -= pre.log_derivative(z, j)
                kind = f"deriv{j}"
            row = np.asarray(row, dtype=complex)
            if z.imag == 0.0:
                rows.append(row.real)
                rhs.append(b.real)
                tags.append(f"{kind}@z{gi}")
            else:
                rows += [row.real, row.imag]
                rhs += [b.real, b.imag]
                tags += [f"re:{kind}@z{gi}", f"im:{kind}@z{gi}"]
    if pre is not None:
        rows.append(a_num - a_den)
        rhs.append(0.0)
        tags.append("inf-order2")
    A = np.array(rows, dtype=float)
    bvec = np.array(rhs, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise SingularSystemError(f"non-square interpolation system {A.shape}")
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(bvec)):
        raise SingularSystemError("non-finite entries in interpolation system")
    if check_conditioning:
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise SingularSystemError(
                f"interpolation matrix condition {cond:.3g} exceeds {COND_LIMIT:g}; "
                "choose different parameters")
    return InterpolationSystem(A, bvec, tuple(tags))


def _refined_solve(A: np.ndarray, b: np.ndarray, sweeps: int = 2) -> np.ndarray:
    x = np.linalg.solve(A, b)
    Al = A.astype(np.longdouble)
    bl = b.astype(np.longdouble)
    for _ in range(sweeps):
        res = bl - Al @ x.astype(np.longdouble)
        x = x + np.linalg.solve(A, res.astype(float))
    return x


def solve_exponents(system: InterpolationSystem) -> np.ndarray:
    """LU solve (partial pivoting) with iterative refinement of the residual."""
    A, b = system.matrix, system.rhs
    if A.shape[0] != A.shape[1]:
        raise SingularSystemError("interpolation system must be square")
    if b.size == 0:
        return np.zeros(0)
    try:
        m = _refined_solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"singular interpolation matrix: {exc}") from exc
    resid = np.max(np.abs(A @ m - b))
    if not np.isfinite(resid) or resid > 1e-10 * (1 + np.max(np.abs(b))):
        raise SingularSystemError(f"exponent solve residual {resid:.3g} too large")
    return m


def exponents_for(cf: CoprimeFactorization, a: Sequence[float], M: float | None = None) -> np.ndarray:
    return solve_exponents(build_system(cf, a, M))


def make_u(cf: CoprimeFactorization, a: Sequence[float], m: Sequence[float],
           M: float | None = None, integerized: bool = False) -> UProduct:
    pre = premultiplier_for(cf, M) if cf.relative_degree == 2 else None
    return UProduct.from_params(a, m, pre, integerized)


def trivial_U(cf: CoprimeFactorization, M: float | None = None) -> UProduct:
    """The exponent-free unit used when ``N`` has no finite RHP zeros."""
    if cf.q != 0:
        raise ValueError("trivial_U applies only when q = 0")
    pre = premultiplier_for(cf, M) if cf.relative_degree == 2 else None
    return UProduct((), pre, integerized=True)


def interpolation_residuals(cf: CoprimeFactorization, U: UProduct) -> list[float]:
    """Scaled mismatch of ``U`` against ``D`` at every RHP zero group.

    Value rows give ``|U(z) - D(z)| / (1 + |D(z)|)``; a zero of multiplicity
    ``mu`` adds ``mu - 1`` derivative rows measuring
    ``|D(z)| * |(ln U)^(j)(z) - (ln D)^(j)(z)| / (1 + |D(z)|)``.
    """
    out = []
    for z, mu in cf.zero_groups:
        dz = cf.d_value(z)
        scale = 1.0 + abs(dz)
        out.append(abs(u_eval(U, z) - dz) / scale)
        for j in range(1, mu):
            diff = U.log_derivative(z, j) - cf.d_log_derivative(z, j)
            out.append(abs(dz) * abs(diff) / scale)
    return out


@dataclass(frozen=True)
class AsymptoticResult:
    centers: np.ndarray
    targets: np.ndarray
    x: np.ndarray
    eps: np.ndarray
    achieved_m: np.ndarray
    refined_eps: np.ndarray | None = None
    refined_m: np.ndarray | None = None

    def params(self, eps=None) -> np.ndarray:
        eps = self.eps if eps is None else np.asarray(eps)
        return params_from_eps(self.centers, eps)


def params_from_eps(centers, eps) -> np.ndarray:
    """Interleave ``b_k - eps_k, b_k + eps_k``."""
    centers = np.asarray(centers, dtype=float)
    eps = np.asarray(eps, dtype=float)
    a = np.empty(2 * centers.size)
    a[0::2] = centers - eps
    a[1::2] = centers + eps
    return a


def asymptotic_system(cf: CoprimeFactorization, centers: Sequence[float],
                      M: float | None = None) -> InterpolationSystem:
    """Small-separation limit of :func:`build_system` in the variables
    ``x_k = 2 eps_k m_k``; independent of the separations themselves."""
    b = np.asarray(centers, dtype=float)
    if b.size != n_factors(cf):
        raise ValueError(f"expected {n_factors(cf)} centers, got {b.size}")
    if np.any(b <= 0):
        raise ValueError("centers must be positive")
    pre = premultiplier_for(cf, M) if cf.relative_degree == 2 else None
    rows, rhs, tags = [], [], []
    for gi, (z, mu) in enumerate(cf.zero_groups):
        for j in range(mu):
            # j-th derivative of -1/(s + b)
            row = -((-1) ** j) * math.factorial(j) * (z + b) ** (-(j + 1))
            if j == 0:
                rb = _log_d(cf, z) - (pre.log_value(z) if pre else 0)
            else:
                rb = cf.d_log_derivative(z, j) - (pre.log_derivative(z, j) if pre else 0)
            row = np.asarray(row, dtype=complex)
            if z.imag == 0.0:
                rows.append(row.real)
                rhs.append(rb.real)
                tags.append(f"j{j}@z{gi}")
            else:
                rows += [row.real, row.imag]
                rhs += [rb.real, rb.imag]
                tags += [f"re:j{j}@z{gi}", f"im:j{j}@z{gi}"]
    if pre is not None:
        # sum m_k (a_{2k-1} - a_{2k}) = -sum x_k
        rows.append(np.ones(b.size))
        rhs.append(0.0)
        tags.append("inf-order2")
    return InterpolationSystem(np.array(rows), np.array(rhs, dtype=float), tuple(tags))


def asymptotic_epsilons(cf: CoprimeFactorization, centers: Sequence[float],
                        targets: Sequence[int], M: float | None = None,
                        refine: bool = True, cfg=None) -> AsymptoticResult:
    """Predict separations giving prescribed (large) integer exponents.

    Solves the separation-free system for ``x``, sets ``eps = x / (2 N)``,
    reports the exponents actually obtained at those separations and, when
    ``refine`` is set, polishes the separations by Newton iteration until
    the exponents equal the targets.
    """
    N = np.asarray(targets, dtype=float)
    if np.any(np.abs(N) < 1):
        raise ValueError("targets must be nonzero integers")
    b = np.asarray(centers, dtype=float)
    x = solve_exponents(asymptotic_system(cf, b, M))
    eps = x / (2.0 * N)
    if np.any(np.abs(eps) >= b):
        raise ValueError("predicted separations exceed centers; increase the targets")
    achieved = exponents_for(cf, params_from_eps(b, eps), M)
    res = AsymptoticResult(b, N, x, eps, achieved)
    if refine:
        from .tune import refine_to_targets

        eps_ref, m_ref = refine_to_targets(cf, b, eps, N, M=M, cfg=cfg)
        res = AsymptoticResult(b, N, x, eps, achieved, eps_ref, m_ref)
    return res
