"""Controller realization, strong-stabilization checks and step responses."""

from __future__ import annotations

import logging
import math
from fractions import Fraction
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.linalg

from . import design, tune
from .errors import (RealizationError, RTIError, SimulationError, SingularSystemError,
                     UnsupportedRelativeDegreeError)
from .plant import CoprimeFactorization, coprime_factorize
from .ratfun import (CANCEL_TOL, Polynomial, RationalTF, match_roots, poly_from_roots,
                     poly_power_of_linear, poly_roots)

log = logging.getLogger(__name__)

#: Largest total degree allowed when expanding U.
MAX_U_DEGREE = 200
#: Tolerance for cancelling controller roots outside the mandatory RHP set.
MINREAL_TOL = 1e-8


@dataclass(frozen=True)
class VerificationReport:
    sigma: float
    nu: int
    closed_loop_poles: tuple
    interpolation_residuals: tuple
    passed: bool
    residual_tol: float = 1e-8

    @property
    def max_closed_loop_re(self) -> float:
        if not self.closed_loop_poles:
            return -math.inf
        return max(p.real for p in self.closed_loop_poles)


@dataclass(frozen=True)
class DesignResult:
    controller: RationalTF
    u_rational: RationalTF
    u_product: design.UProduct
    verification: VerificationReport
    factorization: CoprimeFactorization
    tune_trace: tune.TuneState | None = None


@dataclass(frozen=True)
class StepSeries:
    t: np.ndarray
    y: np.ndarray
    settled: bool
    final_value: float
    dc_gain: float
    fvt_agrees: bool


@dataclass(frozen=True)
class DesignConfig:
    tune: tune.TuneConfig = field(default_factory=tune.TuneConfig)
    initial_a: tuple | None = None
    cancel_tol: float = CANCEL_TOL
    force: bool = False
    padding: tuple | None = None
    M: float | None = None
    max_degree: int = MAX_U_DEGREE
    rerandomize: int = 5


# expansion

def _linear_power(root: float, power: int) -> Polynomial:
    return Polynomial(poly_power_of_linear(root, power))


def u_denominator_roots(U: design.UProduct) -> list[complex]:
    out = []
    for f in U.factors:
        m = int(f.m)
        out += [complex(-f.a_den)] * m if m > 0 else [complex(-f.a_num)] * (-m)
    if U.premultiplier is not None:
        out.append(complex(-U.premultiplier.M))
    return out


def expand_u(U: design.UProduct, max_degree: int = MAX_U_DEGREE) -> RationalTF:
    """Rational form of an integerized ``U`` by repeated multiplication."""
    if not U.integerized:
        raise ValueError("expand_u needs integer exponents")
    deg = int(sum(abs(f.m) for f in U.factors)) + (U.premultiplier is not None)
    if deg > max_degree:
        raise RealizationError(f"U has degree {deg}, above the limit {max_degree}")
    num = Polynomial([1.0])
    den = Polynomial([1.0])
    for f in U.factors:
        m = int(f.m)
        top, bottom = (f.a_num, f.a_den) if m > 0 else (f.a_den, f.a_num)
        num = num * _linear_power(-top, abs(m))
        den = den * _linear_power(-bottom, abs(m))
    if U.premultiplier is not None:
        num = num * Polynomial([1.0, U.premultiplier.shift])
        den = den * Polynomial([1.0, U.premultiplier.M])
    return RationalTF(num, den)


# synthesis

def _fpoly_mul(p: list, q: list) -> list:
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, x in enumerate(p):
        if x:
            for j, y in enumerate(q):
                out[i + j] += x * y
    return out


def _fpoly(c) -> list:
    return [Fraction(float(x)) for x in np.atleast_1d(c)]


def _fpoly_linear_power(root: float, power: int) -> list:
    out = [Fraction(1)]
    lin = [Fraction(1), -Fraction(float(root))]
    for _ in range(power):
        out = _fpoly_mul(out, lin)
    return out


def _exact_u(U: design.UProduct) -> tuple[list, list]:
    num, den = [Fraction(1)], [Fraction(1)]
    for f in U.factors:
        m = int(f.m)
        top, bottom = (f.a_num, f.a_den) if m > 0 else (f.a_den, f.a_num)
        num = _fpoly_mul(num, _fpoly_linear_power(-top, abs(m)))
        den = _fpoly_mul(den, _fpoly_linear_power(-bottom, abs(m)))
    if U.premultiplier is not None:
        num = _fpoly_mul(num, _fpoly([1.0, U.premultiplier.shift]))
        den = _fpoly_mul(den, _fpoly([1.0, U.premultiplier.M]))
    return num, den


def _fpoly_divmod(x: list, r: list) -> tuple[list, list]:
    rem = list(x)
    quot = []
    for i in range(len(x) - len(r) + 1):
        c = rem[i] / r[0]
        quot.append(c)
        for j in range(len(r)):
            rem[i + j] -= c * r[j]
    return quot, rem[len(quot):]


def _pad(c: np.ndarray, n: int) -> np.ndarray:
    return np.concatenate([np.zeros(n - c.size), c])


def _remove_matched(roots: list, pairs, side: int) -> list:
    drop = {p[side] for p in pairs}
    return [r for i, r in enumerate(roots) if i not in drop]


def synthesize_controller(cf: CoprimeFactorization, U: design.UProduct,
                          cancel_tol: float = CANCEL_TOL,
                          max_degree: int = MAX_U_DEGREE) -> DesignResult:
    """Form ``C = (U - D) / N`` and reduce it to a proper stable controller.

    ``U - D`` and its quotient by the RHP-zero factor of ``N`` are computed
    in exact rational arithmetic on the floating-point data, so the
    controller coefficients are correctly rounded.  Every finite RHP zero of
    ``N`` must be matched by a zero of ``U - D`` within ``cancel_tol``;
    these are divided out before any other common factors are cancelled.
    """
    Ur = expand_u(U, max_degree)
    un, ud = _exact_u(U)
    dn = _fpoly(poly_from_roots(cf.d_zeros, cf.d_gain).coeffs)
    dd = _fpoly(poly_from_roots(cf.d_poles).coeffs)
    t1 = _fpoly_mul(un, dd)
    t2 = _fpoly_mul(dn, ud)
    L = max(len(t1), len(t2))
    t1 = [Fraction(0)] * (L - len(t1)) + t1
    t2 = [Fraction(0)] * (L - len(t2)) + t2
    X = [x - y for x, y in zip(t1, t2)]
    scale = np.array([max(abs(float(x)), abs(float(y)), 1.0) for x, y in zip(t1, t2)])
    Xf = np.array([float(x) for x in X])

    den_roots = u_denominator_roots(U) + list(cf.d_poles) + [z for z in cf.n_zeros if z.real < 0]
    if np.all(np.abs(Xf) <= 1e-13 * scale):
        C = RationalTF(Polynomial([0.0]), Polynomial([1.0]))
        return _finish(cf, U, Ur, C)

    k = cf.relative_degree
    if np.any(np.abs(Xf[:k]) > cancel_tol * scale[:k]):
        raise RealizationError(
            "controller improper: U - D lacks the required zero order at infinity")
    X, Xf = X[k:], Xf[k:]

    rhp = cf.rhp_zeros
    if rhp:
        Xp = Polynomial(Xf)
        xr = poly_roots(Xp) if Xp.degree >= 1 else np.zeros(0)
        pairs = match_roots(rhp, xr, cancel_tol)
        if len(pairs) < len(rhp):
            raise RealizationError("interpolation residual too large for realization")
        Y, _ = _fpoly_divmod(X, _fpoly(poly_from_roots(rhp).coeffs))
    else:
        Y = X
    Y = Polynomial([float(y) for y in Y])

    num_roots = list(cf.n_poles)
    pairs = match_roots(num_roots, den_roots, MINREAL_TOL)
    num_roots = _remove_matched(num_roots, pairs, 0)
    den_roots = _remove_matched(den_roots, pairs, 1)
    if Y.degree >= 1 and den_roots:
        yr = list(poly_roots(Y))
        pairs = match_roots(yr, den_roots, MINREAL_TOL)
        if pairs:
            yr = _remove_matched(yr, pairs, 0)
            den_roots = _remove_matched(den_roots, pairs, 1)
            Y = poly_from_roots(yr, Y.lead, tol=1e-6)
    num = Y * poly_from_roots(num_roots) * (1.0 / cf.n_gain)
    den = poly_from_roots(den_roots, tol=1e-6)
    C = RationalTF(num, den)
    if C.relative_degree < 0:
        raise RealizationError("controller improper after cancellation")
    return _finish(cf, U, Ur, C)


def realization_error(cf: CoprimeFactorization, C: RationalTF, U: design.UProduct,
                      points=None, seed: int = 0) -> float:
    """Largest ``|C(s) - (U(s) - D(s)) / N(s)| / (1 + |C(s)|)`` over LHP probe points.

    By default 20 points with real part in [-3, -0.1] and imaginary part
    in [-3, 3] are drawn from a seeded generator.
    """
    if points is None:
        rng = np.random.default_rng(seed)
        points = rng.uniform(-3.0, -0.1, 20) + 1j * rng.uniform(-3.0, 3.0, 20)
    worst = 0.0
    for s in np.atleast_1d(points):
        ref = (design.u_eval(U, s) - cf.d_value(s)) / complex(cf.N(s))
        c = complex(C(s))
        worst = max(worst, abs(c - ref) / (1.0 + abs(c)))
    return worst


def _finish(cf, U, Ur, C) -> DesignResult:
    report = verify_controller(cf, C, U)
    return DesignResult(C, Ur, U, report, cf)


# verification

def characteristic_polynomial(P: RationalTF, C: RationalTF) -> Polynomial:
    return P.den * C.den + P.num * C.num


def closed_loop(P: RationalTF, C: RationalTF, kind: str = "disturbance") -> RationalTF:
    """``P / (1 + PC)`` (``"disturbance"``, equal to ``N / (D + NC)``) or
    ``PC / (1 + PC)`` (``"tracking"``)."""
    char = characteristic_polynomial(P, C)
    if kind == "disturbance":
        return RationalTF(P.num * C.den, char)
    if kind == "tracking":
        return RationalTF(P.num * C.num, char)
    raise ValueError(f"unknown closed-loop map {kind!r}")


def verify_controller(cf: CoprimeFactorization, C: RationalTF, U: design.UProduct,
                      residual_tol: float = 1e-8) -> VerificationReport:
    poles = C.poles()
    sigma = float(max(poles.real)) if poles.size else -math.inf
    char = characteristic_polynomial(cf.plant, C)
    cl = tuple(complex(p) for p in poly_roots(char)) if char.degree >= 1 else ()
    res = tuple(design.interpolation_residuals(cf, U))
    cl_max = max((p.real for p in cl), default=-math.inf)
    passed = sigma < 0 and cl_max < 0 and all(r < residual_tol for r in res)
    return VerificationReport(sigma, C.den.degree, cl, res, bool(passed), residual_tol)


def verify(cf: CoprimeFactorization, result: DesignResult) -> VerificationReport:
    return verify_controller(cf, result.controller, result.u_product)


# simulation

def _state_space(tf: RationalTF):
    tf = tf.normalized()
    den = tf.den.coeffs
    n = den.size - 1
    num = _pad(tf.num.coeffs, n + 1)
    d_ff = num[0]
    c = num[1:] - d_ff * den[1:]
    A = np.zeros((n, n))
    A[0, :] = -den[1:]
    A[1:, :-1] = np.eye(n - 1)
    B = np.zeros(n)
    B[0] = 1.0
    _, (scale, _) = scipy.linalg.matrix_balance(A, permute=False, separate=True)
    A = A * scale[None, :] / scale[:, None]
    return A, B / scale, c * scale, d_ff


T_FINAL_MAX = 1000.0


def step_response(tf: RationalTF, t_final: float | None = None, dt: float | None = None,
                  max_samples: int = 20001) -> StepSeries:
    """Unit-step response by fixed-step classical Runge-Kutta.

    The propagator of one RK4 step on a linear system with constant input is
    the fourth-order Taylor polynomial of ``exp(hA)``; when the run has more
    than ``max_samples`` steps the output is taken every ``stride`` steps
    (the grid stays uniform).

    Without ``t_final`` the horizon starts at ``10 / |slowest real part|``
    (clipped to [1, 1000] s) and is doubled, up to 1000 s, while the response
    has not settled onto the final-value-theorem limit.
    """
    if t_final is not None:
        return _simulate(tf, t_final, dt, max_samples)
    poles = tf.poles()
    slowest = float(np.min(np.abs(poles.real))) if poles.size else 1.0
    horizon = min(max(10.0 / slowest, 1.0), T_FINAL_MAX) if slowest > 0 else T_FINAL_MAX
    while True:
        series = _simulate(tf, horizon, dt, max_samples)
        if (series.settled and series.fvt_agrees) or horizon >= T_FINAL_MAX:
            return series
        horizon = min(2.0 * horizon, T_FINAL_MAX)


def _simulate(tf: RationalTF, t_final: float, dt: float | None, max_samples: int) -> StepSeries:
    if not tf.is_proper():
        raise SimulationError("transfer function must be proper")
    poles = tf.poles()
    if poles.size and np.max(poles.real) >= 0:
        raise SimulationError("refusing to simulate an unstable transfer function")
    fastest = float(np.max(np.abs(poles))) if poles.size else 0.0
    if dt is None:
        dt = 1e-3 if fastest == 0 else min(1e-3, 0.1 / fastest)
    elif dt <= 0:
        raise SimulationError("dt must be positive")
    elif fastest > 0 and dt > 0.1 / fastest:
        raise SimulationError(f"dt = {dt:g} too coarse for pole magnitude {fastest:g}")
    if t_final < 100 * dt:
        raise SimulationError("t_final must cover at least 100 steps")
    n_steps = int(math.ceil(t_final / dt - 1e-9))
    stride = max(1, int(math.ceil(n_steps / (max_samples - 1))))
    n_out = n_steps // stride + 1
    t = np.arange(n_out) * (stride * dt)
    dc = float(np.real(tf(0.0)))

    if poles.size == 0:
        y = np.full(n_out, tf.num.lead / tf.den.lead)
    else:
        A, B, c, d_ff = _state_space(tf)
        n = A.shape[0]
        hA = dt * A
        eye = np.eye(n)
        hA2 = hA @ hA
        hA3 = hA2 @ hA
        Phi = eye + hA + hA2 / 2 + hA3 / 6 + hA3 @ hA / 24
        Gam = dt * (eye + hA / 2 + hA2 / 6 + hA3 / 24) @ B
        Pk, S = eye, np.zeros((n, n))
        for _ in range(stride):
            S += Pk
            Pk = Phi @ Pk
        Gk = S @ Gam
        x = np.zeros(n)
        y = np.empty(n_out)
        for i in range(n_out):
            y[i] = c @ x + d_ff
            x = Pk @ x + Gk
        if not np.all(np.isfinite(y)):
            raise SimulationError("simulation diverged")
    final = float(y[-1])
    tail = y[int(0.9 * n_out):]
    settled = bool(np.all(np.abs(tail - final) < 0.01 * max(1.0, abs(final))))
    fvt = abs(final - dc) <= 0.02 * abs(dc) + 1e-9
    return StepSeries(t, y, settled, final, dc, bool(fvt))


# pipelines

def _rerandomized(a0: np.ndarray, seed: int, idx: int) -> np.ndarray:
    rng = np.random.default_rng([seed, 1000 + idx])
    return 1.0 + (a0 - 1.0 + 0.1) * np.exp(0.3 * rng.standard_normal(a0.size))


def _conditioned_start(cf, a0, cfg: DesignConfig, M) -> np.ndarray:
    a = np.asarray(a0, dtype=float)
    for idx in range(cfg.rerandomize + 1):
        try:
            design.build_system(cf, a, M)
            return a
        except SingularSystemError as exc:
            if idx == cfg.rerandomize:
                raise
            log.info("initial parameters ill-conditioned (%s); re-randomizing", exc)
            a = _rerandomized(np.asarray(a0, dtype=float), cfg.tune.rng_seed, idx)
    return a


def design_from_factorization(cf: CoprimeFactorization, cfg: DesignConfig | None = None) -> DesignResult:
    """Trivial unit when ``q = 0``; otherwise tune to integers, realize and verify."""
    cfg = cfg or DesignConfig()
    if cf.relative_degree > 2:
        raise UnsupportedRelativeDegreeError(
            f"unsupported relative degree {cf.relative_degree}; at most 2 is handled")
    M = cfg.M
    if cf.relative_degree == 2 and M is None:
        M = design.choose_M(cf)
    if cf.q == 0:
        return synthesize_controller(cf, design.trivial_U(cf, M), cfg.cancel_tol, cfg.max_degree)

    r = design.n_factors(cf)
    a0 = np.asarray(cfg.initial_a, dtype=float) if cfg.initial_a is not None \
        else design.default_initial_a(2 * r)
    if a0.size != 2 * r:
        raise ValueError(f"expected {2 * r} initial parameters, got {a0.size}")
    a0 = _conditioned_start(cf, a0, cfg, M)
    tcfg = replace(cfg.tune, M=M)
    found: dict = {}

    def accept(state: tune.TuneState) -> bool:
        try:
            U = design.make_u(cf, state.a, state.m, M, integerized=True)
            res = synthesize_controller(cf, U, cfg.cancel_tol, cfg.max_degree)
        except (RTIError, ValueError) as exc:
            log.info("realization failed: %s", exc)
            return False
        if not res.verification.passed:
            return False
        found["result"] = replace(res, tune_trace=state)
        return True

    tune.tune_pipeline(cf, a0, tcfg, accept)
    return found["result"]


def design_pipeline(P: RationalTF, cfg: DesignConfig | None = None) -> DesignResult:
    """Analyze, factorize, design and verify a strongly stabilizing controller."""
    cfg = cfg or DesignConfig()
    if P.relative_degree > 2:
        raise UnsupportedRelativeDegreeError(
            f"unsupported relative degree {P.relative_degree}; at most 2 is handled")
    cf = coprime_factorize(P, padding=cfg.padding, force=cfg.force)
    return design_from_factorization(cf, cfg)


def design_fixed(cf: CoprimeFactorization, a: Sequence[float], M: float | None = None,
                 polish: bool = True, cfg: DesignConfig | None = None) -> DesignResult:
    """Realize the design at given parameters (exponents assumed near-integer).

    With ``polish`` the parameters are first moved by a minimal-norm Newton
    iteration so the exponents become integers to working precision.
    """
    cfg = cfg or DesignConfig()
    if cf.relative_degree == 2 and M is None:
        M = cfg.M if cfg.M is not None else design.choose_M(cf)
    tcfg = replace(cfg.tune, M=M)
    a = np.asarray(a, dtype=float)
    if polish:
        m = design.exponents_for(cf, a, M)
        state = tune.newton_refine(cf, tune.TuneState(tune.to_tilde(a), m), tcfg)
    else:
        state = tune.snap(cf, tune.TuneState(tune.to_tilde(a), design.exponents_for(cf, a, M)), tcfg)
    U = design.make_u(cf, state.a, state.m, M, integerized=True)
    res = synthesize_controller(cf, U, cfg.cancel_tol, cfg.max_degree)
    return replace(res, tune_trace=state)
