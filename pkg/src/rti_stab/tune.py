"""Driving the real exponents to integers.

Parameters are searched in unconstrained coordinates ``a_tilde`` with
``a = 1 + a_tilde**2`` so every factor root stays at or left of ``-1``.
Stage one minimizes a size/degeneracy penalty F1, stage two minimizes
F2 = sum sin^2(m pi), and stage three is an under-determined Newton
iteration with minimal-norm steps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import design
from .errors import IntegerizationError, RTIError, SingularSystemError, TuningError
from .plant import CoprimeFactorization

log = logging.getLogger(__name__)

#: Objective value reported when the exponent solve fails.
FAIL_VALUE = 1e12


@dataclass(frozen=True)
class TuneConfig:
    max_iters_simplex: int = 2000
    restarts: int = 8
    fd_step: float = 1e-6
    newton_tol: float = 1e-10
    newton_max_iters: int = 200
    snap_tol: float = 1e-7
    penalty_large: float = 10.0
    # weak a-regularizer: lets factors spread out instead of clustering into
    # high-multiplicity poles that float64 coefficients cannot represent
    penalty_small_coeff: float = 1e-5
    rng_seed: int = 0
    M: float | None = None
    stagnation_tol: float = 1e-4
    residual_tol: float = 1e-8

    def __post_init__(self):
        for name in ("fd_step", "newton_tol", "snap_tol", "residual_tol", "stagnation_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.max_iters_simplex < 1 or self.newton_max_iters < 1:
            raise ValueError("iteration caps must be positive")


@dataclass(frozen=True)
class TuneState:
    a_tilde: np.ndarray
    m: np.ndarray
    trace: tuple = ()
    integerized: bool = False
    restart: int = 0

    @property
    def a(self) -> np.ndarray:
        return to_params(self.a_tilde)

    @property
    def f2(self) -> float:
        return float(np.sum(np.sin(np.pi * self.m) ** 2))


@dataclass(frozen=True)
class NewtonStep:
    g: np.ndarray
    J: np.ndarray
    delta: np.ndarray
    lam: np.ndarray = field(default=None, repr=False)


def to_params(a_tilde) -> np.ndarray:
    return 1.0 + np.asarray(a_tilde, dtype=float) ** 2


def to_tilde(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return np.sqrt(np.maximum(a - 1.0, 0.0))


# simplex search

def nelder_mead(f: Callable[[np.ndarray], float], x0: Sequence[float],
                cfg: TuneConfig | None = None, max_iters: int | None = None,
                xtol: float = 1e-9, callback=None) -> np.ndarray:
    """Minimize ``f`` by the Nelder-Mead simplex method.

    The starting simplex perturbs each coordinate by 5% (0.00025 for zero
    coordinates).  Iteration stops once the simplex diameter drops below
    ``xtol`` or after ``max_iters`` iterations; the best vertex is returned.
    ``callback(iteration, best_value)`` is called once per iteration.
    """
    if max_iters is None:
        max_iters = (cfg or TuneConfig()).max_iters_simplex
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    f0 = f(x0)
    if not np.isfinite(f0):
        raise ValueError("objective is not finite at the starting point")
    n = x0.size
    simplex = np.tile(x0, (n + 1, 1))
    for i in range(n):
        simplex[i + 1, i] = x0[i] * 1.05 if x0[i] != 0 else 0.00025
    fvals = np.array([f0] + [f(v) for v in simplex[1:]], dtype=float)
    fvals[~np.isfinite(fvals)] = np.inf

    for it in range(max_iters):
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        if callback is not None:
            callback(it, float(fvals[0]))
        diam = np.max(np.abs(simplex[1:] - simplex[0]))
        if diam < xtol:
            break
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + (centroid - worst)
        fr = f(xr)
        if fvals[0] <= fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = f(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                simplex[-1], fvals[-1] = xc, fc
                continue
        else:
            xc = centroid + 0.5 * (worst - centroid)
            fc = f(xc)
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
                continue
        # shrink toward the best vertex
        simplex[1:] = simplex[0] + 0.5 * (simplex[1:] - simplex[0])
        fvals[1:] = [f(v) for v in simplex[1:]]
        fvals[~np.isfinite(fvals)] = np.inf
    best = int(np.argmin(fvals))
    return simplex[best].copy()


# objectives

def f1_value(m: np.ndarray, a: np.ndarray, cfg: TuneConfig | None = None) -> float:
    """``sum|m| + c_L (1 - min|m|) H(1 - min|m|) + c_S sum a^2``."""
    cfg = cfg or TuneConfig()
    m = np.asarray(m, dtype=float)
    a = np.asarray(a, dtype=float)
    small = 1.0 - np.min(np.abs(m)) if m.size else 0.0
    q = cfg.penalty_large * max(small, 0.0) + cfg.penalty_small_coeff * float(a @ a)
    return float(np.sum(np.abs(m)) + q)


def f2_value(m: np.ndarray) -> float:
    return float(np.sum(np.sin(np.pi * np.asarray(m, dtype=float)) ** 2))


def _solve_m(cf: CoprimeFactorization, a_tilde, cfg: TuneConfig) -> np.ndarray | None:
    try:
        m = design.exponents_for(cf, to_params(a_tilde), cfg.M)
    except (RTIError, ValueError):
        return None
    return m if np.all(np.isfinite(m)) else None


def objective_F1(cf: CoprimeFactorization, a_tilde, cfg: TuneConfig | None = None) -> float:
    cfg = cfg or TuneConfig()
    m = _solve_m(cf, a_tilde, cfg)
    if m is None:
        return FAIL_VALUE
    return f1_value(m, to_params(a_tilde), cfg)


def objective_F2(cf: CoprimeFactorization, a_tilde, cfg: TuneConfig | None = None) -> float:
    cfg = cfg or TuneConfig()
    m = _solve_m(cf, a_tilde, cfg)
    if m is None:
        return FAIL_VALUE
    return f2_value(m)


# Newton stage

def min_norm_solve(B, c, rank_tol: float = 1e-12) -> np.ndarray:
    """Minimal-norm solution of ``B y = c`` for wide, full-row-rank ``B``.

    Solves the KKT system ``[[I, B^T], [B, 0]] [y; lam] = [0; c]``.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    c = np.atleast_1d(np.asarray(c, dtype=float))
    p, n = B.shape
    if p > n:
        raise ValueError("min_norm_solve needs at least as many columns as rows")
    if c.size != p:
        raise ValueError("right-hand side length mismatch")
    sv = np.linalg.svd(B, compute_uv=False)
    if sv.size == 0 or sv[0] == 0 or sv[-1] < rank_tol * sv[0]:
        raise SingularSystemError("rank-deficient Jacobian in minimal-norm step")
    K = np.zeros((n + p, n + p))
    K[:n, :n] = np.eye(n)
    K[:n, n:] = B.T
    K[n:, :n] = B
    rhs = np.concatenate([np.zeros(n), c])
    sol = np.linalg.solve(K, rhs)
    # one refinement sweep for the constraint residual
    sol += np.linalg.solve(K, rhs - K @ sol)
    return sol[:n]


def _kkt_multipliers(B, y) -> np.ndarray:
    # y = -B^T lam
    return -np.linalg.lstsq(np.atleast_2d(B).T, y, rcond=None)[0]


def fd_jacobian(fun: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float | np.ndarray) -> np.ndarray:
    """Central-difference Jacobian of ``fun`` at ``x``."""
    x = np.asarray(x, dtype=float)
    h = np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        cols.append((fun(x + e) - fun(x - e)) / (2 * h[i]))
    return np.column_stack(cols)


def newton_step(cf: CoprimeFactorization, a_tilde, cfg: TuneConfig) -> NewtonStep:
    def g_of(x):
        m = design.exponents_for(cf, to_params(x), cfg.M)
        return np.sin(np.pi * m)

    g = g_of(a_tilde)
    J = fd_jacobian(g_of, a_tilde, cfg.fd_step)
    delta = min_norm_solve(J, -g)
    return NewtonStep(g, J, delta, _kkt_multipliers(J, delta))


def _with_trace(state: TuneState, *entries) -> TuneState:
    return replace(state, trace=state.trace + tuple(entries))


def newton_refine(cf: CoprimeFactorization, state: TuneState, cfg: TuneConfig | None = None) -> TuneState:
    """Minimal-norm Newton iteration on ``sin(m pi) = 0``, then snap and verify.

    Raises :class:`TuningError` on non-convergence and
    :class:`IntegerizationError` when the snapped exponents fail the
    interpolation re-check.
    """
    cfg = cfg or TuneConfig()
    x = np.asarray(state.a_tilde, dtype=float).copy()
    m = design.exponents_for(cf, to_params(x), cfg.M)
    g = np.sin(np.pi * m)
    trace = []
    for it in range(cfg.newton_max_iters):
        gn = float(np.max(np.abs(g))) if g.size else 0.0
        trace.append(("newton", it, gn))
        if gn < cfg.newton_tol:
            break
        try:
            step = newton_step(cf, x, cfg)
        except (RTIError, ValueError) as exc:
            raise TuningError(f"Newton step failed: {exc}",
                              _with_trace(replace(state, a_tilde=x, m=m), *trace)) from exc
        # backtrack until the residual decreases
        t = 1.0
        for _ in range(30):
            x_new = x + t * step.delta
            m_new = _solve_m(cf, x_new, cfg)
            if m_new is not None:
                g_new = np.sin(np.pi * m_new)
                if np.max(np.abs(g_new)) < gn:
                    break
            t *= 0.5
        else:
            raise TuningError("Newton line search stalled",
                              _with_trace(replace(state, a_tilde=x, m=m), *trace))
        x, m, g = x_new, m_new, g_new
    else:
        raise TuningError("Newton iteration did not converge",
                          _with_trace(replace(state, a_tilde=x, m=m), *trace))

    out = _with_trace(replace(state, a_tilde=x, m=m), *trace)
    return snap(cf, out, cfg)


def snap(cf: CoprimeFactorization, state: TuneState, cfg: TuneConfig | None = None) -> TuneState:
    """Round near-integer exponents and re-verify interpolation."""
    cfg = cfg or TuneConfig()
    m = np.asarray(state.m, dtype=float)
    mi = np.round(m)
    if np.any(np.abs(m - mi) >= cfg.snap_tol):
        raise IntegerizationError("exponents not within snap tolerance of integers", state)
    U = design.make_u(cf, state.a, mi, cfg.M, integerized=True)
    res = design.interpolation_residuals(cf, U)
    if res and max(res) > cfg.residual_tol:
        raise IntegerizationError(
            f"integerization failed verification (residual {max(res):.3g})", state)
    return replace(state, m=mi, integerized=True)


def refine_to_targets(cf: CoprimeFactorization, centers, eps0, targets,
                      M: float | None = None, cfg: TuneConfig | None = None,
                      tol: float = 1e-9, max_iters: int = 50):
    """Square Newton iteration on separations so that ``m(eps) = targets``.

    Returns ``(eps, m)``.
    """
    centers = np.asarray(centers, dtype=float)
    N = np.asarray(targets, dtype=float)
    eps = np.asarray(eps0, dtype=float).copy()

    def g_of(e):
        return design.exponents_for(cf, design.params_from_eps(centers, e), M) - N

    g = g_of(eps)
    for _ in range(max_iters):
        if np.max(np.abs(g)) < tol:
            break
        J = fd_jacobian(g_of, eps, 1e-7 * np.maximum(np.abs(eps), 1e-6))
        d = np.linalg.solve(J, -g)
        t = 1.0
        while t > 1e-6:
            g_new = g_of(eps + t * d)
            if np.max(np.abs(g_new)) < np.max(np.abs(g)):
                break
            t *= 0.5
        else:
            break
        eps, g = eps + t * d, g_new
    return eps, g + N


# full pipeline

def _perturb(x0: np.ndarray, seed: int, idx: int, sigma: float = 0.3) -> np.ndarray:
    rng = np.random.default_rng([seed, idx])
    z = rng.standard_normal(x0.size)
    return np.where(x0 != 0, x0 * np.exp(sigma * z), sigma * np.abs(z))


def _one_run(cf, x0, cfg, idx, accept=None) -> TuneState:
    trace = []
    xa = nelder_mead(lambda x: objective_F1(cf, x, cfg), x0, cfg,
                     callback=lambda i, v: trace.append(("F1", i, v)))
    xb = nelder_mead(lambda x: objective_F2(cf, x, cfg), xa, cfg,
                     callback=lambda i, v: trace.append(("F2", i, v)))
    # Newton from the F2 minimizer first; the F1 minimizer is the fallback
    # since the F2 simplex can wander to much larger exponents
    err: TuningError | None = None
    for x in (xb, xa):
        m = _solve_m(cf, x, cfg)
        if m is None:
            continue
        state = TuneState(x, m, tuple(trace), restart=idx)
        if x is xb and state.f2 > cfg.stagnation_tol:
            err = TuningError(f"F2 stagnated at {state.f2:.3g}", state)
            continue
        try:
            out = newton_refine(cf, state, cfg)
        except TuningError as exc:
            err = exc
            continue
        if accept is None or accept(out):
            return out
        err = TuningError("integer design rejected by verification", out)
    raise err or TuningError("exponent solve failed after simplex stages")


def tune_pipeline(cf: CoprimeFactorization, a0: Sequence[float], cfg: TuneConfig | None = None,
                  accept: Callable[[TuneState], bool] | None = None) -> TuneState:
    """F1 simplex, F2 simplex, Newton; restarted from perturbed starts on failure.

    ``accept`` may veto an integerized state (for example when the resulting
    controller fails verification), which triggers the next restart.
    """
    cfg = cfg or TuneConfig()
    if cf.q < 1:
        raise ValueError("tuning requires at least one RHP zero")
    x0 = to_tilde(a0)
    best: TuneState | None = None
    for idx in range(cfg.restarts):
        start = x0 if idx == 0 else _perturb(x0, cfg.rng_seed, idx)
        try:
            return _one_run(cf, start, cfg, idx, accept)
        except TuningError as exc:
            log.info("start %d failed: %s", idx, exc)
            if exc.state is not None and (best is None or exc.state.f2 < best.f2):
                best = exc.state
        except (RTIError, ValueError) as exc:
            log.info("start %d failed: %s", idx, exc)
    raise TuningError(f"no integer design after {cfg.restarts} starts", best)
