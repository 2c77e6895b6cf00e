"""Regression suite over the built-in worked examples.

Fixed mode feeds each example's adjusted parameters straight into the
exponent solve and the realization; search mode runs the full tuning
pipeline from the tabulated initial parameters.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import design, realize
from .errors import RTIError
from .examples import DESIGN_KEYS, EXAMPLES, LARGE_EXPONENT, TABLE_KEYS, WorkedExample
from .ratfun import RationalTF

LARGE_KEY = "A"
ALL_KEYS = DESIGN_KEYS + (LARGE_KEY,)

#: Published real exponents carry four decimals.
INITIAL_M_TOL = 5e-5
INTEGER_TOL = 1e-6
CLOSED_LOOP_MARGIN = 1e-6


@dataclass(frozen=True)
class Check:
    example: str
    mode: str
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0


def parse_selection(text: str) -> tuple[str, ...]:
    """``all``, a comma list of keys, or numeric ranges such as ``5..9``."""
    text = text.strip()
    if text in ("", "all"):
        return ALL_KEYS
    keys: list[str] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = (int(x) for x in part.split("..", 1))
            keys.extend(str(i) for i in range(lo, hi + 1) if str(i) in EXAMPLES)
        elif part in EXAMPLES or part == LARGE_KEY:
            keys.append(part)
        else:
            raise ValueError(f"unknown example {part!r}; choose from {', '.join(ALL_KEYS)}")
    return tuple(dict.fromkeys(keys))


def controller_matches(C: RationalTF, ref: RationalTF, rtol: float, atol: float = 0.0) -> bool:
    a, b = C.normalized(), ref.normalized()
    return (a.num.allclose(b.num, rtol=rtol, atol=atol)
            and a.den.allclose(b.den, rtol=rtol, atol=atol))


def fixed_design(ex: WorkedExample) -> realize.DesignResult:
    cf = ex.factorization()
    if cf.q == 0:
        return realize.synthesize_controller(cf, design.trivial_U(cf, ex.M))
    return realize.design_fixed(cf, ex.adjusted_a, ex.M)


def _stable_checks(key, mode, res, t0) -> list[Check]:
    v = res.verification
    cl = v.max_closed_loop_re
    out = [Check(key, mode, "verified", v.passed and cl < -CLOSED_LOOP_MARGIN,
                 f"sigma={v.sigma:.4g} nu={v.nu} max_re_cl={cl:.4g}", time.perf_counter() - t0)]
    t1 = time.perf_counter()
    try:
        s = realize.step_response(realize.closed_loop(res.factorization.plant, res.controller))
        ok, detail = s.settled and s.fvt_agrees, \
            f"settled={s.settled} final={s.final_value:.6g} dc={s.dc_gain:.6g} T={s.t[-1]:g}"
    except RTIError as exc:
        ok, detail = False, str(exc)
    out.append(Check(key, mode, "step", ok, detail, time.perf_counter() - t1))
    return out


def run_fixed(key: str) -> list[Check]:
    if key == LARGE_KEY:
        return run_large_exponent()
    ex = EXAMPLES[key]
    cf = ex.factorization()
    checks = []
    t0 = time.perf_counter()
    if ex.initial_a is not None:
        m = design.exponents_for(cf, ex.initial_a, ex.M)
        err = float(np.max(np.abs(m - np.asarray(ex.initial_m))))
        checks.append(Check(key, "fixed", "initial_m", err < INITIAL_M_TOL,
                            f"m={np.round(m, 5).tolist()} err={err:.2g}", time.perf_counter() - t0))
    if ex.adjusted_a is not None:
        t0 = time.perf_counter()
        m = design.exponents_for(cf, ex.adjusted_a, ex.M)
        err = float(np.max(np.abs(m - np.asarray(ex.adjusted_m))))
        checks.append(Check(key, "fixed", "integers", err < INTEGER_TOL,
                            f"m={np.round(m).astype(int).tolist()} err={err:.2g}",
                            time.perf_counter() - t0))
    t0 = time.perf_counter()
    try:
        res = fixed_design(ex)
    except RTIError as exc:
        checks.append(Check(key, "fixed", "verified", False, str(exc), time.perf_counter() - t0))
        return checks
    if ex.controller is not None:
        # short published coefficients are exact; long ones carry 7 digits
        exact = ex.controller.den.degree <= 1
        ok = controller_matches(res.controller, ex.controller,
                                rtol=0.0 if exact else 1e-4, atol=1e-12 if exact else 0.0)
        checks.append(Check(key, "fixed", "controller", ok, repr(res.controller.normalized())))
    checks.extend(_stable_checks(key, "fixed", res, t0))
    return checks


def run_large_exponent() -> list[Check]:
    L = LARGE_EXPONENT
    t0 = time.perf_counter()
    res = design.asymptotic_epsilons(L.factorization(), L.centers, L.targets)
    dt = time.perf_counter() - t0
    x_rel = float(np.max(np.abs(res.x - np.asarray(L.x)) / np.abs(L.x)))
    e_err = float(np.max(np.abs(res.eps - np.asarray(L.eps))))
    m_err = float(np.max(np.abs(res.refined_m - np.asarray(L.targets))))
    r_err = float(np.max(np.abs(res.refined_eps - np.asarray(L.refined_eps))))
    return [
        Check(LARGE_KEY, "fixed", "x", x_rel < 5e-10, f"rel err={x_rel:.2g}", dt),
        Check(LARGE_KEY, "fixed", "eps", e_err < 1e-12, f"err={e_err:.2g}"),
        Check(LARGE_KEY, "fixed", "refined_m", m_err < 5e-8, f"err={m_err:.2g}"),
        Check(LARGE_KEY, "fixed", "refined_eps", r_err < 1e-9, f"err={r_err:.2g}"),
    ]


def run_search(key: str, seed: int = 0, restarts: int = 8) -> list[Check]:
    if key not in TABLE_KEYS:
        return []
    ex = EXAMPLES[key]
    cf = ex.factorization()
    cfg = realize.DesignConfig(initial_a=ex.initial_a, M=ex.M)
    cfg = realize.replace(cfg, tune=realize.replace(cfg.tune, rng_seed=seed, restarts=restarts))
    t0 = time.perf_counter()
    try:
        res = realize.design_from_factorization(cf, cfg)
    except RTIError as exc:
        return [Check(key, "search", "verified", False, str(exc), time.perf_counter() - t0)]
    st = res.tune_trace
    checks = _stable_checks(key, "search", res, t0)
    checks[0] = Check(key, "search", "verified", checks[0].passed,
                      f"m={st.m.astype(int).tolist()} start={st.restart} " + checks[0].detail,
                      checks[0].seconds)
    return checks


def run_suite(keys=ALL_KEYS, search: bool = True, seed: int = 0, restarts: int = 8,
              on_check=None) -> list[Check]:
    checks: list[Check] = []
    for key in keys:
        batch = run_fixed(key)
        if search:
            batch += run_search(key, seed, restarts)
        for c in batch:
            if on_check is not None:
                on_check(c)
        checks.extend(batch)
    return checks


def format_check(c: Check) -> str:
    status = "PASS" if c.passed else "FAIL"
    return f"{status}  {c.example:>10}  {c.mode:<6}  {c.name:<12} {c.seconds:7.2f}s  {c.detail}"
