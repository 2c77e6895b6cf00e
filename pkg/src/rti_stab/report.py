"""JSON/CSV file formats: plant specs, design reports, step series.

Floats are written with Python's shortest round-trip repr, which is exact
for every finite double; non-finite values (a controller without poles has
``sigma = -inf``) are stored as ``null``.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ImproperPlantError
from .plant import PipReport
from .ratfun import Polynomial, RationalTF, poly_from_roots


class SpecError(ValueError):
    """A plant spec or report file is malformed; the message names the field."""


# primitive encoders

def real(x) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


def poly_json(p: Polynomial) -> list:
    return [real(c) for c in p.coeffs]


def tf_json(tf: RationalTF) -> dict:
    return {"numerator": poly_json(tf.num), "denominator": poly_json(tf.den)}


def complex_json(z) -> dict:
    z = complex(z)
    return {"re": real(z.real), "im": real(z.imag)}


def tf_from_json(obj: dict, where: str = "") -> RationalTF:
    try:
        return RationalTF(_reals(obj["numerator"], f"{where}numerator"),
                          _reals(obj["denominator"], f"{where}denominator"))
    except (KeyError, TypeError) as exc:
        raise SpecError(f"{where or 'transfer function'}: missing numerator/denominator") from exc


def _reals(seq, where: str) -> list[float]:
    if not isinstance(seq, list) or not seq:
        raise SpecError(f"{where}: expected a nonempty list of numbers")
    out = []
    for i, v in enumerate(seq):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise SpecError(f"{where}[{i}]: expected a finite number, got {v!r}")
        out.append(float(v))
    return out


def _complexes(seq, where: str) -> list[complex]:
    if not isinstance(seq, list):
        raise SpecError(f"{where}: expected a list of {{re, im}} objects")
    out = []
    for i, v in enumerate(seq):
        if not isinstance(v, dict) or "re" not in v:
            raise SpecError(f"{where}[{i}]: expected an object with 're' and optional 'im'")
        re_ = _reals([v["re"]], f"{where}[{i}].re")[0]
        im_ = _reals([v.get("im", 0.0)], f"{where}[{i}].im")[0]
        out.append(complex(re_, im_))
    return out


# plant specs

@dataclass(frozen=True)
class PlantSpec:
    plant: RationalTF
    label: str | None = None


def parse_plant_spec(text: str) -> PlantSpec:
    """Parse a plant file in coefficient or zero/pole/gain form."""
    if not text.strip():
        raise SpecError("line 1: empty plant file")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise SpecError("top level: expected a JSON object")
    coef = "numerator" in obj or "denominator" in obj
    zpk = any(k in obj for k in ("zeros", "poles", "gain"))
    if coef == zpk:
        raise SpecError("top level: give exactly one of numerator/denominator or zeros/poles/gain")
    label = obj.get("label")
    if label is not None and not isinstance(label, str):
        raise SpecError("label: expected a string")
    if coef:
        if "numerator" not in obj or "denominator" not in obj:
            raise SpecError("numerator/denominator: both fields are required")
        num = _reals(obj["numerator"], "numerator")
        den = _reals(obj["denominator"], "denominator")
        if not any(den):
            raise SpecError("denominator: zero polynomial")
        if not any(num):
            raise SpecError("numerator: zero polynomial")
        P = RationalTF(num, den)
    else:
        for k in ("zeros", "poles", "gain"):
            if k not in obj:
                raise SpecError(f"{k}: field is required in zero/pole/gain form")
        zeros = _complexes(obj["zeros"], "zeros")
        poles = _complexes(obj["poles"], "poles")
        if not poles:
            raise SpecError("poles: must be nonempty")
        gain = _reals([obj["gain"]], "gain")[0]
        if gain == 0:
            raise SpecError("gain: must be nonzero")
        for where, roots in (("zeros", zeros), ("poles", poles)):
            for z in roots:
                if z.imag != 0 and not any(w == z.conjugate() for w in roots):
                    raise SpecError(f"{where}: {z} has no conjugate partner")
        P = RationalTF(poly_from_roots(zeros, gain), poly_from_roots(poles))
    if P.relative_degree < 0:
        raise ImproperPlantError("plant is improper (numerator degree exceeds denominator)")
    return PlantSpec(P, label)


def read_plant_spec(path) -> PlantSpec:
    return parse_plant_spec(Path(path).read_text())


def plant_spec_json(P: RationalTF, label: str | None = None) -> dict:
    out: dict[str, Any] = tf_json(P)
    if label is not None:
        out["label"] = label
    return out


# design reports

def pip_json(rep: PipReport | None) -> dict:
    if rep is None:
        return {"satisfied": True}
    out: dict[str, Any] = {"satisfied": bool(rep.satisfied)}
    if rep.witness is not None:
        lo, hi = rep.witness
        out["witness"] = {"zeros": [real(lo), real(hi)],
                          "odd_pole_count": next(c for c in rep.pole_counts_between if c % 2)}
    return out


def _trace_json(state) -> list:
    if state is None:
        return []
    return [{"stage": str(stage), "iteration": int(it), "objective": real(obj)}
            for stage, it, obj in state.trace]


def design_report(result, rng_seed: int, label: str | None = None,
                  tool_version: str | None = None) -> dict:
    """Serializable report for a realized design."""
    cf = result.factorization
    U = result.u_product
    v = result.verification
    out = _header(cf, rng_seed, label)
    if U.premultiplier is not None:
        out["premultiplier"] = {"shift": real(U.premultiplier.shift), "M": real(U.premultiplier.M)}
    out["factors"] = [{"a_num": real(f.a_num), "a_den": real(f.a_den), "m": real(f.m)}
                      for f in U.factors]
    out["controller"] = tf_json(result.controller)
    out["verification"] = {
        "sigma": real(v.sigma),
        "nu": int(v.nu),
        "closed_loop_poles": [complex_json(p) for p in v.closed_loop_poles],
        "interpolation_residuals": [real(r) for r in v.interpolation_residuals],
        "passed": bool(v.passed),
    }
    if result.tune_trace is not None:
        out["tune_trace"] = _trace_json(result.tune_trace)
    return _footer(out, rng_seed, tool_version)


def failure_report(cf, error: Exception, rng_seed: int, label: str | None = None,
                   tool_version: str | None = None) -> dict:
    """Report for a run that produced no verified controller."""
    out = _header(cf, rng_seed, label)
    out["controller"] = None
    out["verification"] = None
    out["error"] = str(error)
    state = getattr(error, "state", None)
    if state is not None:
        out["best_state"] = {"a": [real(x) for x in state.a], "m": [real(x) for x in state.m]}
        out["tune_trace"] = _trace_json(state)
    return _footer(out, rng_seed, tool_version)


def _header(cf, rng_seed, label) -> dict:
    out: dict[str, Any] = {}
    if label is not None:
        out["label"] = label
    out["plant"] = tf_json(cf.plant)
    out["pip"] = pip_json(cf.pip)
    out["factorization"] = {"N": tf_json(cf.N), "D": tf_json(cf.D),
                            "sign_flipped": bool(cf.sign_flipped)}
    out["relative_degree"] = int(cf.relative_degree)
    out["q"] = int(cf.q)
    return out


def _footer(out: dict, rng_seed: int, tool_version: str | None) -> dict:
    if tool_version is None:
        from . import __version__ as tool_version
    out["tool_version"] = tool_version
    out["rng_seed"] = int(rng_seed)
    return out


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def report_passed(rep: dict) -> bool:
    v = rep.get("verification")
    return bool(isinstance(v, dict) and v.get("passed") is True)


def report_plant(rep: dict) -> RationalTF:
    return tf_from_json(rep.get("plant") or {}, "plant.")


def report_controller(rep: dict) -> RationalTF:
    if not rep.get("controller"):
        raise SpecError("controller: report carries no controller")
    return tf_from_json(rep["controller"], "controller.")


def read_report(path) -> dict:
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise SpecError("top level: expected a JSON object")
    return obj


# atomic output

def write_atomic(path, text: str) -> None:
    """Write ``text`` to a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def write_json(path, obj) -> None:
    write_atomic(path, dumps(obj))


def step_csv(t: np.ndarray, y: np.ndarray) -> str:
    rows = ["t,y"]
    rows.extend(f"{ti:.12g},{yi:.12g}" for ti, yi in zip(t, y))
    return "\n".join(rows) + "\n"
