"""
JSON setup files and result documents.

Matrices are arrays of rows, each row an array of [re, im] pairs (plain
numbers are accepted as real entries).  A setup file looks like::

    {
      "system":   {"dim": 2, "rho_i": {"ket": "+x"}, "E_f": {"ket": "+z"}, "A": "sigma_z"},
      "detector": {"oscillator_dim": 32, "named_state": "ground",
                   "q": "oscillator_q", "o": "oscillator_p"},
      "lambda": 0.014142135623730951,
      "tolerances": {"hermiticity": 1e-9},
      "seed": 7
    }
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ValidationError
from .linalg import DEFAULT_TOL, Tolerances
from .states import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    SPIN_KETS,
    DensityMatrix,
    MeasurementSetup,
    Observable,
    PovmElement,
    fock_state,
    ket_to_dm,
    oscillator_operators,
)

NAMED_OPERATORS = {"sigma_x": SIGMA_X, "sigma_y": SIGMA_Y, "sigma_z": SIGMA_Z}


# -- matrices ------------------------------------------------------------------

def _entry(v, path):
    if isinstance(v, bool):
        raise ValidationError("boolean is not a number", path=path)
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in v
    ):
        return complex(v[0], v[1])
    raise ValidationError("expected a number or an [re, im] pair", path=path)


def matrix_from_json(data, path: str) -> np.ndarray:
    if not isinstance(data, list) or not data or not all(isinstance(r, list) for r in data):
        raise ValidationError("expected a non-empty array of rows", path=path)
    n = len(data[0])
    if n == 0 or any(len(r) != n for r in data):
        raise ValidationError("rows must be non-empty and of equal length", path=path)
    m = np.array([[_entry(v, f"{path}[{i}][{j}]") for j, v in enumerate(r)] for i, r in enumerate(data)])
    if not np.all(np.isfinite(m)):
        raise ValidationError("entries must be finite", path=path)
    return m


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=np.complex128)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def vector_from_json(data, path: str) -> np.ndarray:
    if not isinstance(data, list) or not data:
        raise ValidationError("expected a non-empty array", path=path)
    return np.array([_entry(v, f"{path}[{i}]") for i, v in enumerate(data)])


# -- setup files -------------------------------------------------------------------

def _state(item, dim, path, tol, kind):
    """A density matrix or effect given as a matrix, {"ket": ...} or a spin label."""
    if isinstance(item, str) and item in SPIN_KETS:
        item = {"ket": item}
    if isinstance(item, dict):
        if set(item) != {"ket"}:
            raise ValidationError('expected {"ket": ...}', path=path)
        ket = item["ket"]
        if isinstance(ket, str):
            if ket not in SPIN_KETS:
                raise ValidationError(f"unknown ket label {ket!r}", path=f"{path}.ket")
            ket = SPIN_KETS[ket]
        else:
            ket = vector_from_json(ket, f"{path}.ket")
        if np.linalg.norm(ket) == 0:
            raise ValidationError("zero vector", path=f"{path}.ket")
        m = ket_to_dm(ket)
    else:
        m = matrix_from_json(item, path)
    if m.shape[0] != dim:
        raise ValidationError(f"expected dimension {dim}, got {m.shape[0]}", path=path)
    return kind(m, tol=tol, path=path)


def _system_operator(item, dim, path, tol):
    if isinstance(item, str):
        if item not in NAMED_OPERATORS:
            raise ValidationError(f"unknown operator name {item!r}", path=path)
        m = NAMED_OPERATORS[item]
    else:
        m = matrix_from_json(item, path)
    if m.shape[0] != dim:
        raise ValidationError(f"expected dimension {dim}, got {m.shape[0]}", path=path)
    return Observable(m, tol=tol, path=path)


def _require(d, key, path):
    if not isinstance(d, dict):
        raise ValidationError("expected an object", path=path)
    if key not in d:
        raise ValidationError("missing field", path=f"{path}.{key}" if path else key)
    return d[key]


def _positive_int(v, path):
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ValidationError("expected a positive integer", path=path)
    return v


@dataclass(frozen=True)
class SetupFile:
    setup: MeasurementSetup
    tolerances: Tolerances
    seed: int | None
    source_hash: str


def parse_setup(doc: dict, tol: Tolerances | None = None) -> SetupFile:
    """Build a MeasurementSetup from a parsed setup document.

    ``tol`` overrides any "tolerances" block in the document.
    """
    if not isinstance(doc, dict):
        raise ValidationError("setup must be a JSON object", path="$")
    unknown = set(doc) - {"system", "detector", "lambda", "tolerances", "seed"}
    if unknown:
        raise ValidationError(f"unknown keys {sorted(unknown)}", path="$")
    if tol is None:
        tol = Tolerances.from_dict(doc.get("tolerances"))

    sys_ = _require(doc, "system", "")
    d_sys = _positive_int(_require(sys_, "dim", "system"), "system.dim")
    rho_i = _state(_require(sys_, "rho_i", "system"), d_sys, "system.rho_i", tol, DensityMatrix)
    E_f = _state(_require(sys_, "E_f", "system"), d_sys, "system.E_f", tol, PovmElement)
    A = _system_operator(_require(sys_, "A", "system"), d_sys, "system.A", tol)

    det = _require(doc, "detector", "")
    if not isinstance(det, dict):
        raise ValidationError("expected an object", path="detector")
    if "oscillator_dim" in det:
        d_det = _positive_int(det["oscillator_dim"], "detector.oscillator_dim")
        if d_det < 2:
            raise ValidationError("oscillator dimension must be >= 2", path="detector.oscillator_dim")
        osc = oscillator_operators(d_det)
    elif "dim" in det:
        d_det = _positive_int(det["dim"], "detector.dim")
        osc = None
    else:
        raise ValidationError("need dim or oscillator_dim", path="detector")

    def det_operator(key):
        item = _require(det, key, "detector")
        path = f"detector.{key}"
        if isinstance(item, str):
            if item not in ("oscillator_q", "oscillator_p"):
                raise ValidationError(f"unknown operator name {item!r}", path=path)
            if osc is None:
                raise ValidationError(f"{item} needs detector.oscillator_dim", path=path)
            m = osc[0].matrix if item == "oscillator_q" else osc[1].matrix
        else:
            m = matrix_from_json(item, path)
        if m.shape[0] != d_det:
            raise ValidationError(f"expected dimension {d_det}, got {m.shape[0]}", path=path)
        return Observable(m, tol=tol, path=path)

    if "named_state" in det:
        name = det["named_state"]
        path = "detector.named_state"
        if name == "ground":
            n = 0
        elif isinstance(name, str) and name.startswith("fock:"):
            try:
                n = int(name[5:])
            except ValueError:
                raise ValidationError(f"bad Fock label {name!r}", path=path) from None
        else:
            raise ValidationError(f"unknown state {name!r}; use 'ground' or 'fock:n'", path=path)
        rho_det = fock_state(d_det, n)
    else:
        rho_det = _state(_require(det, "rho_det", "detector"), d_det, "detector.rho_det", tol, DensityMatrix)

    lam = _require(doc, "lambda", "")
    if isinstance(lam, bool) or not isinstance(lam, (int, float)) or not math.isfinite(lam):
        raise ValidationError("expected a finite number", path="lambda")
    seed = doc.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise ValidationError("expected an integer", path="seed")

    setup = MeasurementSetup(rho_i, E_f, A, rho_det, det_operator("q"), det_operator("o"), float(lam))
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return SetupFile(setup, tol, seed, hashlib.sha256(canon.encode()).hexdigest())


def load_json(path, what: str = "file") -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}", path=what) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", path=what) from None


def load_setup(path, tol: Tolerances | None = None) -> SetupFile:
    return parse_setup(load_json(path, "setup"), tol)


def load_tolerances(path) -> Tolerances:
    doc = load_json(path, "tolerance_file")
    if not isinstance(doc, dict):
        raise ValidationError("expected an object", path="tolerance_file")
    return Tolerances.from_dict(doc.get("tolerances", doc))


# -- output ------------------------------------------------------------------------

def format_float(x: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return "0" if x == 0 else "%.17g" % x


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits.

    Non-finite floats become null.
    """
    pad = " " * indent

    def enc(o, level):
        if o is None or isinstance(o, bool):
            return json.dumps(o)
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            o = float(o)
            return format_float(o) if math.isfinite(o) else "null"
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, complex):
            return enc([o.real, o.imag], level)
        if isinstance(o, np.ndarray):
            return enc(o.tolist(), level)
        inner = pad * (level + 1)
        close = pad * level
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{inner}{json.dumps(str(k))}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + close + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in o):
                return "[" + ", ".join(enc(v, level + 1) for v in o) + "]"
            return "[\n" + ",\n".join(inner + enc(v, level + 1) for v in o) + "\n" + close + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(obj, 0) + "\n"


def config_hash(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(json.dumps(p, sort_keys=True, default=str).encode())
        h.update(b"\0")
    return h.hexdigest()


def result_document(command: str, payload: dict, config: str, timestamp: str | None = None) -> dict:
    if timestamp is None:
        timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return {
        "tool": "wmopt",
        "version": __version__,
        "command": command,
        "config_hash": config,
        "timestamp": timestamp,
        "result": payload,
    }


def tolerances_to_json(tol: Tolerances = DEFAULT_TOL) -> dict:
    return {k: getattr(tol, k) for k in Tolerances.__dataclass_fields__}
