"""JSON and CSV emission with 17 significant digits, and the report schemas.

Non-finite floats are written as the strings ``"inf"``, ``"-inf"`` and
``"nan"`` so that every document stays valid JSON.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Iterable, Mapping

import jsonschema
import numpy as np


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _emit(obj, out: list, indent: int, level: int):
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        s = fmt_float(obj)
        out.append(s if math.isfinite(obj) else json.dumps(s))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            out.append(("," if i else "") + pad + json.dumps(k) + ": ")
            _emit(v, out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list)) for v in obj):
            out.append("[")
            for i, v in enumerate(obj):
                if i:
                    out.append(", ")
                _emit(v, out, indent, level + 1)
            out.append("]")
            return
        out.append("[")
        for i, v in enumerate(obj):
            out.append(("," if i else "") + pad)
            _emit(v, out, indent, level + 1)
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    out: list[str] = []
    _emit(_plain(obj), out, indent, 0)
    return "".join(out) + "\n"


def write_csv(rows: Iterable[Mapping], columns: list[str], fh=None) -> str | None:
    """Write ``rows`` as CSV; returns the text when ``fh`` is None."""
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        cells = []
        for c in columns:
            v = row[c]
            if isinstance(v, (float, np.floating)):
                cells.append(fmt_float(v))
            elif isinstance(v, (bool, np.bool_)):
                cells.append("true" if v else "false")
            else:
                cells.append("" if v is None else str(v))
        w.writerow(cells)
    return buf.getvalue() if fh is None else None


# schemas ---------------------------------------------------------------------

NUMBER = {"anyOf": [{"type": "number"}, {"enum": ["inf", "-inf", "nan"]}]}
NUMBER_OR_NULL = {"anyOf": [NUMBER, {"type": "null"}]}
NUMBERS = {"type": "array", "items": NUMBER}
STRINGS = {"type": "array", "items": {"type": "string"}}
VERDICTS = {"type": "array",
            "items": {"enum": ["dominated", "violated", "inconclusive", "unevaluable"]}}


def _obj(required: dict, optional: dict | None = None) -> dict:
    props = dict(required)
    props.update(optional or {})
    return {"type": "object", "required": sorted(required), "properties": props}


SCHEMAS = {
    "bounds": _obj(
        {"kind": {"const": "bounds"}, "C": NUMBER, "p": NUMBER, "q": NUMBER, "r0": NUMBER,
         "r1": NUMBER, "n": {"type": "integer"}, "N": {"type": "integer"}, "lip": NUMBER,
         "regimes": {"type": "object"}, "flags": {"type": "object"},
         "not_applicable": {"type": "object"}},
        {k: NUMBER_OR_NULL for k in ("C_N", "gamma_n", "gamma_prime_n", "tau_n", "tau_prime_n",
                                     "c_infty", "c_prime_infty")},
    ),
    "tail": _obj(
        {"kind": {"const": "tail"}, "t": NUMBERS, "p_hat": NUMBERS, "ci_lo": NUMBERS,
         "ci_hi": NUMBERS, "bound": NUMBERS, "verdict": VERDICTS, "kappa": NUMBER,
         "kappa_source": {"type": "string"}, "centering": {"enum": ["replicate_mean", "exact"]},
         "centre": NUMBER, "sigma_hat": NUMBER, "replicates": {"type": "integer"},
         "experiment": {"type": "object"}, "confidence": NUMBER, "flags": {"type": "object"}},
    ),
    "laplace": _obj(
        {"kind": {"const": "laplace"}, "t": NUMBERS, "lhs": NUMBERS, "se": NUMBERS,
         "rhs": NUMBERS, "verdict": VERDICTS, "kappa": NUMBER, "kappa_source": {"type": "string"},
         "centering": {"enum": ["replicate_mean", "exact"]}, "centre": NUMBER,
         "sigma_hat": NUMBER, "replicates": {"type": "integer"},
         "experiment": {"type": "object"}, "flags": {"type": "object"}},
    ),
    "laplace_t1": _obj(
        {"kind": {"const": "laplace_t1"}, "C": NUMBER, "lips": NUMBERS, "t_grid": NUMBERS,
         "lhs": {"type": "array"}, "rhs": {"type": "array"}, "slack": {"type": "array"},
         "pass": {"type": "array"}, "unevaluable": {"type": "array"}},
    ),
    "bias": _obj(
        {"kind": {"const": "bias"}, "depth": {"type": "integer"}, "replicates": {"type": "integer"},
         "mean_hat": NUMBER, "mean_se": NUMBER, "pi_hat": NUMBER, "pi_se": NUMBER,
         "w1_nu_pi": NUMBER, "bound": NUMBER, "bias_hat": NUMBER, "allowance": NUMBER,
         "verdict": {"enum": ["dominated", "violated"]}},
        {"pi_exact": NUMBER_OR_NULL, "bias_exact": NUMBER_OR_NULL,
         "allowance_exact": NUMBER_OR_NULL,
         "verdict_exact": {"enum": ["dominated", "violated", None]}},
    ),
    "contraction": _obj(
        {"kind": {"const": "contraction"}, "steps": {"type": "integer"}, "x": NUMBER,
         "x_tilde": NUMBER, "draws": {"type": "integer"}, "ratio": NUMBER,
         "coupling_ratio": NUMBER, "halfwidth": NUMBER, "bound": NUMBER,
         "verdict": {"enum": ["dominated", "violated", "inconclusive"]}},
    ),
    "nw_fit": _obj(
        {"kind": {"const": "nw_fit"}, "alpha": NUMBER, "h": NUMBER, "n": {"type": "integer"},
         "count": {"type": "integer"}, "kernel": {"type": "string"},
         "target": {"enum": ["f0", "f1", "transition"]},
         "seed": {"anyOf": [{"type": "array", "items": {"type": "integer"}}, {"type": "null"}]}},
        {"normalization": {"type": "string"}, "grid": NUMBERS, "f0hat": NUMBERS,
         "f1hat": NUMBERS, "Dtilde": NUMBERS, "defined": {"type": "array"}},
    ),
    "simulate": _obj(
        {"kind": {"const": "simulate"}, "depth": {"type": "integer"},
         "replicates": {"type": "integer"}, "master_seed": {"type": "integer"},
         "tree_mean": NUMBERS, "generation_mean": NUMBERS},
    ),
    "wasserstein": _obj({"kind": {"const": "wasserstein"}, "p": NUMBER, "value": NUMBER}),
}

SCHEMAS["concentration"] = _obj(
    {"kind": {"const": "concentration"}, "check": {"enum": ["tail", "laplace", "bias", "contraction"]},
     "reports": {"type": "array", "items": {"type": "object", "required": ["kind"]}}},
)


class SchemaError(ValueError):
    pass


def validate(doc: dict) -> dict:
    """Validate ``doc`` (and any nested reports) against the schema named by its ``kind``."""
    kind = doc.get("kind") if isinstance(doc, dict) else None
    if kind not in SCHEMAS:
        raise SchemaError(f"unknown or missing report kind {kind!r}")
    try:
        jsonschema.validate(doc, SCHEMAS[kind])
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"{kind}: {exc.message}") from exc
    for sub in doc.get("reports", []):
        validate(sub)
    return doc


def loads(text: str) -> dict:
    return validate(json.loads(text))
