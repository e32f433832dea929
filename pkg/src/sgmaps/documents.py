"""JSON documents for regions, vertical specs, job configs and reports.

Polynomials are given either as term lists
(``{"nvars": 2, "terms": [{"coeff": 1.0, "exps": [2, 0]}, ...]}``) or as
expression strings parsed with sympy. Expression variables are ``x1..xn``
for region polynomials, ``y1..yk`` for the vertical polynomial and ``t`` for
the univariate one.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import sympy

from .construct import VerticalSpec
from .polynomial import MultiPoly, UniPoly
from .region import Region

DEFAULT_RESOLUTIONS = {"grid": 256, "mesh": 64, "sweep": 256, "samples": 1000}
RESOLUTION_BOUNDS = {"grid": (16, 4096), "mesh": (16, 256), "sweep": (64, 8192), "samples": (8, 10**6)}


class DocumentError(ValueError):
    """Malformed or inconsistent input document."""


def clean(obj: Any) -> Any:
    """Plain JSON values: numpy scalars unwrapped, non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj: Any) -> str:
    """Deterministic text: keys keep insertion order, two-space indent, trailing newline."""
    return json.dumps(clean(obj), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write(obj: Any, path) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def _symbols(prefix: str, count: int):
    return sympy.symbols(f"{prefix}1:{count + 1}")


def parse_expression(text: str, symbols) -> MultiPoly:
    names = {str(s): s for s in symbols}
    try:
        expr = sympy.sympify(text, locals=names)
        poly = sympy.Poly(expr, *symbols)
    except (sympy.SympifyError, sympy.PolynomialError, TypeError) as exc:
        raise DocumentError(f"cannot parse polynomial {text!r}: {exc}") from None
    terms = {}
    for exps, coeff in poly.terms():
        if not coeff.is_real:
            raise DocumentError(f"non-real coefficient in {text!r}")
        terms[tuple(int(e) for e in exps)] = float(coeff)
    return MultiPoly(len(symbols), terms)


def poly_from(doc, prefix: str, nvars: int) -> MultiPoly:
    if isinstance(doc, str):
        return parse_expression(doc, _symbols(prefix, nvars))
    if isinstance(doc, dict):
        try:
            p = MultiPoly.from_doc(doc)
        except (KeyError, TypeError, ValueError) as exc:
            raise DocumentError(f"bad polynomial document: {exc}") from None
        if p.nvars != nvars:
            raise DocumentError(f"polynomial has {p.nvars} variables, expected {nvars}")
        return p
    raise DocumentError("a polynomial must be an expression string or a term document")


def unipoly_from(doc) -> UniPoly:
    if isinstance(doc, str):
        t = sympy.Symbol("t")
        p = parse_expression(doc, (t,))
        coeffs = [0.0] * (max(p.degree, 0) + 1)
        for (e,), c in p.items():
            coeffs[e] = c
        return UniPoly(coeffs)
    if isinstance(doc, dict) and "coeffs" in doc:
        return UniPoly.from_doc(doc)
    if isinstance(doc, list):
        return UniPoly(doc)
    raise DocumentError("f0 must be an expression in t, a coefficient list or {\"coeffs\": [...]}")


def region_from_doc(doc: dict) -> Region:
    try:
        dim = int(doc["dim"])
        polys = [poly_from(p, "x", dim) for p in doc["boundary_polys"]]
        bbox = doc["bbox"]
        return Region(dim, tuple(polys), tuple(bbox["min"]), tuple(bbox["max"]),
                      int(doc.get("grid_res", DEFAULT_RESOLUTIONS["grid"])))
    except KeyError as exc:
        raise DocumentError(f"region document is missing {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DocumentError):
            raise
        raise DocumentError(f"bad region document: {exc}") from None


def region_to_doc(r: Region) -> dict:
    return {
        "dim": r.dim,
        "boundary_polys": [p.to_doc() for p in r.boundary_polys],
        "bbox": {"min": list(r.bbox_min), "max": list(r.bbox_max)},
        "grid_res": r.grid_res,
    }


def vertical_from_doc(doc: dict, k: int) -> VerticalSpec:
    try:
        T = doc.get("T", "auto")
        T = None if T in (None, "auto") else float(T)
        return VerticalSpec(unipoly_from(doc["f0"]), poly_from(doc["fvert"], "y", k), float(doc["a"]), T)
    except KeyError as exc:
        raise DocumentError(f"vertical spec is missing {exc}") from None


def vertical_to_doc(spec: VerticalSpec) -> dict:
    return {
        "f0": spec.f0.to_doc(),
        "fvert": spec.fvert.to_doc(),
        "a": spec.a,
        "T": "auto" if spec.T is None else spec.T,
    }


@dataclass
class JobConfig:
    region: Region
    k: int
    vertical: VerticalSpec | None = None
    resolutions: dict = field(default_factory=lambda: dict(DEFAULT_RESOLUTIONS))
    seed: int = 0
    source: Path | None = None

    def to_doc(self) -> dict:
        return {
            "region": region_to_doc(self.region),
            "k": self.k,
            "vertical": None if self.vertical is None else vertical_to_doc(self.vertical),
            "resolutions": dict(self.resolutions),
            "seed": self.seed,
        }


def _sub_document(value, base: Path):
    """Inline object, or a path (relative to the config file) to one."""
    if isinstance(value, str):
        path = (base / value) if not Path(value).is_absolute() else Path(value)
        if not path.is_file():
            raise DocumentError(f"referenced file {path} does not exist")
        return json.loads(path.read_text(encoding="utf-8"))
    return value


def load_config(path) -> JobConfig:
    path = Path(path)
    if not path.is_file():
        raise DocumentError(f"config file {path} does not exist")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: {exc}") from None
    return config_from_doc(doc, path.parent, path)


def config_from_doc(doc: dict, base: Path = Path("."), source: Path | None = None) -> JobConfig:
    if "region" not in doc:
        raise DocumentError("config needs a 'region'")
    region = region_from_doc(_sub_document(doc["region"], base))
    k = doc.get("k", 1)
    if not isinstance(k, int) or k < 1:
        raise DocumentError("k must be an integer >= 1")
    vertical = None
    if doc.get("vertical") is not None:
        vertical = vertical_from_doc(_sub_document(doc["vertical"], base), k)
    res = dict(DEFAULT_RESOLUTIONS)
    res.update(doc.get("resolutions", {}))
    unknown = set(res) - set(DEFAULT_RESOLUTIONS)
    if unknown:
        raise DocumentError(f"unknown resolutions {sorted(unknown)}")
    check_resolutions(res)
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise DocumentError("seed must be a non-negative integer")
    return JobConfig(region, k, vertical, res, seed, source)


def check_resolutions(res: dict) -> None:
    for key, (lo, hi) in RESOLUTION_BOUNDS.items():
        v = res[key]
        if not isinstance(v, int) or not lo <= v <= hi:
            raise DocumentError(f"resolution {key}={v!r} outside [{lo}, {hi}]")


def read_csv_points(path) -> np.ndarray:
    """One point per line, comma-separated coordinates; blank lines and ``#`` comments skipped."""
    path = Path(path)
    if not path.is_file():
        raise DocumentError(f"sample file {path} does not exist")
    rows = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError:
            raise DocumentError(f"{path}:{lineno}: not a comma-separated row of numbers") from None
    if not rows:
        raise DocumentError(f"{path} has no samples")
    if len({len(r) for r in rows}) != 1:
        raise DocumentError(f"{path}: rows have different lengths")
    return np.array(rows)
