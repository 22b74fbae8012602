"""JSON file formats for grid functions, polytopes, masks and valuation specs.

Grid values are stored row-major (last axis fastest) with the string "inf"
for the extended value. Readers reject NaN and any non-finite numeric
literal; -inf never round-trips. Writes go through a temp file and an
atomic rename so a failed command never leaves a partial output.
"""

import json
import os
import tempfile

import numpy as np

from .errors import FormatError
from .grids import ExtGridFn, GridDomain, Polytope, ScanMask
from .valuations import Composite, Constant, HessianDensity, PairingMeasure


def _reject_constant(name):
    raise FormatError(f"non-finite literal {name!r} is not allowed")


def loads(text: str):
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as err:
        raise FormatError(f"invalid JSON: {err}") from err


def load_json(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def dump_text_atomic(text: str, path):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json_atomic(obj, path):
    dump_text_atomic(json.dumps(obj, sort_keys=True), path)


def _domain_to_dict(domain: GridDomain):
    return {"lo": [float(v) for v in domain.lo],
            "hi": [float(v) for v in domain.hi],
            "shape": [int(s) for s in domain.shape]}


def _domain_from_dict(obj):
    try:
        return GridDomain(obj["lo"], obj["hi"], obj["shape"])
    except (KeyError, TypeError) as err:
        raise FormatError(f"bad domain record: {err}") from err


def _encode_value(v):
    return "inf" if np.isposinf(v) else float(v)


def _decode_value(v):
    if v == "inf":
        return np.inf
    if isinstance(v, (int, float)):
        v = float(v)
        if not np.isfinite(v):
            raise FormatError("non-finite numeric value in grid file")
        return v
    raise FormatError(f"bad grid value {v!r}")


def save_grid_fn(f: ExtGridFn, path):
    obj = {"domain": _domain_to_dict(f.domain),
           "values": [_encode_value(v) for v in f.values.ravel()]}
    dump_json_atomic(obj, path)


def load_grid_fn(path) -> ExtGridFn:
    obj = load_json(path)
    if not isinstance(obj, dict) or "domain" not in obj or "values" not in obj:
        raise FormatError("grid file needs 'domain' and 'values'")
    domain = _domain_from_dict(obj["domain"])
    values = np.array([_decode_value(v) for v in obj["values"]])
    if values.size != domain.size:
        raise FormatError("value count does not match the domain shape")
    try:
        return ExtGridFn(domain, values)
    except ValueError as err:
        raise FormatError(str(err)) from err


def save_polytope(K: Polytope, path):
    dump_json_atomic({"vertices": [[float(v) for v in row]
                                   for row in K.vertices]}, path)


def load_polytope(path) -> Polytope:
    obj = load_json(path)
    if not isinstance(obj, dict) or "vertices" not in obj:
        raise FormatError("polytope file needs 'vertices'")
    try:
        return Polytope(np.asarray(obj["vertices"], dtype=float))
    except (TypeError, ValueError) as err:
        raise FormatError(f"bad polytope: {err}") from err


def save_mask(mask: ScanMask, path):
    dump_json_atomic({"domain": _domain_to_dict(mask.domain),
                      "marked": [int(v) for v in mask.marked.ravel()]}, path)


def load_mask(path) -> ScanMask:
    obj = load_json(path)
    if not isinstance(obj, dict) or "domain" not in obj or "marked" not in obj:
        raise FormatError("mask file needs 'domain' and 'marked'")
    domain = _domain_from_dict(obj["domain"])
    marked = np.array(obj["marked"], dtype=int)
    if marked.size != domain.size or not np.all((marked == 0) | (marked == 1)):
        raise FormatError("marked must be a flat 0/1 list matching the domain")
    return ScanMask(domain, marked.astype(bool))


def save_valuation_spec(spec, path):
    """Writes pairing, constant and hessian specs; hessian weights are stored
    next to the spec file, composite terms reference already-saved files."""
    base = os.path.splitext(os.path.basename(path))[0]
    directory = os.path.dirname(os.path.abspath(path))
    if isinstance(spec, PairingMeasure):
        obj = {"kind": "pairing",
               "nodes": [[float(v) for v in row] for row in spec.nodes],
               "weights": [float(w) for w in spec.weights]}
    elif isinstance(spec, Constant):
        obj = {"kind": "constant", "value": float(spec.value)}
    elif isinstance(spec, HessianDensity):
        weight_name = base + ".weight.json"
        save_grid_fn(spec.weight, os.path.join(directory, weight_name))
        obj = {"kind": "hessian", "k": spec.order, "weight": weight_name,
               "aux": [np.asarray(a).tolist() for a in spec.aux]}
    else:
        raise TypeError("only pairing, constant and hessian specs are saved here")
    dump_json_atomic(obj, path)


def load_valuation_spec(path, check: bool = True):
    """Load a valuation spec; relative references resolve against the file.

    With check=True (the default) pairing weights must satisfy both moment
    conditions at 1e-10; violating specs are refused.
    """
    obj = load_json(path)
    directory = os.path.dirname(os.path.abspath(path))
    return _spec_from_dict(obj, directory, check)


def _spec_from_dict(obj, directory, check):
    if not isinstance(obj, dict) or "kind" not in obj:
        raise FormatError("valuation spec needs a 'kind'")
    kind = obj["kind"]
    if kind == "pairing":
        try:
            return PairingMeasure(obj["nodes"], obj["weights"], check=check)
        except KeyError as err:
            raise FormatError(f"pairing spec missing {err}") from err
    if kind == "constant":
        if "value" not in obj:
            raise FormatError("constant spec missing 'value'")
        return Constant(float(obj["value"]))
    if kind == "hessian":
        try:
            weight = load_grid_fn(os.path.join(directory, obj["weight"]))
            return HessianDensity(obj["k"], weight, obj.get("aux", ()))
        except KeyError as err:
            raise FormatError(f"hessian spec missing {err}") from err
    if kind == "composite":
        terms = obj.get("terms")
        if not isinstance(terms, list):
            raise FormatError("composite spec needs a 'terms' list")
        loaded = []
        for item in terms:
            if not (isinstance(item, list) and len(item) == 2):
                raise FormatError("composite terms are [coefficient, file] pairs")
            coef, ref = item
            sub = load_valuation_spec(os.path.join(directory, ref), check)
            loaded.append((float(coef), sub))
        return Composite(loaded)
    raise FormatError(f"unknown valuation kind {kind!r}")
