"""Versioned JSON persistence of fitted models.

Floats are written with ``repr`` (shortest round-trip form), so a load
reproduces every number bit for bit.  Non-finite floats are stored as the
strings ``"inf"``, ``"-inf"`` and ``"nan"``.  See ``docs/model_format.md``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .core import (AdditiveModel, Affine, CategoryTable, InteractionSurface, PiecewiseLinear,
                   ShapeFunction, SplineCurve, StepFunction, TaskKind)

ADDITIVE_FORMAT = "gamlab-additive-model"
TREE_FORMAT = "gamlab-tree-model"
FORMAT_VERSION = 1

_NONFINITE = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}


def _num(v):
    v = float(v)
    if math.isfinite(v):
        return v
    return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")


def _arr(a) -> list:
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        return _num(a)
    return [_arr(x) if a.ndim > 1 else _num(x) for x in a]


def _unnum(v) -> float:
    return _NONFINITE[v] if isinstance(v, str) else float(v)


def _unarr(v) -> np.ndarray:
    def walk(x):
        return [walk(y) for y in x] if isinstance(x, list) else _unnum(x)
    return np.array(walk(v), dtype=float)


def _plain(v):
    """Metadata made JSON-safe."""
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return _num(v)
    if v is None or isinstance(v, str):
        return v
    return str(v)


def _repr_to_dict(r) -> dict:
    if isinstance(r, SplineCurve):
        return {"type": "spline", "knots": _arr(r.knots), "coefficients": _arr(r.coefficients),
                "degree": int(r.degree)}
    if isinstance(r, StepFunction):
        return {"type": "step", "edges": _arr(r.edges), "values": _arr(r.values)}
    if isinstance(r, PiecewiseLinear):
        return {"type": "piecewise_linear", "x": _arr(r.x), "y": _arr(r.y)}
    if isinstance(r, CategoryTable):
        return {"type": "category", "levels": list(r.levels), "values": _arr(r.values)}
    if isinstance(r, Affine):
        return {"type": "affine", "slope": _num(r.slope), "shift": _num(r.shift),
                "domain": [_num(r.domain[0]), _num(r.domain[1])]}
    raise TypeError(f"cannot serialize {type(r).__name__}")


def _repr_from_dict(d: dict):
    t = d["type"]
    if t == "spline":
        return SplineCurve(_unarr(d["knots"]), _unarr(d["coefficients"]), int(d["degree"]))
    if t == "step":
        return StepFunction(_unarr(d["edges"]), _unarr(d["values"]))
    if t == "piecewise_linear":
        return PiecewiseLinear(_unarr(d["x"]), _unarr(d["y"]))
    if t == "category":
        return CategoryTable(tuple(d["levels"]), _unarr(d["values"]))
    if t == "affine":
        return Affine(_unnum(d["slope"]), _unnum(d["shift"]),
                      (_unnum(d["domain"][0]), _unnum(d["domain"][1])))
    raise ValueError(f"unknown shape representation {t!r}")


def model_to_dict(model) -> dict:
    from .baselines import TreeModel
    if isinstance(model, TreeModel):
        return {"format": TREE_FORMAT, "version": FORMAT_VERSION, "task": model.task.value,
                "feature_names": list(model.feature_names),
                "feature": [int(v) for v in model.feature], "threshold": _arr(model.threshold),
                "left": [int(v) for v in model.left], "right": [int(v) for v in model.right],
                "value": _arr(model.value), "metadata": _plain(model.metadata)}
    if not isinstance(model, AdditiveModel):
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return {
        "format": ADDITIVE_FORMAT, "version": FORMAT_VERSION,
        "family": model.family.value, "link": model.link.value,
        "intercept": _num(model.intercept), "feature_names": list(model.feature_names),
        "shapes": [{"feature": s.feature, "columns": list(s.columns),
                    "mean_offset": _num(s.mean_offset), "repr": _repr_to_dict(s.repr)}
                   for s in model.shapes],
        "interactions": [{"features": list(t.features), "edges": [_arr(e) for e in t.edges],
                          "values": _arr(t.values), "mean_offset": _num(t.mean_offset)}
                         for t in model.interactions],
        "metadata": _plain(model.metadata),
    }


def model_from_dict(d: dict):
    fmt, version = d.get("format"), d.get("version")
    if fmt not in (ADDITIVE_FORMAT, TREE_FORMAT):
        raise ValueError(f"unknown model format {fmt!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported {fmt} version {version!r} (expected {FORMAT_VERSION})")
    if fmt == TREE_FORMAT:
        from .baselines import TreeModel
        return TreeModel(np.array(d["feature"], dtype=int), _unarr(d["threshold"]),
                         np.array(d["left"], dtype=int), np.array(d["right"], dtype=int),
                         _unarr(d["value"]), TaskKind(d["task"]), tuple(d["feature_names"]),
                         d.get("metadata", {}))
    shapes = tuple(ShapeFunction(s["feature"], tuple(s["columns"]), _repr_from_dict(s["repr"]),
                                 _unnum(s["mean_offset"])) for s in d["shapes"])
    inter = tuple(InteractionSurface(tuple(t["features"]),
                                     (_unarr(t["edges"][0]), _unarr(t["edges"][1])),
                                     _unarr(t["values"]), _unnum(t["mean_offset"]))
                  for t in d["interactions"])
    return AdditiveModel(_unnum(d["intercept"]), shapes, inter, d["link"], d["family"],
                         tuple(d["feature_names"]), d.get("metadata", {}))


def dumps(model) -> str:
    return json.dumps(model_to_dict(model), indent=1, sort_keys=True, allow_nan=False) + "\n"


def loads(text: str):
    return model_from_dict(json.loads(text))


def save_model(model, path) -> None:
    """Write a fitted model, or the model held by a fitted estimator."""
    model = _unwrap(model)
    Path(path).write_text(dumps(model), encoding="utf-8")


def load_model(path):
    return loads(Path(path).read_text(encoding="utf-8"))


def _unwrap(obj: Any):
    for attr in ("model_", "tree_"):
        if hasattr(obj, attr):
            return getattr(obj, attr)
    return obj
