"""JSON manifests with 17-significant-digit floats, CSV tables and model files."""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
import re
from pathlib import Path

import numpy as np

from .green_model import AlgebraElement, AlgebraModel, CheckReport, GreenOperatorModel
from .normal import CliffordNormal
from .numkernel import GradedSpace, InnerProduct

SCHEMA = 1
_TOKEN = "@@f:"
_TOKEN_RE = re.compile(r'"@@f:([^"]*)"')


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    t = "%.17g" % x
    # keep the float type on reload
    return t if any(ch in t for ch in ".e") else t + ".0"


def _plain(obj):
    """Recursively convert to JSON types; finite floats become tokens, complex becomes [re, im]."""
    if isinstance(obj, CheckReport):
        return _plain(obj.as_dict())
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _TOKEN + fmt(obj) if math.isfinite(obj) else fmt(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_plain(float(obj.real)), _plain(float(obj.imag))]
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj, indent: int | None = 1) -> str:
    text = json.dumps(_plain(obj), indent=indent, sort_keys=True)
    return _TOKEN_RE.sub(lambda m: m.group(1), text)


def loads(text: str):
    return json.loads(text)


def config_hash(config: dict) -> str:
    """sha256 of the canonical JSON form (sorted keys, no whitespace)."""
    return hashlib.sha256(dumps(config, indent=None).encode()).hexdigest()


def artifact_version() -> str:
    try:
        from importlib.metadata import version
        return version("artifact")
    except Exception:
        return "0.1.0"


def build_manifest(scenario: str, config: dict, reports: list[CheckReport], tables: dict,
                   timestamp: str | None = None) -> dict:
    return {
        "schema": SCHEMA,
        "scenario": scenario,
        "config": config,
        "config_hash": config_hash(config),
        "version": artifact_version(),
        "timestamp": timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "reports": [r.as_dict() for r in reports],
        "tables": {name: f"{name}.csv" for name in sorted(tables)},
        "passed": all(r["passed"] for r in (x.as_dict() for x in reports) if not r["context"].get("warning")),
    }


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    if isinstance(v, (complex, np.complexfloating)):
        return f"{fmt(v.real)}{'+' if v.imag >= 0 else '-'}{fmt(abs(v.imag))}j"
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def write_bundle(out: Path, manifest: dict, tables: dict) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in tables.items():
        write_csv(out / f"{name}.csv", header, rows)
    p = out / "manifest.json"
    p.write_text(dumps(manifest) + "\n")
    return p


# -- model files --------------------------------------------------------------------

def _mat(a) -> list:
    a = np.asarray(a, dtype=complex)
    return [a.real, a.imag]


def _unmat(v) -> np.ndarray:
    re_, im = v
    return np.asarray(re_, dtype=float) + 1j * np.asarray(im, dtype=float)


def model_to_dict(model: GreenOperatorModel, normal: CliffordNormal | None = None,
                  algebra: AlgebraModel | None = None) -> dict:
    d = {"schema": SCHEMA, "name": model.name, "graded": model.graded, "labels": list(model.labels),
         "G": _mat(model.G), "grading": _mat(model.gamma), "D": _mat(model.D), "R": _mat(model.R),
         "bmetric": _mat(model.bmetric.gram), "nu": _mat(model.nu)}
    if normal is not None:
        d["normal"] = _mat(normal.n)
    if algebra is not None:
        d["algebra"] = [{"name": e.name, "matrix": _mat(e.matrix), "ideal": e.ideal, "degree": e.degree}
                        for e in algebra]
    return d


def model_from_dict(d: dict) -> tuple[GreenOperatorModel, CliffordNormal | None, AlgebraModel | None]:
    for key in ("G", "grading", "D", "R", "bmetric", "nu"):
        if key not in d:
            raise ValueError(f"model file lacks {key!r}")
    space = GradedSpace(InnerProduct(_unmat(d["G"])), _unmat(d["grading"]))
    model = GreenOperatorModel(space, _unmat(d["D"]), _unmat(d["R"]), InnerProduct(_unmat(d["bmetric"])),
                               _unmat(d["nu"]), graded=bool(d.get("graded", True)),
                               labels=tuple(d.get("labels", ())), name=d.get("name", "model"))
    normal = CliffordNormal(_unmat(d["normal"])) if "normal" in d else None
    algebra = None
    if "algebra" in d:
        algebra = AlgebraModel(tuple(AlgebraElement(e["name"], _unmat(e["matrix"]), bool(e.get("ideal", False)),
                                                    int(e.get("degree", 0))) for e in d["algebra"]))
    return model, normal, algebra


def save_model(path, model, normal=None, algebra=None) -> None:
    Path(path).write_text(dumps(model_to_dict(model, normal, algebra), indent=None))


def load_model(path):
    return model_from_dict(loads(Path(path).read_text()))
