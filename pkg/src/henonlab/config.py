"""Experiment configuration: strict schema, defaults, and feasibility checks."""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from pathlib import Path

from . import core

SCHEMA_VERSION = 1

_NUM = (int, float)

# section -> field -> (accepted types, default); a tuple default of None means required
SECTIONS = {
    "census": {
        "n_max": (int, 4),
        "tol": (_NUM, 1e-10),
        "grid": (int, 0),
        "slack": (int, 0),
    },
    "slice": {
        "kind": (str, "unstable"),
        "saddle_period": (int, 1),
        "saddle_index": (int, 0),
        "center": (list, None),
        "tangent": (list, None),
        "radius": (_NUM, 2.0),
        "resolution": (int, 256),
        "tol": (_NUM, 1e-8),
        "refine": (int, 0),
        "normalize": (bool, True),
    },
    "homoclinic": {
        "saddle_period": (int, 1),
        "saddle_index": (int, 0),
        "annulus": (list, None),
        "angular_steps": (int, 64),
        "radial_steps": (int, 48),
        "max_land": (int, 12),
        "transversality_floor": (_NUM, 1e-3),
    },
    "shadow": {
        "saddle_period": (int, 1),
        "saddle_index": (int, 0),
        "annulus": (list, None),
        "angular_steps": (int, 64),
        "homoclinic_index": (int, 0),
        "N_min": (int, 3),
        "N_max": (int, 15),
        "max_land": (int, 12),
        "tol": (_NUM, 1e-10),
    },
    "lyapunov": {
        "n_max": (int, 6),
        "ensemble_size": (int, 32),
        "spectrum": (bool, True),
    },
    "render": {
        "center": (list, [[0.0, 0.0], [0.0, 0.0]]),
        "u": (list, [[1.0, 0.0], [0.0, 0.0]]),
        "v": (list, [[0.0, 1.0], [0.0, 0.0]]),
        "radius": (_NUM, 3.0),
        "resolution": (int, 256),
        "cap": (int, 128),
    },
}

TOP = {"map", "out", "seed", "threads", "precision"} | set(SECTIONS)
SUBCOMMANDS = ("census", "slice", "homoclinic", "shadow", "lyapunov", "render")


class ConfigError(ValueError):
    def __init__(self, errors):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


def _type_ok(value, types):
    if isinstance(value, bool) and types is not bool:
        return False
    return isinstance(value, types)


def _c2(value, where, errors):
    try:
        if not isinstance(value, list) or len(value) != 2:
            raise ValueError(f"{where}: expected [[re, im], [re, im]]")
        return [core._complex(v, f"{where}[{i}]") for i, v in enumerate(value)]
    except ValueError as exc:
        errors.append(str(exc))
        return None


def config_errors(data):
    """Every schema violation, each with its field path."""
    errors = []
    if not isinstance(data, dict):
        return ["config: expected a table"]
    for key in data:
        if key not in TOP:
            errors.append(f"{key}: unknown field")
    if "map" not in data:
        errors.append("map: required field missing")
    else:
        errors.extend(core.map_errors(data["map"]))
    if "seed" in data and (not _type_ok(data["seed"], int) or not 0 <= data["seed"] < 2 ** 64):
        errors.append("seed: expected an unsigned 64-bit integer")
    if "threads" in data and (not _type_ok(data["threads"], int) or data["threads"] < 0):
        errors.append("threads: expected a nonnegative integer (0 = all cores)")
    if "precision" in data and data["precision"] not in ("double", "extended"):
        errors.append("precision: expected 'double' or 'extended'")
    if "out" in data and not isinstance(data["out"], str):
        errors.append("out: expected a path string")
    for sec, fields in SECTIONS.items():
        if sec not in data:
            continue
        body = data[sec]
        if not isinstance(body, dict):
            errors.append(f"{sec}: expected a table")
            continue
        for key, value in body.items():
            if key not in fields:
                errors.append(f"{sec}.{key}: unknown field")
                continue
            types = fields[key][0]
            if not _type_ok(value, types):
                name = types.__name__ if isinstance(types, type) else "number"
                errors.append(f"{sec}.{key}: expected {name}")
        errors.extend(_section_checks(sec, body))
    return errors


def _section_checks(sec, body):
    errors = []

    def positive(key, strict=True):
        v = body.get(key)
        if _type_ok(v, _NUM) and (v <= 0 if strict else v < 0):
            errors.append(f"{sec}.{key}: must be {'positive' if strict else 'nonnegative'}")

    for key in ("n_max", "tol", "radius", "resolution", "saddle_period", "angular_steps",
                "radial_steps", "max_land", "N_min", "N_max", "cap", "ensemble_size"):
        positive(key)
    for key in ("grid", "slack", "saddle_index", "refine", "homoclinic_index"):
        positive(key, strict=False)
    if sec == "slice":
        if body.get("kind", "unstable") not in ("unstable", "affine"):
            errors.append("slice.kind: expected 'unstable' or 'affine'")
        if _type_ok(body.get("resolution"), int) and body["resolution"] < 16:
            errors.append("slice.resolution: must be at least 16")
        for key in ("center", "tangent"):
            if key in body:
                _c2(body[key], f"slice.{key}", errors)
        if body.get("kind") == "affine" and ("center" not in body or "tangent" not in body):
            errors.append("slice: affine slices need center and tangent")
    if sec == "render":
        for key in ("center", "u", "v"):
            if key in body:
                _c2(body[key], f"render.{key}", errors)
    if sec in ("homoclinic", "shadow") and "annulus" in body:
        ann = body["annulus"]
        if (not isinstance(ann, list) or len(ann) != 2
                or not all(_type_ok(v, _NUM) for v in ann) or not 0 < ann[0] < ann[1]):
            errors.append(f"{sec}.annulus: expected [r1, r2] with 0 < r1 < r2")
    if sec == "shadow" and all(_type_ok(body.get(k), int) for k in ("N_min", "N_max")):
        if body["N_min"] > body["N_max"]:
            errors.append("shadow.N_min: must not exceed shadow.N_max")
    return errors


def resolve(data):
    """Validated config with every default filled in."""
    errors = config_errors(data)
    if errors:
        raise ConfigError(errors)
    cfg = copy.deepcopy(data)
    cfg.setdefault("seed", 0)
    cfg.setdefault("threads", 0)
    cfg.setdefault("precision", "double")
    for sec, fields in SECTIONS.items():
        body = cfg.setdefault(sec, {})
        for key, (_, default) in fields.items():
            if key not in body and default is not None:
                body[key] = copy.deepcopy(default)
    return cfg


def load(path):
    return core.read_table(Path(path))


def config_hash(cfg):
    """Hash of the numerically relevant configuration (threads and out excluded)."""
    keep = {k: v for k, v in cfg.items() if k not in ("threads", "out")}
    blob = json.dumps(keep, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def thread_count(cfg):
    return cfg.get("threads") or os.cpu_count() or 1


def feasibility_warnings(cfg):
    """Non-fatal concerns, such as shadow periods beyond the double-precision budget."""
    warnings = []
    fmap = core.map_from_dict(cfg["map"])
    if "shadow" in cfg:
        from . import periodic

        sh = {k: v for k, (_, v) in SECTIONS["shadow"].items()}
        sh.update(cfg["shadow"])
        saddles = [o for o in periodic.find_periodic(fmap, sh["saddle_period"]) if o.is_saddle]
        if saddles:
            lam = abs(saddles[min(sh["saddle_index"], len(saddles) - 1)].lambda_u)
            n_est = 2 * sh["N_max"] * sh["saddle_period"] + sh["max_land"]
            bits = n_est * math.log(lam) / sh["saddle_period"] / math.log(2)
            if bits > 120 and cfg.get("precision", "double") != "extended":
                warnings.append(
                    f"shadow.N_max: periods up to {n_est} give |lambda_u| near 2^{bits:.0f}, "
                    "beyond the double-precision budget of 2^120; use precision = 'extended'")
        else:
            warnings.append("shadow: no saddle of the requested period was found")
    if "slice" in cfg and cfg["slice"].get("resolution", 0) > 4096:
        warnings.append("slice.resolution: above 4096 the grid needs more than 16M Green evaluations")
    if "census" in cfg and cfg["census"].get("n_max", 0) > 12:
        warnings.append("census.n_max: above 12 the cyclic Newton systems get large")
    return warnings
