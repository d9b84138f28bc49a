"""CSV point files and JSON reports.

A point file holds one point per row as comma-separated decimals, preceded
by ``# key=value`` header comments::

    # space=sphere:dim=2,scale=1.0
    # encoding=ambient
    # weights=1
    0.0,0.0,1.0,0.5
    ...

``weights=1`` marks a trailing weight column. On hyperbolic spaces
``x0=recompute`` replaces the first coordinate with the value implied by the
hyperboloid constraint. Other header keys are kept as metadata.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ValidationError
from .geometry import Hyperbolic, ManifoldSpace, parse_space
from .objective import WeightedSample

ENCODING = "ambient"


class InputError(ValidationError):
    """Malformed point file."""


@dataclass
class PointFile:
    space: ManifoldSpace
    sample: WeightedSample
    meta: dict = field(default_factory=dict)


def format_real(x: float) -> str:
    return repr(float(x))


def write_points(path, space: ManifoldSpace, points, weights=None, meta: dict | None = None) -> str:
    """Write a point file and return its text."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lines = [f"# space={space.spec()}", f"# encoding={ENCODING}"]
    if weights is not None:
        lines.append("# weights=1")
    for key, value in (meta or {}).items():
        lines.append(f"# {key}={value}")
    for i, row in enumerate(points):
        cells = [format_real(v) for v in row]
        if weights is not None:
            cells.append(format_real(weights[i]))
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def parse_points(text: str, space: ManifoldSpace | None = None) -> PointFile:
    """Parse point-file text. ``space`` overrides the header's space."""
    header: dict[str, str] = {}
    rows: list[tuple[int, list[float]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, value = body.split("=", 1)
                header[key.strip()] = value.strip()
            continue
        try:
            rows.append((lineno, [float(c) for c in line.split(",")]))
        except ValueError:
            raise InputError(f"line {lineno}: cannot parse {raw!r} as comma-separated numbers") from None
    if space is None:
        if "space" not in header:
            raise InputError("no space given: pass --space or add a '# space=...' header")
        space = parse_space(header["space"])
    if header.get("encoding", ENCODING) != ENCODING:
        raise InputError(f"unsupported encoding {header['encoding']!r}")
    if not rows:
        raise InputError("no data rows")

    has_weights = header.get("weights", "0") == "1"
    width = space.ambient_dim + (1 if has_weights else 0)
    pts, wts = [], []
    for lineno, vals in rows:
        if len(vals) != width:
            raise InputError(f"line {lineno}: expected {width} columns, got {len(vals)}")
        if not all(math.isfinite(v) for v in vals):
            raise InputError(f"line {lineno}: non-finite value")
        x = np.array(vals[: space.ambient_dim])
        if isinstance(space, Hyperbolic) and header.get("x0") == "recompute":
            x = space.lift(x[1:])
        try:
            pts.append(space.validate(x))
        except ValidationError as exc:
            raise InputError(f"line {lineno}: {exc}") from None
        if has_weights:
            if not vals[-1] >= 0:
                raise InputError(f"line {lineno}: negative weight")
            wts.append(vals[-1])
    try:
        sample = WeightedSample(np.array(pts), np.array(wts) if has_weights else None)
    except ValidationError as exc:
        raise InputError(str(exc)) from None
    return PointFile(space, sample, header)


def read_points(path, space: ManifoldSpace | None = None) -> PointFile:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return parse_points(text, space)


def data_hash(sample: WeightedSample) -> str:
    """SHA-256 of the sample's points and weights as little-endian float64."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(sample.points, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(sample.weights, dtype="<f8").tobytes())
    return h.hexdigest()


def jsonable(obj):
    """Recursively convert to JSON types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def dump_report(report: dict, path=None) -> str:
    text = json.dumps(jsonable(report), indent=2, sort_keys=False) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
