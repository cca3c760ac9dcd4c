"""File formats: domain/datum JSON, instance bundles, text grids and SVG."""

from __future__ import annotations

import json
import math
import os
import re
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np

from .datum import BoundaryDatum, DatumError
from .fixtures import Instance
from .geometry import ConvexPolygon, GeometryError
from .grid import GridField, GridSpec

GRID_MAGIC = "lg-grid v1"


class InputError(ValueError):
    """Unreadable or invalid input file, with a file:line location when known."""

    def __init__(self, path, message: str, line: Optional[int] = None):
        loc = f"{path}:{line}" if line is not None else f"{path}"
        super().__init__(f"{loc}: {message}")
        self.path = str(path)
        self.line = line


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _parse_json(path, text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(path, f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno) from exc


def _nth_line(text: str, pattern: str, n: int, start: int = 0) -> Optional[int]:
    for k, m in enumerate(re.finditer(pattern, text[start:])):
        if k == n:
            return text.count("\n", 0, start + m.start()) + 1
    return None


# -- domain and datum ------------------------------------------------------------------


def domain_to_json(P: ConvexPolygon) -> str:
    return _dumps({"vertices": [[float(x), float(y)] for x, y in P.vertices]})


def domain_from_json(text: str, path="<domain>") -> ConvexPolygon:
    data = _parse_json(path, text)
    if not isinstance(data, dict) or "vertices" not in data:
        raise InputError(path, 'expected an object with a "vertices" array', 1)
    verts = data["vertices"]
    try:
        pts = [(float(v[0]), float(v[1])) for v in verts]
        if any(len(v) != 2 for v in verts):
            raise ValueError("vertex must have two coordinates")
    except (TypeError, ValueError, IndexError) as exc:
        raise InputError(path, f"bad vertex list: {exc}", _nth_line(text, r'"vertices"', 0)) from exc
    try:
        return ConvexPolygon.from_points(pts)
    except GeometryError as exc:
        line = None
        if exc.vertex_index is not None:
            anchor = text.find('"vertices"')
            line = _nth_line(text, r"\[\s*[-+0-9.eE]+\s*,", exc.vertex_index, max(anchor, 0))
        raise InputError(path, str(exc), line) from exc


def datum_to_json(f: BoundaryDatum) -> str:
    return _dumps(f.to_dict())


def datum_from_json(text: str, P: ConvexPolygon, path="<datum>") -> BoundaryDatum:
    data = _parse_json(path, text)
    if not isinstance(data, dict) or not isinstance(data.get("sides"), list):
        raise InputError(path, 'expected an object with a "sides" array', 1)
    try:
        return BoundaryDatum.from_dict(P, data)
    except (DatumError, ValueError, TypeError) as exc:
        m = re.search(r"side (\d+)", str(exc))
        line = _nth_line(text, r'"side"\s*:\s*' + m.group(1) + r"\b", 0) if m else None
        raise InputError(path, str(exc), line) from exc


def load_domain(path) -> ConvexPolygon:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(path, exc.strerror or str(exc)) from exc
    return domain_from_json(text, path)


def load_datum(path, P: ConvexPolygon) -> BoundaryDatum:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(path, exc.strerror or str(exc)) from exc
    return datum_from_json(text, P, path)


def instance_meta_json(inst: Instance) -> str:
    params = {k: v for k, v in sorted(inst.params.items())}
    return _dumps({"tag": inst.tag, "params": params, "notes": list(inst.notes)})


def save_instance(inst: Instance, out_dir) -> dict:
    out = Path(out_dir)
    paths = {
        "domain": atomic_write(out / "domain.json", domain_to_json(inst.polygon)),
        "datum": atomic_write(out / "datum.json", datum_to_json(inst.datum)),
        "instance": atomic_write(out / "instance.json", instance_meta_json(inst)),
    }
    return paths


def load_instance(domain_path, datum_path, meta_path=None) -> Instance:
    P = load_domain(domain_path)
    f = load_datum(datum_path, P)
    tag, params, notes = None, {}, ()
    if meta_path is not None and Path(meta_path).exists():
        meta = _parse_json(meta_path, Path(meta_path).read_text(encoding="utf-8"))
        tag, params, notes = meta.get("tag"), dict(meta.get("params") or {}), tuple(meta.get("notes") or ())
    return Instance(P, f, tag, params, notes)


# -- grid fields ---------------------------------------------------------------------


def grid_to_text(g: GridField) -> str:
    s = g.spec
    lines = [f"{GRID_MAGIC} {s.nx} {s.ny} {s.h!r} {s.x0!r} {s.y0!r}"]
    for row in g.values:
        lines.append(" ".join("nan" if not np.isfinite(v) else repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def grid_from_text(text: str, path="<grid>") -> GridField:
    rows = text.splitlines()
    head = rows[0].split() if rows else []
    if len(head) != 7 or " ".join(head[:2]) != GRID_MAGIC:
        raise InputError(path, f'header must read "{GRID_MAGIC} nx ny h x0 y0"', 1)
    try:
        nx, ny = int(head[2]), int(head[3])
        h, x0, y0 = float(head[4]), float(head[5]), float(head[6])
    except ValueError as exc:
        raise InputError(path, f"bad header: {exc}", 1) from exc
    spec = GridSpec(x0, y0, h, nx, ny)
    body = [r for r in rows[1:] if r.strip()]
    if len(body) != ny:
        raise InputError(path, f"expected {ny} rows, found {len(body)}", len(rows))
    vals = np.empty((ny, nx))
    for k, r in enumerate(body):
        parts = r.split()
        if len(parts) != nx:
            raise InputError(path, f"expected {nx} values, found {len(parts)}", k + 2)
        try:
            vals[k] = [float(p) for p in parts]
        except ValueError as exc:
            raise InputError(path, str(exc), k + 2) from exc
    return GridField(spec, vals, np.isfinite(vals))


def save_grid(g: GridField, path) -> Path:
    return atomic_write(path, grid_to_text(g))


def load_grid(path) -> GridField:
    return grid_from_text(Path(path).read_text(encoding="utf-8"), path)


# -- SVG --------------------------------------------------------------------------


def _color(x: float) -> str:
    """Blue to red ramp for x in [0, 1]."""
    x = min(max(x, 0.0), 1.0)
    r = int(round(40 + 200 * x))
    b = int(round(240 - 200 * x))
    g = int(round(80 + 60 * (1 - abs(2 * x - 1))))
    return f"#{r:02x}{g:02x}{b:02x}"


class _Canvas:
    def __init__(self, P: ConvexPolygon, size: int = 800, margin: float = 20.0):
        x0, y0, x1, y1 = P.bbox
        span = max(x1 - x0, y1 - y0)
        self.k = (size - 2 * margin) / span
        self.x0, self.y1, self.m = x0, y1, margin
        self.w = (x1 - x0) * self.k + 2 * margin
        self.h = (y1 - y0) * self.k + 2 * margin
        self.items: list[str] = []

    def xy(self, p) -> str:
        return f"{(p[0] - self.x0) * self.k + self.m:.3f},{(self.y1 - p[1]) * self.k + self.m:.3f}"

    def polygon(self, pts, fill: str, stroke: str = "none", opacity: float = 1.0, width: float = 1.0):
        pts_s = " ".join(self.xy(p) for p in pts)
        self.items.append(
            f'<polygon points="{pts_s}" fill="{fill}" fill-opacity="{opacity:g}" stroke="{stroke}" stroke-width="{width:g}"/>'
        )

    def line(self, p, q, stroke: str, width: float = 1.0):
        a, b = self.xy(p).split(","), self.xy(q).split(",")
        self.items.append(
            f'<line x1="{a[0]}" y1="{a[1]}" x2="{b[0]}" y2="{b[1]}" stroke="{stroke}" stroke-width="{width:g}"/>'
        )

    def render(self) -> str:
        head = f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w:.0f}" height="{self.h:.0f}" viewBox="0 0 {self.w:.3f} {self.h:.3f}">'
        return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *self.items, "</svg>"]) + "\n"


def solution_svg(sol, n_curves: int = 32, size: int = 800) -> str:
    """Level chords at evenly spaced values plus hump values; fat regions shaded."""
    P, f = sol.polygon, sol.datum
    cv = _Canvas(P, size)
    cv.polygon(P.vertices, "#f7f7f7", "black", 1.0, 2.0)
    for reg in (*sol.fat, *sol.plateau_regions):
        x = (reg.value - f.fmin) / f.range if f.range > 0 else 0.5
        cv.polygon(reg.vertices, _color(x), _color(x), 0.45, 1.0)
    levels = np.asarray(sol.levels)
    picks = set()
    if len(levels):
        targets = list(np.linspace(f.fmin, f.fmax, n_curves + 2)[1:-1]) + [h.value for h in sol.report.humps]
        for t in targets:
            picks.add(int(np.argmin(np.abs(levels - t))))
    for k in sorted(picks):
        cs = sol.chord_sets[k]
        x = (cs.t - f.fmin) / f.range if f.range > 0 else 0.5
        for a, b in cs.chords:
            cv.line(a, b, _color(x), 1.2)
    return cv.render()


def field_svg(g: GridField, P: ConvexPolygon, size: int = 800, max_cells: int = 200) -> str:
    """Heat map of a grid field, downsampled to at most ``max_cells`` per axis."""
    cv = _Canvas(P, size)
    vals = g.values
    finite = vals[g.mask]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    step = max(1, int(math.ceil(max(g.spec.nx, g.spec.ny) / max_cells)))
    h = g.spec.h
    for r in range(0, g.spec.ny, step):
        for c in range(0, g.spec.nx, step):
            block = vals[r : r + step, c : c + step]
            block = block[np.isfinite(block)]
            if not block.size:
                continue
            x = (float(block.mean()) - lo) / (hi - lo) if hi > lo else 0.5
            xa, ya = g.spec.x0 + c * h, g.spec.y0 + r * h
            xb, yb = xa + step * h, ya + step * h
            cv.polygon([(xa, ya), (xb, ya), (xb, yb), (xa, yb)], _color(x))
    cv.polygon(P.vertices, "none", "black", 1.0, 2.0)
    return cv.render()
