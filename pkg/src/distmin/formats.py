"""Reading and writing curves, meshes, maps, fields, morphs and result tables.

All writers produce deterministic text: JSON with sorted keys and ``repr``-exact
floats, CSV with ``repr`` floats and ``\\n`` line endings.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import DistminError
from .geometry import ClosedCurve, SurfaceMesh
from .maps import CurveMap, TimeVectorField
from .morphing import Morph


class FormatError(DistminError):
    code = "parse-error"


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(data, dict):
        raise FormatError(f"{path}: expected a JSON object")
    return data


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_plain) + "\n"


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")


# -- curves and meshes --------------------------------------------------------

def curve_to_dict(c: ClosedCurve) -> dict:
    return {"vertices": c.vertices.tolist(), "closed": True}


def curve_from_dict(d: dict, where: str = "curve") -> ClosedCurve:
    if "vertices" not in d:
        raise FormatError(f"{where}: missing 'vertices'")
    if d.get("closed", True) is not True:
        raise FormatError(f"{where}: only closed curves are supported")
    try:
        v = np.asarray(d["vertices"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: vertices are not numeric") from exc
    return ClosedCurve(v)


def read_curve(path) -> ClosedCurve:
    return curve_from_dict(_load_json(path), str(path))


def write_curve(path, c: ClosedCurve) -> None:
    write_text(path, dumps(curve_to_dict(c)))


def parse_obj(text: str, where: str = "mesh") -> tuple[np.ndarray, np.ndarray]:
    verts, faces = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split("#", 1)[0].split()
        if not parts:
            continue
        try:
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if len(idx) != 3:
                    raise FormatError(f"{where}:{lineno}: only triangular faces are supported")
                faces.append([i - 1 for i in idx])
        except ValueError as exc:
            raise FormatError(f"{where}:{lineno}: cannot parse '{line.strip()}'") from exc
    if not verts or not faces:
        raise FormatError(f"{where}: no vertices or faces found")
    return np.array(verts), np.array(faces)


def read_mesh(path) -> SurfaceMesh:
    v, f = parse_obj(Path(path).read_text(encoding="utf-8"), str(path))
    return SurfaceMesh(v, f)


def mesh_to_obj(m: SurfaceMesh) -> str:
    out = io.StringIO()
    for x, y, z in m.vertices.tolist():
        out.write(f"v {x!r} {y!r} {z!r}\n")
    for a, b, c in (m.triangles + 1).tolist():
        out.write(f"f {a} {b} {c}\n")
    return out.getvalue()


def write_mesh(path, m: SurfaceMesh) -> None:
    write_text(path, mesh_to_obj(m))


def read_geometry(path) -> ClosedCurve | SurfaceMesh:
    """Curve JSON or mesh OBJ, chosen by file suffix."""
    return read_mesh(path) if str(path).lower().endswith(".obj") else read_curve(path)


# -- maps, fields, morphs -----------------------------------------------------

def curve_map_to_dict(h: CurveMap) -> dict:
    return {
        "source": curve_to_dict(h.source),
        "target": curve_to_dict(h.target),
        "lift": h.lift.tolist(),
        "orientation": h.orientation,
        "monotone": h.monotone,
    }


def curve_map_from_dict(d: dict, where: str = "map") -> CurveMap:
    for key in ("source", "target", "lift"):
        if key not in d:
            raise FormatError(f"{where}: missing '{key}'")
    return CurveMap(curve_from_dict(d["source"], where), curve_from_dict(d["target"], where),
                    d["lift"], d.get("orientation"), monotone=bool(d.get("monotone", True)))


def read_curve_map(path) -> CurveMap:
    return curve_map_from_dict(_load_json(path), str(path))


def write_curve_map(path, h: CurveMap) -> None:
    write_text(path, dumps(curve_map_to_dict(h)))


def field_to_dict(v: TimeVectorField) -> dict:
    return {"grid_t": v.grid_t, "values": v.values.tolist()}


def field_from_dict(d: dict, curve: ClosedCurve, where: str = "field") -> TimeVectorField:
    if "values" not in d:
        raise FormatError(f"{where}: missing 'values'")
    v = TimeVectorField(curve, d["values"])
    if "grid_t" in d and int(d["grid_t"]) != v.grid_t:
        raise FormatError(f"{where}: grid_t={d['grid_t']} but {v.grid_t} time rows given")
    return v


def read_field(path, curve: ClosedCurve) -> TimeVectorField:
    return field_from_dict(_load_json(path), curve, str(path))


def morph_to_dict(F: Morph) -> dict:
    if F.is_curve:
        frames = [{"vertices": fr.tolist(), "closed": True} for fr in F.frames]
    else:
        tris = F.triangles.tolist()
        frames = [{"vertices": fr.tolist(), "triangles": tris} for fr in F.frames]
    return {"grid_t": len(F), "frames": frames}


def morph_from_dict(d: dict, where: str = "morph") -> Morph:
    frames = d.get("frames")
    if not isinstance(frames, list) or not frames:
        raise FormatError(f"{where}: missing or empty 'frames'")
    if "grid_t" in d and int(d["grid_t"]) != len(frames):
        raise FormatError(f"{where}: grid_t={d['grid_t']} but {len(frames)} frames given")
    try:
        verts = np.array([fr["vertices"] for fr in frames], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: frames must share a vertex count and carry 'vertices'") from exc
    tris = frames[0].get("triangles")
    return Morph(verts, tris)


def read_morph(path) -> Morph:
    return morph_from_dict(_load_json(path), str(path))


def write_morph(path, F: Morph) -> None:
    write_text(path, dumps(morph_to_dict(F)))


# -- tables -------------------------------------------------------------------

def csv_text(header: list[str], rows) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return out.getvalue()


def volume_path_csv(F: Morph) -> str:
    from .functionals import epsilon_path

    eps = epsilon_path(F) if len(F) > 1 else np.zeros(1)
    return csv_text(["t", "volume", "epsilon"], zip(F.times, F.volumes(), eps))
