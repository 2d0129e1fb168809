"""
Artifact files for solver and frequency runs.

Layout under the output directory:
- <name>.json: reports, each stamped with the config hash
- profile.csv: r,I,D,F,Iprime,F_defined (F blank where undefined)
- profile.svg: optional line plot of the profile
- mesh.txt: `v x y flag` and `t i j k` lines, header comments carry domain, h and rings
- field.csv: vertex,value aligned to vertex order
- field.npz: compressed vertices/triangles/values snapshot
- meta/info.json: index of everything written in this run
"""

from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .frequency import FrequencyProfile
from .mesh import Domain, DomainKind, ScalarField, TriMesh
from .plot import emit_plot

logger = logging.getLogger(__name__)

PROFILE_COLUMNS = ("r", "I", "D", "F", "Iprime", "F_defined")


def fmt(value: float) -> str:
    """Decimal with 17 significant digits; reads back to the identical double."""
    return format(float(value), ".17g")


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        # JSON has no inf/nan
        v = float(value)
        return v if math.isfinite(v) else str(v)
    return value


class ArtifactWriter:
    """Writes one run's artifacts into ``output_dir`` and keeps an index of them."""

    def __init__(self, output_dir: Path | str, config_hash: str = "", experiment: str = "run"):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.config_hash = config_hash
        self.experiment = experiment
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def _track(self, path: Path) -> Path:
        self.written.append(path)
        logger.info(f"wrote {path}")
        return path

    def write_json(self, name: str, payload: Mapping[str, Any]) -> Path:
        path = self.path(name)
        record = {**_jsonable(dict(payload)), "config_hash": self.config_hash}
        with path.open("w", encoding="utf-8") as f:
            json.dump(record, f, indent=2, sort_keys=True)
        return self._track(path)

    def write_profile(self, profile: FrequencyProfile, name: str = "profile.csv") -> Path:
        return self._track(write_profile_csv(self.path(name), profile))

    def write_plot(self, profile: FrequencyProfile, series: Sequence[str] = ("F",), name: str = "profile.svg") -> Path:
        return self._track(emit_plot(profile, self.path(name), series))

    def write_mesh(self, mesh: TriMesh, name: str = "mesh.txt") -> Path:
        return self._track(write_mesh_text(self.path(name), mesh))

    def write_field(self, field: ScalarField, name: str = "field.csv") -> Path:
        return self._track(write_field_csv(self.path(name), field))

    def write_snapshot(self, field: ScalarField, name: str = "field.npz") -> Path:
        path = self.path(name)
        np.savez_compressed(
            path,
            vertices=field.mesh.vertices,
            triangles=field.mesh.triangles,
            boundary_flags=field.mesh.boundary_flags,
            values=field.values,
        )
        return self._track(path)

    def write_index(self) -> Path:
        """meta/info.json listing every artifact of the run."""
        meta = self.output_dir / "meta" / "info.json"
        meta.parent.mkdir(parents=True, exist_ok=True)
        index = {
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "files": [str(p.relative_to(self.output_dir)) for p in self.written],
        }
        with meta.open("w", encoding="utf-8") as f:
            json.dump(index, f, indent=2)
        return meta


def write_profile_csv(path: Path | str, profile: FrequencyProfile) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(PROFILE_COLUMNS)
        for r, i, d, freq, ip, ok in zip(
            profile.radii, profile.I, profile.D, profile.F, profile.Iprime, profile.F_defined
        ):
            writer.writerow([fmt(r), fmt(i), fmt(d), fmt(freq) if ok else "", fmt(ip), int(bool(ok))])
    return path


def read_profile_csv(
    path: Path | str, p: float, center: Sequence[float] = (0.0, 0.0), radius_power: float = 1.0
) -> FrequencyProfile:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != PROFILE_COLUMNS:
            raise ConfigError(f"{path}: expected columns {','.join(PROFILE_COLUMNS)}")
        rows = list(reader)
    defined = np.array([row["F_defined"].strip() == "1" for row in rows], dtype=bool)
    return FrequencyProfile(
        p=float(p),
        center=(float(center[0]), float(center[1])),
        radii=np.array([float(row["r"]) for row in rows]),
        I=np.array([float(row["I"]) for row in rows]),
        D=np.array([float(row["D"]) for row in rows]),
        F=np.array([float(row["F"]) if row["F"] else np.nan for row in rows]),
        F_defined=defined,
        Iprime=np.array([float(row["Iprime"]) for row in rows]),
        radius_power=float(radius_power),
    )


def write_mesh_text(path: Path | str, mesh: TriMesh) -> Path:
    path = Path(path)
    dom = mesh.domain
    with path.open("w", encoding="utf-8") as f:
        f.write(f"# domain {dom.kind.value} {fmt(dom.center[0])} {fmt(dom.center[1])} ")
        f.write(f"{fmt(dom.r_outer)} {fmt(dom.r_inner)}\n")
        f.write(f"# h {fmt(mesh.h)}\n")
        f.write("# rings " + " ".join(fmt(r) for r in mesh.ring_radii) + "\n")
        for (x, y), flag in zip(mesh.vertices, mesh.boundary_flags):
            f.write(f"v {fmt(x)} {fmt(y)} {int(flag)}\n")
        for i, j, k in mesh.triangles:
            f.write(f"t {i} {j} {k}\n")
    return path


def read_mesh_text(path: Path | str) -> TriMesh:
    path = Path(path)
    vertices, flags, triangles = [], [], []
    domain, h, rings = None, None, []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        try:
            if parts[0] == "#" and len(parts) > 1:
                if parts[1] == "domain":
                    kind, cx, cy, r_out, r_in = parts[2:7]
                    domain = Domain(DomainKind(kind), (float(cx), float(cy)), float(r_out), float(r_in))
                elif parts[1] == "h":
                    h = float(parts[2])
                elif parts[1] == "rings":
                    rings = [float(r) for r in parts[2:]]
            elif parts[0] == "v":
                vertices.append((float(parts[1]), float(parts[2])))
                flags.append(int(parts[3]))
            elif parts[0] == "t":
                triangles.append((int(parts[1]), int(parts[2]), int(parts[3])))
        except (IndexError, ValueError) as exc:
            raise ConfigError(f"{path}:{lineno}: malformed mesh line '{line}'") from exc
    if domain is None or h is None:
        raise ConfigError(f"{path}: missing '# domain' or '# h' header")
    return TriMesh(
        vertices=np.array(vertices, dtype=float),
        triangles=np.array(triangles, dtype=np.int64),
        boundary_flags=np.array(flags, dtype=np.int8),
        h=h,
        domain=domain,
        ring_radii=np.array(rings, dtype=float),
    )


def write_field_csv(path: Path | str, field: ScalarField) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("vertex", "value"))
        writer.writerows((i, fmt(v)) for i, v in enumerate(field.values))
    return path


def read_field_csv(path: Path | str, mesh: TriMesh) -> ScalarField:
    values = read_vertex_values(path)
    if sorted(values) != list(range(mesh.num_vertices)):
        raise ConfigError(f"{path}: field CSV does not cover the {mesh.num_vertices} mesh vertices")
    return ScalarField(mesh, np.array([values[i] for i in range(mesh.num_vertices)]))


def write_boundary_csv(path: Path | str, mesh: TriMesh, values: Sequence[float]) -> Path:
    """Per-boundary-vertex Dirichlet data, rows in ``mesh.boundary_index`` order."""
    path = Path(path)
    vals = np.asarray(values, dtype=float)
    if vals.shape != mesh.boundary_index.shape:
        raise ConfigError(f"Expected {mesh.boundary_index.size} boundary values, got {vals.size}")
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("vertex", "value"))
        writer.writerows((int(i), fmt(v)) for i, v in zip(mesh.boundary_index, vals))
    return path


def read_vertex_values(path: Path | str) -> dict[int, float]:
    """vertex,value CSV as a mapping; boundary CSVs feed straight into the solver."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != ("vertex", "value"):
            raise ConfigError(f"{path}: expected columns vertex,value")
        try:
            return {int(row["vertex"]): float(row["value"]) for row in reader}
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
