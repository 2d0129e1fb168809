import json

import numpy as np
import pytest

from plap_freq.core.artifacts import (
    PROFILE_COLUMNS,
    ArtifactWriter,
    fmt,
    read_field_csv,
    read_mesh_text,
    read_profile_csv,
    read_vertex_values,
    write_boundary_csv,
    write_field_csv,
    write_mesh_text,
    write_profile_csv,
)
from plap_freq.core.errors import ConfigError, DomainError
from plap_freq.core.exact import ExactSolution
from plap_freq.core.frequency import FrequencyProfile, frequency_profile, uniform_radii
from plap_freq.core.mesh import Domain, ScalarField, build_mesh
from plap_freq.core.plot import emit_plot, series_fragments
from plap_freq.core.solver import picard_solve


def gappy_profile() -> FrequencyProfile:
    radii = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    defined = np.array([True, True, False, True, False, True])
    return FrequencyProfile(
        p=2.0,
        center=(0.0, 0.0),
        radii=radii,
        I=radii**3,
        D=radii**2,
        F=np.where(defined, 1.0, np.nan),
        F_defined=defined,
        Iprime=3.0 * radii**2,
    )


def test_fmt_round_trips_doubles():
    for value in (0.1, 1.0 / 3.0, 2.0**-40, 123456.789):
        assert float(fmt(value)) == value


def test_profile_csv_layout(tmp_path):
    path = write_profile_csv(tmp_path / "profile.csv", gappy_profile())
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(PROFILE_COLUMNS)
    assert len(lines) == 7
    assert lines[3].split(",")[3] == ""
    assert lines[3].endswith(",0")
    assert lines[1].endswith(",1")


def test_profile_csv_reads_back(tmp_path):
    profile = frequency_profile(ExactSolution.harmonic_polynomial(2), 2.0, uniform_radii(0.1, 0.8, 8))
    back = read_profile_csv(write_profile_csv(tmp_path / "p.csv", profile), 2.0)
    np.testing.assert_array_equal(back.radii, profile.radii)
    np.testing.assert_array_equal(back.F, profile.F)
    np.testing.assert_array_equal(back.Iprime, profile.Iprime)

    gappy = read_profile_csv(write_profile_csv(tmp_path / "g.csv", gappy_profile()), 2.0)
    assert gappy.F_defined.tolist() == gappy_profile().F_defined.tolist()
    assert np.isnan(gappy.F[2])


def test_profile_csv_rejects_foreign_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("r,F\n0.1,2\n")
    with pytest.raises(ConfigError):
        read_profile_csv(path, 2.0)


def test_mesh_text_reads_back(tmp_path):
    mesh = build_mesh(Domain.annulus(0.5, 1.0), 0.1, seed=2)
    back = read_mesh_text(write_mesh_text(tmp_path / "mesh.txt", mesh))
    np.testing.assert_array_equal(back.vertices, mesh.vertices)
    np.testing.assert_array_equal(back.triangles, mesh.triangles)
    np.testing.assert_array_equal(back.boundary_flags, mesh.boundary_flags)
    np.testing.assert_array_equal(back.ring_radii, mesh.ring_radii)
    assert back.h == mesh.h
    assert back.domain == mesh.domain


def test_mesh_text_rejects_malformed_lines(tmp_path):
    path = tmp_path / "mesh.txt"
    path.write_text("# domain disc 0 0 1 0\n# h 0.1\nv 0.0 oops 1\n")
    with pytest.raises(ConfigError, match=":3:"):
        read_mesh_text(path)
    path.write_text("v 0 0 0\n")
    with pytest.raises(ConfigError, match="header"):
        read_mesh_text(path)


def test_field_csv_reads_back(tmp_path, coarse_disc):
    field = ScalarField.from_function(coarse_disc, ExactSolution.harmonic_polynomial(3).eval)
    back = read_field_csv(write_field_csv(tmp_path / "field.csv", field), coarse_disc)
    np.testing.assert_array_equal(back.values, field.values)


def test_field_csv_must_cover_mesh(tmp_path, coarse_disc):
    path = tmp_path / "field.csv"
    path.write_text("vertex,value\n0,1.0\n")
    with pytest.raises(ConfigError):
        read_field_csv(path, coarse_disc)


def test_boundary_csv_feeds_solver(tmp_path, coarse_disc):
    data = ExactSolution.affine((1.0, -2.0), 0.5)
    values = data.eval(coarse_disc.vertices[coarse_disc.boundary_index])
    path = write_boundary_csv(tmp_path / "boundary.csv", coarse_disc, values)
    mapping = read_vertex_values(path)
    assert sorted(mapping) == sorted(int(i) for i in coarse_disc.boundary_index)
    field, report = picard_solve(coarse_disc, mapping, 3.0)
    assert report.converged
    np.testing.assert_allclose(field.values, data.eval(coarse_disc.vertices), atol=1e-8)
    with pytest.raises(ConfigError):
        write_boundary_csv(tmp_path / "short.csv", coarse_disc, values[:-1])


def test_vertex_values_reject_bad_rows(tmp_path):
    path = tmp_path / "b.csv"
    path.write_text("vertex,value\n0,abc\n")
    with pytest.raises(ConfigError):
        read_vertex_values(path)
    path.write_text("id,value\n0,1\n")
    with pytest.raises(ConfigError):
        read_vertex_values(path)


def test_writer_stamps_hash_and_indexes_files(tmp_path, coarse_disc):
    writer = ArtifactWriter(tmp_path / "run", config_hash="abc123", experiment="solve")
    field = ScalarField.from_function(coarse_disc, ExactSolution.affine((1.0, 0.0)).eval)
    writer.write_json("report.json", {"value": np.float64(1.5), "bad": float("inf"), "ok": np.bool_(True)})
    writer.write_mesh(coarse_disc)
    writer.write_field(field)
    writer.write_snapshot(field)
    index_path = writer.write_index()

    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert report == {"bad": "inf", "config_hash": "abc123", "ok": True, "value": 1.5}
    index = json.loads(index_path.read_text())
    assert index["experiment"] == "solve"
    assert index["files"] == ["report.json", "mesh.txt", "field.csv", "field.npz"]
    with np.load(tmp_path / "run" / "field.npz") as snap:
        np.testing.assert_array_equal(snap["values"], field.values)


def test_series_fragments_split_at_undefined_points():
    fragments = series_fragments(gappy_profile(), "F")
    assert [r.tolist() for r, _ in fragments] == [[0.1, 0.2], [0.4], [0.6]]
    assert len(series_fragments(gappy_profile(), "I")) == 1
    with pytest.raises(DomainError):
        series_fragments(gappy_profile(), "G")


def test_plot_is_svg_and_reproducible(tmp_path):
    first = emit_plot(gappy_profile(), tmp_path / "a.svg", series=("F", "I"))
    second = emit_plot(gappy_profile(), tmp_path / "b.svg", series=("F", "I"))
    text = first.read_text()
    assert text.lstrip().startswith("<?xml")
    assert "<svg" in text
    assert first.read_bytes() == second.read_bytes()


def test_plot_rejects_empty_profile(tmp_path):
    empty = FrequencyProfile(
        p=2.0,
        center=(0.0, 0.0),
        radii=np.array([]),
        I=np.array([]),
        D=np.array([]),
        F=np.array([]),
        F_defined=np.array([], dtype=bool),
        Iprime=np.array([]),
    )
    with pytest.raises(DomainError):
        emit_plot(empty, tmp_path / "empty.svg")
