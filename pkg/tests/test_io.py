"""
Tests for the result tables, their schemas and the vector archives.
"""

import math

import numpy as np
import numpy.testing as nptest

from edgespectra import io
from edgespectra.experiments import RealizationRecord
from edgespectra.spectral import EigenRecord


def test_header_has_units():
    assert io.header("fibers") == ["j [1]", "k [1/length]", "energy [energy]",
                                   "current [velocity]"]


def test_table_roundtrip_is_exact(tmp_path):
    path = str(tmp_path / "fibers.csv")
    rows = [{"j": -3, "k": -2.356194490192345, "energy": 2.0000000000000004,
             "current": -0.1 / 3.}]
    io.write_table(path, "fibers", rows)
    assert io.read_table(path, "fibers") == rows
    assert io.validate_table(path) == []


def test_dataclass_rows(tmp_path):
    path = str(tmp_path / "realizations.csv")
    records = [RealizationRecord(0, n_window=4, n_left=2, n_right=2, max_shift=1e-4),
               RealizationRecord.failed(1, "ConvergenceError: ARPACK, 3 pairs")]
    io.write_table(path, "realizations", records)
    rows = io.read_table(path, "realizations")
    assert rows[0]["n_left"] == 2 and rows[0]["partition_ok"] is True
    assert math.isnan(rows[0]["cap"])
    assert rows[1]["status"] == "failed" and rows[1]["message"].startswith("ConvergenceError")


def test_schema_of():
    assert io.schema_of("out/dispersion_left.csv") == "dispersion"
    assert io.schema_of("fit_points.csv") == "fit_points"
    assert io.schema_of("fit_summary.csv") == "fit"
    assert io.schema_of("notes.csv") is None


def test_validate_bad_files(tmp_path):
    bad_header = tmp_path / "spectrum.csv"
    bad_header.write_text("index,energy,residual,window_label\n0,2.1,1e-12,custom\n")
    assert len(io.validate_table(str(bad_header))) == 1

    bad_value = tmp_path / "fibers.csv"
    bad_value.write_text(",".join(io.header("fibers")) + "\n0,0.5,two,0.1\n1,0.5\n")
    problems = io.validate_table(str(bad_value))
    assert len(problems) == 2
    assert "column energy" in problems[0]

    report = io.validate_directory(str(tmp_path))
    assert sorted(report) == ["fibers.csv", "spectrum.csv"]
    assert all(report.values())


def test_write_vectors(tmp_path, small_basis):
    rng = np.random.Generator(np.random.PCG64(1))
    records = []
    for e in (2.1, 2.2):
        v = rng.standard_normal(small_basis.dim) + 1j * rng.standard_normal(small_basis.dim)
        records.append(EigenRecord(e, v / np.linalg.norm(v), 1e-12))
    path = str(tmp_path / "vectors.npz")
    io.write_vectors(path, records, small_basis)
    with np.load(path) as data:
        assert data["vectors"].shape == (2, small_basis.dim)
        assert int(data["dimension"]) == small_basis.dim
        assert int(data["n_x"]) == small_basis.n_x
        assert int(data["n_modes"]) == small_basis.n_modes
        assert str(data["ordering"]) == "mode-major"
        nptest.assert_allclose(data["energies"], [2.1, 2.2])
        nptest.assert_array_equal(data["vectors"][1], records[1].vector)


def test_error_record():
    record = io.error_record(2, "ConfigError", "bad", "V0")
    assert record == {"exit_code": 2, "error": "ConfigError", "field": "V0",
                      "message": "bad"}
