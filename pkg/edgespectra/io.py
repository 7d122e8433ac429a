'''
Result persistence: CSV tables under published column schemas, JSON
manifests and error records, and eigenvector archives.
'''

import csv
import dataclasses
import glob
import json
import logging
import os
from collections import namedtuple

import numpy as np

_logger = logging.getLogger(__name__)

Column = namedtuple("Column", ["name", "unit", "kind"])

_E = "energy"
_V = "velocity"
_X = "length"
_K = "1/length"


def _columns(*spec):
    return tuple(Column(*c) for c in spec)


SCHEMAS = {
    "spectrum": _columns(("index", "1", "int"), ("energy", _E, "float"),
                         ("residual", _E, "float"), ("window_label", "-", "str")),
    "fibers": _columns(("j", "1", "int"), ("k", _K, "float"), ("energy", _E, "float"),
                       ("current", _V, "float")),
    "dispersion": _columns(("n", "1", "int"), ("k", _K, "float"), ("energy", _E, "float"),
                           ("current", _V, "float"), ("side", "-", "str")),
    "diagnostics": _columns(("energy", _E, "float"), ("J", _V, "float"),
                            ("x_centroid", _X, "float"), ("x_spread", _X, "float"),
                            ("min_slice", "1/length", "float"), ("y_bar", _X, "float"),
                            ("dy_slice", "1/length^2", "float"), ("label", "-", "str")),
    "realizations": _columns(
        ("seed", "1", "int"), ("status", "-", "str"), ("message", "-", "str"),
        ("n_window", "1", "int"), ("n_left", "1", "int"), ("n_right", "1", "int"),
        ("n_bulk", "1", "int"), ("n_unmatched", "1", "int"),
        ("n_unmatched_reference", "1", "int"), ("n_bulk_reference", "1", "int"),
        ("n_bulk_matched", "1", "int"), ("cap", _E, "float"), ("max_shift", _E, "float"),
        ("median_shift", _E, "float"), ("min_edge_current", _V, "float"),
        ("max_bulk_current", _V, "float"), ("max_current_deviation", _V, "float"),
        ("dist_bulk_edge", _E, "float"), ("max_slice_ratio", "1", "float"),
        ("partition_ok", "-", "bool"), ("currents_ok", "-", "bool"),
        ("slice_ok", "-", "bool"), ("violation", "-", "bool")),
    "states": _columns(
        ("seed", "1", "int"), ("set", "-", "str"), ("energy", _E, "float"),
        ("current", _V, "float"), ("x_centroid", _X, "float"), ("x_spread", _X, "float"),
        ("min_slice", "1/length", "float"), ("y_bar", _X, "float"),
        ("dy_slice", "1/length^2", "float"), ("label", "-", "str"),
        ("reference_energy", _E, "float"), ("shift", _E, "float"),
        ("reference_current", _V, "float")),
    "references": _columns(("set", "-", "str"), ("energy", _E, "float"),
                           ("current", _V, "float"), ("seed", "1", "int")),
    "aggregate": _columns(("statistic", "-", "str"), ("count", "1", "int"),
                          ("q05", "-", "float"), ("q25", "-", "float"),
                          ("q50", "-", "float"), ("q75", "-", "float"),
                          ("q95", "-", "float")),
    "flux_scan": _columns(("L", _X, "float"), ("flux", "flux quanta", "float"),
                          ("n_left", "1", "int"), ("n_right", "1", "int"),
                          ("min_spacing", _E, "float"), ("scaled_spacing", "energy*length",
                                                         "float")),
    "fit_points": _columns(("L", _X, "float"), ("median_shift", _E, "float"),
                           ("censored", "-", "bool")),
    "fit": _columns(("model", "-", "str"), ("slope", "1", "float"),
                    ("intercept", "1", "float"), ("residual", "1", "float"),
                    ("n_points", "1", "int"), ("degenerate", "-", "bool")),
}

# file name prefix -> schema
FILE_SCHEMAS = {
    "spectrum": "spectrum",
    "fibers": "fibers",
    "dispersion": "dispersion",
    "diagnostics": "diagnostics",
    "realizations": "realizations",
    "states": "states",
    "references": "references",
    "aggregate": "aggregate",
    "flux_scan": "flux_scan",
    "fit_points": "fit_points",
    "fit_summary": "fit",
}


def header(schema):
    return ["{} [{}]".format(c.name, c.unit) for c in SCHEMAS[schema]]


def _format(value, kind):
    if kind == "float":
        return repr(float(value))
    if kind == "int":
        return str(int(value))
    if kind == "bool":
        return "true" if value else "false"
    return "" if value is None else str(value)


def _parse(text, kind):
    if kind == "float":
        return float(text)
    if kind == "int":
        return int(text)
    if kind == "bool":
        if text not in ("true", "false"):
            raise ValueError("expected true or false, got {!r}".format(text))
        return text == "true"
    return text


def _as_dict(row):
    if dataclasses.is_dataclass(row):
        return {f.name: getattr(row, f.name) for f in dataclasses.fields(row)}
    if hasattr(row, "_asdict"):
        return row._asdict()
    return dict(row)


def write_table(path, schema, rows):
    """
    Writes rows (dicts or dataclasses) as a CSV file with "name [unit]"
    headers; floats are written with repr so that reading is exact.
    """
    columns = SCHEMAS[schema]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header(schema))
        for row in rows:
            d = _as_dict(row)
            writer.writerow([_format(d[c.name], c.kind) for c in columns])
    _logger.info("wrote %s", path)
    return path


def read_table(path, schema):
    """
    Reads a CSV file written by write_table.

    Returns
    -------
    list of dict
    """
    columns = SCHEMAS[schema]
    with open(path, newline="") as f:
        reader = csv.reader(f)
        head = next(reader)
        if head != header(schema):
            raise ValueError("{} does not carry the {} header!".format(path, schema))
        return [{c.name: _parse(v, c.kind) for c, v in zip(columns, row)} for row in reader]


def schema_of(path):
    """ Schema name of a result file, from its name. """
    stem = os.path.splitext(os.path.basename(path))[0]
    for prefix in sorted(FILE_SCHEMAS, key=len, reverse=True):
        if stem == prefix or stem.startswith(prefix + "_"):
            return FILE_SCHEMAS[prefix]
    return None


def validate_table(path, schema=None):
    """
    Checks a CSV file against its column schema.

    Returns
    -------
    list of str
        problems found, empty if the file is valid.
    """
    schema = schema or schema_of(path)
    if schema is None:
        return ["{}: no schema for this file name".format(path)]
    problems = []
    columns = SCHEMAS[schema]
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            head = next(reader)
        except StopIteration:
            return ["{}: empty file".format(path)]
        if head != header(schema):
            return ["{}: header {} does not match {}".format(path, head, header(schema))]
        for line, row in enumerate(reader, start=2):
            if len(row) != len(columns):
                problems.append("{}:{}: {} fields, expected {}".format(path, line, len(row),
                                                                      len(columns)))
                continue
            for c, v in zip(columns, row):
                try:
                    _parse(v, c.kind)
                except ValueError as err:
                    problems.append("{}:{}: column {}: {}".format(path, line, c.name, err))
    return problems


def validate_directory(dirpath):
    """
    Validates every CSV file of a result directory.

    Returns
    -------
    dict
        file name -> list of problems.
    """
    return {os.path.basename(p): validate_table(p)
            for p in sorted(glob.glob(os.path.join(dirpath, "*.csv")))}


def write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
    _logger.info("wrote %s", path)
    return path


def read_json(path):
    with open(path) as f:
        return json.load(f)


def write_vectors(path, records, basis):
    """
    Stores eigenvectors as a compressed .npz archive with the header
    entries dimension, n_x, n_modes and ordering ("mode-major").
    """
    vectors = np.array([r.vector for r in records], dtype=complex).reshape(-1, basis.dim)
    np.savez_compressed(path, vectors=vectors,
                        energies=np.array([r.energy for r in records], dtype=float),
                        dimension=basis.dim, n_x=basis.n_x, n_modes=basis.n_modes,
                        ordering="mode-major", x=basis.x, k=basis.k_modes)
    _logger.info("wrote %d vectors to %s", len(records), path)
    return path


def spectrum_rows(records, window):
    return [{"index": i, "energy": r.energy, "residual": r.residual,
             "window_label": window.label.value} for i, r in enumerate(records)]


def diagnostics_rows(diagnostics):
    return [{"energy": d.energy, "J": d.current, "x_centroid": d.x_centroid,
             "x_spread": d.x_spread, "min_slice": d.min_slice, "y_bar": d.y_bar,
             "dy_slice": d.dy_slice, "label": d.label.value} for d in diagnostics]


def write_report(dirpath, report, manifest):
    """
    Writes an experiment report directory: manifest.json,
    realizations.csv, states.csv, references.csv and aggregate.csv.
    """
    os.makedirs(dirpath, exist_ok=True)
    manifest.notes = list(dict.fromkeys(list(manifest.notes) + list(report.notes)))
    manifest.derived["experiment"] = report.experiment
    manifest.derived["failure_fraction"] = report.failure_fraction
    manifest.derived["median_shift"] = report.median_shift()
    manifest.derived["L"] = float(report.params.L)
    write_json(os.path.join(dirpath, "manifest.json"), manifest.to_dict())
    write_table(os.path.join(dirpath, "realizations.csv"), "realizations", report.records)
    write_table(os.path.join(dirpath, "states.csv"), "states", report.states)
    write_table(os.path.join(dirpath, "references.csv"), "references", report.references)
    write_table(os.path.join(dirpath, "aggregate.csv"), "aggregate", report.aggregate())
    return dirpath


def read_report(dirpath):
    """
    Manifest and per-realisation rows of a report directory.
    """
    manifest = read_json(os.path.join(dirpath, "manifest.json"))
    records = read_table(os.path.join(dirpath, "realizations.csv"), "realizations")
    return manifest, records


def error_record(exit_code, error, message, field=None):
    return {"exit_code": int(exit_code), "error": error, "field": field, "message": message}
