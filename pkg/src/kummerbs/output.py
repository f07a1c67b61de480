"""Plain-text emission of geometry data for plotting.

Numbers are written with ``repr`` (shortest round-trip decimal), metadata
lines start with ``#`` and nothing time-dependent is ever written, so output
is byte-stable for fixed inputs.
"""

import csv
import io

import numpy as np

from .geometry import closed3_sheet_eigenvalues, sample_level_surface, sheet_grid

SCHEMA_VERSION = 1


def fmt(v):
    return repr(float(v))


def _document(meta, header, rows):
    buf = io.StringIO()
    buf.write(f"# schema_version: {SCHEMA_VERSION}\n")
    for key, value in meta.items():
        buf.write(f"# {key}: {value}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def surface_csv(level, resolution):
    """Samples of ``{det rho = C}`` for three assets.

    At ``C = 0`` a ``branch`` column records which sheet ``z = xy +/- sqrt(...)``
    produced each row.
    """
    s = sample_level_surface(level, resolution)
    with_branch = float(level) == 0.0
    header = ["x", "y", "z", "det"] + (["branch"] if with_branch else [])
    rows = []
    for i in range(len(s)):
        row = [fmt(s.x[i]), fmt(s.y[i]), fmt(s.z[i]), fmt(s.det[i])]
        if with_branch:
            row.append(s.branch[i])
        rows.append(row)
    meta = {"command": "surface", "level": fmt(level), "resolution": int(resolution)}
    return _document(meta, header, rows)


def eigen_grid_csv(branch, resolution):
    """Nonzero eigenvalues along one sheet of the Kummer surface over ``[-1, 1]^2``."""
    x, y, _ = sheet_grid(resolution, branch)
    lam1, lam2 = closed3_sheet_eigenvalues(x, y, branch)
    rows = [[fmt(a), fmt(b), fmt(c), fmt(d)] for a, b, c, d in zip(x, y, lam1, lam2)]
    meta = {"command": "eigen-grid", "branch": branch, "resolution": int(resolution)}
    return _document(meta, ["x", "y", "lambda1", "lambda2"], rows)


def read_csv(text):
    """Parse an emitted document into ``(metadata, header, rows)``."""
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        elif line:
            body.append(line)
    reader = csv.reader(body)
    header = next(reader)
    return meta, header, list(reader)


def numeric_columns(header, rows, names):
    idx = [header.index(n) for n in names]
    return np.array([[float(r[i]) for i in idx] for r in rows]).reshape(-1, len(names))
