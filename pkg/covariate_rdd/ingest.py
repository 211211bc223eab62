import csv
import io
import logging
import math
from pathlib import Path

from covariate_rdd.errors import IngestionError
from covariate_rdd.local_fit import Dataset

logger = logging.getLogger(__name__)


def _fail(message):
    logger.error(message)
    raise IngestionError(message)


def _parse_cell(cell, line, column):
    try:
        value = float(cell)
    except ValueError:
        _fail(f"Row {line}, column '{column}': cannot parse {cell!r} as a number.")
    if not math.isfinite(value):
        _fail(f"Row {line}, column '{column}': value {cell!r} is not finite.")
    return value


def _covariate_columns(header, y_col, x_col, z_cols):
    if z_cols is not None:
        return list(z_cols)
    # z1..zp in header order
    return [c for c in header if c not in (y_col, x_col) and c.startswith("z") and c[1:].isdigit()]


def ingest_csv(path, y_col="y", x_col="x", z_cols=None, cutoff=0.0) -> Dataset:
    """
    Reads a sample from a UTF-8 (optionally BOM-prefixed), comma-separated file with a header row.

    The outcome and running variable columns are required; covariates default to the
    z1..zp columns in the order they appear in the header.
    """
    path = Path(path)
    if not path.is_file():
        _fail(f"Input file {path} does not exist.")
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as e:
        line = raw.count(b"\n", 0, e.start) + 1
        _fail(f"Row {line}: invalid UTF-8 byte(s) {raw[e.start : e.end]!r}.")
    with io.StringIO(text, newline="") as file:
        reader = csv.reader(file)
        header = next(reader, None)
        if not header:
            _fail(f"Input file {path} has no header row.")
        header = [name.strip() for name in header]
        z_cols = _covariate_columns(header, y_col, x_col, z_cols)
        missing = [c for c in [y_col, x_col, *z_cols] if c not in header]
        if missing:
            _fail(f"Input file {path} is missing required column(s): {', '.join(missing)}.")
        positions = {name: header.index(name) for name in [y_col, x_col, *z_cols]}

        y, x, z = [], [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                _fail(f"Row {line}: expected {len(header)} fields, found {len(row)}.")
            y.append(_parse_cell(row[positions[y_col]], line, y_col))
            x.append(_parse_cell(row[positions[x_col]], line, x_col))
            z.append([_parse_cell(row[positions[c]], line, c) for c in z_cols])

    if not y:
        _fail(f"Input file {path} contains no data rows.")
    logger.debug("Read %d rows with %d covariate(s) from %s", len(y), len(z_cols), path)
    return Dataset(y=y, x=x, z=z if z_cols else None, cutoff=cutoff)
