"""
Text and JSON renderings of command results.

A result is a mapping built by ``runner.run``. JSON output carries ``schema_version`` and
keeps every float at full precision (``repr`` round-trips exactly). The text rendering lists
the same keys one per line, with nested mappings and row lists indented beneath their key.
"""

import csv
import json
import logging
from dataclasses import asdict, is_dataclass

import numpy as np

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
FORMATS = ("text", "json")


def plain(value):
    """Converts numpy scalars and arrays, dataclasses and tuples into JSON-compatible values."""
    if is_dataclass(value) and not isinstance(value, type):
        return plain(asdict(value))
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [plain(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def _format_scalar(value):
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return "none"
    return str(value)


def _text_lines(data, indent=0):
    pad = "  " * indent
    lines = []
    for key, value in data.items():
        if isinstance(value, dict):
            lines.append(f"{pad}{key}:")
            lines.extend(_text_lines(value, indent + 1))
        elif isinstance(value, list) and value and all(isinstance(v, dict) for v in value):
            lines.append(f"{pad}{key}:")
            for row in value:
                lines.append(f"{pad}  - " + ", ".join(f"{k}={_format_scalar(v)}" for k, v in row.items()))
        elif isinstance(value, list):
            lines.append(f"{pad}{key}: [" + ", ".join(_format_scalar(v) for v in value) + "]")
        else:
            lines.append(f"{pad}{key}: {_format_scalar(value)}")
    return lines


def emit_report(result, fmt="text") -> bytes:
    data = {"schema_version": SCHEMA_VERSION, **plain(result)}
    if fmt == "json":
        return (json.dumps(data, indent=4) + "\n").encode("utf-8")
    if fmt == "text":
        return ("\n".join(_text_lines(data)) + "\n").encode("utf-8")
    raise ValueError(f"Unsupported report format {fmt!r}; expected one of {', '.join(FORMATS)}.")


def write_report(payload: bytes, out_path=None, stream=None):
    """Writes an emitted report to ``out_path`` when given, otherwise to ``stream``."""
    if out_path:
        with open(out_path, mode="wb") as file:
            file.write(payload)
        logger.info("Wrote report to output file %s.", out_path)
    elif stream is not None:
        stream.write(payload.decode("utf-8"))


def write_per_rep_csv(report, path):
    """Writes one row per successful replication, then one per failure."""
    fieldnames = [
        "index",
        "tau_hat",
        "s2_hat",
        "se_tau",
        "standardized",
        "covered_oracle",
        "covered_plugin",
        "category",
        "message",
    ]
    with open(path, mode="w", encoding="utf-8", newline="") as file:
        writer = csv.DictWriter(file, fieldnames=fieldnames)
        writer.writeheader()
        for rep in report.per_rep:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in asdict(rep).items()})
        for failure in report.failures:
            writer.writerow({"index": failure.index, "category": failure.category, "message": failure.message})
    logger.info("Wrote %d replication rows to output file %s.", len(report.per_rep) + len(report.failures), path)
