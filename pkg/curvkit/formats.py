"""CSV distance tables, JSON graphs and the versioned JSON report."""

import csv
import io
import json
import logging
from pathlib import Path

import numpy as np

from curvkit.metric_core import read_graph, validate_metric
from curvkit.utils import InputFormatError, jsonable

logger = logging.getLogger(__name__)

SCHEMA = "curvkit/1"


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_csv_metric(text, check_triangle=True):
    """Square CSV distance table; an optional first row of labels."""
    rows = [r for r in csv.reader(io.StringIO(text))]
    rows = [(k + 1, [c.strip() for c in r]) for k, r in enumerate(rows) if any(c.strip() for c in r)]
    if not rows:
        raise InputFormatError("empty distance table", line=1)
    labels = None
    if not all(_is_number(c) for c in rows[0][1]):
        labels = rows[0][1]
        rows = rows[1:]
    table = []
    for line, cells in rows:
        values = []
        for col, cell in enumerate(cells, start=1):
            try:
                values.append(float(cell))
            except ValueError:
                raise InputFormatError(f"not a number: {cell!r}", line=line, column=col) from None
        if table and len(values) != len(table[0]):
            raise InputFormatError(f"expected {len(table[0])} columns, got {len(values)}", line=line)
        table.append(values)
    if labels is not None and len(labels) != len(table):
        raise InputFormatError(f"{len(labels)} labels for {len(table)} rows", line=1)
    return validate_metric(np.array(table), labels=labels, check_triangle=check_triangle)


def parse_csv_points(text):
    """Rows of coordinates (one point per row), optional header row."""
    rows = [(k + 1, [c.strip() for c in r]) for k, r in enumerate(csv.reader(io.StringIO(text)))
            if any(c.strip() for c in r)]
    if rows and not all(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise InputFormatError("no coordinate rows", line=1)
    width = len(rows[0][1])
    points = []
    for line, cells in rows:
        if len(cells) != width:
            raise InputFormatError(f"expected {width} coordinates, got {len(cells)}", line=line)
        for col, cell in enumerate(cells, start=1):
            if not _is_number(cell):
                raise InputFormatError(f"not a number: {cell!r}", line=line, column=col)
        points.append([float(c) for c in cells])
    return np.array(points)


def load_points(path):
    return parse_csv_points(Path(path).read_text())


def format_csv_metric(M, with_labels=True):
    """CSV text of M; index labels are not written since a numeric header would read back as data."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    if with_labels and not all(_is_number(label) for label in M.labels):
        writer.writerow(M.labels)
    for row in M.d:
        writer.writerow([repr(float(v)) for v in row])
    return out.getvalue()


def parse_json(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputFormatError(e.msg, line=e.lineno, column=e.colno) from None


def load_space(path, **kwargs):
    """FiniteMetric from .csv, SampledSpace from a .json graph document."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        doc = parse_json(text)
        if not isinstance(doc, dict) or "edges" not in doc:
            raise InputFormatError("graph document needs an 'edges' list", line=1)
        logger.info("Loaded graph %s", path.name)
        return read_graph(doc, **kwargs)
    logger.info("Loaded distance table %s", path.name)
    return parse_csv_metric(text)


def make_report(command, result, **extra):
    report = {"schema": SCHEMA, "command": command, "result": result}
    report.update(extra)
    return report


def dumps_report(report):
    """Deterministic JSON text: sorted keys, non-finite floats as strings."""
    return json.dumps(jsonable(report), sort_keys=True, indent=2) + "\n"
