"""Shared tolerances, the curvkit error family and status/progress plumbing."""

import logging
import math

import numpy as np

logger = logging.getLogger(__name__)

# Kernel-wide defaults. Every verdict carries its margin, so callers may re-threshold.
ANGLE_TOL = 1e-9
LENGTH_TOL = 1e-10
VERDICT_TOL = 1e-9
BOUNDARY_TOL = 1e-8
METRIC_TOL = 1e-12
PSD_FEASIBLE = 1e-7
PSD_INCONCLUSIVE = 1e-4
DYKSTRA_MAX_ITER = 200000
SEPARATOR_TOL = 1e-9


class CurvkitError(Exception):
    """Base class for every error raised by curvkit."""


class DomainError(CurvkitError, ValueError):
    """An argument lies outside the domain of an operation."""


class MetricViolation(CurvkitError, ValueError):
    def __init__(self, kind, message, witness=None):
        super().__init__(message)
        self.kind = kind
        self.witness = witness


class DisconnectedGraph(CurvkitError, ValueError):
    pass


class ConsistencyFault(CurvkitError, RuntimeError):
    """Two independent evaluations of the same statement disagree."""


class NonShortMap(CurvkitError, ValueError):
    pass


class FoldConfigurationError(CurvkitError, ValueError):
    pass


class ConfigError(CurvkitError, ValueError):
    pass


class InputFormatError(CurvkitError, ValueError):
    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)
        self.line = line
        self.column = column


def reject_nan(*values):
    """Raise DomainError if any of the given scalars or arrays holds a NaN."""
    for v in values:
        if np.any(np.isnan(np.asarray(v, dtype=float))):
            raise DomainError("NaN input rejected")


def emitters(status_callback=None, progress_callback=None):
    """Return (emit_status, emit_progress) closures that also log."""

    def emit_status(msg):
        logger.debug(msg)
        if status_callback:
            status_callback(msg)

    def emit_progress(value):
        if progress_callback:
            progress_callback(int(value))

    return emit_status, emit_progress


def finite_or_none(x):
    """JSON-friendly float: non-finite values become the strings 'inf', '-inf', 'nan'."""
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def jsonable(obj):
    """Recursively convert numpy values and non-finite floats for json.dumps."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return finite_or_none(obj)
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    return obj
