"""Checker for the results CSV written by simulations and empirical runs.

Columns: method, n, p, theta, error_model, selected_d, count, replications,
frequency. One row per (cell, selected_d); ``selected_d`` is a nonnegative
integer or ``failed``; ``theta`` is empty for empirical cells.
"""
import csv
import io

from .harness import CSV_FIELDS, FAILED, METHOD_RE

ERROR_MODEL_VALUES = {"E1", "E2", "E3", "E4", "E5", "empirical"}


class SchemaError(ValueError):
    pass


def check_results_csv(source):
    """Validate a results CSV given as a path or an open text stream.

    Returns the number of data rows; raises :class:`SchemaError` listing
    every problem found.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, newline="") as fh:
            return check_results_csv(io.StringIO(fh.read()))
    reader = csv.reader(source)
    problems = []
    header = next(reader, None)
    if header != CSV_FIELDS:
        raise SchemaError(f"header {header!r} != {CSV_FIELDS!r}")
    totals = {}
    nrows = 0
    for line_no, row in enumerate(reader, start=2):
        nrows += 1
        if len(row) != len(CSV_FIELDS):
            problems.append(f"line {line_no}: {len(row)} fields")
            continue
        rec = dict(zip(CSV_FIELDS, row))
        try:
            if not METHOD_RE.match(rec["method"]):
                raise ValueError(f"bad method {rec['method']!r}")
            n, p = int(rec["n"]), int(rec["p"])
            if n < 1 or p < 1:
                raise ValueError("n and p must be positive")
            if rec["theta"] != "" and float(rec["theta"]) < 0:
                raise ValueError("negative theta")
            if rec["error_model"] not in ERROR_MODEL_VALUES:
                raise ValueError(f"bad error_model {rec['error_model']!r}")
            if rec["selected_d"] != FAILED and int(rec["selected_d"]) < 0:
                raise ValueError("negative selected_d")
            count, reps = int(rec["count"]), int(rec["replications"])
            freq = float(rec["frequency"])
            if not 0 <= count <= reps or reps < 1:
                raise ValueError(f"count {count} outside [0, {reps}]")
            if not 0.0 <= freq <= 1.0 or abs(freq - count / reps) > 1e-6:
                raise ValueError(f"frequency {freq} != {count}/{reps}")
        except ValueError as exc:
            problems.append(f"line {line_no}: {exc}")
            continue
        key = tuple(rec[k] for k in CSV_FIELDS[:5])
        seen, r = totals.get(key, (0, reps))
        if r != reps:
            problems.append(f"line {line_no}: replications differ within a cell")
        totals[key] = (seen + count, reps)
    for key, (seen, reps) in totals.items():
        if seen != reps:
            problems.append(f"cell {key}: counts sum to {seen}, expected {reps}")
    if problems:
        raise SchemaError("; ".join(problems))
    return nrows
