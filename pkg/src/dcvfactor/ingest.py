"""Portfolio return panels from local CSV files and July-anchored windows.

Input files have a header row of labels, a date column first (``YYYYMMDD`` or
ISO ``YYYY-MM-DD``) and numeric returns in the remaining columns. Rows that
contain a missing-value sentinel or an empty field are dropped and counted.
"""
import bisect
import csv
import datetime as dt
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import EmptyPanel, NumericalError, ParseError
from .harness import Cell, McSummary, ReplicationResult, derive_seed, run_method, summarize

logger = logging.getLogger(__name__)

DEFAULT_MISSING_CODES = (-99.99, -999.0)
MIN_WINDOW_ROWS = 60
# slack between a window boundary and the nearest trading row
BOUNDARY_SLACK_DAYS = 7


@dataclass
class ReturnsPanel:
    dates: List[dt.date]
    columns: List[str]
    values: np.ndarray
    units: str = "percent"
    dropped_rows: int = 0
    date_label: str = "date"

    def __post_init__(self):
        if len(self.dates) != self.values.shape[0]:
            raise ValueError("dates and values disagree on row count")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")

    def __eq__(self, other):
        if not isinstance(other, ReturnsPanel):
            return NotImplemented
        return (self.dates == other.dates and self.columns == other.columns
                and np.array_equal(self.values, other.values))

    def excess_over(self, column):
        """Subtract one column (e.g. a risk-free rate) from the others and drop it."""
        j = self.columns.index(column)
        rest = [c for i, c in enumerate(self.columns) if i != j]
        vals = np.delete(self.values, j, axis=1) - self.values[:, [j]]
        return ReturnsPanel(list(self.dates), rest, vals, self.units, self.dropped_rows,
                            self.date_label)


@dataclass(frozen=True)
class PeriodWindow:
    start_year: int
    years: int
    start: dt.date
    start_index: int
    stop_index: int

    @property
    def rows(self):
        return self.stop_index - self.start_index

    def slice(self):
        return slice(self.start_index, self.stop_index)


def parse_date(text):
    text = text.strip()
    if len(text) == 8 and text.isdigit():
        return dt.date(int(text[:4]), int(text[4:6]), int(text[6:]))
    return dt.date.fromisoformat(text)


def load_returns_csv(path, missing_codes: Sequence[float] = DEFAULT_MISSING_CODES,
                     units="percent"):
    """Load a returns panel, dropping rows that carry missing-value codes.

    Raises
    ------
    ParseError
        On unparsable dates or numbers, ragged rows, or dates that are not
        strictly increasing; the message carries the 1-based line number.
    EmptyPanel
        When no usable rows remain.
    """
    codes = np.asarray(list(missing_codes), dtype=float)
    dates, rows, dropped = [], [], 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyPanel(f"{path} is empty") from None
        header = [h.strip() for h in header]
        if len(header) < 2:
            raise ParseError("need a date column and at least one return column", line=1)
        width = len(header)
        for line_no, raw in enumerate(reader, start=2):
            if not raw or all(not f.strip() for f in raw):
                continue
            if len(raw) != width:
                raise ParseError(f"expected {width} fields, got {len(raw)}", line=line_no)
            try:
                date = parse_date(raw[0])
            except ValueError:
                raise ParseError(f"cannot parse date {raw[0]!r}", line=line_no) from None
            if dates and date <= dates[-1]:
                raise ParseError(f"date {date} is not after {dates[-1]}", line=line_no)
            fields = [f.strip() for f in raw[1:]]
            if any(f == "" for f in fields):
                dropped += 1
                dates.append(date)
                rows.append(None)
                continue
            try:
                vals = np.array([float(f) for f in fields])
            except ValueError as exc:
                raise ParseError(str(exc), line=line_no) from None
            if codes.size and np.any(np.isclose(vals[:, None], codes[None, :],
                                                rtol=0.0, atol=1e-9)):
                dropped += 1
                rows.append(None)
            elif not np.all(np.isfinite(vals)):
                raise ParseError("non-finite return", line=line_no)
            else:
                rows.append(vals)
            dates.append(date)
    keep = [i for i, r in enumerate(rows) if r is not None]
    if not keep:
        raise EmptyPanel(f"no usable rows in {path} ({dropped} dropped)")
    if dropped:
        logger.info("dropped %d rows with missing values from %s", dropped, path)
    return ReturnsPanel(dates=[dates[i] for i in keep], columns=header[1:],
                        values=np.vstack([rows[i] for i in keep]), units=units,
                        dropped_rows=dropped, date_label=header[0])


def write_returns_csv(panel, path):
    """Write a panel in the format :func:`load_returns_csv` reads."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([panel.date_label] + list(panel.columns))
        for date, row in zip(panel.dates, panel.values):
            w.writerow([date.strftime("%Y%m%d")] + [repr(float(v)) for v in row])


def window_periods(panel, years):
    """Windows of ``years`` years starting at the first row on/after July 1.

    A window is kept when the panel reaches both of its ends (within a week,
    allowing for non-trading days) and it holds at least 60 rows.
    """
    if not 1 <= years <= 3:
        raise ValueError(f"years must be 1, 2 or 3, got {years}")
    dates = panel.dates
    slack = dt.timedelta(days=BOUNDARY_SLACK_DAYS)
    out = []
    for y in range(dates[0].year - 1, dates[-1].year + 1):
        start, end = dt.date(y, 7, 1), dt.date(y + years, 7, 1)
        i0 = bisect.bisect_left(dates, start)
        i1 = bisect.bisect_left(dates, end)
        if i0 >= len(dates) or dates[i0] - start > slack:
            continue
        if dates[-1] < end - slack:
            continue
        if i1 - i0 < MIN_WINDOW_ROWS:
            continue
        out.append(PeriodWindow(y, years, dates[i0], i0, i1))
    return out


def _resolve_methods(methods, K):
    return [f"DCV{K}" if m == "DCV" else m for m in methods]


def empirical_frequencies(panel, years, methods=("DCV", "IC1"), d_min=0, d_max=15, K=10,
                          seed=0, transpose_policy="auto"):
    """Run each selector on every window and tabulate the selected ``d``.

    Rows are trading days and columns portfolios. A bare ``"DCV"`` method uses
    ``K`` folds. Output cells are keyed like simulation cells with
    ``error_model="empirical"``, ``theta=None`` and ``n`` the median window
    length; ``replications`` is the number of windows.
    """
    windows = window_periods(panel, years)
    if not windows:
        raise EmptyPanel(f"no complete {years}-year windows with >= {MIN_WINDOW_ROWS} rows")
    methods = _resolve_methods(methods, K)
    p = panel.values.shape[1]
    n_med = int(np.median([w.rows for w in windows]))
    cell = Cell(n_med, p, None, "empirical")
    results, per_window = [], []
    with threadpool_limits(limits=1):
        for w in windows:
            X = panel.values[w.slice()]
            fold_seed = derive_seed(seed, w.start_year)
            record = {"start": w.start.isoformat(), "rows": w.rows}
            for m in methods:
                try:
                    sel, err = run_method(m, X, d_min, d_max, fold_seed=fold_seed,
                                          transpose_policy=transpose_policy), None
                except (NumericalError, np.linalg.LinAlgError) as exc:
                    sel, err = None, f"{type(exc).__name__}: {exc}"
                results.append(ReplicationResult(cell, w.start_year, m, sel, "", error=err))
                record[m] = sel
            per_window.append(record)
    order = {m: i for i, m in enumerate(methods)}
    results.sort(key=lambda r: order[r.method])
    meta = {"years": years, "seed": seed, "d_min": d_min, "d_max": d_max, "K": K,
            "windows": per_window, "dropped_rows": panel.dropped_rows}
    return summarize(results, d0=None, metadata=meta)
