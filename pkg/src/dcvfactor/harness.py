"""Seeded Monte-Carlo experiments comparing factor-count selectors.

Every (cell, replication) pair gets its own counter-based seed derived from
``(master_seed, cell_id, replication)``, so a single replication can be rerun
in isolation and results do not depend on execution order or worker count.
"""
import csv
import io
import json
import logging
import re
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .criteria import ic1_curve
from .dcv import dcv_curve
from .errors import NumericalError
from .simgen import ERROR_MODELS, SimConfig, gen_factor_data

logger = logging.getLogger(__name__)

FAILED = "failed"
CSV_FIELDS = ["method", "n", "p", "theta", "error_model", "selected_d", "count",
              "replications", "frequency"]
METHOD_RE = re.compile(r"^(DCV(\d+)|IC1)$")
FOLD_STREAM = 3


def parse_method(name):
    """Map a method label to ``("dcv", K)`` or ``("ic1", None)``.

    ``DCV1`` is leave-one-out (``K = n``); ``DCVk`` for ``k >= 2`` is k-fold.
    """
    m = METHOD_RE.match(name)
    if m is None:
        raise ValueError(f"unknown method {name!r}; expected DCV<K> or IC1")
    if name == "IC1":
        return "ic1", None
    K = int(m.group(2))
    if K == 0:
        raise ValueError("DCV0 is not a valid method")
    return "dcv", K


def run_method(name, X, d_min, d_max, fold_seed=0, transpose_policy="never"):
    """Selected number of factors for one method on one matrix."""
    kind, K = parse_method(name)
    if kind == "ic1":
        return ic1_curve(X, d_min=d_min, d_max=d_max).selected
    n_eff = X.shape[1] if (transpose_policy == "always" or (
        transpose_policy == "auto" and X.shape[0] < X.shape[1])) else X.shape[0]
    K = n_eff if K == 1 else K
    return dcv_curve(X, K=K, d_min=d_min, d_max=d_max, seed=fold_seed,
                     transpose_policy=transpose_policy).selected


def derive_seed(*key):
    """64-bit seed from an integer key path."""
    ss = np.random.SeedSequence(int(key[0]), spawn_key=tuple(int(k) for k in key[1:]))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class Cell:
    n: int
    p: int
    theta: float
    error_model: str

    @property
    def cell_id(self):
        return zlib.crc32(f"{self.error_model}|{self.n}|{self.p}|{self.theta!r}".encode())


@dataclass
class ExperimentSpec:
    sizes: List[Tuple[int, int]]
    thetas: Dict[str, List[float]]
    error_models: List[str]
    methods: List[str]
    replications: int
    d_min: int = 1
    d_max: int = 8
    d0: int = 5
    master_seed: int = 0
    transpose_policy: str = "never"
    literal_e5: bool = False
    output: Optional[str] = None
    name: str = "experiment"

    def __post_init__(self):
        self.sizes = [(int(n), int(p)) for n, p in self.sizes]
        if isinstance(self.thetas, (list, tuple)):
            self.thetas = {em: list(self.thetas) for em in self.error_models}
        self.thetas = {em: [float(t) for t in ts] for em, ts in self.thetas.items()}
        self.validate()

    def validate(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.methods:
            raise ValueError("methods must be nonempty")
        for m in self.methods:
            parse_method(m)
        if not self.sizes or not self.error_models:
            raise ValueError("grid must have at least one size and one error model")
        for em in self.error_models:
            if em not in ERROR_MODELS:
                raise ValueError(f"unknown error model {em!r}")
            if not self.thetas.get(em):
                raise ValueError(f"no theta grid for error model {em}")
            if any(t < 0 for t in self.thetas[em]):
                raise ValueError("theta values must be nonnegative")
        if not 0 <= self.d_min <= self.d_max:
            raise ValueError(f"need 0 <= d_min <= d_max, got {self.d_min}, {self.d_max}")
        min_p = min(min(n, p) if "IC1" in self.methods else p for n, p in self.sizes)
        if self.d_max >= min_p:
            raise ValueError(f"d_max={self.d_max} must be < smallest grid dimension {min_p}")

    def cells(self):
        return [Cell(n, p, theta, em)
                for em in self.error_models
                for n, p in self.sizes
                for theta in self.thetas[em]]

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        if "sizes" not in doc:
            ns, ps = doc.pop("n"), doc.pop("p")
            doc["sizes"] = [(n, p) for n in ns for p in ps]
        else:
            doc.pop("n", None), doc.pop("p", None)
        if "theta" in doc:
            doc["thetas"] = doc.pop("theta")
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown experiment spec keys: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self):
        return {
            "name": self.name,
            "sizes": [list(s) for s in self.sizes],
            "thetas": self.thetas,
            "error_models": list(self.error_models),
            "methods": list(self.methods),
            "replications": self.replications,
            "d_min": self.d_min,
            "d_max": self.d_max,
            "d0": self.d0,
            "master_seed": self.master_seed,
            "transpose_policy": self.transpose_policy,
            "literal_e5": self.literal_e5,
            "output": self.output,
        }


def load_spec(path):
    """Read an experiment spec from JSON."""
    with open(path) as fh:
        return ExperimentSpec.from_dict(json.load(fh))


@dataclass(frozen=True)
class ReplicationResult:
    cell: Cell
    replication: int
    method: str
    selected: Optional[int]
    digest: str
    runtime: float = field(default=0.0, compare=False)
    error: Optional[str] = None


@dataclass
class CellSummary:
    counts: Dict[object, int]
    replications: int
    d0: Optional[int] = None
    mean_runtime: float = field(default=float("nan"), compare=False)

    @property
    def correct_frequency(self):
        if self.d0 is None or self.replications == 0:
            return None
        return self.counts.get(self.d0, 0) / self.replications

    def frequencies(self):
        return {d: c / self.replications for d, c in self.counts.items()}


def _bucket_order(key):
    return (1, 0) if key == FAILED else (0, int(key))


@dataclass
class McSummary:
    # keyed by (method, n, p, theta, error_model); insertion order is output order
    cells: Dict[tuple, CellSummary] = field(default_factory=dict)
    metadata: Dict[str, object] = field(default_factory=dict, compare=False)
    raw: List[ReplicationResult] = field(default_factory=list, compare=False, repr=False)

    def rows(self):
        for (method, n, p, theta, em), cs in self.cells.items():
            for d in sorted(cs.counts, key=_bucket_order):
                yield {
                    "method": method, "n": n, "p": p, "theta": theta, "error_model": em,
                    "selected_d": d, "count": cs.counts[d],
                    "replications": cs.replications,
                    "frequency": cs.counts[d] / cs.replications,
                }

    def correct_frequency(self, method, n, p, theta, error_model):
        return self.cells[(method, n, p, float(theta), error_model)].correct_frequency


def summarize(results: Sequence[ReplicationResult], d0=None, metadata=None):
    """Aggregate raw replication results into per-cell count tables."""
    acc = {}
    for r in results:
        key = (r.method, r.cell.n, r.cell.p, r.cell.theta, r.cell.error_model)
        entry = acc.setdefault(key, ({}, []))
        bucket = FAILED if r.selected is None else int(r.selected)
        entry[0][bucket] = entry[0].get(bucket, 0) + 1
        entry[1].append(r.runtime)
    cells = {}
    for key, (counts, runtimes) in acc.items():
        cells[key] = CellSummary(
            counts={k: counts[k] for k in sorted(counts, key=_bucket_order)},
            replications=len(runtimes), d0=d0,
            mean_runtime=float(np.mean(runtimes)))
    return McSummary(cells=cells, metadata=dict(metadata or {}), raw=list(results))


def run_replication(spec, cell, r):
    """Draw one panel and run every requested method on it."""
    rep_seed = derive_seed(spec.master_seed, cell.cell_id, r)
    fold_seed = derive_seed(rep_seed, FOLD_STREAM)
    cfg = SimConfig(n=cell.n, p=cell.p, theta=cell.theta, error_model=cell.error_model,
                    d0=spec.d0, seed=rep_seed, literal_e5=spec.literal_e5)
    draw = gen_factor_data(cfg)
    digest = draw.digest()
    out = []
    for method in spec.methods:
        t0 = time.perf_counter()
        try:
            sel, err = run_method(method, draw.X, spec.d_min, spec.d_max,
                                  fold_seed=fold_seed,
                                  transpose_policy=spec.transpose_policy), None
        except (NumericalError, np.linalg.LinAlgError) as exc:
            sel, err = None, f"{type(exc).__name__}: {exc}"
            logger.warning("cell %s rep %d method %s failed: %s", cell, r, method, err)
        out.append(ReplicationResult(cell, r, method, sel, digest,
                                     runtime=time.perf_counter() - t0, error=err))
    return out


def run_experiment(spec, threads=1, record_timing=False):
    """Run every cell and replication of ``spec`` and summarise the counts.

    BLAS is pinned to one thread so numerical results do not depend on
    ``threads``; replications are distributed over a thread pool and reduced
    in (cell, replication) order.
    """
    tasks = [(cell, r) for cell in spec.cells() for r in range(spec.replications)]
    t0 = time.perf_counter()
    with threadpool_limits(limits=1):
        if threads <= 1:
            chunks = [run_replication(spec, c, r) for c, r in tasks]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                chunks = list(pool.map(lambda t: run_replication(spec, *t), tasks))
    results = [res for chunk in chunks for res in chunk]
    # method-major cell order, matching the export layout
    order = {m: i for i, m in enumerate(spec.methods)}
    results.sort(key=lambda r: order[r.method])
    metadata = {
        "name": spec.name,
        "master_seed": spec.master_seed,
        "version": __version__,
        "replications": spec.replications,
        "d_min": spec.d_min,
        "d_max": spec.d_max,
        "d0": spec.d0,
        "fold_seed_rule": "derive_seed(derive_seed(master_seed, cell_id, r), 3)",
    }
    if record_timing:
        metadata["wall_time"] = time.perf_counter() - t0
    summary = summarize(results, d0=spec.d0, metadata=metadata)
    return summary


def _fmt_theta(theta):
    return "" if theta is None else repr(float(theta))


def write_csv(summary, fh):
    writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in summary.rows():
        row = dict(row)
        row["theta"] = _fmt_theta(row["theta"])
        row["frequency"] = f"{row['frequency']:.6f}"
        writer.writerow(row)


def summary_to_json(summary, include_timing=False):
    cells = []
    for (method, n, p, theta, em), cs in summary.cells.items():
        cell = {
            "method": method, "n": n, "p": p, "theta": theta, "error_model": em,
            "d0": cs.d0, "replications": cs.replications,
            "counts": {str(k): v for k, v in cs.counts.items()},
            "correct_frequency": cs.correct_frequency,
        }
        if include_timing:
            cell["mean_runtime"] = cs.mean_runtime
        cells.append(cell)
    return {"metadata": summary.metadata, "cells": cells}


def export(summary, path, fmt=None, include_timing=False):
    """Write a summary as CSV or JSON; the format defaults to the suffix."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            write_csv(summary, fh)
    elif fmt == "json":
        with open(path, "w") as fh:
            json.dump(summary_to_json(summary, include_timing), fh, indent=2, sort_keys=False)
            fh.write("\n")
    else:
        raise ValueError(f"unsupported export format {fmt!r}")
    return path


def _parse_bucket(s):
    return FAILED if s == FAILED else int(s)


def import_summary(path, fmt=None, d0=None):
    """Read a summary written by :func:`export`.

    CSV files do not carry ``d0``; pass it to restore correct-selection rates.
    """
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    summary = McSummary()
    if fmt == "json":
        with open(path) as fh:
            doc = json.load(fh)
        summary.metadata = doc.get("metadata", {})
        for c in doc["cells"]:
            theta = None if c["theta"] is None else float(c["theta"])
            key = (c["method"], int(c["n"]), int(c["p"]), theta, c["error_model"])
            summary.cells[key] = CellSummary(
                counts={_parse_bucket(k): int(v) for k, v in c["counts"].items()},
                replications=int(c["replications"]), d0=c.get("d0"),
                mean_runtime=c.get("mean_runtime", float("nan")))
        return summary
    if fmt != "csv":
        raise ValueError(f"unsupported import format {fmt!r}")
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            theta = float(row["theta"]) if row["theta"] != "" else None
            key = (row["method"], int(row["n"]), int(row["p"]), theta, row["error_model"])
            cs = summary.cells.setdefault(
                key, CellSummary(counts={}, replications=int(row["replications"]), d0=d0))
            cs.counts[_parse_bucket(row["selected_d"])] = int(row["count"])
    return summary


def summary_csv_text(summary):
    buf = io.StringIO()
    write_csv(summary, buf)
    return buf.getvalue()
