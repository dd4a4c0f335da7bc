"""Sample-size sweeps comparing spectral learning and Baum-Welch.

Every (example, N, repetition) cell samples one observation sequence and
hands the same data to each requested algorithm.  For the sliding-window
scheme the sequence has N + 2 symbols so that exactly N triplets are
available; the independent scheme uses 3N symbols.
"""

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from . import em as em_mod
from .errors import HmmError
from .evaluation import align_permutation
from .hmm import sample_sequence, validate_model
from .moments import TRIPLET_SCHEMES, estimate_moments
from .rng import derive_seed
from .spectral import SpectralOptions, spectral_learn
from .systems import resolve_example

ALGORITHMS = ("SL", "EM-random", "EM-true")
DEFAULT_SAMPLE_SIZES = (10**3, 10**4, 10**5, 10**6, 10**7)
QUICK_SAMPLE_SIZES = (10**3, 10**4, 10**5)

CSV_COLUMNS = (
    "example_id",
    "algorithm",
    "N",
    "rep",
    "seed",
    "mse_O",
    "mse_T",
    "mse_pi",
    "valid",
    "error_tag",
    "runtime_s",
    "em_iterations",
)
NONDETERMINISTIC_COLUMNS = ("runtime_s",)


@dataclass
class BenchmarkConfig:
    examples: list
    sample_sizes: tuple = DEFAULT_SAMPLE_SIZES
    repetitions: int = 20
    algorithms: tuple = ("SL",)
    master_seed: int = 0
    triplet_scheme: str = "sliding"
    em_max_iter: int = em_mod.DEFAULT_MAX_ITER
    em_tol: float = em_mod.DEFAULT_TOL
    output_path: Optional[str] = None
    spectral: SpectralOptions = field(default_factory=SpectralOptions)
    jobs: int = 1

    def __post_init__(self):
        self.sample_sizes = tuple(int(n) for n in self.sample_sizes)
        self.algorithms = tuple(self.algorithms)
        if not self.examples:
            raise ValueError("at least one example is required")
        if not self.sample_sizes or any(n < 1 for n in self.sample_sizes):
            raise ValueError("sample sizes must be positive")
        if any(b <= a for a, b in zip(self.sample_sizes, self.sample_sizes[1:])):
            raise ValueError("sample sizes must be strictly increasing")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown or not self.algorithms:
            raise ValueError(f"algorithms must be a non-empty subset of {ALGORITHMS}, got {self.algorithms}")
        if self.triplet_scheme not in TRIPLET_SCHEMES:
            raise ValueError(f"unknown triplet scheme {self.triplet_scheme!r}")
        if self.em_max_iter < 1:
            raise ValueError("em_max_iter must be >= 1")

    def sequence_length(self, N):
        return N + 2 if self.triplet_scheme == "sliding" else 3 * N

    def to_dict(self):
        d = asdict(self)
        d["spectral"] = {k: v for k, v in d["spectral"].items() if k != "projection"}
        return d


@dataclass
class BenchmarkRecord:
    example_id: str
    algorithm: str
    N: int
    rep: int
    seed: int
    mse_O: Optional[float] = None
    mse_T: Optional[float] = None
    mse_pi: Optional[float] = None
    valid: Optional[bool] = None
    error_tag: str = ""
    runtime_s: float = 0.0
    em_iterations: Optional[int] = None

    def sort_key(self):
        return (self.example_id, self.algorithm, self.N, self.rep)

    def to_row(self):
        def num(v):
            return "" if v is None else repr(float(v))

        return {
            "example_id": self.example_id,
            "algorithm": self.algorithm,
            "N": str(self.N),
            "rep": str(self.rep),
            "seed": str(self.seed),
            "mse_O": num(self.mse_O),
            "mse_T": num(self.mse_T),
            "mse_pi": num(self.mse_pi),
            "valid": "" if self.valid is None else str(int(self.valid)),
            "error_tag": self.error_tag,
            "runtime_s": f"{self.runtime_s:.6f}",
            "em_iterations": "" if self.em_iterations is None else str(self.em_iterations),
        }

    @classmethod
    def from_row(cls, row):
        def num(v):
            return None if v in ("", None) else float(v)

        return cls(
            example_id=row["example_id"],
            algorithm=row["algorithm"],
            N=int(row["N"]),
            rep=int(row["rep"]),
            seed=int(row["seed"]),
            mse_O=num(row["mse_O"]),
            mse_T=num(row["mse_T"]),
            mse_pi=num(row["mse_pi"]),
            valid=None if row["valid"] == "" else bool(int(row["valid"])),
            error_tag=row.get("error_tag", "") or "",
            runtime_s=float(row["runtime_s"] or 0.0),
            em_iterations=None if not row.get("em_iterations") else int(row["em_iterations"]),
        )


def cell_seed(master_seed, example_id, N, rep):
    return derive_seed(master_seed, "cell", example_id, N, rep)


def _error_tag(exc):
    stage = getattr(exc, "stage", None)
    return f"{type(exc).__name__}@{stage}" if stage else type(exc).__name__


def _run_sl(truth, seq, config, seed):
    t0 = time.perf_counter()
    triples = TRIPLET_SCHEMES[config.triplet_scheme](seq)
    moments = estimate_moments(triples)
    est = spectral_learn(moments, truth.X, seed, config.spectral)
    runtime = time.perf_counter() - t0
    return est, est.validity.stochastic_valid, runtime, None


def _run_em(truth, seq, config, seed, init):
    t0 = time.perf_counter()
    result = em_mod.baum_welch(init, seq, config.em_max_iter, config.em_tol)
    runtime = time.perf_counter() - t0
    return result.model, validate_model(result.model, 1e-9).valid, runtime, result.iterations


def run_cell(config, example_id, N, rep):
    """Run every requested algorithm on one shared sequence."""
    system = resolve_example(example_id)
    truth = system.model
    seed = cell_seed(config.master_seed, example_id, N, rep)
    seq = sample_sequence(truth, config.sequence_length(N), derive_seed(seed, "sequence"), model_id=example_id)
    records = []
    for algo in config.algorithms:
        rec = BenchmarkRecord(example_id, algo, N, rep, seed)
        try:
            if algo == "SL":
                est, valid, runtime, iters = _run_sl(truth, seq, config, derive_seed(seed, "sl"))
            elif algo == "EM-random":
                init = em_mod.random_init(truth.X, truth.Y, derive_seed(seed, "em-init"))
                est, valid, runtime, iters = _run_em(truth, seq, config, seed, init)
            else:
                est, valid, runtime, iters = _run_em(truth, seq, config, seed, truth)
            aligned = align_permutation(truth, est)
            rec.mse_O, rec.mse_T, rec.mse_pi = aligned.mse_O, aligned.mse_T, aligned.mse_pi
            rec.valid = bool(valid)
            rec.runtime_s = runtime
            rec.em_iterations = iters
        except (HmmError, np.linalg.LinAlgError, FloatingPointError) as exc:
            rec.error_tag = _error_tag(exc)
        records.append(rec)
    return records


class CsvSink:
    """Append records as they arrive; rewrite in canonical order on close."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.DictWriter(self._fh, fieldnames=CSV_COLUMNS)
        self._writer.writeheader()
        self._fh.flush()

    def write(self, records):
        for rec in records:
            self._writer.writerow(rec.to_row())
        self._fh.flush()

    def close(self, all_records):
        self._fh.close()
        write_records(all_records, self.path)


def write_records(records, path):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for rec in sorted(records, key=BenchmarkRecord.sort_key):
            writer.writerow(rec.to_row())
    os.replace(tmp, path)


def read_records(path):
    with open(path, newline="") as fh:
        return [BenchmarkRecord.from_row(row) for row in csv.DictReader(fh)]


def run_benchmark(config, progress=None):
    """Run the full sweep and return records in canonical order.

    With ``config.output_path`` set, rows are appended to the CSV as each
    cell finishes (so an interrupted sweep leaves a readable prefix) and a
    ``.meta.json`` sidecar records the configuration.
    """
    for ref in config.examples:
        resolve_example(ref)
    cells = [(ex, N, rep) for ex in config.examples for N in config.sample_sizes for rep in range(config.repetitions)]
    sink = None
    if config.output_path:
        sink = CsvSink(config.output_path)
        meta = {"config": config.to_dict(), "sequence_length": "N+2" if config.triplet_scheme == "sliding" else "3N"}
        Path(str(config.output_path) + ".meta.json").write_text(json.dumps(meta, indent=2, default=str) + "\n")

    records = []

    def collect(recs):
        records.extend(recs)
        if sink:
            sink.write(recs)
        if progress:
            progress(recs)

    try:
        if config.jobs <= 1:
            for cell in cells:
                collect(run_cell(config, *cell))
        else:
            with ProcessPoolExecutor(max_workers=config.jobs) as pool:
                futures = [pool.submit(run_cell, config, *cell) for cell in cells]
                for fut in as_completed(futures):
                    collect(fut.result())
    finally:
        if sink:
            sink.close(records)
    records.sort(key=BenchmarkRecord.sort_key)
    return records


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------


@dataclass
class Summary:
    mse_table: list
    validity_table: list
    cond_table: list
    spearman: float
    table_N: Optional[int]

    def to_dict(self):
        return asdict(self)


def _mean(values):
    values = [v for v in values if v is not None and math.isfinite(v)]
    return float(np.mean(values)) if values else float("nan")


def spearman(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    if ok.sum() < 2 or np.all(x[ok] == x[ok][0]) or np.all(y[ok] == y[ok][0]):
        return float("nan")
    return float(stats.spearmanr(x[ok], y[ok]).statistic)


def summarize(records, cond_lookup=None, table_algorithm="SL", exclude_invalid=False):
    """Aggregate benchmark records into the three report tables.

    * ``mse_table``: mean errors and runtime per (example, algorithm, N).
    * ``validity_table``: fraction of SL runs per (example, N) that were
      invalid or failed outright.
    * ``cond_table``: examples sorted by decreasing mean ``mse_O`` of
      ``table_algorithm`` at the largest N, with cond(OT).

    ``spearman`` is the rank correlation between cond(OT) and that error.
    ``cond_lookup`` maps example id to cond(OT); ids missing from it are
    resolved as bundled examples or model files.
    """
    records = list(records)
    cond_lookup = dict(cond_lookup or {})

    groups = {}
    for r in records:
        groups.setdefault((r.example_id, r.algorithm, r.N), []).append(r)

    mse_table = []
    for (ex, algo, N), rs in sorted(groups.items()):
        used = [r for r in rs if not r.error_tag and not (exclude_invalid and r.valid is False)]
        mse_table.append(
            {
                "example_id": ex,
                "algorithm": algo,
                "N": N,
                "runs": len(rs),
                "errors": sum(bool(r.error_tag) for r in rs),
                "mean_mse_O": _mean([r.mse_O for r in used]),
                "mean_mse_T": _mean([r.mse_T for r in used]),
                "mean_mse_pi": _mean([r.mse_pi for r in used]),
                "mean_runtime_s": _mean([r.runtime_s for r in rs if not r.error_tag]),
            }
        )

    validity_table = []
    for (ex, algo, N), rs in sorted(groups.items()):
        if algo != "SL":
            continue
        invalid = sum(1 for r in rs if r.error_tag or not r.valid)
        validity_table.append({"example_id": ex, "N": N, "runs": len(rs), "invalid_fraction": invalid / len(rs)})

    table_rows = [row for row in mse_table if row["algorithm"] == table_algorithm]
    table_N = max((row["N"] for row in table_rows), default=None)
    cond_table = []
    for row in table_rows:
        if row["N"] != table_N:
            continue
        ex = row["example_id"]
        if ex not in cond_lookup:
            try:
                cond_lookup[ex] = resolve_example(ex).cond_OT
            except (KeyError, OSError, HmmError):
                cond_lookup[ex] = float("nan")
        cond_table.append({"example_id": ex, "mse_O": row["mean_mse_O"], "cond_OT": cond_lookup[ex]})
    cond_table.sort(key=lambda r: (-r["mse_O"] if math.isfinite(r["mse_O"]) else -math.inf, r["example_id"]))
    rho = spearman([r["cond_OT"] for r in cond_table], [r["mse_O"] for r in cond_table])
    return Summary(mse_table, validity_table, cond_table, rho, table_N)


def write_table(rows, path, fmt="csv"):
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(rows, indent=2) + "\n")
        return
    if not rows:
        path.write_text("")
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


__all__ = [
    "ALGORITHMS",
    "BenchmarkConfig",
    "BenchmarkRecord",
    "CSV_COLUMNS",
    "Summary",
    "cell_seed",
    "read_records",
    "run_benchmark",
    "run_cell",
    "summarize",
    "write_records",
    "write_table",
]
