"""Dataset ingestion and synthetic data generation.

Two formats are supported:

* LIBSVM text (``<label> <idx>:<val> ...``, 1-based feature indices) for
  sparse binary-classification data.
* A CSV layout for survival data with header ``t,delta,f1..fd`` and
  optional leading ``# key=value`` metadata comment lines.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InputError, ParseError, SchemaError


@dataclass
class SparseDataset:
    """Sparse rows in CSR layout plus one {-1,+1} label per row.

    ``indices`` are stored 0-based internally; serialization restores the
    1-based external convention.  ``d`` is the feature-space dimension,
    by default the largest feature index seen.
    """

    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    labels: np.ndarray
    d: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.indptr = np.asarray(self.indptr, dtype=np.int64)
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        if self.n < 1:
            raise InputError("dataset must contain at least one row")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise SchemaError("labels must be -1 or +1")
        if len(self.indices) and self.indices.max() >= self.d:
            raise InputError("feature index exceeds declared dimension")
        if len(self.values) and not np.all(np.isfinite(self.values)):
            raise InputError("feature values must be finite")

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    def row(self, i: int):
        """(indices, values) of row i, 0-based indices."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.values[lo:hi]

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, self.indices, self.indptr), shape=(self.n, self.d)
        )

    def row_norms_sq(self) -> np.ndarray:
        out = np.zeros(self.n)
        np.add.at(
            out,
            np.repeat(np.arange(self.n), np.diff(self.indptr)),
            self.values**2,
        )
        return out

    def __eq__(self, other):
        if not isinstance(other, SparseDataset):
            return NotImplemented
        return (
            self.d == other.d
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.labels, other.labels)
        )


def _map_label(tok: str, lineno: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise SchemaError(f"line {lineno}: label {tok!r} is not a number") from None
    if v == 1.0:
        return 1.0
    if v in (-1.0, 0.0):
        return -1.0
    raise SchemaError(f"line {lineno}: label {tok!r} not in {{-1, 0, +1}}")


def parse_libsvm(source, min_dim: int | None = None) -> SparseDataset:
    """Parse LIBSVM-format text into a SparseDataset.

    ``source`` may be a string of text or any iterable of lines (e.g. an
    open file).  ``#`` starts a comment; blank lines are skipped.  Feature
    indices must be >= 1 and strictly increasing within a row.  Labels 0/1
    are remapped to -1/+1.  ``min_dim`` can only enlarge the inferred
    dimension (some dataset splits omit trailing features).
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    labels: list[float] = []
    max_idx = 0
    for lineno, raw in enumerate(source, 1):
        cut = raw.find("#")
        if cut >= 0:
            raw = raw[:cut]
        line = raw.strip()
        if not line:
            continue
        toks = line.split()
        labels.append(_map_label(toks[0], lineno))
        prev = 0
        for tok in toks[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"malformed feature pair {tok!r}", line=lineno)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(
                    f"malformed feature pair {tok!r}", line=lineno
                ) from None
            if idx < 1:
                raise ParseError(f"feature index {idx} must be >= 1", line=lineno)
            if idx <= prev:
                raise ParseError(
                    f"feature index {idx} not increasing (after {prev})", line=lineno
                )
            if not math.isfinite(val):
                raise ParseError(f"non-finite value in pair {tok!r}", line=lineno)
            prev = idx
            indices.append(idx - 1)
            values.append(val)
        indptr.append(len(indices))
        if prev > max_idx:
            max_idx = prev
    if not labels:
        raise InputError("no data rows found")
    d = max(max_idx, min_dim or 0)
    if d == 0:
        d = 1  # all-empty rows still need a nonempty feature space
    return SparseDataset(
        indptr=np.array(indptr),
        indices=np.array(indices, dtype=np.int64),
        values=np.array(values),
        labels=np.array(labels),
        d=d,
    )


def load_libsvm(path, min_dim: int | None = None) -> SparseDataset:
    with open(path, "r") as fh:
        ds = parse_libsvm(fh, min_dim=min_dim)
    ds.meta["path"] = str(path)
    return ds


def serialize_libsvm(ds: SparseDataset) -> str:
    """Render a dataset back to LIBSVM text (1-based indices).

    Values use ``repr`` so that parsing the output reproduces them exactly.
    """
    out = []
    for i in range(ds.n):
        idx, vals = ds.row(i)
        parts = ["+1" if ds.labels[i] > 0 else "-1"]
        parts.extend(f"{int(j) + 1}:{float(v)!r}" for j, v in zip(idx, vals))
        out.append(" ".join(parts))
    return "\n".join(out) + "\n"


def write_libsvm(ds: SparseDataset, path) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_libsvm(ds))


def write_read_roundtrip(ds: SparseDataset) -> SparseDataset:
    """Serialize to LIBSVM text and reparse; the result equals the input.

    The original dimension is passed through so datasets with an enlarged
    ``d`` survive the trip unchanged.
    """
    return parse_libsvm(serialize_libsvm(ds), min_dim=ds.d)


# ---------------------------------------------------------------------------
# survival data


@dataclass
class SurvivalDataset:
    """Dense feature rows with positive event/censor times and 0/1 events."""

    features: np.ndarray
    times: np.ndarray
    events: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        self.events = np.asarray(self.events, dtype=np.int64)
        if self.features.ndim != 2:
            raise InputError("features must be a 2-d array")
        n = self.features.shape[0]
        if n < 1:
            raise InputError("survival dataset must contain at least one row")
        if self.times.shape != (n,) or self.events.shape != (n,):
            raise InputError("times/events shapes must match the feature rows")
        if not np.all(np.isfinite(self.times)) or np.any(self.times <= 0):
            raise InputError("event times must be positive and finite")
        if not np.all(np.isin(self.events, (0, 1))):
            raise InputError("event indicators must be 0 or 1")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


def gen_survival(
    n: int, d: int, sparsity: float = 0.2, censor_rate: float = 0.0, seed: int = 0
) -> SurvivalDataset:
    """Synthetic survival data from an exponential hazard model.

    Gaussian features; a sparse true coefficient vector; event times drawn
    exponentially with rate exp(a_i . coef).  The ``censor_rate`` fraction
    of rows with the largest drawn times are marked censored (event 0).
    Generator parameters, the true coefficients and their support are
    recorded in ``meta``.
    """
    if n < 1 or d < 1:
        raise InputError(f"need n, d >= 1, got n={n}, d={d}")
    if not 0.0 <= censor_rate < 1.0:
        raise InputError(f"censor_rate must be in [0, 1), got {censor_rate}")
    if not 0.0 < sparsity <= 1.0:
        raise InputError(f"sparsity must be in (0, 1], got {sparsity}")
    rng = np.random.default_rng(seed)
    features = rng.standard_normal((n, d))
    k = max(1, int(round(sparsity * d)))
    support = np.sort(rng.choice(d, size=k, replace=False))
    coef = np.zeros(d)
    coef[support] = rng.choice([-1.0, 1.0], size=k) * (0.5 + rng.random(k))
    rate = np.exp(np.clip(features @ coef, -30.0, 30.0))
    times = np.maximum(rng.exponential(1.0 / rate), 1e-12)
    events = np.ones(n, dtype=np.int64)
    n_censor = int(math.floor(censor_rate * n))
    if n_censor:
        events[np.argsort(times)[-n_censor:]] = 0
    meta = {
        "generator": "exponential-hazard",
        "n": n,
        "d": d,
        "sparsity": sparsity,
        "censor_rate": censor_rate,
        "seed": seed,
        "coef_true": coef.tolist(),
        "support": support.tolist(),
    }
    return SurvivalDataset(features, times, events, meta=meta)


def serialize_survival_csv(ds: SurvivalDataset) -> str:
    """CSV with header ``t,delta,f1..fd``; metadata as '#' comment lines."""
    lines = [f"# {key}={_meta_str(val)}" for key, val in ds.meta.items()]
    lines.append("t,delta," + ",".join(f"f{j + 1}" for j in range(ds.d)))
    for i in range(ds.n):
        feats = ",".join(repr(float(v)) for v in ds.features[i])
        lines.append(f"{float(ds.times[i])!r},{int(ds.events[i])},{feats}")
    return "\n".join(lines) + "\n"


def _meta_str(val) -> str:
    if isinstance(val, list):
        return ";".join(repr(float(v)) for v in val)
    return str(val)


def write_survival_csv(ds: SurvivalDataset, path) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_survival_csv(ds))


def load_survival_csv(path) -> SurvivalDataset:
    meta: dict = {}
    rows = []
    with open(path, "r") as fh:
        header = None
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, val = line[1:].strip().partition("=")
                if sep:
                    meta[key.strip()] = val.strip()
                continue
            if header is None:
                header = line.split(",")
                if header[:2] != ["t", "delta"]:
                    raise ParseError(
                        "survival CSV header must start with 't,delta'", line=lineno
                    )
                continue
            toks = line.split(",")
            if len(toks) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(toks)}", line=lineno
                )
            try:
                rows.append([float(t) for t in toks])
            except ValueError:
                raise ParseError("non-numeric field", line=lineno) from None
    if header is None or not rows:
        raise InputError("no survival rows found")
    arr = np.array(rows)
    return SurvivalDataset(
        features=arr[:, 2:], times=arr[:, 0], events=arr[:, 1].astype(np.int64),
        meta=meta,
    )
