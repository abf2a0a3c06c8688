"""Random matrix ensembles with exact column-norm guarantees.

Five variants are supported:

* ``dense_gaussian`` — i.i.d. N(0, 1/m) entries (columns concentrate at norm 1),
* ``dense_rademacher`` — i.i.d. +/-1/sqrt(m) entries,
* ``approx_sparse`` — i.i.d. entries equal to +1 or -1 with probability
  s/2m each and 0 otherwise (column support size is Binomial(m, s/m)),
* ``exact_sparse`` — each column uniform over vectors with exactly s
  nonzero +/-1 entries (column norm is sqrt(s) deterministically),
* ``column_normalized`` — a base ensemble conditioned per column on a
  norm lower bound and rescaled to an exact target norm.

Matrices are immutable after construction and safe to share across
threads.  All sampling is a pure function of a :class:`SeedPath`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ResampleExhaustedError
from .rng import ColumnStreams, SeedPath, polar_normals, rademacher

DENSE_GAUSSIAN = "dense_gaussian"
DENSE_RADEMACHER = "dense_rademacher"
APPROX_SPARSE = "approx_sparse"
EXACT_SPARSE = "exact_sparse"
COLUMN_NORMALIZED = "column_normalized"

VARIANTS = (DENSE_GAUSSIAN, DENSE_RADEMACHER, APPROX_SPARSE, EXACT_SPARSE,
            COLUMN_NORMALIZED)
SPARSE_VARIANTS = (APPROX_SPARSE, EXACT_SPARSE)

# Density below which approx-sparse sampling walks the nonzero positions
# with geometric gaps instead of testing every entry.  Both paths draw
# from the identical distribution (not the identical stream).
_SKIP_DENSITY = 0.1


@dataclass(frozen=True)
class EnsembleSpec:
    """Declarative description of a random matrix distribution."""

    variant: str
    m: int
    n: int
    s: int | None = None
    target_norm: float | None = None
    min_norm_fraction: float = 0.5
    base: "EnsembleSpec | None" = None
    max_resamples: int = 1000

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown ensemble variant {self.variant!r}")
        if not (isinstance(self.m, int) and self.m >= 1):
            raise ParameterError("m must be a positive integer")
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ParameterError("n must be a positive integer")
        if self.variant in SPARSE_VARIANTS:
            if self.s is None or not (1 <= self.s <= self.m):
                raise ParameterError("sparse variants require 1 <= s <= m")
        if self.variant == COLUMN_NORMALIZED:
            if self.base is None:
                raise ParameterError("column_normalized requires a base spec")
            if self.base.variant == COLUMN_NORMALIZED:
                raise ParameterError("base of column_normalized may not itself be column_normalized")
            if self.base.m != self.m or self.base.n != self.n:
                raise ParameterError("base dimensions must match (m, n)")
            if self.target_norm is None or not self.target_norm > 0:
                raise ParameterError("column_normalized requires target_norm > 0")
        if not (0.0 < self.min_norm_fraction < 1.0):
            raise ParameterError("min_norm_fraction must lie in (0, 1)")
        if self.max_resamples < 1:
            raise ParameterError("max_resamples must be >= 1")

    def default_lambda(self) -> float:
        """Centering lambda: 1 for dense, sqrt(s) for sparse, target_norm for normalized."""
        if self.variant in SPARSE_VARIANTS:
            return math.sqrt(self.s)
        if self.variant == COLUMN_NORMALIZED:
            return self.target_norm
        return 1.0

    def to_dict(self) -> dict:
        d = {"variant": self.variant, "m": self.m, "n": self.n}
        if self.s is not None:
            d["s"] = self.s
        if self.variant == COLUMN_NORMALIZED:
            d["target_norm"] = self.target_norm
            d["min_norm_fraction"] = self.min_norm_fraction
            d["max_resamples"] = self.max_resamples
            d["base"] = self.base.to_dict()
        return d

    @staticmethod
    def from_dict(d: dict) -> "EnsembleSpec":
        d = dict(d)
        if "base" in d and d["base"] is not None:
            d["base"] = EnsembleSpec.from_dict(d["base"])
        return EnsembleSpec(**d)


@dataclass
class ColumnMatrix:
    """An m x n matrix stored column-wise.

    Sparse storage keeps, per column, strictly increasing row indices and
    +/-1 signs.  Dense storage keeps the full (m, n) array.
    """

    m: int
    n: int
    storage: str  # "sparse" | "dense"
    indices: list | None = None
    signs: list | None = None
    dense: np.ndarray | None = None
    _csc: object = field(default=None, repr=False, compare=False)

    def to_csc(self):
        """scipy CSC view of a sparse matrix (cached)."""
        if self.storage != "sparse":
            raise ParameterError("to_csc only applies to sparse storage")
        if self._csc is None:
            from scipy.sparse import csc_matrix
            counts = np.fromiter((len(ix) for ix in self.indices), dtype=np.int64,
                                 count=self.n)
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            np.cumsum(counts, out=indptr[1:])
            if indptr[-1]:
                idx = np.concatenate(self.indices)
                data = np.concatenate(self.signs).astype(np.float64)
            else:
                idx = np.empty(0, dtype=np.int64)
                data = np.empty(0, dtype=np.float64)
            self._csc = csc_matrix((data, idx, indptr), shape=(self.m, self.n))
        return self._csc


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _approx_sparse_column(gen, m: int, s: int, force_path: str | None = None):
    """One approx-sparse column as (indices, signs).

    ``force_path`` pins "entrywise" or "skip" for distribution tests;
    by default the cheaper path for the density is taken.
    """
    p = s / m
    path = force_path or ("skip" if p < _SKIP_DENSITY else "entrywise")
    if path == "entrywise":
        u = gen.random(m)
        idx = np.flatnonzero(u < p)
        sgn = np.where(u[idx] < 0.5 * p, 1, -1).astype(np.int8)
        return idx.astype(np.int64), sgn
    # Skip path: gaps between nonzeros are Geometric(p) on {1, 2, ...}.
    positions = []
    pos = -1
    chunk = max(8, int(s + 4 * math.sqrt(s)) + 4)
    while True:
        gaps = gen.geometric(p, size=chunk)
        cum = pos + np.cumsum(gaps)
        crossed = cum >= m
        if crossed.any():
            stop = int(np.argmax(crossed))
            positions.append(cum[:stop])
            break
        positions.append(cum)
        pos = int(cum[-1])
    idx = np.concatenate(positions).astype(np.int64) if positions else np.empty(0, np.int64)
    sgn = rademacher(gen, idx.size)
    return idx, sgn


def _exact_sparse_column(gen, m: int, s: int):
    """One exact-sparse column: uniform s-subset support, i.i.d. signs.

    The support comes from a partial Fisher-Yates shuffle of a virtual
    index pool, which is exactly uniform over all C(m, s) subsets.
    """
    if s == m:
        idx = np.arange(m, dtype=np.int64)
    elif s == 1:
        idx = np.array([gen.integers(0, m)], dtype=np.int64)
    else:
        draws = np.arange(s) + gen.integers(0, m - np.arange(s))
        swap: dict = {}
        chosen = np.empty(s, dtype=np.int64)
        for i, j in enumerate(draws):
            j = int(j)
            chosen[i] = swap.get(j, j)
            swap[j] = swap.get(i, i)
        chosen.sort()
        idx = chosen
    return idx, rademacher(gen, s)


def _sample_base_column(gen, spec: EnsembleSpec):
    """One column of a non-normalized ensemble, as held by ColumnMatrix."""
    if spec.variant == APPROX_SPARSE:
        return _approx_sparse_column(gen, spec.m, spec.s)
    if spec.variant == EXACT_SPARSE:
        return _exact_sparse_column(gen, spec.m, spec.s)
    if spec.variant == DENSE_GAUSSIAN:
        return polar_normals(gen, spec.m) / math.sqrt(spec.m)
    if spec.variant == DENSE_RADEMACHER:
        return rademacher(gen, spec.m) / math.sqrt(spec.m)
    raise ParameterError(f"cannot sample base column for {spec.variant!r}")


def sample_matrix(spec: EnsembleSpec, seed: SeedPath,
                  _streams: ColumnStreams | None = None) -> ColumnMatrix:
    """Draw a matrix; columns are independent streams under the seed path."""
    if spec.variant == COLUMN_NORMALIZED:
        return normalize_columns_conditional(spec, seed, _streams=_streams)[0]
    streams = ColumnStreams(seed) if _streams is None else _streams.retarget(seed)
    if spec.variant in SPARSE_VARIANTS:
        indices, signs = [], []
        for j in range(spec.n):
            idx, sgn = _sample_base_column(streams.column(j), spec)
            indices.append(_freeze(idx))
            signs.append(_freeze(sgn))
        return ColumnMatrix(spec.m, spec.n, "sparse", indices=indices, signs=signs)
    dense = np.empty((spec.m, spec.n))
    for j in range(spec.n):
        dense[:, j] = _sample_base_column(streams.column(j), spec)
    return ColumnMatrix(spec.m, spec.n, "dense", dense=_freeze(dense))


def normalize_columns_conditional(spec: EnsembleSpec, seed: SeedPath,
                                  _streams: ColumnStreams | None = None):
    """Resample base columns below the norm threshold, then rescale.

    Each column is drawn from its own stream until its Euclidean norm
    reaches ``min_norm_fraction * target_norm`` and is then scaled to
    norm exactly ``target_norm``.  Returns the dense matrix and the
    per-column attempt counts (1 = first draw accepted).
    """
    if spec.variant != COLUMN_NORMALIZED:
        raise ParameterError("normalize_columns_conditional requires a column_normalized spec")
    lam = spec.target_norm
    threshold = spec.min_norm_fraction * lam
    dense = np.empty((spec.m, spec.n))
    attempts_per_column = []
    streams = ColumnStreams(seed) if _streams is None else _streams.retarget(seed)
    for j in range(spec.n):
        gen = streams.column(j)
        for attempt in range(1, spec.max_resamples + 1):
            col = _sample_base_column(gen, spec.base)
            if spec.base.variant in SPARSE_VARIANTS:
                idx, sgn = col
                norm = math.sqrt(idx.size)
                if norm < threshold:
                    continue
                full = np.zeros(spec.m)
                full[idx] = sgn
                col = full
            else:
                norm = float(np.linalg.norm(col))
                if norm < threshold:
                    continue
            dense[:, j] = (lam / norm) * col
            attempts_per_column.append(attempt)
            break
        else:
            raise ResampleExhaustedError(column=j, attempts=spec.max_resamples)
    return ColumnMatrix(spec.m, spec.n, "dense", dense=_freeze(dense)), attempts_per_column


def column_norms(A: ColumnMatrix) -> np.ndarray:
    """Euclidean norm of every column; sqrt of the entry count for sparse."""
    if A.storage == "sparse":
        return np.sqrt(np.fromiter((len(ix) for ix in A.indices), dtype=np.float64,
                                   count=A.n))
    return np.linalg.norm(A.dense, axis=0)


def matvec(A: ColumnMatrix, x: np.ndarray) -> np.ndarray:
    """Exact A @ x; sparse columns accumulate only at stored indices."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.n,):
        raise ParameterError(f"x has shape {x.shape}, expected ({A.n},)")
    if A.storage == "dense":
        return A.dense @ x
    out = np.zeros(A.m)
    for j in np.flatnonzero(x):
        out[A.indices[j]] += x[j] * A.signs[j]
    return out


def dump_matrix(A: ColumnMatrix) -> str:
    """Text dump: header ``m n``, then one ``col <j> ...`` line per column."""
    lines = [f"{A.m} {A.n}"]
    if A.storage == "sparse":
        for j in range(A.n):
            entries = " ".join(f"{i}:{'+1' if s > 0 else '-1'}"
                               for i, s in zip(A.indices[j], A.signs[j]))
            lines.append(f"col {j} : {entries}".rstrip())
    else:
        for j in range(A.n):
            values = " ".join(repr(float(v)) for v in A.dense[:, j])
            lines.append(f"col {j} dense : {values}")
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> ColumnMatrix:
    """Inverse of :func:`dump_matrix`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParameterError("empty matrix dump")
    try:
        m, n = (int(tok) for tok in lines[0].split())
    except ValueError as exc:
        raise ParameterError(f"bad header line {lines[0]!r}") from exc
    if len(lines) != n + 1:
        raise ParameterError(f"expected {n} column lines, found {len(lines) - 1}")
    sparse_cols: dict[int, tuple] = {}
    dense_cols: dict[int, np.ndarray] = {}
    for ln in lines[1:]:
        head, _, payload = ln.partition(":")
        head_toks = head.split()
        if head_toks[0] != "col":
            raise ParameterError(f"bad column line {ln!r}")
        j = int(head_toks[1])
        if len(head_toks) == 3 and head_toks[2] == "dense":
            dense_cols[j] = np.array([float(t) for t in payload.split()])
        else:
            pairs = [tok.split(":") for tok in payload.split()]
            idx = np.array([int(i) for i, _ in pairs], dtype=np.int64)
            sgn = np.array([int(s) for _, s in pairs], dtype=np.int8)
            sparse_cols[j] = (idx, sgn)
    if set(sparse_cols) | set(dense_cols) != set(range(n)):
        raise ParameterError("column indices do not cover 0..n-1")
    if not dense_cols:
        indices = [_freeze(sparse_cols[j][0]) for j in range(n)]
        signs = [_freeze(sparse_cols[j][1]) for j in range(n)]
        return ColumnMatrix(m, n, "sparse", indices=indices, signs=signs)
    dense = np.zeros((m, n))
    for j in range(n):
        if j in dense_cols:
            col = dense_cols[j]
            if col.size != m:
                raise ParameterError(f"dense column {j} has {col.size} entries, expected {m}")
            dense[:, j] = col
        else:
            idx, sgn = sparse_cols[j]
            dense[idx, j] = sgn
    return ColumnMatrix(m, n, "dense", dense=_freeze(dense))
