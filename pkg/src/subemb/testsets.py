"""Structured test sets and their sup-oracles.

A :class:`TestSet` is a subset T of R^n exposed through two oracles:
``sup_linear`` (the linear supremum behind width/complexity) and
``distortion_sup`` (the worst norm distortion behind the isometry
constant).  Finite sets are enumerated exactly; the k-sparse cap and
sphere samples report certified lower bounds for the distortion sup;
the unit ball of a subspace is handled in closed form via singular
values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .ensembles import ColumnMatrix, matvec
from .errors import ParameterError
from .rng import DOMAIN_SET, polar_normals, stream

FINITE = "finite"
K_SPARSE = "k_sparse"
SUBSPACE_BALL = "subspace_ball"
SPHERE_SAMPLE = "sphere_sample"

# Candidate-point budget for the k-sparse lower-bound enumeration, and
# the fixed seed those candidates are drawn from (part of the set's
# identity, so results are reproducible without a user-facing knob).
_K_SPARSE_CANDIDATES = 128
_K_SPARSE_SEED = 0x5E7


class DistortionResult(NamedTuple):
    delta: float
    witness: np.ndarray
    lower_bound: bool


@dataclass
class TestSet:
    """A subset of R^n with enumerable or closed-form sup structure."""

    n: int
    variant: str
    label: str
    points: np.ndarray | None = None     # (k, n) rows for finite/sphere/candidates
    k: int | None = None                  # sparsity level for k_sparse
    basis: np.ndarray | None = None       # (n, d) orthonormal columns
    _pts_csc: object = field(default=None, repr=False, compare=False)
    _pts_norms: np.ndarray | None = field(default=None, repr=False, compare=False)

    def element_norms(self) -> np.ndarray:
        if self._pts_norms is None:
            self._pts_norms = np.linalg.norm(self.points, axis=1)
        return self._pts_norms

    def points_csc(self):
        if self._pts_csc is None:
            from scipy.sparse import csc_matrix
            self._pts_csc = csc_matrix(self.points.T)
        return self._pts_csc


def _basis_vector(n: int, i: int, sign: float = 1.0) -> np.ndarray:
    v = np.zeros(n)
    v[i] = sign
    return v


def _finite(n: int, points: np.ndarray, label: str, variant: str = FINITE) -> TestSet:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != n:
        raise ParameterError(f"points must have shape (k, {n})")
    points.flags.writeable = False
    return TestSet(n=n, variant=variant, label=label, points=points)


def _k_sparse_candidates(n: int, k: int) -> np.ndarray:
    """Basis vectors plus seeded random k-sparse unit vectors."""
    pts = [np.eye(n)]
    gen = stream(_K_SPARSE_SEED, DOMAIN_SET, n, k)
    extra = np.zeros((_K_SPARSE_CANDIDATES, n))
    for r in range(_K_SPARSE_CANDIDATES):
        support = gen.permutation(n)[:k]
        vals = polar_normals(gen, k)
        norm = np.linalg.norm(vals)
        if norm == 0.0:
            vals, norm = np.ones(k), math.sqrt(k)
        extra[r, support] = vals / norm
    pts.append(extra)
    return np.vstack(pts)


def build_set(kind: str, n: int, **params) -> TestSet:
    """Construct a named test set in R^n.

    Kinds: ``singleton``, ``basis``, ``difference``, ``pair_differences``,
    ``k_sparse`` (param k), ``subspace`` (params d, seed),
    ``sphere_sample`` (params count, seed), ``finite`` (param points).
    """
    if not (isinstance(n, int) and n >= 1):
        raise ParameterError("n must be a positive integer")
    if kind == "singleton":
        return _finite(n, [_basis_vector(n, 0)], f"singleton(n={n})")
    if kind == "basis":
        return _finite(n, np.eye(n), f"basis(n={n})")
    if kind == "difference":
        if n < 2:
            raise ParameterError("difference set requires n >= 2")
        pts = [_basis_vector(n, 0) - _basis_vector(n, i) for i in range(1, n)]
        return _finite(n, pts, f"difference(n={n})")
    if kind == "pair_differences":
        if n < 2:
            raise ParameterError("pair_differences requires n >= 2")
        pts = [(_basis_vector(n, i) - _basis_vector(n, j)) / math.sqrt(2)
               for i in range(n) for j in range(i + 1, n)]
        return _finite(n, pts, f"pair_differences(n={n})")
    if kind == "finite":
        return _finite(n, params["points"], params.get("label", f"finite(n={n})"))
    if kind == "k_sparse":
        k = params["k"]
        if not (1 <= k <= n):
            raise ParameterError("k_sparse requires 1 <= k <= n")
        ts = TestSet(n=n, variant=K_SPARSE, label=f"k_sparse(n={n},k={k})", k=k,
                     points=_k_sparse_candidates(n, k))
        return ts
    if kind == "subspace":
        d, seed = params["d"], params.get("seed", 0)
        if not (1 <= d <= n):
            raise ParameterError("subspace requires 1 <= d <= n")
        gen = stream(seed, DOMAIN_SET, n, d)
        raw = polar_normals(gen, n * d).reshape(n, d)
        basis, _ = np.linalg.qr(raw)
        basis.flags.writeable = False
        return TestSet(n=n, variant=SUBSPACE_BALL, label=f"subspace(n={n},d={d})",
                       basis=basis)
    if kind == "sphere_sample":
        count, seed = params["count"], params.get("seed", 0)
        if count < 1:
            raise ParameterError("sphere_sample requires count >= 1")
        gen = stream(seed, DOMAIN_SET, n, count)
        pts = polar_normals(gen, count * n).reshape(count, n)
        norms = np.linalg.norm(pts, axis=1)
        norms[norms == 0.0] = 1.0
        pts /= norms[:, None]
        return _finite(n, pts, f"sphere_sample(n={n},count={count})",
                       variant=SPHERE_SAMPLE)
    raise ParameterError(f"unknown test set kind {kind!r}")


def sup_linear(T: TestSet, g: np.ndarray, signed: bool = False):
    """sup over T of <g, x> (or |<g, x>| when signed), with a witness in T.

    Exact for finite sets (linear scan, ties broken by lowest index) and
    in closed form for the k-sparse cap and subspace balls.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (T.n,):
        raise ParameterError(f"g has shape {g.shape}, expected ({T.n},)")
    if T.variant in (FINITE, SPHERE_SAMPLE):
        scores = T.points @ g
        if signed:
            scores = np.abs(scores)
        i = int(np.argmax(scores))
        return float(scores[i]), T.points[i].copy()
    if T.variant == K_SPARSE:
        order = np.argsort(-np.abs(g), kind="stable")[:T.k]
        norm = float(np.linalg.norm(g[order]))
        witness = np.zeros(T.n)
        if norm > 0.0:
            witness[order] = g[order] / norm
        else:
            witness[0] = 1.0
        return norm, witness
    if T.variant == SUBSPACE_BALL:
        c = T.basis.T @ g
        norm = float(np.linalg.norm(c))
        if norm > 0.0:
            witness = T.basis @ (c / norm)
        else:
            witness = np.zeros(T.n)
        return norm, witness
    raise ParameterError(f"unsupported variant {T.variant!r}")


def _embedded_norms_finite(A: ColumnMatrix, T: TestSet) -> np.ndarray:
    pts = T.points
    k = pts.shape[0]
    if A.storage == "dense":
        return np.linalg.norm(A.dense @ pts.T, axis=0)
    if k <= 8:
        return np.array([np.linalg.norm(matvec(A, x)) for x in pts])
    Y = A.to_csc() @ T.points_csc()
    Y = Y.tocsc()
    counts = np.diff(Y.indptr)
    norms_sq = np.bincount(np.repeat(np.arange(k), counts),
                           weights=np.square(Y.data), minlength=k)
    return np.sqrt(norms_sq)


def embedded_norms(T: TestSet, A: ColumnMatrix) -> np.ndarray:
    """||A x|| for every enumerated element x of a finite-type set."""
    if T.variant not in (FINITE, SPHERE_SAMPLE, K_SPARSE):
        raise ParameterError("embedded_norms requires an enumerable set")
    if A.n != T.n:
        raise ParameterError(f"A has {A.n} columns, set lives in R^{T.n}")
    return _embedded_norms_finite(A, T)


def distortion_values(T: TestSet, A: ColumnMatrix, lam: float) -> np.ndarray:
    """| ||Ax|| - lam*||x|| | for every enumerated element of T."""
    return np.abs(embedded_norms(T, A) - lam * T.element_norms())


def distortion_sup(T: TestSet, A: ColumnMatrix, lam: float) -> DistortionResult:
    """Worst norm distortion of A over T at centering lam.

    Exact for finite sets and subspace balls; a certified lower bound
    (flagged) for k-sparse caps and sphere samples.
    """
    if A.n != T.n:
        raise ParameterError(f"A has {A.n} columns, set lives in R^{T.n}")
    if T.variant in (FINITE, SPHERE_SAMPLE, K_SPARSE):
        vals = distortion_values(T, A, lam)
        i = int(np.argmax(vals))
        lower = T.variant in (SPHERE_SAMPLE, K_SPARSE)
        return DistortionResult(float(vals[i]), T.points[i].copy(), lower)
    if T.variant == SUBSPACE_BALL:
        M = np.asarray(A.dense @ T.basis if A.storage == "dense"
                       else A.to_csc() @ T.basis)
        _, sv, vt = np.linalg.svd(M, full_matrices=True)
        smax = float(sv[0])
        # With d > m the map has a kernel, so the smallest attainable
        # stretch on the unit sphere of the subspace is 0.
        smin = 0.0 if M.shape[1] > M.shape[0] else float(sv[-1])
        if smax - lam >= lam - smin:
            delta, z = smax - lam, vt[0]
        else:
            delta, z = lam - smin, vt[-1]
        return DistortionResult(float(delta), T.basis @ z, False)
    raise ParameterError(f"unsupported variant {T.variant!r}")


def rad_diam(T: TestSet) -> tuple[float, float]:
    """(largest norm in T, largest pairwise distance in T)."""
    if T.variant in (FINITE, SPHERE_SAMPLE):
        norms = T.element_norms()
        rad = float(norms.max())
        gram = T.points @ T.points.T
        sq = norms[:, None] ** 2 + norms[None, :] ** 2 - 2 * gram
        diam = float(math.sqrt(max(0.0, sq.max())))
        return rad, diam
    if T.variant in (K_SPARSE, SUBSPACE_BALL):
        return 1.0, 2.0
    raise ParameterError(f"unsupported variant {T.variant!r}")


def save_finite_csv(T: TestSet, path: str) -> None:
    """Finite sets store as CSV: header ``dim=<n>``, one vector per row."""
    if T.variant not in (FINITE, SPHERE_SAMPLE):
        raise ParameterError("only finite sets store as CSV")
    with open(path, "w") as fh:
        fh.write(f"dim={T.n}\n")
        for row in T.points:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_finite_csv(path: str) -> TestSet:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("dim="):
            raise ParameterError(f"expected 'dim=<n>' header, got {header!r}")
        n = int(header[4:])
        rows = [[float(tok) for tok in line.split(",")]
                for line in fh if line.strip()]
    return build_set("finite", n, points=np.array(rows).reshape(len(rows), n))
