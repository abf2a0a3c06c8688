"""Monte Carlo Gaussian width and complexity estimation.

Estimates share a common random-number scheme: the direction for sample
index i depends only on (seed, i), so estimates over different sets
under the same seed are paired, nested sets are pointwise monotone, and
scaling a set scales the estimate exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .rng import DOMAIN_WIDTH, polar_normals, stream
from .testsets import FINITE, K_SPARSE, SPHERE_SAMPLE, SUBSPACE_BALL, TestSet

# Samples per stream block.  Fixed so that the direction for a given
# sample index never depends on the total sample count.
_BLOCK = 4096


@dataclass(frozen=True)
class WidthEstimate:
    value: float
    stderr: float
    samples: int
    kind: str  # "width" | "complexity"
    closed_form: bool = False


def _sup_block(T: TestSet, G: np.ndarray, signed: bool) -> np.ndarray:
    """Vectorized sup_linear over the rows of G."""
    if T.variant in (FINITE, SPHERE_SAMPLE):
        scores = G @ T.points.T
        if signed:
            np.abs(scores, out=scores)
        return scores.max(axis=1)
    if T.variant == K_SPARSE:
        a = np.abs(G)
        if T.k < T.n:
            a = -np.partition(-a, T.k - 1, axis=1)[:, :T.k]
        return np.sqrt(np.sum(a * a, axis=1))
    if T.variant == SUBSPACE_BALL:
        return np.linalg.norm(G @ T.basis, axis=1)
    raise ParameterError(f"unsupported variant {T.variant!r}")


def _sup_samples(T: TestSet, samples: int, seed: int, signed: bool) -> np.ndarray:
    out = np.empty(samples)
    for block in range((samples + _BLOCK - 1) // _BLOCK):
        gen = stream(seed, DOMAIN_WIDTH, block)
        # Always draw the full block so sample i is independent of the
        # requested total.
        G = polar_normals(gen, _BLOCK * T.n).reshape(_BLOCK, T.n)
        lo = block * _BLOCK
        hi = min(lo + _BLOCK, samples)
        out[lo:hi] = _sup_block(T, G[: hi - lo], signed)
    return out


def _estimate(T: TestSet, samples: int, seed: int, signed: bool, kind: str) -> WidthEstimate:
    if samples < 2:
        raise ParameterError("need samples >= 2")
    vals = _sup_samples(T, samples, seed, signed)
    value = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(samples))
    return WidthEstimate(value, stderr, samples, kind)


def estimate_width(T: TestSet, samples: int, seed: int = 0) -> WidthEstimate:
    """Monte Carlo mean of sup_{x in T} <g, x> over g ~ N(0, I_n)."""
    return _estimate(T, samples, seed, signed=False, kind="width")


def estimate_complexity(T: TestSet, samples: int, seed: int = 0) -> WidthEstimate:
    """Monte Carlo mean of sup_{x in T} |<g, x>| over g ~ N(0, I_n)."""
    return _estimate(T, samples, seed, signed=True, kind="complexity")


def closed_form_complexity(T: TestSet) -> WidthEstimate | None:
    """Exact complexity where a closed form is registered, else None.

    Singletons: ||x|| sqrt(2/pi).  Subspace balls (symmetric, so width
    and complexity coincide): the chi(d) mean via the Gamma ratio.
    """
    if T.variant == FINITE and T.points.shape[0] == 1:
        norm = float(np.linalg.norm(T.points[0]))
        value = norm * math.sqrt(2.0 / math.pi)
        return WidthEstimate(value, 0.0, 0, "complexity", closed_form=True)
    if T.variant == SUBSPACE_BALL:
        d = T.basis.shape[1]
        value = math.sqrt(2.0) * math.exp(math.lgamma((d + 1) / 2.0) - math.lgamma(d / 2.0))
        return WidthEstimate(value, 0.0, 0, "complexity", closed_form=True)
    return None
