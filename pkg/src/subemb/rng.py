"""Deterministic counter-based random streams.

Every random quantity in the package is drawn from a Philox generator
whose 256-bit counter encodes (domain, index_a, index_b) under a single
master seed.  Streams with different counters never overlap, so results
are independent of thread scheduling and evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
# Fixed second key word; keeps these streams disjoint from any ad-hoc
# Philox(seed) a caller might create with the same master seed.
_KEY_SALT = 0x9E3779B97F4A7C15

# Domain tags (third counter word).  Consumers with different domains
# never share a stream even at equal indices.
DOMAIN_MATRIX = 0
DOMAIN_WIDTH = 1
DOMAIN_CELL = 2
DOMAIN_SET = 3


@dataclass(frozen=True)
class SeedPath:
    """Addresses one column stream of one trial under a master seed."""

    master_seed: int
    trial_index: int = 0
    column_index: int = 0


def stream(master_seed: int, domain: int, a: int = 0, b: int = 0) -> np.random.Generator:
    """Independent generator for counter position (domain, a, b)."""
    bitgen = np.random.Philox(
        key=[master_seed & _MASK64, _KEY_SALT],
        counter=[0, b & _MASK64, a & _MASK64, domain & _MASK64],
    )
    return np.random.Generator(bitgen)


def column_stream(path: SeedPath, column_offset: int = 0) -> np.random.Generator:
    """Stream feeding one matrix column of one trial."""
    return stream(
        path.master_seed,
        DOMAIN_MATRIX,
        path.trial_index,
        path.column_index + column_offset,
    )


class ColumnStreams:
    """Per-column streams of one trial, sharing one generator object.

    Produces bit-identical output to :func:`column_stream` while paying
    the Philox construction cost once per matrix instead of per column.
    Not safe to share across threads; trials are the parallel unit.
    """

    def __init__(self, path: SeedPath):
        self._master = path.master_seed
        self._bg = np.random.Philox(key=[path.master_seed & _MASK64, _KEY_SALT])
        self._gen = np.random.Generator(self._bg)
        self._template = self._bg.state
        counter = self._template["state"]["counter"]
        counter[0] = 0
        counter[2] = path.trial_index & _MASK64
        counter[3] = DOMAIN_MATRIX
        self._template["buffer_pos"] = 4
        self._template["has_uint32"] = 0
        self._template["uinteger"] = 0
        self._base = path.column_index

    def retarget(self, path: SeedPath) -> "ColumnStreams":
        """Point the factory at another trial of the same master seed."""
        if path.master_seed != self._master:
            return ColumnStreams(path)
        self._template["state"]["counter"][2] = path.trial_index & _MASK64
        self._base = path.column_index
        return self

    def column(self, j: int) -> np.random.Generator:
        self._template["state"]["counter"][1] = (self._base + j) & _MASK64
        self._bg.state = self._template
        return self._gen


def derive_seed(master_seed: int, index: int, domain: int = DOMAIN_CELL) -> int:
    """A fresh 63-bit master seed for a sub-computation (e.g. a grid cell)."""
    gen = stream(master_seed, domain, index)
    return int(gen.integers(0, 1 << 63, dtype=np.uint64))


_POLAR_CHUNK = 1 << 16


def polar_normals(gen: np.random.Generator, count: int) -> np.ndarray:
    """Standard normals via the Marsaglia polar transform.

    Rejection consumes the uniform stream deterministically, so the
    output is a pure function of the generator state and the count.
    Candidate batches are capped to keep temporaries cache-friendly.
    """
    out = np.empty(count)
    filled = 0
    while filled < count:
        need = count - filled
        # ~78.5% of pairs are accepted and each yields two normals.
        k = min(_POLAR_CHUNK, max(32, (need * 3) // 4 + 16))
        u = 2.0 * gen.random(k) - 1.0
        v = 2.0 * gen.random(k) - 1.0
        s = u * u + v * v
        ok = (s > 0.0) & (s < 1.0)
        us, vs, ss = u[ok], v[ok], s[ok]
        f = np.sqrt(-2.0 * np.log(ss) / ss)
        pair = np.empty(2 * us.size)
        pair[0::2] = us * f
        pair[1::2] = vs * f
        take = min(pair.size, need)
        out[filled:filled + take] = pair[:take]
        filled += take
    return out


def rademacher(gen: np.random.Generator, count: int) -> np.ndarray:
    """Uniform +/-1 signs as an int8 array."""
    return (gen.integers(0, 2, size=count, dtype=np.int8) * 2 - 1).astype(np.int8)
