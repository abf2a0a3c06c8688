"""Distortion statistics, increment samples, and empirical psi2 fits."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .ensembles import ColumnMatrix, EnsembleSpec, matvec, sample_matrix
from .errors import BudgetError, ParameterError
from .parallel import run_chunked
from .rng import ColumnStreams, SeedPath
from .testsets import K_SPARSE, SPHERE_SAMPLE, TestSet, distortion_sup

_QUANTILES = (0.5, 0.9, 0.99)
_PSI2_T_CAP = 1e6


@dataclass(frozen=True)
class DistortionReport:
    """Aggregate of per-trial worst distortions delta = sup | ||Ax|| - lam ||x|| |."""

    spec: EnsembleSpec
    set_id: str
    lam: float
    trials: int
    mean: float
    stderr: float
    min: float
    max: float
    q50: float
    q90: float
    q99: float
    lower_bound_flag: bool
    per_trial: tuple | None = None

    def to_dict(self) -> dict:
        d = {
            "spec": self.spec.to_dict(),
            "set_id": self.set_id,
            "lam": self.lam,
            "trials": self.trials,
            "mean": self.mean,
            "stderr": self.stderr,
            "min": self.min,
            "max": self.max,
            "quantiles": {"0.5": self.q50, "0.9": self.q90, "0.99": self.q99},
            "lower_bound_flag": self.lower_bound_flag,
        }
        if self.per_trial is not None:
            d["per_trial"] = list(self.per_trial)
        return d

    @staticmethod
    def from_dict(d: dict) -> "DistortionReport":
        q = d["quantiles"]
        per_trial = tuple(d["per_trial"]) if "per_trial" in d else None
        return DistortionReport(
            spec=EnsembleSpec.from_dict(d["spec"]), set_id=d["set_id"],
            lam=d["lam"], trials=d["trials"], mean=d["mean"], stderr=d["stderr"],
            min=d["min"], max=d["max"], q50=q["0.5"], q90=q["0.9"], q99=q["0.99"],
            lower_bound_flag=d["lower_bound_flag"], per_trial=per_trial)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @staticmethod
    def from_json(text: str) -> "DistortionReport":
        return DistortionReport.from_dict(json.loads(text))

    @staticmethod
    def csv_header() -> list[str]:
        return ["variant", "m", "n", "s", "set_id", "lam", "trials", "mean",
                "stderr", "min", "max", "q50", "q90", "q99", "lower_bound"]

    def csv_row(self) -> list:
        return [self.spec.variant, self.spec.m, self.spec.n,
                "" if self.spec.s is None else self.spec.s,
                self.set_id, self.lam, self.trials, self.mean, self.stderr,
                self.min, self.max, self.q50, self.q90, self.q99,
                self.lower_bound_flag]


@dataclass(frozen=True)
class Psi2Fit:
    value: float
    method: str  # "mgf_root" | "moment_sup"
    samples: int


def nearest_rank(sorted_vals: np.ndarray, q: float) -> float:
    """Nearest-rank quantile (deterministic, no interpolation)."""
    n = sorted_vals.size
    rank = max(1, math.ceil(q * n))
    return float(sorted_vals[rank - 1])


def isometry_trials(spec: EnsembleSpec, T: TestSet, lam: float, trials: int,
                    seed: int, retain: bool = False,
                    workers: int | None = None) -> DistortionReport:
    """Draw independent matrices and aggregate their worst distortions.

    Trial t uses the seed path (seed, t, .), so the report is a pure
    function of the arguments regardless of worker count.
    """
    if trials < 1:
        raise ParameterError("need trials >= 1")
    if T.n != spec.n:
        raise ParameterError(f"set lives in R^{T.n} but spec has n = {spec.n}")
    deltas = np.empty(trials)

    def work(lo: int, hi: int) -> None:
        streams = ColumnStreams(SeedPath(seed, lo))
        for t in range(lo, hi):
            A = sample_matrix(spec, SeedPath(seed, t), _streams=streams)
            deltas[t] = distortion_sup(T, A, lam).delta

    run_chunked(work, trials, workers)
    lower = T.variant in (SPHERE_SAMPLE, K_SPARSE)
    ordered = np.sort(deltas)
    stderr = float(np.std(deltas, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return DistortionReport(
        spec=spec, set_id=T.label, lam=float(lam), trials=trials,
        mean=float(np.mean(deltas)), stderr=stderr,
        min=float(ordered[0]), max=float(ordered[-1]),
        q50=nearest_rank(ordered, 0.5), q90=nearest_rank(ordered, 0.9),
        q99=nearest_rank(ordered, 0.99),
        lower_bound_flag=bool(lower),
        per_trial=tuple(float(d) for d in deltas) if retain else None)


def increment_sample(A: ColumnMatrix, x, y, lam: float) -> tuple[float, float]:
    """(increment ratio, squared-process ratio) for one matrix and pair.

    ratio = (Z_x - Z_y)/||x - y|| with Z_v = ||Av|| - lam ||v||;
    squared_ratio = (||Ax||^2 - ||Ay||^2)/||x - y||.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != (A.n,) or y.shape != (A.n,):
        raise ParameterError(f"x, y must have shape ({A.n},)")
    if np.array_equal(x, y):
        raise ParameterError("degenerate input: x and y coincide")
    dist = float(np.linalg.norm(x - y))
    ax = float(np.linalg.norm(matvec(A, x)))
    ay = float(np.linalg.norm(matvec(A, y)))
    zx = ax - lam * float(np.linalg.norm(x))
    zy = ay - lam * float(np.linalg.norm(y))
    return (zx - zy) / dist, (ax * ax - ay * ay) / dist


def empirical_psi2(samples, method: str = "mgf_root") -> Psi2Fit:
    """Fit the subgaussian norm of an empirical sample.

    mgf_root solves mean exp(Z^2/t^2) = 2 on the empirical law by
    bisection (1e-9 relative).  moment_sup takes the sup over even
    moments p <= 16 of p^(-1/2) (mean |Z|^p)^(1/p).
    """
    z = np.asarray(samples, dtype=np.float64)
    if z.ndim != 1:
        raise ParameterError("samples must be one-dimensional")
    if not np.all(np.isfinite(z)):
        raise ParameterError("samples must be finite")
    if method == "moment_sup":
        if np.all(z == 0.0):
            return Psi2Fit(0.0, method, z.size)
        a = np.abs(z)
        best = max(
            (np.mean(a ** p) ** (1.0 / p)) / math.sqrt(p)
            for p in (2, 4, 6, 8, 10, 12, 14, 16)
        )
        return Psi2Fit(float(best), method, z.size)
    if method != "mgf_root":
        raise ParameterError(f"unknown psi2 method {method!r}")
    if z.size < 100:
        raise ParameterError("mgf_root needs at least 100 samples")
    z2 = z * z
    top = float(z2.max())
    if top == 0.0:
        return Psi2Fit(0.0, method, z.size)

    def mgf(t: float) -> float:
        return float(np.mean(np.exp(z2 / (t * t))))

    # At t_lo the largest sample alone pushes the mean to >= 2.
    lo = math.sqrt(top / math.log(2.0 * z.size))
    hi = _PSI2_T_CAP
    if mgf(hi) >= 2.0:
        raise BudgetError("empirical MGF admits no psi2 root below 1e6")
    if mgf(lo) < 2.0:  # pathological: bracket downward (cannot go below 0)
        while mgf(lo) < 2.0 and lo > 1e-300:
            lo /= 2.0
    while (hi - lo) > 1e-9 * hi:
        mid = 0.5 * (lo + hi)
        if mgf(mid) >= 2.0:
            lo = mid
        else:
            hi = mid
    return Psi2Fit(0.5 * (lo + hi), method, z.size)
