"""End-to-end experiment harness: configuration -> trials -> reports.

Each experiment kind sweeps a parameter grid, runs Monte Carlo cells
against the exact oracles where one is registered, and emits rows with
a stable, kind-specific column order.  Reports serialize to JSON
(round-trippable) and CSV (byte-identical for identical configs,
independent of worker count).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .complexity import estimate_complexity, estimate_width
from .ensembles import (APPROX_SPARSE, COLUMN_NORMALIZED, DENSE_GAUSSIAN,
                        EXACT_SPARSE, ColumnMatrix, EnsembleSpec, column_norms,
                        sample_matrix)
from .errors import BudgetError, ParameterError
from .isometry import isometry_trials, empirical_psi2, nearest_rank
from .oracles import (binom_sqrt_deviation, choose_n_for_lower_bound,
                      collision_probability, scalar_psi2_closed_form)
from .rng import SeedPath, derive_seed
from .testsets import build_set, distortion_sup, embedded_norms, rad_diam

KINDS = ("divergence", "lower_bound_exact_sparse", "normalization",
         "psi2_scaling", "tail_profile", "conjecture_diag")
_DIVERGENCE_ARMS = ("approx", "exact", "normalized", "row_sparse")

# The lower-bound construction needs n = ceil((2em/s)^(3s)) columns, so
# only tiny (m, s) stay at desk scale.
_LOWER_BOUND_MAX_M = 8
_LOWER_BOUND_MAX_S = 2

_TAIL_FIT_GRID = np.linspace(0.0, 1.0, 11)
_TAIL_TEST_US = (1.0, 2.0, 3.0)


def _as_int_list(value, name: str) -> list[int]:
    if isinstance(value, bool) or value is None:
        raise ParameterError(f"{name} must be an integer or list of integers")
    if isinstance(value, int):
        return [value]
    if isinstance(value, (list, tuple)) and value and all(
            isinstance(v, int) and not isinstance(v, bool) for v in value):
        return list(value)
    raise ParameterError(f"{name} must be an integer or nonempty list of integers")


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment sweep."""

    kind: str
    m: tuple
    s: tuple = (1,)
    n: tuple = (1,)
    trials: int = 100
    mc_samples: int = 2000
    seed: int = 0
    output: str | None = None
    retain_trials: bool = False
    arms: tuple = ("approx", "exact", "normalized")

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown experiment kind {self.kind!r}")
        for name in ("m", "s", "n"):
            vals = getattr(self, name)
            if not vals:
                raise ParameterError(f"empty {name} grid")
            if any(v < 1 for v in vals):
                raise ParameterError(f"{name} values must be >= 1")
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if self.mc_samples < 2:
            raise ParameterError("mc_samples must be >= 2")
        if self.kind == "divergence":
            unknown = [a for a in self.arms if a not in _DIVERGENCE_ARMS]
            if unknown or not self.arms:
                raise ParameterError(f"bad divergence arms {list(self.arms)!r}")
        if self.kind == "lower_bound_exact_sparse":
            if max(self.m) > _LOWER_BOUND_MAX_M or max(self.s) > _LOWER_BOUND_MAX_S:
                raise ParameterError(
                    f"lower bound experiment is capped at m <= {_LOWER_BOUND_MAX_M}, "
                    f"s <= {_LOWER_BOUND_MAX_S}")
        if self.kind in ("divergence", "normalization", "tail_profile",
                         "conjecture_diag") and min(self.n) < 2:
            raise ParameterError(f"{self.kind} requires n >= 2")

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        allowed = {"kind", "m", "s", "n", "trials", "mc_samples", "seed",
                   "output", "retain_trials", "arms"}
        unknown = set(d) - allowed
        if unknown:
            raise ParameterError(f"unknown config fields: {sorted(unknown)}")
        if "kind" not in d or "m" not in d:
            raise ParameterError("config requires at least 'kind' and 'm'")
        kwargs = dict(d)
        for name in ("m", "s", "n"):
            if name in kwargs:
                kwargs[name] = tuple(_as_int_list(kwargs[name], name))
        if "arms" in kwargs:
            kwargs["arms"] = tuple(kwargs["arms"])
        return ExperimentConfig(**kwargs)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "m": list(self.m), "s": list(self.s),
             "n": list(self.n), "trials": self.trials,
             "mc_samples": self.mc_samples, "seed": self.seed,
             "retain_trials": self.retain_trials}
        if self.output is not None:
            d["output"] = self.output
        if self.kind == "divergence":
            d["arms"] = list(self.arms)
        return d


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    columns: list
    rows: list
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "columns": list(self.columns),
                "rows": [dict(r) for r in self.rows],
                "provenance": dict(self.provenance)}

    @staticmethod
    def from_dict(d: dict) -> "ExperimentReport":
        return ExperimentReport(config=ExperimentConfig.from_dict(d["config"]),
                                columns=list(d["columns"]),
                                rows=[dict(r) for r in d["rows"]],
                                provenance=dict(d["provenance"]))

    def __eq__(self, other):
        return (isinstance(other, ExperimentReport)
                and self.to_dict() == other.to_dict())


def _provenance(cfg: ExperimentConfig) -> dict:
    return {"package": "subemb", "version": __version__, "seed": cfg.seed}


def _approx_spec(m: int, n: int, s: int) -> EnsembleSpec:
    return EnsembleSpec(APPROX_SPARSE, m, n, s=s)


def _normalized_approx_spec(m: int, n: int, s: int) -> EnsembleSpec:
    return EnsembleSpec(COLUMN_NORMALIZED, m, n, target_norm=math.sqrt(s),
                        base=_approx_spec(m, n, s))


def _transpose(A: ColumnMatrix) -> ColumnMatrix:
    """Column matrix of A^T (used by the row-sparse control arm)."""
    if A.storage == "dense":
        dense = np.ascontiguousarray(A.dense.T)
        dense.flags.writeable = False
        return ColumnMatrix(A.n, A.m, "dense", dense=dense)
    rows, cols, signs = [], [], []
    for j in range(A.n):
        rows.append(A.indices[j])
        cols.append(np.full(len(A.indices[j]), j, dtype=np.int64))
        signs.append(A.signs[j])
    r = np.concatenate(rows) if rows else np.empty(0, np.int64)
    c = np.concatenate(cols) if cols else np.empty(0, np.int64)
    v = np.concatenate(signs) if signs else np.empty(0, np.int8)
    order = np.lexsort((c, r))
    r, c, v = r[order], c[order], v[order]
    indices = [c[r == i] for i in range(A.m)]
    sgns = [v[r == i] for i in range(A.m)]
    return ColumnMatrix(A.n, A.m, "sparse", indices=indices, signs=sgns)


def _divergence_cell(cfg, m, s, n, cell_seed) -> dict:
    lam = math.sqrt(s)
    row = {"kind": cfg.kind, "m": m, "s": s, "n": n, "trials": cfg.trials}
    pair_diff = build_set("pair_differences", n)
    if "approx" in cfg.arms:
        rep = isometry_trials(_approx_spec(m, n, s), build_set("singleton", n),
                              lam, cfg.trials, cell_seed)
        row["approx_mean"], row["approx_stderr"] = rep.mean, rep.stderr
    if "exact" in cfg.arms:
        rep = isometry_trials(EnsembleSpec(EXACT_SPARSE, m, n, s=s), pair_diff,
                              lam, cfg.trials, cell_seed)
        row["exact_mean"], row["exact_stderr"] = rep.mean, rep.stderr
    if "normalized" in cfg.arms:
        rep = isometry_trials(_normalized_approx_spec(m, n, s), pair_diff,
                              lam, cfg.trials, cell_seed)
        row["normalized_mean"], row["normalized_stderr"] = rep.mean, rep.stderr
    if "row_sparse" in cfg.arms:
        singleton_m = build_set("singleton", m)
        spec = EnsembleSpec(EXACT_SPARSE, m, m, s=s)
        deltas = np.empty(cfg.trials)
        for t in range(cfg.trials):
            At = _transpose(sample_matrix(spec, SeedPath(cell_seed, t)))
            deltas[t] = distortion_sup(singleton_m, At, lam).delta
        row["row_sparse_mean"] = float(np.mean(deltas))
        row["row_sparse_stderr"] = (float(np.std(deltas, ddof=1) / math.sqrt(cfg.trials))
                                    if cfg.trials > 1 else 0.0)
    row["oracle"] = binom_sqrt_deviation(m, s).value
    return row


def _lower_bound_cell(cfg, m, s, n_ignored, cell_seed) -> dict:
    n = choose_n_for_lower_bound(m, s)
    lam = math.sqrt(s)
    T = build_set("difference", n)
    spec = EnsembleSpec(EXACT_SPARSE, m, n, s=s)
    elem_norms = T.element_norms()
    deltas = np.empty(cfg.trials)
    collided = np.empty(cfg.trials, dtype=bool)
    for t in range(cfg.trials):
        A = sample_matrix(spec, SeedPath(cell_seed, t))
        norms = embedded_norms(T, A)
        deltas[t] = np.max(np.abs(norms - lam * elem_norms))
        collided[t] = bool(np.any(norms == 0.0))
    gamma = estimate_complexity(T, cfg.mc_samples, cell_seed)
    mean_delta = float(np.mean(deltas))
    q = collision_probability(m, s).value
    return {
        "kind": cfg.kind, "m": m, "s": s, "n": n, "trials": cfg.trials,
        "collision_freq": float(np.mean(collided)),
        "mean_delta": mean_delta,
        "stderr_delta": (float(np.std(deltas, ddof=1) / math.sqrt(cfg.trials))
                         if cfg.trials > 1 else 0.0),
        "gamma_hat": gamma.value, "gamma_stderr": gamma.stderr,
        "ratio_fit": mean_delta * math.sqrt(math.log(2 * m / s)) / gamma.value,
        "oracle": 1.0 - (1.0 - q) ** (n - 1),
    }


def _normalization_cell(cfg, m, s, n, cell_seed) -> dict:
    lam = math.sqrt(s)
    T = build_set("pair_differences", n)
    # Both arms run from the same cell seed, so the normalized arm's
    # first draw of each column is the unnormalized arm's column.
    plain = isometry_trials(_approx_spec(m, n, s), T, lam, cfg.trials, cell_seed)
    normalized = isometry_trials(_normalized_approx_spec(m, n, s), T, lam,
                                 cfg.trials, cell_seed)
    return {"kind": cfg.kind, "m": m, "s": s, "n": n, "trials": cfg.trials,
            "unnormalized_mean": plain.mean, "unnormalized_stderr": plain.stderr,
            "normalized_mean": normalized.mean,
            "normalized_stderr": normalized.stderr}


def psi2_marginal_samples(m: int, s: int, count: int, seed: int) -> np.ndarray:
    """Samples of <A_1, u>, u = all-ones/sqrt(m), for approx-sparse columns."""
    spec_chunk = 4096
    vals = np.empty(count)
    filled = 0
    trial = 0
    scale = 1.0 / math.sqrt(m)
    while filled < count:
        n_cols = min(spec_chunk, count - filled)
        A = sample_matrix(_approx_spec(m, n_cols, s), SeedPath(seed, trial))
        sums = np.fromiter((int(sg.sum()) for sg in A.signs), dtype=np.float64,
                           count=n_cols)
        vals[filled:filled + n_cols] = sums * scale
        filled += n_cols
        trial += 1
    return vals


def _psi2_cell(cfg, m, s, n, cell_seed) -> dict:
    vals = psi2_marginal_samples(m, s, cfg.mc_samples, cell_seed)
    fit = empirical_psi2(vals, "mgf_root")
    moment = empirical_psi2(vals, "moment_sup")
    closed = scalar_psi2_closed_form("sparse_sign", m=m, s=s).value
    return {"kind": cfg.kind, "m": m, "s": s, "n": n, "samples": cfg.mc_samples,
            "psi2_mgf_root": fit.value, "psi2_moment_sup": moment.value,
            "oracle": closed, "ratio": fit.value / closed}


def _tail_profile_cell(cfg, m, s, n, cell_seed) -> dict:
    T = build_set("pair_differences", n)
    spec = EnsembleSpec(DENSE_GAUSSIAN, m, n)
    rep = isometry_trials(spec, T, 1.0, cfg.trials, cell_seed, retain=True)
    deltas = np.sort(np.asarray(rep.per_trial))
    width = estimate_width(T, cfg.mc_samples, cell_seed)
    rad, _ = rad_diam(T)
    # Fit the profile constant on the subgaussian quantile shape
    # q(u) = 1 - exp(-u^2) over u in [0, 1]; the safety factor 3 of the
    # tail bound is assessed by the exceedance frequencies below.
    profile = width.value + _TAIL_FIT_GRID * rad
    quants = np.array([nearest_rank(deltas, q) if q > 0 else deltas[0]
                       for q in 1.0 - np.exp(-_TAIL_FIT_GRID ** 2)])
    fitted_a = float(np.dot(quants, profile) / np.dot(profile, profile))
    row = {"kind": cfg.kind, "m": m, "s": s, "n": n, "trials": cfg.trials,
           "mc_samples": cfg.mc_samples, "width_hat": width.value, "rad": rad,
           "fitted_a": fitted_a}
    for u in _TAIL_TEST_US:
        threshold = fitted_a * (width.value + u * rad)
        row[f"exceed_u{int(u)}"] = float(np.mean(deltas > threshold))
        row[f"bound_u{int(u)}"] = 3.0 * math.exp(-u * u)
    return row


def _conjecture_cell(cfg, m, s, n, cell_seed) -> dict:
    T = build_set("pair_differences", n)
    spec = _approx_spec(m, n, s)
    elem = T.points
    devs = np.empty(cfg.trials)
    for t in range(cfg.trials):
        A = sample_matrix(spec, SeedPath(cell_seed, t))
        d = column_norms(A)
        target = np.linalg.norm(elem * d[None, :], axis=1)
        devs[t] = np.max(np.abs(embedded_norms(T, A) - target))
    gamma = estimate_complexity(T, cfg.mc_samples, cell_seed)
    return {"kind": cfg.kind, "m": m, "s": s, "n": n, "trials": cfg.trials,
            "mean_dev": float(np.mean(devs)),
            "stderr_dev": (float(np.std(devs, ddof=1) / math.sqrt(cfg.trials))
                           if cfg.trials > 1 else 0.0),
            "gamma_hat": gamma.value, "gamma_stderr": gamma.stderr}


_CELL_RUNNERS = {
    "divergence": _divergence_cell,
    "lower_bound_exact_sparse": _lower_bound_cell,
    "normalization": _normalization_cell,
    "psi2_scaling": _psi2_cell,
    "tail_profile": _tail_profile_cell,
    "conjecture_diag": _conjecture_cell,
}


def _columns_for(cfg: ExperimentConfig) -> list:
    if cfg.kind == "divergence":
        cols = ["kind", "m", "s", "n", "trials"]
        for arm in _DIVERGENCE_ARMS:
            if arm in cfg.arms:
                cols += [f"{arm}_mean", f"{arm}_stderr"]
        return cols + ["oracle"]
    if cfg.kind == "lower_bound_exact_sparse":
        return ["kind", "m", "s", "n", "trials", "collision_freq", "mean_delta",
                "stderr_delta", "gamma_hat", "gamma_stderr", "ratio_fit", "oracle"]
    if cfg.kind == "normalization":
        return ["kind", "m", "s", "n", "trials", "unnormalized_mean",
                "unnormalized_stderr", "normalized_mean", "normalized_stderr"]
    if cfg.kind == "psi2_scaling":
        return ["kind", "m", "s", "n", "samples", "psi2_mgf_root",
                "psi2_moment_sup", "oracle", "ratio"]
    if cfg.kind == "tail_profile":
        return ["kind", "m", "s", "n", "trials", "mc_samples", "width_hat",
                "rad", "fitted_a", "exceed_u1", "exceed_u2", "exceed_u3",
                "bound_u1", "bound_u2", "bound_u3"]
    return ["kind", "m", "s", "n", "trials", "mean_dev", "stderr_dev",
            "gamma_hat", "gamma_stderr"]


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run every grid cell of the configured experiment."""
    runner = _CELL_RUNNERS[cfg.kind]
    rows = []
    cells = list(itertools.product(cfg.m, cfg.s, cfg.n))
    for index, (m, s, n) in enumerate(cells):
        cell_seed = derive_seed(cfg.seed, index)
        try:
            rows.append(runner(cfg, m, s, n, cell_seed))
        except BudgetError as exc:
            raise BudgetError(
                f"cell {index} (m={m}, s={s}, n={n}): {exc}") from exc
    return ExperimentReport(config=cfg, columns=_columns_for(cfg), rows=rows,
                            provenance=_provenance(cfg))


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_to_csv(report: ExperimentReport) -> str:
    lines = [",".join(report.columns)]
    for row in report.rows:
        lines.append(",".join(_format_cell(row.get(col)) for col in report.columns))
    return "\n".join(lines) + "\n"


def parse_report_csv(text: str) -> tuple[list, list]:
    """(columns, rows-as-string-dicts) from an emitted CSV."""
    lines = [ln for ln in text.splitlines() if ln]
    if not lines:
        raise ParameterError("empty CSV")
    columns = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != len(columns):
            raise ParameterError(f"row has {len(cells)} cells, header has {len(columns)}")
        rows.append(dict(zip(columns, cells)))
    return columns, rows


def emit_report(report: ExperimentReport, fmt: str, path: str) -> None:
    """Write the report as ``csv`` or ``json``."""
    if fmt == "csv":
        payload = report_to_csv(report)
    elif fmt == "json":
        payload = json.dumps(report.to_dict(), indent=2) + "\n"
    else:
        raise ParameterError(f"unknown report format {fmt!r}")
    with open(path, "w") as fh:
        fh.write(payload)


def load_report_json(path: str) -> ExperimentReport:
    with open(path) as fh:
        return ExperimentReport.from_dict(json.load(fh))
