"""Render experiment CSV reports into static figures.

This package consumes only the CSV contract of the experiment harness
(one header row, one row per grid cell, a ``kind`` column), never the
library itself.  Rendering is read-only and produces one figure per
invocation with fixed dimensions.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

KINDS = ("divergence", "psi2_scaling", "tail_profile")

_FIGSIZE = (7.0, 4.5)
_DPI = 100

# Divergence CSVs carry one mean/stderr column pair per rendered arm.
_ARM_COLUMNS = ("approx_mean", "exact_mean", "normalized_mean", "row_sparse_mean")
_ARM_LABELS = {
    "approx_mean": "approximately sparse",
    "exact_mean": "exactly sparse",
    "normalized_mean": "column normalized",
    "row_sparse_mean": "row sparse control",
}


class SchemaError(ValueError):
    """The CSV does not match the expected experiment schema."""


@dataclass(frozen=True)
class PlotSpec:
    input_csv: str
    kind: str
    output_image: str
    log_x: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown plot kind {self.kind!r}")


@dataclass(frozen=True)
class RenderResult:
    output_image: str
    curves: int
    rows: int


def _read_rows(path: str):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("CSV has no header row") from None
        rows = []
        for cells in reader:
            if not cells:
                continue
            if len(cells) != len(header):
                raise SchemaError(
                    f"row has {len(cells)} cells but header has {len(header)}")
            rows.append(dict(zip(header, cells)))
    return header, rows


def _require(header, rows, columns):
    for col in columns:
        if col not in header:
            raise SchemaError(f"missing column {col!r}")
    out = {}
    for col in columns:
        try:
            out[col] = [float(r[col]) for r in rows]
        except ValueError as exc:
            raise SchemaError(f"column {col!r} is not numeric: {exc}") from None
    return out


def _check_kind(spec, header, rows):
    if not rows:
        return
    if "kind" not in header:
        raise SchemaError("missing column 'kind'")
    seen = {r["kind"] for r in rows}
    if seen != {spec.kind}:
        raise SchemaError(
            f"CSV kind column has {sorted(seen)}, expected {spec.kind!r}")


def _draw_divergence(ax, spec, header, rows) -> int:
    cols = _require(header, rows, ["m", "oracle"])
    arms = [c for c in _ARM_COLUMNS if c in header]
    if not arms:
        raise SchemaError("missing column 'approx_mean' (no arm columns present)")
    m = cols["m"]
    curves = 0
    for arm in arms:
        means = _require(header, rows, [arm])[arm]
        ax.plot(m, means, marker="o", label=_ARM_LABELS[arm])
        curves += 1
    ax.plot(m, cols["oracle"], marker="s", linestyle="--", color="black",
            label="exact oracle")
    curves += 1
    ax.set_xlabel("m")
    ax.set_ylabel("mean delta")
    if spec.log_x:
        ax.set_xscale("log")
    ax.legend()
    return curves


def _draw_psi2(ax, spec, header, rows) -> int:
    cols = _require(header, rows, ["s", "psi2_mgf_root", "oracle"])
    ax.plot(cols["s"], cols["psi2_mgf_root"], marker="o", label="empirical fit")
    ax.plot(cols["s"], cols["oracle"], marker="s", linestyle="--",
            color="black", label="closed form")
    ax.set_xlabel("s")
    ax.set_ylabel("psi2 norm")
    if spec.log_x:
        ax.set_xscale("log")
    ax.legend()
    return 2


def _draw_tail(ax, spec, header, rows) -> int:
    wanted = ["exceed_u1", "exceed_u2", "exceed_u3",
              "bound_u1", "bound_u2", "bound_u3"]
    cols = _require(header, rows, wanted)
    us = [1.0, 2.0, 3.0]
    curves = 0
    for i, row in enumerate(rows):
        exceed = [cols[f"exceed_u{int(u)}"][i] for u in us]
        label = f"empirical (row {i})" if len(rows) > 1 else "empirical"
        ax.plot(us, exceed, marker="o", label=label)
        curves += 1
    bound = [3.0 * math.exp(-u * u) for u in us]
    ax.plot(us, bound, marker="s", linestyle="--", color="black",
            label="3 exp(-u^2)")
    curves += 1
    ax.set_xlabel("u")
    ax.set_ylabel("exceedance frequency")
    ax.set_yscale("log")
    ax.legend()
    return curves


_DRAWERS = {
    "divergence": _draw_divergence,
    "psi2_scaling": _draw_psi2,
    "tail_profile": _draw_tail,
}


def render_report(spec: PlotSpec) -> RenderResult:
    """Render one figure from a report CSV; returns what was drawn.

    A header-only CSV yields an empty-axes figure.  A missing or
    non-matching column raises :class:`SchemaError` naming it.
    """
    header, rows = _read_rows(spec.input_csv)
    _check_kind(spec, header, rows)
    fig, ax = plt.subplots(figsize=_FIGSIZE, dpi=_DPI)
    try:
        curves = _DRAWERS[spec.kind](ax, spec, header, rows) if rows else 0
        ax.set_title(spec.kind)
        fig.savefig(spec.output_image)
    finally:
        plt.close(fig)
    return RenderResult(spec.output_image, curves, len(rows))
