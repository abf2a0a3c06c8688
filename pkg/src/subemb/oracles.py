"""Exact brute-force computations used as ground truth.

Everything here is independent of the sampling code: probabilities come
from log-domain pmf summation, enumeration, adaptive quadrature, or a
closed form, never from Monte Carlo.  Enumeration budgets are hard caps
raising :class:`BudgetError`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats
from scipy.special import gammaln

from .ensembles import APPROX_SPARSE, EXACT_SPARSE, EnsembleSpec
from .errors import BudgetError, ParameterError

_ENUM_BUDGET_COLUMNS = 10 ** 6
_MGF_BUDGET_EXACT = 10 ** 6
_MGF_BUDGET_APPROX = 10 ** 7


@dataclass(frozen=True)
class ExactValue:
    value: float
    method: str  # pmf_sum | enumeration | quadrature | closed_form
    work: int    # atoms enumerated / pmf terms / integrand evaluations

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise BudgetError(f"oracle produced non-finite value via {self.method}")


def _check_ms(m: int, s: int) -> None:
    if not (isinstance(m, int) and isinstance(s, int) and 1 <= s <= m):
        raise ParameterError("need integers 1 <= s <= m")


def _binom_weights(m: int, s: int) -> tuple[np.ndarray, np.ndarray]:
    """(k, pmf(k)) for Binom(m, s/m), computed with log-domain weights."""
    p = s / m
    k = np.arange(m + 1)
    if s == m:
        w = np.zeros(m + 1)
        w[m] = 1.0
        return k, w
    logw = (gammaln(m + 1) - gammaln(k + 1) - gammaln(m - k + 1)
            + k * math.log(p) + (m - k) * math.log1p(-p))
    return k, np.exp(logw)


def binom_sqrt_deviation(m: int, s: int) -> ExactValue:
    """E |sqrt(Z) - sqrt(s)| for Z ~ Binom(m, s/m), by pmf summation."""
    _check_ms(m, s)
    k, w = _binom_weights(m, s)
    value = float(np.sum(w * np.abs(np.sqrt(k) - math.sqrt(s))))
    return ExactValue(value, "pmf_sum", m + 1)


def binom_central_moments(m: int, s: int) -> tuple[float, float]:
    """(second, fourth) central moments of Binom(m, s/m), exactly."""
    _check_ms(m, s)
    k, w = _binom_weights(m, s)
    d = k.astype(np.float64) - s
    return float(np.sum(w * d ** 2)), float(np.sum(w * d ** 4))


def collision_probability(m: int, s: int) -> ExactValue:
    """P{two independent exact-sparse columns coincide} = 1/(2^s C(m,s))."""
    _check_ms(m, s)
    count = (1 << s) * math.comb(m, s)
    if count > 2 ** 1023:
        raise BudgetError(f"2^s * C(m, s) overflows a float for (m, s) = ({m}, {s})")
    return ExactValue(1.0 / count, "closed_form", 1)


def choose_n_for_lower_bound(m: int, s: int) -> int:
    """ceil((2 e m / s)^(3 s)), evaluated in extended precision."""
    _check_ms(m, s)
    import mpmath

    with mpmath.workdps(60):
        x = (2 * mpmath.e * m / s) ** (3 * s)
        if x > 2 ** 62:
            raise BudgetError(
                f"(2em/s)^(3s) exceeds 2^62 for (m, s) = ({m}, {s}); use smaller m, s")
        return int(mpmath.ceil(x))


def enumerate_exact_sparse(m: int, s: int) -> list[tuple[tuple, tuple]]:
    """All exact-sparse columns as (support, signs), lexicographic.

    The list has 2^s * C(m, s) entries; a hard budget guards CI.
    """
    _check_ms(m, s)
    total = (1 << s) * math.comb(m, s)
    if total > _ENUM_BUDGET_COLUMNS:
        raise BudgetError(f"{total} columns exceed the enumeration budget")
    out = []
    for support in itertools.combinations(range(m), s):
        for signs in itertools.product((-1, 1), repeat=s):
            out.append((support, signs))
    return out


def chi_square(observed) -> tuple[float, float]:
    """(statistic, p-value) against the uniform law over the cells."""
    observed = np.asarray(observed, dtype=np.float64)
    stat, pvalue = stats.chisquare(observed)
    return float(stat), float(pvalue)


def _column_atoms(spec: EnsembleSpec) -> list[tuple[np.ndarray, float]]:
    """Full per-column atom list (vector, probability) for a tiny spec."""
    if spec.variant == EXACT_SPARSE:
        cols = enumerate_exact_sparse(spec.m, spec.s)
        prob = 1.0 / len(cols)
        atoms = []
        for support, signs in cols:
            v = np.zeros(spec.m)
            v[list(support)] = signs
            atoms.append((v, prob))
        return atoms
    if spec.variant == APPROX_SPARSE:
        p = spec.s / spec.m
        entry = [(1.0, p / 2), (-1.0, p / 2), (0.0, 1.0 - p)]
        atoms = []
        for combo in itertools.product(entry, repeat=spec.m):
            v = np.array([c[0] for c in combo])
            prob = math.prod(c[1] for c in combo)
            atoms.append((v, prob))
        return atoms
    raise ParameterError(f"exact MGF enumeration not defined for {spec.variant!r}")


def exact_mgf_small(spec: EnsembleSpec, x, lam_grid) -> list[float]:
    """E exp(lam * (||Ax||^2 - 1)) by full enumeration, per lam in the grid."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.n,):
        raise ParameterError(f"x has shape {x.shape}, expected ({spec.n},)")
    if spec.variant == EXACT_SPARSE:
        per_col = (1 << spec.s) * math.comb(spec.m, spec.s)
        if per_col ** spec.n > _MGF_BUDGET_EXACT:
            raise BudgetError("atom count exceeds the exact-sparse MGF budget")
    elif spec.variant == APPROX_SPARSE:
        if 3 ** (spec.m * spec.n) > _MGF_BUDGET_APPROX:
            raise BudgetError("atom count exceeds the approx-sparse MGF budget")
    atoms = _column_atoms(spec)
    lam_grid = [float(l) for l in lam_grid]
    acc = np.zeros(len(lam_grid))
    for combo in itertools.product(atoms, repeat=spec.n):
        ax = np.zeros(spec.m)
        prob = 1.0
        for xi, (col, cp) in zip(x, combo):
            ax += xi * col
            prob *= cp
        s_val = float(ax @ ax) - 1.0
        for i, lam in enumerate(lam_grid):
            acc[i] += prob * math.exp(lam * s_val)
    return [float(v) for v in acc]


def scalar_psi2_closed_form(kind: str, m: int | None = None, s: int | None = None,
                            c: float | None = None) -> ExactValue:
    """Closed-form psi2 norm of a named scalar law.

    ``rademacher`` -> 1/sqrt(ln 2); ``sparse_sign`` (params m, s) ->
    1/sqrt(ln(1 + m/s)); ``constant`` (param c) -> |c|/sqrt(ln 2).
    """
    if kind == "rademacher":
        return ExactValue(1.0 / math.sqrt(math.log(2.0)), "closed_form", 1)
    if kind == "sparse_sign":
        _check_ms(m, s)
        return ExactValue(1.0 / math.sqrt(math.log(1.0 + m / s)), "closed_form", 1)
    if kind == "constant":
        if c is None:
            raise ParameterError("constant kind requires c")
        return ExactValue(abs(c) / math.sqrt(math.log(2.0)), "closed_form", 1)
    raise ParameterError(f"unknown distribution descriptor {kind!r}")


def _phi(t: float) -> float:
    return 0.5 * (1.0 + math.erf(t / math.sqrt(2.0)))


def quadrature(expression: str, d: int | None = None) -> ExactValue:
    """Adaptive quadrature for a registered expectation, to 1e-8 absolute.

    Registered: ``abs_normal_mean`` (E|g|), ``max_abs_normal2_mean``
    (E max(|g1|, |g2|)), ``chi_mean`` (E of a chi(d) variable, param d).
    """
    if expression == "abs_normal_mean":
        f = lambda t: 2.0 * t * math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)
        val, _, info = integrate.quad(f, 0.0, np.inf, epsabs=1e-10, full_output=True)[:3]
        return ExactValue(float(val), "quadrature", int(info["neval"]))
    if expression == "max_abs_normal2_mean":
        # Tail identity: E max = integral of P{max > t} over t >= 0.
        f = lambda t: 1.0 - (2.0 * _phi(t) - 1.0) ** 2
        val, _, info = integrate.quad(f, 0.0, np.inf, epsabs=1e-10, full_output=True)[:3]
        return ExactValue(float(val), "quadrature", int(info["neval"]))
    if expression == "chi_mean":
        if d is None or d < 1:
            raise ParameterError("chi_mean requires d >= 1")
        lognorm = (d / 2.0 - 1.0) * math.log(2.0) + gammaln(d / 2.0)
        f = lambda t: t * math.exp((d - 1) * math.log(t) - 0.5 * t * t - lognorm) if t > 0 else 0.0
        val, _, info = integrate.quad(f, 0.0, np.inf, epsabs=1e-10, full_output=True)[:3]
        return ExactValue(float(val), "quadrature", int(info["neval"]))
    raise ParameterError(f"unregistered quadrature expression {expression!r}")
