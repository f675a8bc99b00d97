"""Statistical primitives: tail functions, CI tests, exact tests, OLS.

All operations are pure and deterministic; repeated calls on identical
inputs are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaincc, stdtr

from .data import DatasetView, StandardizedMatrix
from .errors import (
    DegenerateGroupError,
    DomainError,
    IncompleteViewError,
    NotCategoricalError,
    RankDeficientError,
    SampleTooSmallError,
    SingularCorrelationError,
    ZeroBaseError,
    ZeroVarianceError,
)

__all__ = [
    "TestResult",
    "ContingencyTable2x2",
    "FoldIncrease",
    "normal_cdf",
    "chisq_sf",
    "fisher_z_ci_test",
    "fisher_z_from_correlation",
    "partial_correlation",
    "g_squared_test",
    "fisher_exact",
    "point_biserial",
    "ols",
    "fold_increase",
]


@dataclass(frozen=True)
class TestResult:
    """Outcome of a significance test."""

    statistic: float
    p_value: float
    dof: float
    effect: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError(f"p_value {self.p_value} outside [0, 1]")
        if self.dof < 0:
            raise ValueError(f"dof {self.dof} is negative")


@dataclass(frozen=True)
class ContingencyTable2x2:
    """Counts [[a, b], [c, d]]: rows = feature present/absent, cols = death/recovery."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        for v in (self.a, self.b, self.c, self.d):
            if v < 0 or v != int(v):
                raise ValueError(f"counts must be nonnegative integers, got {v}")
        if self.total == 0:
            raise ValueError("contingency table is empty")

    @property
    def total(self) -> int:
        return self.a + self.b + self.c + self.d


def normal_cdf(z: float) -> float:
    """Standard normal CDF."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def chisq_sf(x: float, dof: float) -> float:
    """Chi-square survival function P(X > x) with ``dof`` degrees of freedom."""
    if x < 0:
        raise DomainError(f"chisq_sf: x must be >= 0, got {x}")
    if dof <= 0:
        raise DomainError(f"chisq_sf: dof must be > 0, got {dof}")
    return float(gammaincc(dof / 2.0, x / 2.0))


def partial_correlation(corr: np.ndarray, i: int, j: int, given: Sequence[int]) -> float:
    """Partial correlation of variables i, j given ``given`` from a correlation matrix."""
    if not given:
        return float(corr[i, j])
    idx = [i, j, *given]
    sub = corr[np.ix_(idx, idx)]
    try:
        inv = np.linalg.inv(sub)
    except np.linalg.LinAlgError:
        raise SingularCorrelationError(
            f"correlation submatrix for ({i}, {j} | {tuple(given)}) is singular"
        ) from None
    denom = inv[0, 0] * inv[1, 1]
    if not np.isfinite(denom) or denom <= 0:
        raise SingularCorrelationError(
            f"correlation submatrix for ({i}, {j} | {tuple(given)}) is ill-conditioned"
        )
    return float(-inv[0, 1] / math.sqrt(denom))


def fisher_z_from_correlation(
    corr: np.ndarray, n: int, i: int, j: int, given: Sequence[int]
) -> TestResult:
    """Fisher-z partial-correlation test from a precomputed correlation matrix."""
    k = len(given)
    if n - k - 3 <= 0:
        raise SampleTooSmallError(f"need n > |S| + 3; n={n}, |S|={k}")
    rho = partial_correlation(corr, i, j, given)
    clamped = min(max(rho, -1.0 + 1e-15), 1.0 - 1e-15)
    stat = math.sqrt(n - k - 3) * math.atanh(clamped)
    # 2*(1 - Phi(|stat|)) evaluated as erfc for precision in the far tail
    p = math.erfc(abs(stat) / math.sqrt(2.0))
    return TestResult(statistic=stat, p_value=min(p, 1.0), dof=float(n - k - 3), effect=rho)


def fisher_z_ci_test(
    x: str,
    y: str,
    given: Sequence[str],
    m: StandardizedMatrix,
    n: int | None = None,
) -> TestResult:
    """Gaussian conditional-independence test of x against y given a column set.

    The partial correlation is obtained by inverting the correlation
    submatrix of (x, y, given); the statistic is sqrt(n-|S|-3)*atanh(rho).
    """
    n = m.n_rows if n is None else n
    cols = [m.index(x), m.index(y)] + [m.index(s) for s in given]
    sub = m.matrix[:, cols]
    corr = np.corrcoef(sub, rowvar=False)
    corr = np.atleast_2d(corr)
    return fisher_z_from_correlation(corr, n, 0, 1, list(range(2, len(cols))))


def g_squared_test(
    x: str, y: str, given: Sequence[str], view: DatasetView
) -> TestResult:
    """Likelihood-ratio (G^2) independence test for categorical columns.

    G^2 = 2 * sum O*ln(O/E) over the x-by-y cells within each configuration
    of ``given``; zero-observed cells contribute 0. Degrees of freedom are
    (|x|-1)(|y|-1)*prod(|s|): empty strata are skipped without reducing dof.
    """
    names = [x, y, *given]
    schemas = []
    for name in names:
        sch = view.schema_for(name)
        if not sch.is_categorical:
            raise NotCategoricalError(f"column {name!r} is {sch.kind}, not categorical")
        schemas.append(sch)
    cols = [view.coded(name) for name in names]
    for name, arr in zip(names, cols):
        if np.isnan(arr).any():
            raise IncompleteViewError(f"column {name!r} has missing cells in this view")
    codes = [arr.astype(np.int64) for arr in cols]
    kx, ky = schemas[0].n_levels, schemas[1].n_levels
    ks = [s.n_levels for s in schemas[2:]]

    strata = np.zeros(codes[0].shape[0], dtype=np.int64)
    n_strata = 1
    for c, k in zip(codes[2:], ks):
        strata = strata * k + c
        n_strata *= k
    flat = (strata * kx + codes[0]) * ky + codes[1]
    table = np.bincount(flat, minlength=n_strata * kx * ky).reshape(n_strata, kx, ky)

    totals = table.sum(axis=(1, 2), keepdims=True).astype(float)
    row = table.sum(axis=2, keepdims=True).astype(float)
    col = table.sum(axis=1, keepdims=True).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        expected = row * col / totals
        terms = np.where(table > 0, table * np.log(table / expected), 0.0)
    g2 = max(0.0, 2.0 * float(np.nansum(terms)))
    dof = (kx - 1) * (ky - 1) * int(np.prod(ks)) if ks else (kx - 1) * (ky - 1)
    return TestResult(statistic=g2, p_value=min(chisq_sf(g2, dof), 1.0), dof=float(dof))


def _hypergeom_weights(r1: int, r2: int, c1: int) -> tuple[range, list[int]]:
    """Exact integer weights C(r1,k)*C(r2,c1-k) over the support of k."""
    lo = max(0, c1 - r2)
    hi = min(r1, c1)
    support = range(lo, hi + 1)
    return support, [math.comb(r1, k) * math.comb(r2, c1 - k) for k in support]


def fisher_exact(t: ContingencyTable2x2) -> TestResult:
    """Two-sided Fisher exact test via the point-probability criterion.

    Sums hypergeometric probabilities of all tables with the observed
    margins whose point probability does not exceed the observed one
    (within 1e-7 relative tolerance). Weights are exact integers, so ties
    are decided without floating-point noise.
    """
    r1, r2, c1 = t.a + t.b, t.c + t.d, t.a + t.c
    support, weights = _hypergeom_weights(r1, r2, c1)
    w_obs = weights[t.a - support.start]
    included = 0
    for w in weights:
        if w <= w_obs or w <= w_obs * (1.0 + 1e-7):
            included += w
    total = math.comb(t.total, c1)
    p = included / total
    if t.b * t.c == 0:
        odds = math.inf if t.a * t.d > 0 else math.nan
    else:
        odds = (t.a * t.d) / (t.b * t.c)
    return TestResult(statistic=odds, p_value=min(p, 1.0), dof=0.0)


def point_biserial(g, x) -> TestResult:
    """Point-biserial correlation: Pearson r between a 0/1 group and a continuous column."""
    g = np.asarray(g, dtype=float)
    x = np.asarray(x, dtype=float)
    if g.shape != x.shape or g.ndim != 1:
        raise ValueError("g and x must be 1-d arrays of equal length")
    n = g.shape[0]
    n1 = int((g == 1).sum())
    n0 = int((g == 0).sum())
    if n0 + n1 != n:
        raise DegenerateGroupError("group column must be coded 0/1 with no missing values")
    if n0 == 0 or n1 == 0:
        raise DegenerateGroupError(f"both groups must be non-empty (sizes {n0}, {n1})")
    if np.all(x == x[0]):
        raise ZeroVarianceError("continuous column is constant")
    gc = g - g.mean()
    xc = x - x.mean()
    r = float(gc @ xc / math.sqrt((gc @ gc) * (xc @ xc)))
    dof = n - 2
    if abs(r) >= 1.0:
        return TestResult(statistic=math.copysign(math.inf, r), p_value=0.0,
                          dof=float(dof), effect=r)
    tstat = r * math.sqrt(dof / (1.0 - r * r))
    p = 2.0 * float(stdtr(dof, -abs(tstat)))
    return TestResult(statistic=tstat, p_value=min(p, 1.0), dof=float(dof), effect=r)


def ols(y, X, add_intercept: bool = True) -> np.ndarray:
    """Least-squares coefficients of y on X, intercept first.

    Raises RankDeficientError when the (augmented) design matrix does not
    have full column rank.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if add_intercept:
        X = np.column_stack([np.ones(X.shape[0]), X])
    n, p = X.shape
    if n <= p:
        raise SampleTooSmallError(f"need more rows ({n}) than columns ({p})")
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < p:
        raise RankDeficientError(f"design matrix rank {rank} < {p} columns")
    return beta


@dataclass(frozen=True)
class FoldIncrease:
    """Rate ratio against a base rate; ``factor`` is the one-decimal display value."""

    ratio: float
    factor: float


def fold_increase(rate_in_group: float, base_rate: float) -> FoldIncrease:
    """Ratio of a subgroup's event rate to the cohort base rate."""
    if base_rate <= 0:
        raise ZeroBaseError(f"base rate must be > 0, got {base_rate}")
    ratio = rate_in_group / base_rate
    return FoldIncrease(ratio=ratio, factor=round(ratio, 1))
