"""Sample-splitting and feature-splitting COIN, compound e-values, eBH and U-eBH."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .calibration import RngStream, draw_calibration
from .conformity import ConformityScorer, WorkingPriorConfig, fit_working_prior
from .core import (
    CALIBRATION_STREAM,
    FOLD_STREAM,
    NO_THRESHOLD,
    SPLIT_STREAM,
    UEBH_STREAM,
    CoinResult,
    ScoredPairs,
    _as_pairs,
    coin_threshold,
    make_pairs,
    run_coin,
)
from .data import RawMatrix, SummaryData
from .densities import DiscretePrior
from .npmle import NpmleConfig, fit_npmle

log = logging.getLogger(__name__)


# -- sample splitting --------------------------------------------------------


def sample_split(raw: RawMatrix, rng) -> tuple[RawMatrix, RawMatrix]:
    """Split the columns within each group into two random halves.

    Each group sends floor(n_g / 2) columns to the first half and the
    remaining ceil(n_g / 2) to the second.
    """
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    names = ("group A", "group B") if raw.design == "two-group" else ("samples",)
    start = 0
    cols1, cols2, sizes1, sizes2 = [], [], [], []
    for name, n_g in zip(names, raw.group_sizes):
        if n_g < 4:
            raise ValueError(f"{name} has {n_g} columns; sample splitting needs at least 4")
        perm = start + gen.permutation(n_g)
        half = n_g // 2
        cols1.append(np.sort(perm[:half]))
        cols2.append(np.sort(perm[half:]))
        sizes1.append(half)
        sizes2.append(n_g - half)
        start += n_g
    c1, c2 = np.concatenate(cols1), np.concatenate(cols2)
    return (
        RawMatrix(raw.values[:, c1], raw.design, tuple(sizes1) if len(sizes1) == 2 else None, raw.ids),
        RawMatrix(raw.values[:, c2], raw.design, tuple(sizes2) if len(sizes2) == 2 else None, raw.ids),
    )


def summarize_two_group(raw: RawMatrix) -> SummaryData:
    """Mean difference and pooled-variance estimate, nu = n1 + n2 - 2."""
    if raw.design != "two-group":
        raise ValueError("two-group summary requires a two-group design")
    n1, n2 = raw.group_sizes
    if n1 < 2 or n2 < 2:
        raise ValueError(f"each group needs at least 2 samples, got ({n1}, {n2})")
    a, b = raw.values[:, :n1], raw.values[:, n1:]
    x = a.mean(axis=1) - b.mean(axis=1)
    pooled = ((n1 - 1) * a.var(axis=1, ddof=1) + (n2 - 1) * b.var(axis=1, ddof=1)) / (n1 + n2 - 2)
    s2 = pooled * (1.0 / n1 + 1.0 / n2)
    return SummaryData(x, s2, n1 + n2 - 2, raw.ids)


def summarize_one_group(raw: RawMatrix) -> SummaryData:
    """Row mean and sample variance / n, nu = n - 1."""
    n = raw.values.shape[1]
    if n < 2:
        raise ValueError(f"one-group summary needs at least 2 samples, got {n}")
    x = raw.values.mean(axis=1)
    s2 = raw.values.var(axis=1, ddof=1) / n
    return SummaryData(x, s2, n - 1, raw.ids)


def summarize(raw: RawMatrix) -> SummaryData:
    return summarize_two_group(raw) if raw.design == "two-group" else summarize_one_group(raw)


def _variance_factor(raw: RawMatrix) -> float:
    # Var(X) = sigma_raw^2 * factor
    if raw.design == "two-group":
        n1, n2 = raw.group_sizes
        return 1.0 / n1 + 1.0 / n2
    return 1.0 / raw.values.shape[1]


def run_coin_ss(raw: RawMatrix, alpha: float, rng: RngStream, **kwargs) -> CoinResult:
    """COIN on two sample-split halves: first half tests, second half trains.

    With odd group sizes the halves estimate variances on different scales;
    the training summaries are rescaled to the test half's scale so that the
    fitted prior describes the test variances.
    """
    half1, half2 = sample_split(raw, rng.child(SPLIT_STREAM))
    test, train = summarize(half1), summarize(half2)
    ratio = _variance_factor(half1) / _variance_factor(half2)
    if ratio != 1.0:
        train = SummaryData(train.x * np.sqrt(ratio), train.s2 * ratio, train.nu, train.ids)
    return run_coin(test, train, alpha, rng, **kwargs)


# -- e-values and eBH ---------------------------------------------------------


@dataclass
class FoldPlan:
    K: int
    assignment: dict  # id -> fold index in [0, K)

    def folds(self, ids) -> list[np.ndarray]:
        """Positions of ``ids`` belonging to each fold."""
        fold_of = np.array([self.assignment[i] for i in ids.tolist()])
        return [np.flatnonzero(fold_of == k) for k in range(self.K)]


def make_folds(ids, K: int, rng) -> FoldPlan:
    """Uniformly random partition into K folds whose sizes differ by at most one."""
    ids = np.asarray(ids)
    if K < 1:
        raise ValueError("K must be positive")
    if K > ids.size:
        raise ValueError(f"cannot split {ids.size} hypotheses into {K} folds")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    # permute the sorted ids so that membership does not depend on input order
    perm = np.argsort(ids, kind="stable")[gen.permutation(ids.size)]
    keys = ids.tolist()
    assignment = {}
    for k, chunk in enumerate(np.array_split(perm, K)):
        for pos in chunk:
            assignment[keys[pos]] = k
    return FoldPlan(K, assignment)


def fold_evalues(fold_pairs, fold_alpha: float) -> tuple[np.ndarray, float]:
    """Compound e-values of one fold under the refined threshold.

    E_i = |fold| * xi_i * 1{s_i <= tau} / (1 + #{j : xi_j = 0, s_j <= tau}).
    Returns (e-values, tau).
    """
    pairs = _as_pairs(fold_pairs)
    n = len(pairs)
    if n == 0:
        raise ValueError("fold is empty")
    tau = coin_threshold(pairs, fold_alpha, refined=True)
    below = pairs.s <= tau
    xi = pairs.xi
    denom = 1.0 + np.sum(~xi & below)
    return n * (xi & below) / denom, tau


def _check_evalues(evalues):
    e = np.asarray(evalues, dtype=float).ravel()
    if np.any(np.isnan(e)) or np.any(e < 0):
        raise ValueError("e-values must be non-negative")
    return e


def ebh(evalues, alpha: float) -> np.ndarray:
    """e-BH: reject every E_i >= E_(k) with k = max{i : E_(i) >= m / (alpha i)}.

    Returns a boolean mask aligned with ``evalues``.
    """
    e = _check_evalues(evalues)
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    m = e.size
    if m == 0:
        return np.zeros(0, bool)
    desc = np.sort(e)[::-1]
    ranks = np.arange(1, m + 1)
    ok = desc >= m / (alpha * ranks)
    if not ok.any():
        return np.zeros(m, bool)
    k = np.flatnonzero(ok)[-1]
    return e >= desc[k]


def u_ebh(evalues, alpha: float, rng=None, u: float | None = None) -> tuple[np.ndarray, float]:
    """U-eBH: eBH on E_i / U with a single U ~ Uniform(0, 1).

    ``u`` overrides the draw (``u=1`` reproduces plain eBH).
    Returns (mask, U).
    """
    e = _check_evalues(evalues)
    if u is None:
        gen = rng.generator() if isinstance(rng, RngStream) else rng
        u = float(gen.random())
        while u == 0.0:
            u = float(gen.random())
    if not 0 < u <= 1:
        raise ValueError("U must lie in (0, 1]")
    return ebh(e / u, alpha), u


# -- feature splitting --------------------------------------------------------


@dataclass
class FsResult:
    rejected: np.ndarray  # boolean mask aligned with the input
    evalues: np.ndarray
    u: float
    ids: np.ndarray
    folds: FoldPlan
    taus: list = field(default_factory=list)
    fold_pairs: list = field(default_factory=list)

    @property
    def rejected_ids(self) -> np.ndarray:
        return self.ids[self.rejected]


def run_coin_fs(
    summary: SummaryData,
    alpha: float,
    rng: RngStream,
    *,
    K: int = 5,
    c: float = 0.9,
    use_u_ebh: bool = True,
    prior: DiscretePrior | None = None,
    npmle_cfg: NpmleConfig = NpmleConfig(),
    wp_cfg: WorkingPriorConfig = WorkingPriorConfig(),
    folds: FoldPlan | None = None,
    force_u: float | None = None,
    fit_mask=None,
) -> FsResult:
    """Feature-splitting COIN.

    For each fold the prior G and the scorer are fitted on the other folds,
    the fold is scored against fresh calibration draws, and refined-threshold
    e-values are computed at level ``c * alpha``; the pooled e-values go
    through U-eBH (or eBH) at ``alpha``. ``prior`` gives the oracle variant.
    ``fit_mask`` excludes rows from every NPMLE fit.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0 < c * alpha < 1:
        raise ValueError("fold level c * alpha must lie in (0, 1)")
    m = len(summary)
    if K < 2:
        raise ValueError("feature splitting needs K >= 2 so every fold has training data")
    if m < K:
        raise ValueError(f"{m} hypotheses cannot fill {K} folds")
    if folds is None:
        folds = make_folds(summary.ids, K, rng.child(FOLD_STREAM))
    fit_mask = np.ones(m, bool) if fit_mask is None else np.asarray(fit_mask, bool)
    calib_rng = rng.child(CALIBRATION_STREAM)
    evalues = np.zeros(m)
    taus, fold_pairs = [], []
    for k, pos in enumerate(folds.folds(summary.ids)):
        if pos.size == 0:
            continue
        rest = np.ones(m, bool)
        rest[pos] = False
        train = summary.subset(rest)
        if prior is None:
            ghat = fit_npmle(summary.s2[rest & fit_mask], summary.nu, npmle_cfg).prior
        else:
            ghat = prior
        test = summary.subset(pos)
        x_tilde = draw_calibration(test.ids, test.s2, ghat, summary.nu, calib_rng)
        scorer = ConformityScorer(fit_working_prior(train, ghat, summary.nu, wp_cfg))
        pairs = make_pairs(test, x_tilde, scorer)
        e, tau = fold_evalues(pairs, c * alpha)
        evalues[pos] = e
        taus.append(tau)
        fold_pairs.append(pairs)
        log.debug("fold %d: size=%d tau=%g nonzero=%d", k, pos.size, tau, int((e > 0).sum()))
    if use_u_ebh:
        rejected, u = u_ebh(evalues, alpha, rng.child(UEBH_STREAM), u=force_u)
    else:
        rejected, u = ebh(evalues, alpha), 1.0
    return FsResult(rejected, evalues, u, summary.ids, folds, taus, fold_pairs)


__all__ = [
    "FoldPlan",
    "FsResult",
    "NO_THRESHOLD",
    "ScoredPairs",
    "ebh",
    "fold_evalues",
    "make_folds",
    "run_coin_fs",
    "run_coin_ss",
    "sample_split",
    "summarize",
    "summarize_one_group",
    "summarize_two_group",
    "u_ebh",
]
