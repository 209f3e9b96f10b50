"""Conformity pairs, the data-adaptive threshold and the COIN decision rule."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .calibration import RngStream, draw_calibration
from .conformity import ConformityScorer, WorkingPriorConfig, fit_working_prior
from .data import SummaryData
from .densities import DiscretePrior
from .npmle import NpmleConfig, fit_npmle

log = logging.getLogger(__name__)

#: tau = -inf rejects nothing since scores are non-negative
NO_THRESHOLD = float("-inf")

# substream ids inside one run
CALIBRATION_STREAM = 1
FOLD_STREAM = 2
UEBH_STREAM = 3
SPLIT_STREAM = 4


@dataclass(frozen=True)
class ScoredPair:
    index: object
    u: float
    u_tilde: float

    @property
    def xi(self) -> int:
        return int(self.u <= self.u_tilde)

    @property
    def s(self) -> float:
        return min(self.u, self.u_tilde)


@dataclass(eq=False)
class ScoredPairs:
    """Columnar form of a sequence of ``ScoredPair``."""

    u: np.ndarray
    u_tilde: np.ndarray
    ids: np.ndarray | None = None

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float).ravel()
        self.u_tilde = np.asarray(self.u_tilde, dtype=float).ravel()
        if self.u.shape != self.u_tilde.shape:
            raise ValueError("u and u_tilde must have equal lengths")
        if self.ids is None:
            self.ids = np.arange(self.u.size)
        self.ids = np.asarray(self.ids)

    @classmethod
    def from_pairs(cls, pairs) -> "ScoredPairs":
        pairs = list(pairs)
        return cls(
            [p.u for p in pairs], [p.u_tilde for p in pairs], np.array([p.index for p in pairs])
        )

    @property
    def xi(self) -> np.ndarray:
        # ties count on the rejection side
        return self.u <= self.u_tilde

    @property
    def s(self) -> np.ndarray:
        return np.minimum(self.u, self.u_tilde)

    def __len__(self):
        return self.u.size

    def __iter__(self):
        for i, a, b in zip(self.ids, self.u, self.u_tilde):
            yield ScoredPair(i, float(a), float(b))

    def subset(self, index) -> "ScoredPairs":
        return ScoredPairs(self.u[index], self.u_tilde[index], self.ids[index])


def _as_pairs(pairs) -> ScoredPairs:
    return pairs if isinstance(pairs, ScoredPairs) else ScoredPairs.from_pairs(pairs)


def make_pairs(test: SummaryData, x_tilde, scorer: ConformityScorer, calib_ids=None) -> ScoredPairs:
    """Score the test statistics and their calibration counterparts.

    ``x_tilde`` is an array aligned with ``test`` or a list of
    ``CalibrationRecord``; records must carry the same ids in the same order.
    """
    if len(x_tilde) and hasattr(x_tilde[0], "x_tilde"):
        calib_ids = np.array([r.index for r in x_tilde])
        x_tilde = np.array([r.x_tilde for r in x_tilde])
    x_tilde = np.asarray(x_tilde, dtype=float)
    if x_tilde.size != len(test):
        raise ValueError("test and calibration sets differ in length")
    if calib_ids is not None and not np.array_equal(np.asarray(calib_ids), test.ids):
        raise ValueError("calibration ids do not match test ids")
    if len(test) == 0:
        return ScoredPairs(np.empty(0), np.empty(0), test.ids)
    m = len(test)
    both = scorer(np.concatenate([test.x, x_tilde]), np.concatenate([test.s2, test.s2]))
    return ScoredPairs(both[:m], both[m:], test.ids)


@dataclass
class FdpCurve:
    """Estimated FDP at each distinct candidate threshold (ascending)."""

    t: np.ndarray
    n_reject: np.ndarray
    n_counter: np.ndarray

    @property
    def fdp_hat(self) -> np.ndarray:
        return (1.0 + self.n_counter) / np.maximum(self.n_reject, 1)


def fdp_curve(pairs) -> FdpCurve:
    pairs = _as_pairs(pairs)
    s = pairs.s
    order = np.argsort(s, kind="stable")
    s_sorted = s[order]
    xi_sorted = pairs.xi[order]
    n_rej = np.cumsum(xi_sorted)
    n_cnt = np.cumsum(~xi_sorted)
    # counts are only meaningful at the last position of each tied block
    last = np.r_[s_sorted[1:] != s_sorted[:-1], True] if s.size else np.zeros(0, bool)
    return FdpCurve(s_sorted[last], n_rej[last], n_cnt[last])


def estimated_fdp(pairs, t: float) -> float:
    """(1 + #{xi = 0, s <= t}) / max(#{xi = 1, s <= t}, 1), evaluated directly."""
    pairs = _as_pairs(pairs)
    below = pairs.s <= t
    xi = pairs.xi
    return (1.0 + np.sum(~xi & below)) / max(int(np.sum(xi & below)), 1)


def coin_threshold(pairs, alpha: float, refined: bool = False) -> float:
    """Largest candidate s_i whose estimated FDP is at most ``alpha``.

    With ``refined`` a candidate also qualifies when fewer than 1/alpha
    pairs with xi = 1 fall at or below it. Returns ``NO_THRESHOLD`` when no
    candidate qualifies.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    curve = fdp_curve(pairs)
    ok = curve.fdp_hat <= alpha
    if refined:
        ok |= curve.n_reject < 1.0 / alpha
    hits = np.flatnonzero(ok)
    return float(curve.t[hits[-1]]) if hits.size else NO_THRESHOLD


def coin_decide(pairs, tau: float) -> np.ndarray:
    """Boolean rejection mask: u_i <= min(u~_i, tau)."""
    pairs = _as_pairs(pairs)
    return (pairs.u <= pairs.u_tilde) & (pairs.u <= tau)


@dataclass
class CoinResult:
    rejected: np.ndarray  # boolean mask aligned with the test set
    tau: float
    pairs: ScoredPairs
    curve: FdpCurve
    ghat: DiscretePrior
    scorer: ConformityScorer
    x_tilde: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def rejected_ids(self) -> np.ndarray:
        return self.pairs.ids[self.rejected]


def run_coin(
    test: SummaryData,
    train: SummaryData,
    alpha: float,
    rng: RngStream,
    *,
    prior: DiscretePrior | None = None,
    npmle_cfg: NpmleConfig = NpmleConfig(),
    wp_cfg: WorkingPriorConfig = WorkingPriorConfig(),
    refined: bool = False,
    train_fit_mask=None,
) -> CoinResult:
    """COIN with an external training set.

    ``prior`` switches to the oracle variant: calibration draws and the
    scorer's null density use the supplied G and no NPMLE is fitted.
    ``train_fit_mask`` restricts which training rows enter the NPMLE.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if prior is None:
        s2_fit = train.s2 if train_fit_mask is None else train.s2[train_fit_mask]
        npmle = fit_npmle(s2_fit, train.nu, npmle_cfg)
        ghat = npmle.prior
    else:
        npmle = None
        ghat = prior
    x_tilde = draw_calibration(test.ids, test.s2, ghat, test.nu, rng.child(CALIBRATION_STREAM))
    fit = fit_working_prior(train, ghat, train.nu, wp_cfg)
    scorer = ConformityScorer(fit)
    pairs = make_pairs(test, x_tilde, scorer)
    tau = coin_threshold(pairs, alpha, refined=refined)
    rejected = coin_decide(pairs, tau)
    curve = fdp_curve(pairs)
    diagnostics = {
        "tau": tau,
        "n_rejected": int(rejected.sum()),
        "n_xi": int(pairs.xi.sum()),
        "npmle_converged": None if npmle is None else npmle.converged,
        "working_prior_converged": fit.converged,
        "pi_null": fit.pi_null,
    }
    log.debug("coin: tau=%g rejected=%d", tau, diagnostics["n_rejected"])
    return CoinResult(rejected, tau, pairs, curve, ghat, scorer, x_tilde, diagnostics)
