"""Working prior (null + Gaussian location-scale mixture) and the conformity score.

The score is u(x, s2) = p(x | mu = 0, s2) / p(x | s2): the local fdr without
the (1 - pi) factor. Small scores are evidence against the null.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .data import SummaryData
from .densities import LOG_2PI, DiscretePrior, posterior_log_weights
from .npmle import NonFiniteError, simplex_em


@dataclass(frozen=True)
class WorkingPriorConfig:
    k1: int = 30
    zeta2: float = 1.0
    scale_ratio: float = math.sqrt(2.0)
    location_quantiles: tuple = (0.01, 0.99)
    em_max_iters: int = 2000
    em_rel_tol: float = 1e-8
    # False drops the scale components (k2 = 0)
    use_scale: bool = True

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError("k1 must be non-negative")
        if not self.zeta2 > 0:
            raise ValueError("zeta2 must be positive")
        if not self.scale_ratio > 1:
            raise ValueError("scale_ratio must exceed 1")
        lo, hi = self.location_quantiles
        if not 0 <= lo <= hi <= 1:
            raise ValueError("location_quantiles must be an ordered pair in [0, 1]")


@dataclass(eq=False)
class WorkingPriorFit:
    ghat: DiscretePrior
    pi_null: float
    locations: np.ndarray
    loc_weights: np.ndarray
    scale_weights: np.ndarray
    scale_vars: np.ndarray
    nu: int
    zeta2: float = 1.0
    log_likelihood_trace: list = field(default_factory=list)
    converged: bool = True

    def __post_init__(self):
        self.locations = np.asarray(self.locations, dtype=float).ravel()
        self.loc_weights = np.asarray(self.loc_weights, dtype=float).ravel()
        self.scale_weights = np.asarray(self.scale_weights, dtype=float).ravel()
        self.scale_vars = np.asarray(self.scale_vars, dtype=float).ravel()
        if self.locations.shape != self.loc_weights.shape:
            raise ValueError("one weight per location component required")
        if self.scale_vars.shape != self.scale_weights.shape:
            raise ValueError("one weight per scale component required")
        if np.any(np.diff(self.scale_vars) <= 0):
            raise ValueError("scale_vars must be strictly increasing")
        total = self.pi_null + self.loc_weights.sum() + self.scale_weights.sum()
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"mixture weights sum to {total!r}, not 1")

    @property
    def means(self) -> np.ndarray:
        """Component means in the order (null, locations..., scales...)."""
        return np.concatenate([[0.0], self.locations, np.zeros(self.scale_vars.size)])

    @property
    def extra_vars(self) -> np.ndarray:
        return np.concatenate(
            [[0.0], np.full(self.locations.size, self.zeta2), self.scale_vars]
        )

    @property
    def weights(self) -> np.ndarray:
        return np.concatenate([[self.pi_null], self.loc_weights, self.scale_weights])

    def to_dict(self) -> dict:
        return {
            "ghat": self.ghat.to_dict(),
            "pi_null": self.pi_null,
            "locations": self.locations.tolist(),
            "loc_weights": self.loc_weights.tolist(),
            "scale_vars": self.scale_vars.tolist(),
            "scale_weights": self.scale_weights.tolist(),
            "zeta2": self.zeta2,
            "nu": self.nu,
        }


def component_grids(x_values, s2_values, cfg: WorkingPriorConfig = WorkingPriorConfig()):
    """Location means and scale variances of the non-null mixture."""
    x = np.asarray(x_values, dtype=float).ravel()
    s2 = np.asarray(s2_values, dtype=float).ravel()
    if x.size == 0 or s2.size == 0:
        raise ValueError("component grids need non-empty samples")
    if cfg.k1 > 0:
        a, b = np.quantile(x, cfg.location_quantiles)
        locations = np.array([a]) if a == b else np.linspace(a, b, cfg.k1)
    else:
        locations = np.empty(0)
    if not cfg.use_scale:
        return locations, np.empty(0)

    start = float(s2.min()) / 10.0
    target = 4.0 * float(np.max(x**2))
    ratio = cfg.scale_ratio**2
    scale_vars = [start]
    while scale_vars[-1] < target:
        scale_vars.append(start * ratio ** len(scale_vars))
    return locations, np.array(scale_vars)


def _component_log_densities(x, s2, ghat, nu, means, extra_vars):
    """log sum_j w~_j(s2) N(x; mean_c, sigma_j^2 + var_c) for every component c.

    Returns shape (n, C).
    """
    x = np.asarray(x, dtype=float).ravel()
    s2 = np.asarray(s2, dtype=float).ravel()
    lw = posterior_log_weights(s2, ghat, nu)  # (n, J)
    keep = np.isfinite(lw).any(axis=0)
    lw, atoms = lw[:, keep], ghat.atoms[keep]
    means = np.asarray(means, dtype=float)
    var = atoms[None, :] + np.asarray(extra_vars, dtype=float)[:, None]  # (C, J)
    dev = x[None, :, None] - means[:, None, None]  # (C, n, 1)
    expo = lw[None] - 0.5 * np.log(var)[:, None, :] - 0.5 * dev**2 / var[:, None, :]
    top = expo.max(axis=2)  # (C, n)
    out = top + np.log(np.exp(expo - top[:, :, None]).sum(axis=2))
    return out.T - 0.5 * LOG_2PI


def nonnull_component_log_density(x, s2, component, fit: WorkingPriorFit):
    """Log density of X given S^2 = s2 under one non-null component.

    ``component`` is ``("location", k)`` or ``("scale", k)``.
    """
    kind, k = component
    if kind == "location":
        mean, var = fit.locations[k], fit.zeta2
    elif kind == "scale":
        mean, var = 0.0, fit.scale_vars[k]
    else:
        raise ValueError(f"unknown component kind {kind!r}")
    out = _component_log_densities(x, s2, fit.ghat, fit.nu, np.array([mean]), np.array([var]))
    out = out[:, 0]
    return float(out[0]) if np.ndim(x) == 0 and np.ndim(s2) == 0 else out


def fit_working_prior(
    train: SummaryData,
    ghat: DiscretePrior,
    nu=None,
    cfg: WorkingPriorConfig = WorkingPriorConfig(),
) -> WorkingPriorFit:
    """Maximise the conditional likelihood of x given s2 over the mixture weights."""
    nu = train.nu if nu is None else int(nu)
    if len(train) == 0:
        raise ValueError("training data is empty")
    order = np.lexsort((train.x, train.s2))
    x, s2 = train.x[order], train.s2[order]
    locations, scale_vars = component_grids(x, s2, cfg)
    means = np.concatenate([[0.0], locations, np.zeros(scale_vars.size)])
    extra = np.concatenate([[0.0], np.full(locations.size, cfg.zeta2), scale_vars])
    comp = _component_log_densities(x, s2, ghat, nu, means, extra)
    if not np.all(np.isfinite(comp)):
        raise NonFiniteError("non-finite component log-density", 0)
    res = simplex_em(comp, cfg.em_max_iters, cfg.em_rel_tol)
    w = res.weights / res.weights.sum()
    k1 = locations.size
    return WorkingPriorFit(
        ghat=ghat,
        pi_null=float(w[0]),
        locations=locations,
        loc_weights=w[1 : 1 + k1],
        scale_weights=w[1 + k1 :],
        scale_vars=scale_vars,
        nu=nu,
        zeta2=cfg.zeta2,
        log_likelihood_trace=res.trace,
        converged=res.converged,
    )


def mixture_log_likelihood(fit: WorkingPriorFit, x, s2) -> float:
    comp = _component_log_densities(x, s2, fit.ghat, fit.nu, fit.means, fit.extra_vars)
    with np.errstate(divide="ignore"):
        return float(logsumexp(comp + np.log(fit.weights), axis=1).sum())


@dataclass(eq=False)
class ConformityScorer:
    fit: WorkingPriorFit

    def log_score(self, x, s2) -> np.ndarray:
        fit = self.fit
        w = fit.weights
        # the null component always stays so that column 0 is the numerator
        live = w > 0
        live[0] = True
        comp = _component_log_densities(
            x, s2, fit.ghat, fit.nu, fit.means[live], fit.extra_vars[live]
        )
        with np.errstate(divide="ignore"):
            den = logsumexp(comp + np.log(w[live]), axis=1)
        return comp[:, 0] - den

    def __call__(self, x, s2):
        return score(x, s2, self)


def score(x, s2, scorer: ConformityScorer):
    """u(x, s2) = p(x | mu = 0, s2) / p(x | s2) under the fitted working prior."""
    out = np.exp(scorer.log_score(x, s2))
    return float(out[0]) if np.ndim(x) == 0 and np.ndim(s2) == 0 else out
