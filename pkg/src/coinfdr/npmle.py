"""Grid-restricted NPMLE of the variance prior G."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .densities import DiscretePrior, _check_nu, _chi2_logpdf


class NonFiniteError(FloatingPointError):
    def __init__(self, msg, iteration):
        super().__init__(f"{msg} (iteration {iteration})")
        self.iteration = iteration


@dataclass(frozen=True)
class NpmleConfig:
    n_atoms: int = 50
    max_iters: int = 1000
    rel_tol: float = 1e-8
    lower_quantile: float = 0.01

    def __post_init__(self):
        if self.n_atoms < 2:
            raise ValueError("n_atoms must be at least 2")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not 0 <= self.lower_quantile < 1:
            raise ValueError("lower_quantile must lie in [0, 1)")


@dataclass
class NpmleFit:
    prior: DiscretePrior
    log_likelihood_trace: list = field(default_factory=list)
    converged: bool = True

    @property
    def log_likelihood(self) -> float:
        return self.log_likelihood_trace[-1]


@dataclass
class SimplexEMResult:
    weights: np.ndarray
    trace: list
    converged: bool


def simplex_em(log_lik, max_iters=1000, rel_tol=1e-8, init=None, accelerate=True):
    """Maximise sum_i log sum_j w_j exp(log_lik[i, j]) over the simplex.

    The base map is the multiplicative EM update
    w_j <- w_j * mean_i(L_ij / sum_k w_k L_ik); the objective is concave in
    ``w`` so its fixed point is the global maximum. With ``accelerate`` each
    iteration is a SQUAREM cycle (two EM maps plus an extrapolation); the
    extrapolated point is kept only if it stays in the simplex interior and
    does not lower the likelihood, so the recorded trace is monotone either way.
    Stops when the relative change of the log-likelihood drops below
    ``rel_tol`` or after ``max_iters`` iterations.
    """
    log_lik = np.asarray(log_lik, dtype=float)
    n, k = log_lik.shape
    offset = log_lik.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(offset)):
        raise NonFiniteError("observation with no finite component likelihood", 0)
    lik = np.exp(log_lik - offset)
    total_offset = float(offset.sum())
    w = np.full(k, 1.0 / k) if init is None else np.asarray(init, dtype=float).copy()

    def loglik(mix):
        return float(np.log(mix).sum()) + total_offset

    def em_map(w, mix):
        w = w * (lik.T @ (1.0 / mix)) / n
        w /= w.sum()
        return w, lik @ w

    mix = lik @ w
    ll = loglik(mix)
    trace = [ll]
    converged = k == 1
    it = 0
    while not converged and it < max_iters:
        it += 1
        w1, mix1 = em_map(w, mix)
        if accelerate:
            w2, mix2 = em_map(w1, mix1)
            ll2 = loglik(mix2)
            r = w1 - w
            v = w2 - w1 - r
            vnorm = np.sqrt(v @ v)
            new_w, new_mix, new = w2, mix2, ll2
            if vnorm > 0:
                step = -np.sqrt(r @ r) / vnorm
                # halve the step towards -1 (plain double EM) until it is usable
                for _ in range(8):
                    if step >= -1:
                        break
                    cand = w - 2 * step * r + step**2 * v
                    if np.all(cand > 0):
                        cand /= cand.sum()
                        cand, cmix = em_map(cand, lik @ cand)
                        cll = loglik(cmix)
                        if np.isfinite(cll) and cll >= ll2:
                            new_w, new_mix, new = cand, cmix, cll
                            break
                    step = (step - 1) / 2
        else:
            new_w, new_mix, new = w1, mix1, loglik(mix1)
        if not np.isfinite(new):
            raise NonFiniteError("non-finite log-likelihood", it)
        trace.append(new)
        if abs(new - ll) <= rel_tol * abs(new):
            converged = True
        w, mix, ll = new_w, new_mix, new
    return SimplexEMResult(w, trace, converged)


def build_grid(s2_values, cfg: NpmleConfig = NpmleConfig()) -> np.ndarray:
    """Log-equispaced atoms from the lower empirical quantile to the maximum."""
    s2 = np.asarray(s2_values, dtype=float).ravel()
    if s2.size == 0:
        raise ValueError("no variance estimates supplied")
    if np.any(~(s2 > 0)) or not np.all(np.isfinite(s2)):
        raise ValueError("variance estimates must be finite and positive")
    lo = float(np.quantile(s2, cfg.lower_quantile))
    hi = float(s2.max())
    if lo == hi:
        return np.array([hi])
    grid = np.geomspace(lo, hi, cfg.n_atoms)
    grid[0], grid[-1] = lo, hi
    return grid


def fit_npmle(s2_values, nu, cfg: NpmleConfig = NpmleConfig(), grid=None) -> NpmleFit:
    """Fit the mixing weights of G on a fixed grid by EM, starting from uniform."""
    nu = _check_nu(nu)
    # sorted input makes the fit exactly invariant to the order of the data
    s2 = np.sort(np.asarray(s2_values, dtype=float).ravel())
    if grid is None:
        grid = build_grid(s2, cfg)
    grid = np.asarray(grid, dtype=float)
    if s2.size == 0:
        raise ValueError("no variance estimates supplied")
    log_lik = _chi2_logpdf(s2[:, None], grid[None, :], nu)
    res = simplex_em(log_lik, cfg.max_iters, cfg.rel_tol)
    w = res.weights / res.weights.sum()
    return NpmleFit(DiscretePrior(grid, w), res.trace, res.converged)


def log_likelihood(s2_values, prior: DiscretePrior, nu) -> float:
    from scipy.special import logsumexp

    s2 = np.asarray(s2_values, dtype=float).ravel()
    with np.errstate(divide="ignore"):
        terms = prior.log_weights + _chi2_logpdf(s2[:, None], prior.atoms, nu)
    return float(logsumexp(terms, axis=1).sum())
