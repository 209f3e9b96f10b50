"""Independent reference computations used as test oracles."""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
from scipy import integrate, stats


def null_density_direct(x, s2, atoms, weights, nu):
    """h(x | mu=0, s2) in linear space via scipy.stats, no log tricks."""
    p_s2 = np.array([stats.chi2.pdf(nu * s2 / a, nu) * nu / a for a in atoms])
    post = weights * p_s2 / np.sum(weights * p_s2)
    return float(np.sum(post * stats.norm.pdf(x, 0.0, np.sqrt(atoms))))


def tabulated_cdf(logpdf, lo, hi, n=1501):
    """CDF of a density on [lo, hi] by piecewise adaptive quadrature."""
    grid = np.linspace(lo, hi, n)
    pieces = [integrate.quad(lambda t: np.exp(logpdf(t)), a, b, epsabs=1e-13)[0]
              for a, b in zip(grid[:-1], grid[1:])]
    cdf = np.concatenate([[0.0], np.cumsum(pieces)])
    cdf /= cdf[-1]
    return lambda v: np.interp(v, grid, cdf)


@lru_cache(maxsize=None)
def compositions(total: int, k: int) -> np.ndarray:
    """All vectors of k non-negative ints summing to ``total``."""
    if k == 1:
        return np.array([[total]], dtype=np.int16)
    blocks = []
    for a in range(total + 1):
        rest = compositions(total - a, k - 1)
        blocks.append(np.hstack([np.full((rest.shape[0], 1), a, np.int16), rest]))
    return np.vstack(blocks)


def simplex_grid_max(lik, resolution=100, chunk=400_000):
    """Best sum_i log(lik @ w) over the simplex grid with step 1/resolution."""
    W = compositions(resolution, lik.shape[1])
    best = -np.inf
    for start in range(0, W.shape[0], chunk):
        w = W[start:start + chunk].astype(float) / resolution
        with np.errstate(divide="ignore"):
            ll = np.log(lik @ w.T).sum(axis=0)
        best = max(best, float(ll.max()))
    return best


def ebh_bruteforce(e, alpha):
    """Union of all self-consistent sets: every i in S has E_i >= m / (alpha |S|)."""
    m = len(e)
    chosen = set()
    for r in range(1, m + 1):
        for S in itertools.combinations(range(m), r):
            if all(e[i] >= m / (alpha * r) for i in S):
                chosen.update(S)
    mask = np.zeros(m, bool)
    mask[list(chosen)] = True
    return mask


def threshold_bruteforce(u, u_tilde, alpha, candidates, refined=False):
    """Largest candidate t passing the estimated-FDP rule, by direct counting."""
    best = -np.inf
    for t in candidates:
        n_rej = sum(1 for a, b in zip(u, u_tilde) if a <= b and min(a, b) <= t)
        n_cnt = sum(1 for a, b in zip(u, u_tilde) if a > b and min(a, b) <= t)
        ok = (1 + n_cnt) / max(n_rej, 1) <= alpha or (refined and n_rej < 1 / alpha)
        if ok and t > best:
            best = t
    return best
