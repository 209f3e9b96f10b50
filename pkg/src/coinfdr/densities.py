"""Log-density kernels of the normal / scaled chi-squared hierarchical model.

Everything is evaluated in log space; chi-squared densities with a few hundred
degrees of freedom underflow in linear space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class HierParams:
    nu: int
    mu: float
    sigma2: float

    def __post_init__(self):
        if int(self.nu) != self.nu or self.nu < 1:
            raise ValueError(f"nu must be a positive integer, got {self.nu}")
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")


@dataclass(frozen=True, eq=False)
class DiscretePrior:
    """Prior on the variance sigma^2 with finite support.

    ``atoms`` must be strictly increasing and positive, ``weights`` a point
    of the probability simplex.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.atleast_1d(np.asarray(self.atoms, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if atoms.ndim != 1 or atoms.size == 0:
            raise ValueError("prior needs at least one atom")
        if atoms.shape != weights.shape:
            raise ValueError("atoms and weights must have equal lengths")
        if not np.all(np.isfinite(atoms)) or np.any(atoms <= 0):
            raise ValueError("atoms must be finite and positive")
        if np.any(np.diff(atoms) <= 0):
            raise ValueError("atoms must be strictly increasing")
        if np.any(weights < 0) or np.any(weights > 1):
            raise ValueError("weights must lie in [0, 1]")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
        atoms.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def point_mass(cls, value: float) -> "DiscretePrior":
        return cls(np.array([float(value)]), np.array([1.0]))

    @classmethod
    def from_atoms(cls, atoms, weights) -> "DiscretePrior":
        """Sort atoms, merge duplicates and renormalise the weights."""
        atoms = np.asarray(atoms, dtype=float).ravel()
        weights = np.asarray(weights, dtype=float).ravel()
        uniq, inverse = np.unique(atoms, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inverse, weights)
        return cls(uniq, merged / merged.sum())

    @property
    def log_weights(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights)

    def __len__(self) -> int:
        return self.atoms.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscretePrior):
            return NotImplemented
        return np.array_equal(self.atoms, other.atoms) and np.array_equal(
            self.weights, other.weights
        )

    def to_dict(self) -> dict:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}


def _check_positive(name, value):
    arr = np.asarray(value, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError(f"{name} must be positive")
    return arr


def _check_nu(nu):
    if int(nu) != nu or nu < 1:
        raise ValueError(f"nu must be a positive integer, got {nu}")
    return int(nu)


def normal_log_density(x, mu, sigma2):
    """log N(x; mu, sigma2), broadcasting over array arguments."""
    sigma2 = _check_positive("sigma2", sigma2)
    x = np.asarray(x, dtype=float)
    out = -0.5 * (LOG_2PI + np.log(sigma2)) - 0.5 * (x - mu) ** 2 / sigma2
    return out[()] if np.ndim(out) == 0 else out


def _chi2_logpdf(s2, sigma2, nu):
    # S^2 ~ (sigma2 / nu) chi^2_nu
    half = 0.5 * nu
    return (
        half * np.log(half / sigma2)
        + (half - 1.0) * np.log(s2)
        - half * s2 / sigma2
        - gammaln(half)
    )


def scaled_chi2_log_density(s2, sigma2, nu):
    """Log density of S^2 = (sigma2/nu) * chi^2_nu evaluated at ``s2``."""
    s2 = _check_positive("s2", s2)
    sigma2 = _check_positive("sigma2", sigma2)
    nu = _check_nu(nu)
    out = _chi2_logpdf(s2, sigma2, nu)
    return out[()] if np.ndim(out) == 0 else out


def _atom_terms(s2, prior: DiscretePrior, nu):
    """log w_j + log p(s2 | sigma_j^2), with the atom axis last."""
    s2 = np.asarray(s2, dtype=float)[..., None]
    with np.errstate(divide="ignore"):
        return prior.log_weights + _chi2_logpdf(s2, prior.atoms, nu)


def marginal_s2_log_density(s2, prior: DiscretePrior, nu):
    """log f_G(s2; nu) = log sum_j w_j p(s2 | sigma_j^2)."""
    if not isinstance(prior, DiscretePrior) or len(prior) == 0:
        raise ValueError("a non-empty DiscretePrior is required")
    _check_positive("s2", s2)
    nu = _check_nu(nu)
    out = logsumexp(_atom_terms(s2, prior, nu), axis=-1)
    return out[()] if np.ndim(out) == 0 else out


def posterior_log_weights(s2, prior: DiscretePrior, nu):
    """Log posterior atom probabilities given S^2 = s2 (atom axis last)."""
    _check_positive("s2", s2)
    nu = _check_nu(nu)
    terms = _atom_terms(s2, prior, nu)
    return terms - logsumexp(terms, axis=-1, keepdims=True)


def _lemma1_log_density(x, s2, prior, nu):
    q = (x**2 + nu * s2) / (nu + 1)
    const = (
        -0.5 * LOG_2PI
        + gammaln(0.5 * (nu + 1))
        - gammaln(0.5 * nu)
        + 0.5 * nu * np.log(0.5 * nu)
        - 0.5 * (nu + 1) * np.log(0.5 * (nu + 1))
    )
    return (
        const
        + (0.5 * nu - 1.0) * np.log(s2)
        - 0.5 * (nu - 1) * np.log(q)
        + logsumexp(_atom_terms(q, prior, nu + 1), axis=-1)
        - logsumexp(_atom_terms(s2, prior, nu), axis=-1)
    )


def null_conditional_log_density(x, s2, prior: DiscretePrior, nu, form="mixture"):
    """log h_G(x | mu = 0, S^2 = s2).

    ``form="mixture"`` mixes N(0, sigma_j^2) over the posterior atom weights;
    ``form="lemma1"`` uses the closed form through the ratio
    f_G(q; nu + 1) / f_G(s2; nu) with q = (x^2 + nu s2) / (nu + 1).
    """
    s2 = _check_positive("s2", s2)
    nu = _check_nu(nu)
    x = np.asarray(x, dtype=float)
    if form == "mixture":
        lw = posterior_log_weights(s2, prior, nu)
        xb = x[..., None]
        comp = -0.5 * (LOG_2PI + np.log(prior.atoms)) - 0.5 * xb**2 / prior.atoms
        out = logsumexp(lw + comp, axis=-1)
    elif form == "lemma1":
        out = _lemma1_log_density(x, s2, prior, nu)
    else:
        raise ValueError(f"unknown form {form!r}")
    return out[()] if np.ndim(out) == 0 else out
