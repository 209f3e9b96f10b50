"""Calibration variables drawn from the null-conditional law of X given S^2."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .densities import DiscretePrior, posterior_log_weights


@dataclass(frozen=True)
class RngStream:
    """Named random stream; ``(seed, stream_id)`` fixes every draw."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= v < 2**64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer")

    def generator(self, *sub) -> np.random.Generator:
        return np.random.default_rng([int(self.seed), int(self.stream_id), *map(int, sub)])

    def child(self, stream_id: int) -> "RngStream":
        """Independent stream derived from this one."""
        ss = np.random.SeedSequence([int(self.seed), int(self.stream_id), int(stream_id)])
        return RngStream(int(ss.generate_state(1, np.uint64)[0]), 0)


@dataclass(frozen=True)
class CalibrationRecord:
    index: object
    x_tilde: float
    s2: float


def id_key(identifier) -> int:
    """Stable non-negative integer key for a hypothesis id."""
    if isinstance(identifier, (int, np.integer)) and identifier >= 0:
        return int(identifier)
    digest = hashlib.blake2b(str(identifier).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _draw(s2, prior, nu, uniforms, normals):
    # two-stage: atom from the posterior given s2, then N(0, sigma_j^2)
    post = np.exp(posterior_log_weights(np.asarray(s2, dtype=float), prior, nu))
    cdf = np.cumsum(post, axis=-1)
    cdf /= cdf[..., -1:]
    j = (uniforms[..., None] >= cdf).sum(axis=-1)
    j = np.minimum(j, len(prior) - 1)
    return np.sqrt(prior.atoms[j]) * normals


def sample_calibration(s2, prior: DiscretePrior, nu, rng, size=None):
    """Draw from h_G(. | mu = 0, S^2 = s2).

    ``rng`` is an ``RngStream`` or a numpy ``Generator``. With ``size`` given,
    returns that many independent draws at the same ``s2``.
    """
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    shape = () if size is None else (size,)
    u = gen.random(shape)
    z = gen.standard_normal(shape)
    out = _draw(np.broadcast_to(float(s2), shape), prior, nu, np.asarray(u), np.asarray(z))
    return float(out) if size is None else out


def draw_calibration(ids, s2, prior: DiscretePrior, nu, rng: RngStream) -> np.ndarray:
    """One calibration draw per hypothesis.

    Each id gets its own substream of ``rng``, so a hypothesis' draw depends
    on its id and not on its position in the input.
    """
    s2 = np.asarray(s2, dtype=float)
    m = s2.size
    u = np.empty(m)
    z = np.empty(m)
    for i, ident in enumerate(ids):
        gen = rng.generator(id_key(ident))
        u[i] = gen.random()
        z[i] = gen.standard_normal()
    if m == 0:
        return np.empty(0)
    return _draw(s2, prior, nu, u, z)


def build_pseudo_calibration(test, prior: DiscretePrior, nu, rng: RngStream):
    """Pseudo calibration dataset for a ``SummaryData`` test set."""
    xt = draw_calibration(test.ids, test.s2, prior, nu, rng)
    return [
        CalibrationRecord(ident, float(x), float(s))
        for ident, x, s in zip(test.ids, xt, test.s2)
    ]
