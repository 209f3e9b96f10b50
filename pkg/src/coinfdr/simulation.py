"""Simulation designs, replicated experiments and FDR / TPR summaries."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .calibration import RngStream
from .core import run_coin
from .data import RawMatrix, SummaryData
from .densities import DiscretePrior
from .splitting import run_coin_fs, run_coin_ss, summarize_two_group

log = logging.getLogger(__name__)

DEPENDENCE = ("scenario1", "scenario2", "intro1", "intro2")
G_PRIORS = ("SIC", "PM", "TPD")
F_SHAPES = ("Unimodal", "SymBimodal", "AsymBimodal")

# streams inside one replicate
LATENT_STREAM, RAW_STREAM, TRAIN_STREAM, METHOD_STREAM = 10, 11, 12, 13


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    dependence: str = "scenario1"
    g_prior: str = "SIC"
    f_shape: str = "Unimodal"
    pi: float = 0.3
    m: int = 2000
    n1: int = 10
    n2: int = 10

    def __post_init__(self):
        if self.dependence not in DEPENDENCE:
            raise ConfigurationError(f"unknown dependence {self.dependence!r}")
        if self.g_prior not in G_PRIORS:
            raise ConfigurationError(f"unknown prior {self.g_prior!r}")
        if self.f_shape not in F_SHAPES:
            raise ConfigurationError(f"unknown non-null shape {self.f_shape!r}")
        if self.dependence == "scenario2" and self.g_prior == "PM":
            raise ConfigurationError("scenario2 is not defined for the PM prior")
        if not 0 <= self.pi < 1:
            raise ConfigurationError(f"pi must lie in [0, 1), got {self.pi}")
        if self.m < 1 or self.n1 < 2 or self.n2 < 2:
            raise ConfigurationError("m must be positive and each group needs 2 samples")

    @property
    def nu(self) -> int:
        return self.n1 + self.n2 - 2

    def true_prior(self) -> DiscretePrior:
        """G as a DiscretePrior; only the PM and TPD priors are discrete."""
        if self.g_prior == "PM":
            return DiscretePrior.point_mass(1.0)
        if self.g_prior == "TPD":
            return DiscretePrior(np.array([1.0, 10.0]), np.array([0.7, 0.3]))
        raise ConfigurationError("oracle methods need a discrete prior (PM or TPD)")


@dataclass
class Latents:
    mu: np.ndarray
    sigma2: np.ndarray
    theta: np.ndarray


def _gen(rng):
    return rng.generator() if isinstance(rng, RngStream) else rng


def _draw_sigma2(g_prior, m, gen):
    if g_prior == "SIC":
        return 6.0 / gen.chisquare(6, m)
    if g_prior == "PM":
        return np.ones(m)
    return np.where(gen.random(m) < 0.7, 1.0, 10.0)


def _draw_f(shape, m, gen):
    if shape == "Unimodal":
        return gen.normal(0.0, 4.0, m)
    if shape == "SymBimodal":
        centre = np.where(gen.random(m) < 0.5, -4.0, 4.0)
    else:
        centre = np.where(gen.random(m) < 0.3, -3.0, 4.0)
    return centre + gen.standard_normal(m)


def draw_latents(spec: ScenarioSpec, rng) -> Latents:
    """Draw (mu_i, sigma_i^2, theta_i) for every feature."""
    gen = _gen(rng)
    m = spec.m
    sigma2 = _draw_sigma2(spec.g_prior, m, gen)
    theta = gen.random(m) < spec.pi
    if spec.dependence == "scenario1":
        effect = _draw_f(spec.f_shape, m, gen)
    elif spec.dependence == "scenario2":
        effect = np.sqrt(sigma2) * _draw_f(spec.f_shape, m, gen)
    elif spec.dependence == "intro1":
        sd = np.choose(np.searchsorted([0.1, 0.3], gen.random(m), side="right"), [1.0, 2.0, 4.0])
        effect = sd * gen.standard_normal(m)
    else:
        centre = np.where(gen.random(m) < 0.3, -3.0, 4.0) * sigma2
        effect = centre + np.sqrt(sigma2) * gen.standard_normal(m)
    mu = np.where(theta, effect, 0.0)
    return Latents(mu, sigma2, theta)


def generate_raw(spec: ScenarioSpec, latents: Latents, rng) -> RawMatrix:
    """Two-group raw data with noise variance sigma^2 / (1/n1 + 1/n2)."""
    gen = _gen(rng)
    eta = np.sqrt(latents.sigma2 / (1.0 / spec.n1 + 1.0 / spec.n2))[:, None]
    a = latents.mu[:, None] + eta * gen.standard_normal((spec.m, spec.n1))
    b = eta * gen.standard_normal((spec.m, spec.n2))
    return RawMatrix(np.hstack([a, b]), "two-group", (spec.n1, spec.n2))


@dataclass
class ReplicateData:
    spec: ScenarioSpec
    latents: Latents
    raw: RawMatrix
    summary: SummaryData
    seed: int

    def training_set(self) -> SummaryData:
        """Independent dataset from the same design, for methods that need one."""
        rs = RngStream(self.seed, TRAIN_STREAM)
        lat = draw_latents(self.spec, rs.child(0))
        return summarize_two_group(generate_raw(self.spec, lat, rs.child(1)))


def replicate_seed(master_seed: int, rep: int) -> int:
    ss = np.random.SeedSequence([int(master_seed), int(rep)])
    return int(ss.generate_state(1, np.uint64)[0])


def make_replicate(spec: ScenarioSpec, seed: int) -> ReplicateData:
    rs = RngStream(seed)
    latents = draw_latents(spec, rs.child(LATENT_STREAM))
    raw = generate_raw(spec, latents, rs.child(RAW_STREAM))
    return ReplicateData(spec, latents, raw, summarize_two_group(raw), seed)


# -- methods -----------------------------------------------------------------


def _coin_ss(data: ReplicateData, alpha, rng, **kw):
    return run_coin_ss(data.raw, alpha, rng, **kw).rejected, {}


def _coin_fs(data: ReplicateData, alpha, rng, **kw):
    res = run_coin_fs(data.summary, alpha, rng, **kw)
    return res.rejected, {"null_evalue_mean": _null_evalue_mean(res.evalues, data)}


def _oracle_coin(data: ReplicateData, alpha, rng, **kw):
    prior = data.spec.true_prior()
    return run_coin(data.summary, data.training_set(), alpha, rng, prior=prior, **kw).rejected, {}


def _oracle_fs(data: ReplicateData, alpha, rng, **kw):
    res = run_coin_fs(data.summary, alpha, rng, prior=data.spec.true_prior(), **kw)
    return res.rejected, {"null_evalue_mean": _null_evalue_mean(res.evalues, data)}


def _null_evalue_mean(evalues, data):
    return float(evalues[~data.latents.theta].sum() / evalues.size)


METHODS: dict[str, Callable] = {
    "coin-ss": _coin_ss,
    "coin-fs": _coin_fs,
    "oracle-coin": _oracle_coin,
    "oracle-fs": _oracle_fs,
}


# -- metrics and experiments --------------------------------------------------


@dataclass
class ReplicateResult:
    fdp: float
    tpp: float
    rejections: int
    seed: int
    false_rejections: int = 0
    true_rejections: int = 0
    n_nonnull: int = 0
    extra: dict = field(default_factory=dict)


def fdp_tpp(rejected, theta) -> tuple[float, float]:
    rejected = np.asarray(rejected, bool)
    theta = np.asarray(theta, bool)
    r = int(rejected.sum())
    return (
        int((rejected & ~theta).sum()) / max(r, 1),
        int((rejected & theta).sum()) / max(int(theta.sum()), 1),
    )


def score_decisions(rejected, theta, seed=0, extra=None) -> ReplicateResult:
    """FDP / TPP of a rejection mask against the true states."""
    rejected = np.asarray(rejected, bool)
    theta = np.asarray(theta, bool)
    fdp, tpp = fdp_tpp(rejected, theta)
    return ReplicateResult(
        fdp=fdp,
        tpp=tpp,
        rejections=int(rejected.sum()),
        seed=int(seed),
        false_rejections=int((rejected & ~theta).sum()),
        true_rejections=int((rejected & theta).sum()),
        n_nonnull=int(theta.sum()),
        extra=dict(extra or {}),
    )


def run_replicate(spec, method, alpha, seed, method_kwargs=None) -> ReplicateResult:
    fn = METHODS[method] if isinstance(method, str) else method
    data = make_replicate(spec, seed)
    try:
        rejected, extra = fn(data, alpha, RngStream(seed, METHOD_STREAM), **(method_kwargs or {}))
    except Exception as exc:
        raise RuntimeError(f"replicate with seed {seed} failed: {exc}") from exc
    return score_decisions(rejected, data.latents.theta, seed, extra)


@dataclass
class ExperimentResult:
    spec: ScenarioSpec
    method: str
    alpha: float
    reps: int
    master_seed: int
    fdr: float
    tpr: float
    se_fdr: float
    se_tpr: float
    se_available: bool
    results: list

    def row(self) -> dict:
        return {
            "method": self.method,
            "dependence": self.spec.dependence,
            "g": self.spec.g_prior,
            "f": self.spec.f_shape,
            "pi": self.spec.pi,
            "m": self.spec.m,
            "reps": self.reps,
            "fdr": self.fdr,
            "tpr": self.tpr,
            "se_fdr": self.se_fdr,
            "se_tpr": self.se_tpr,
        }

    def extra_mean(self, key) -> tuple[float, float]:
        vals = np.array([r.extra[key] for r in self.results], dtype=float)
        se = vals.std(ddof=1) / np.sqrt(vals.size) if vals.size > 1 else 0.0
        return float(vals.mean()), float(se)


def _run_one(args):
    spec, method, alpha, seed, kw = args
    return run_replicate(spec, method, alpha, seed, kw)


def run_experiment(
    spec: ScenarioSpec,
    method="coin-fs",
    alpha: float = 0.1,
    reps: int = 100,
    master_seed: int = 0,
    parallelism: int = 1,
    method_kwargs: dict | None = None,
) -> ExperimentResult:
    """Replicate a method on fresh data; results do not depend on ``parallelism``."""
    if reps < 1:
        raise ConfigurationError("reps must be at least 1")
    if not 0 < alpha < 1:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha}")
    if isinstance(method, str) and method not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}")
    if isinstance(method, str) and method.startswith("oracle"):
        spec.true_prior()
    tasks = [(spec, method, alpha, replicate_seed(master_seed, r), method_kwargs) for r in range(reps)]
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    fdp = np.array([r.fdp for r in results])
    tpp = np.array([r.tpp for r in results])
    se_ok = reps > 1
    name = method if isinstance(method, str) else getattr(method, "__name__", "custom")
    return ExperimentResult(
        spec=spec,
        method=name,
        alpha=alpha,
        reps=reps,
        master_seed=master_seed,
        fdr=float(fdp.mean()),
        tpr=float(tpp.mean()),
        se_fdr=float(fdp.std(ddof=1) / np.sqrt(reps)) if se_ok else 0.0,
        se_tpr=float(tpp.std(ddof=1) / np.sqrt(reps)) if se_ok else 0.0,
        se_available=se_ok,
        results=results,
    )


def result_record(res: ReplicateResult) -> dict:
    return asdict(res)
