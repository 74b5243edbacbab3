"""Monte Carlo harness for empirical size and power, and table generators."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .divergence import SParams, mdpde_objective
from .estimation import fit_mdpde, fit_normal_mean_batch
from .models import NormalKnownVarModel, ParametricModel, as_theta
from .robustness import inflation_ratio
from .testing import (
    HypothesisSpec,
    critical_value,
    contiguous_power,
    normal_statistic,
    null_mixture,
    sdt_statistic,
)

log = logging.getLogger(__name__)

DEFAULT_REPS = 1000
BETA_GRID = (0.0, 0.1, 0.3, 0.5, 0.7, 1.0)
SIZE_BETAS = (0.0, 0.1, 0.3, 0.5, 1.0)
LAMBDA_GRID = (-3.0, -1.0, -0.5, 0.0, 0.5, 1.0, 3.0)
SIZE_EPSILONS = (0.0, 0.05, 0.1)
INFLATION_SIGMAS = (0.5, 1.0, 2.0)
INFLATION_EPSILONS = (0.0005, 0.001, 0.005, 0.01, 0.02, 0.05, 0.1)
MAX_FAILURE_RATE = 0.01


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class MixtureDistribution:
    """Finite normal mixture given as ``(weight, mean, sd)`` components."""

    components: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        comps = tuple((float(w), float(m), float(s)) for w, m, s in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("mixture needs at least one component")
        w = np.array([c[0] for c in comps])
        if np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-12):
            raise ValueError("weights must be nonnegative and sum to 1")
        if any(c[2] <= 0 for c in comps):
            raise ValueError("component sds must be positive")

    @classmethod
    def contaminated(cls, mean: float, sd: float = 1.0, epsilon: float = 0.0, location: float = 1.0,
                     location_sd: float = 1.0) -> MixtureDistribution:
        """``(1 - eps) N(mean, sd^2) + eps N(location, location_sd^2)``."""
        if epsilon == 0:
            return cls(((1.0, mean, sd),))
        return cls(((1.0 - epsilon, mean, sd), (epsilon, location, location_sd)))

    @property
    def mean(self) -> float:
        return math.fsum(w * m for w, m, _ in self.components)


def sample_mixture(dist: MixtureDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. draws: a component index by weight, then a normal draw."""
    w = np.array([c[0] for c in dist.components])
    mu = np.array([c[1] for c in dist.components])
    sd = np.array([c[2] for c in dist.components])
    idx = rng.choice(len(w), size=n, p=w) if len(w) > 1 else np.zeros(n, dtype=int)
    return mu[idx] + sd[idx] * rng.standard_normal(n)


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    """Independent stream for one replication, fixed by ``(seed, rep)`` alone."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(rep)]))


@dataclass(frozen=True)
class Alternative:
    kind: str = "null"  # null | contiguous | fixed
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("null", "contiguous", "fixed"):
            raise ValueError(f"unknown alternative {self.kind!r}")

    def true_mean(self, theta0: float, n: int) -> float:
        if self.kind == "contiguous":
            return theta0 + self.value / math.sqrt(n)
        if self.kind == "fixed":
            return self.value
        return theta0


@dataclass(frozen=True)
class SimulationConfig:
    """Normal-mean simulation design.

    Data follow ``(1 - epsilon) N(mu, sigma^2) + epsilon N(contamination_mean, contamination_sd^2)``
    with ``mu`` fixed by the alternative.  Every ``beta`` in ``betas`` is paired
    with ``gamma = beta``.
    """

    n: int
    reps: int = DEFAULT_REPS
    seed: int = 0
    alpha: float = 0.05
    theta0: float = 0.0
    sigma: float = 1.0
    betas: tuple[float, ...] = BETA_GRID
    lams: tuple[float, ...] = (0.0,)
    alternative: Alternative = field(default_factory=Alternative)
    epsilon: float = 0.0
    contamination_mean: float = 1.0
    contamination_sd: float = 1.0
    workers: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")

    def distribution(self) -> MixtureDistribution:
        mu = self.alternative.true_mean(self.theta0, self.n)
        return MixtureDistribution.contaminated(mu, self.sigma, self.epsilon, self.contamination_mean,
                                                self.contamination_sd)


@dataclass(frozen=True)
class GridCell:
    beta: float
    gamma: float
    lam: float
    rate: float
    se: float
    valid: int
    failures: int


@dataclass(frozen=True)
class SimulationResult:
    config: SimulationConfig
    cells: tuple[GridCell, ...]

    def rate(self, beta: float, lam: float) -> float:
        for c in self.cells:
            if c.beta == beta and c.lam == lam:
                return c.rate
        raise KeyError((beta, lam))

    def rows(self):
        return [[c.beta, c.gamma, c.lam, c.rate, c.se, c.valid, c.failures] for c in self.cells]

    def to_table(self, name: str) -> Table:
        cfg = self.config
        meta = {"n": cfg.n, "reps": cfg.reps, "seed": cfg.seed, "alpha": cfg.alpha, "epsilon": cfg.epsilon,
                "alternative": cfg.alternative.kind, "alternative_value": cfg.alternative.value}
        return Table(name, ("beta", "gamma", "lambda", "rate", "se", "valid", "failures"), self.rows(), meta)


# --- replication kernels ---------------------------------------------------------------


def _draw(cfg: SimulationConfig, reps: range) -> np.ndarray:
    dist = cfg.distribution()
    return np.stack([sample_mixture(dist, cfg.n, replication_rng(cfg.seed, r)) for r in reps])


def _normal_chunk(cfg: SimulationConfig, reps: range, crits: dict) -> np.ndarray:
    """Reject indicators, shape ``(len(reps), len(betas), len(lams))``; NaN marks a failed fit."""
    X = _draw(cfg, reps)
    out = np.empty((X.shape[0], len(cfg.betas), len(cfg.lams)))
    for bi, b in enumerate(cfg.betas):
        th = fit_normal_mean_batch(X, cfg.sigma, b)
        bad = ~np.isfinite(th)
        for li, lam in enumerate(cfg.lams):
            stat = normal_statistic(th, cfg.theta0, cfg.n, cfg.sigma, SParams(b, lam))
            out[:, bi, li] = np.where(bad, np.nan, stat > crits[b])
    return out


def _grid_start(x, model, beta):
    lo, hi = np.quantile(x, [0.05, 0.95])
    grid = np.linspace(lo, hi, 41)
    vals = [mdpde_objective(x, model, np.array([g]), beta) for g in grid]
    return np.array([grid[int(np.argmin(vals))]])


def _generic_chunk(cfg: SimulationConfig, reps: range, crits: dict, model: ParametricModel) -> np.ndarray:
    X = _draw(cfg, reps)
    out = np.empty((X.shape[0], len(cfg.betas), len(cfg.lams)))
    spec = HypothesisSpec(as_theta(cfg.theta0, model.param_dim), cfg.alpha)
    for k, x in enumerate(X):
        for bi, b in enumerate(cfg.betas):
            fit = fit_mdpde(x, model, b)
            if not fit.converged and model.param_dim == 1:
                fit = fit_mdpde(x, model, b, init=_grid_start(x, model, b))
            for li, lam in enumerate(cfg.lams):
                if not fit.converged:
                    out[k, bi, li] = np.nan
                    continue
                out[k, bi, li] = sdt_statistic(x, model, spec, SParams(b, lam), b, fit=fit) > crits[b]
    return out


def _run_chunk(args):
    cfg, start, stop, crits, model = args
    reps = range(start, stop)
    if model is None:
        return start, _normal_chunk(cfg, reps, crits)
    return start, _generic_chunk(cfg, reps, crits, model)


def _chunks(reps: int, workers: int):
    size = max(1, math.ceil(reps / max(1, 4 * workers)))
    return [(s, min(reps, s + size)) for s in range(0, reps, size)]


def run_simulation(cfg: SimulationConfig, model: ParametricModel | None = None) -> SimulationResult:
    """Rejection rates per ``(gamma = beta, lambda)`` cell with binomial standard errors.

    ``model=None`` uses the vectorised normal-mean path.  Asymptotic critical
    values are used throughout.  Replication ``r`` draws from its own stream, so
    results do not depend on ``cfg.workers``.
    """
    fit_model = model or NormalKnownVarModel(cfg.sigma)
    th0 = as_theta(cfg.theta0, fit_model.param_dim)
    crits = {b: critical_value(null_mixture(fit_model, th0, b, b), cfg.alpha) for b in cfg.betas}
    tasks = [(cfg, s, e, crits, model) for s, e in _chunks(cfg.reps, cfg.workers)]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_run_chunk, tasks))
    else:
        parts = [_run_chunk(t) for t in tasks]
    parts.sort(key=lambda p: p[0])
    R = np.concatenate([p[1] for p in parts], axis=0)

    cells = []
    for bi, b in enumerate(cfg.betas):
        for li, lam in enumerate(cfg.lams):
            col = R[:, bi, li]
            ok = np.isfinite(col)
            failures = int((~ok).sum())
            if failures >= MAX_FAILURE_RATE * cfg.reps and failures > 0:
                raise SimulationError(f"{failures} of {cfg.reps} fits failed at beta={b}, lambda={lam}")
            if failures:
                log.warning("%d failed fits excluded at beta=%g, lambda=%g", failures, b, lam)
            valid = int(ok.sum())
            rate = float(col[ok].mean())
            cells.append(GridCell(b, b, lam, rate, math.sqrt(rate * (1 - rate) / valid), valid, failures))
    return SimulationResult(cfg, tuple(cells))


def empirical_size(cfg: SimulationConfig, model: ParametricModel | None = None) -> SimulationResult:
    if cfg.alternative.kind != "null":
        raise ValueError("empirical size needs the null alternative")
    return run_simulation(cfg, model)


def empirical_power(cfg: SimulationConfig, model: ParametricModel | None = None) -> SimulationResult:
    if cfg.alternative.kind == "null":
        raise ValueError("empirical power needs a contiguous or fixed alternative")
    return run_simulation(cfg, model)


# --- tables -------------------------------------------------------------------------------


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[str, ...]
    rows: list
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([fmt(v) for v in r])
        return buf.getvalue()

    def to_json(self) -> str:
        from .cli import dumps  # shared 17-digit serializer

        return dumps({"table": self.name, "meta": self.meta, "columns": list(self.columns),
                      "rows": [dict(zip(self.columns, r)) for r in self.rows]})

    def write(self, out_dir) -> tuple[str, str]:
        import os

        os.makedirs(out_dir, exist_ok=True)
        paths = (os.path.join(out_dir, self.name + ".csv"), os.path.join(out_dir, self.name + ".json"))
        with open(paths[0], "w", newline="") as fh:
            fh.write(self.to_csv())
        with open(paths[1], "w") as fh:
            fh.write(self.to_json() + "\n")
        return paths


def contiguous_power_table(Delta: float = math.sqrt(10), alpha: float = 0.05, betas=BETA_GRID) -> Table:
    m = NormalKnownVarModel(1.0)
    rows = [[b, b, contiguous_power(m, 0.0, Delta, b, b, alpha)] for b in betas]
    return Table("contiguous_power", ("beta", "gamma", "power"), rows, {"Delta": Delta, "alpha": alpha, "sigma": 1.0})


def inflation_ratio_table(y: float = 4.0, sigmas=INFLATION_SIGMAS, epsilons=INFLATION_EPSILONS,
                          betas=BETA_GRID) -> Table:
    rows = []
    for s in sigmas:
        m = NormalKnownVarModel(s)
        for e in epsilons:
            for b in betas:
                rows.append([s, e, b, b, inflation_ratio(e, y, m, 0.0, b, b)])
    return Table("inflation_ratios", ("sigma", "epsilon", "beta", "gamma", "ratio"), rows, {"y": y, "theta0": 0.0})


def empirical_size_table(n: int = 50, reps: int = DEFAULT_REPS, seed: int = 0, workers: int = 1,
                         betas=SIZE_BETAS, lams=LAMBDA_GRID, epsilons=SIZE_EPSILONS,
                         contamination_mean: float = 1.0) -> Table:
    """Sizes under ``(1 - eps) N(0,1) + eps N(1,1)``; each ``eps`` uses its own seed offset."""
    rows = []
    for k, e in enumerate(epsilons):
        cfg = SimulationConfig(n=n, reps=reps, seed=seed + k, betas=tuple(betas), lams=tuple(lams), epsilon=e,
                               contamination_mean=contamination_mean, workers=workers)
        for c in empirical_size(cfg).cells:
            rows.append([c.beta, c.gamma, e, c.lam, c.rate, c.se, c.valid, c.failures])
    return Table("empirical_size", ("beta", "gamma", "epsilon", "lambda", "rate", "se", "valid", "failures"), rows,
                 {"n": n, "reps": reps, "seed": seed, "alpha": 0.05})


def table_generator(which: str, **kwargs) -> Table:
    if which == "contiguous_power":
        return contiguous_power_table(**kwargs)
    if which == "inflation_ratios":
        return inflation_ratio_table(**kwargs)
    if which == "empirical_size":
        return empirical_size_table(**kwargs)
    raise ValueError(f"unknown table {which!r}")


def to_json_dict(result: SimulationResult) -> dict:
    return json.loads(result.to_table("simulation").to_json())
