"""Parametric model families and the quadrature used by every integral.

A model supplies density, score ``u_theta = grad log f_theta`` and curvature
``i_theta = -grad u_theta``.  Integrals of the form ``int h(u, i) f^a`` go through
:meth:`ParametricModel.weighted_moments`, which families with analytic answers
(the normal mean with known variance) override.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import integrate as _spi
from scipy.special import exprel

DEFAULT_TOL = 1e-8
_LOG_FLOOR = -745.0


class IntegrationError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, error_estimate: float):
        super().__init__(f"integration failure: {message} (last error estimate {error_estimate:.3e})")
        self.error_estimate = error_estimate


def _effective_range(func, support, points, scale, rel_cutoff=1e-16, max_doublings=60):
    lo_sup, hi_sup = support
    pts = [float(p) for p in points]
    center_lo, center_hi = min(pts), max(pts)
    peak = max(abs(float(func(p))) for p in pts)

    def walk(start, direction, bound):
        nonlocal peak
        step = scale
        x = start
        for _ in range(max_doublings):
            x_next = start + direction * step
            if (direction < 0 and x_next <= bound) or (direction > 0 and x_next >= bound):
                return bound
            val = abs(float(func(x_next)))
            peak = max(peak, val)
            if val <= rel_cutoff * peak and x_next != x:
                # confirm one more step out; a single small value can sit in a trough
                further = abs(float(func(start + direction * 2 * step)))
                if further <= rel_cutoff * peak:
                    return x_next
            x = x_next
            step *= 2.0
        raise IntegrationError("integrand does not decay on an unbounded support", math.inf)

    lo = lo_sup if np.isfinite(lo_sup) and center_lo - lo_sup < 80 * scale else None
    hi = hi_sup if np.isfinite(hi_sup) and hi_sup - center_hi < 80 * scale else None
    if lo is None:
        lo = walk(center_lo, -1.0, lo_sup)
    if hi is None:
        hi = walk(center_hi, 1.0, hi_sup)
    return lo, hi


def integrate(
    integrand: Callable[[float], float],
    support: tuple[float, float] = (-np.inf, np.inf),
    tol: float = DEFAULT_TOL,
    points: Sequence[float] = (0.0,),
    scale: float = 1.0,
) -> float:
    """Integrate a scalar function over an interval of the real line.

    Unbounded ends are truncated where the integrand drops below 1e-16 of the
    largest value seen while walking outward from ``points`` in geometrically
    growing steps of ``scale``.  The truncated interval is handed to QUADPACK
    (adaptive Gauss-Kronrod 21) with ``points`` as breakpoints.

    Raises
    ------
    IntegrationError
        If the adaptive budget is exhausted with error estimate above ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo_sup, hi_sup = float(support[0]), float(support[1])
    inside = [p for p in points if lo_sup <= p <= hi_sup]
    if not inside:
        inside = [lo_sup if np.isfinite(lo_sup) else hi_sup]
    lo, hi = _effective_range(integrand, (lo_sup, hi_sup), inside, scale)
    brk = sorted({p for p in inside if lo < p < hi})
    with np.errstate(all="ignore"):
        value, err, info = _spi.quad(
            integrand, lo, hi, epsabs=tol, epsrel=1e-12, limit=2000,
            points=brk or None, full_output=1,
        )[:3]
    if not np.isfinite(value):
        raise IntegrationError("non-finite value", float(err))
    if err > tol and err > 1e-12 * abs(value):
        raise IntegrationError("tolerance not reached", float(err))
    return float(value)


class WeightedMoments(NamedTuple):
    """Integrals of model quantities against ``f_theta^a``."""

    mass: float  # int f^a
    score: np.ndarray  # int u f^a
    score_outer: np.ndarray  # int u u^T f^a
    curvature: np.ndarray  # int i f^a


def as_theta(theta, p: int | None = None) -> np.ndarray:
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    if th.ndim != 1 or (p is not None and th.shape[0] != p):
        raise ValueError(f"parameter must be a vector of length {p}, got shape {th.shape}")
    return th


class ParametricModel:
    """Base class for a family ``{f_theta}`` of univariate densities.

    Subclasses implement :meth:`logpdf`, :meth:`score`, :meth:`curvature`,
    :meth:`integration_hint` and :meth:`initial_guesses`; everything else has a
    quadrature fallback.
    """

    param_dim: int = 1
    support: tuple[float, float] = (-np.inf, np.inf)
    closed_forms: bool = False

    # --- per-observation quantities -------------------------------------------------
    def logpdf(self, theta, x):
        raise NotImplementedError

    def density(self, theta, x):
        return np.exp(self.logpdf(theta, x))

    def score(self, theta, x):
        """Array of shape ``x.shape + (p,)``."""
        raise NotImplementedError

    def curvature(self, theta, x):
        """Array of shape ``x.shape + (p, p)``."""
        raise NotImplementedError

    def valid(self, theta) -> bool:
        return bool(np.all(np.isfinite(as_theta(theta))))

    def integration_hint(self, theta) -> tuple[float, float]:
        """(center, scale) of ``f_theta`` used to place quadrature breakpoints."""
        raise NotImplementedError

    def initial_guesses(self, sample) -> list[np.ndarray]:
        raise NotImplementedError

    # --- integrals --------------------------------------------------------------------
    def integrate(self, integrand, thetas, tol: float = DEFAULT_TOL) -> float:
        """Integrate ``integrand(x)`` over the support, guided by the densities at ``thetas``."""
        hints = [self.integration_hint(t) for t in thetas]
        pts = [c for c, _ in hints]
        scale = min(s for _, s in hints)
        return integrate(integrand, self.support, tol, points=pts, scale=scale)

    def weighted_moments(self, theta, a: float, tol: float = DEFAULT_TOL) -> WeightedMoments:
        th = as_theta(theta, self.param_dim)
        p = self.param_dim

        def fa(x):
            return np.exp(a * max(float(self.logpdf(th, x)), _LOG_FLOOR))

        def quad(fn):
            return self.integrate(fn, [th], tol)

        mass = quad(lambda x: fa(x))
        score = np.array([quad(lambda x, j=j: self.score(th, x)[j] * fa(x)) for j in range(p)])
        outer = np.empty((p, p))
        curv = np.empty((p, p))
        for j in range(p):
            for k in range(j, p):
                outer[j, k] = outer[k, j] = quad(
                    lambda x, j=j, k=k: self.score(th, x)[j] * self.score(th, x)[k] * fa(x))
                curv[j, k] = curv[k, j] = quad(
                    lambda x, j=j, k=k: self.curvature(th, x)[j, k] * fa(x))
        return WeightedMoments(mass, score, outer, curv)


@dataclass(frozen=True)
class NormalKnownVarModel(ParametricModel):
    """``N(theta, sigma^2)`` with known ``sigma``; the parameter is the mean."""

    sigma: float = 1.0

    param_dim = 1
    support = (-np.inf, np.inf)
    closed_forms = True

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def logpdf(self, theta, x):
        m = float(as_theta(theta, 1)[0])
        z = (np.asarray(x, dtype=float) - m) / self.sigma
        return -0.5 * z * z - math.log(math.sqrt(2 * math.pi) * self.sigma)

    def score(self, theta, x):
        m = float(as_theta(theta, 1)[0])
        return ((np.asarray(x, dtype=float) - m) / self.sigma**2)[..., None]

    def curvature(self, theta, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape + (1, 1), 1.0 / self.sigma**2)

    def integration_hint(self, theta):
        return float(as_theta(theta, 1)[0]), self.sigma

    def initial_guesses(self, sample):
        s = np.asarray(sample, dtype=float)
        return [np.array([np.median(s)]), np.array([s.mean()])]

    def weighted_moments(self, theta, a, tol=DEFAULT_TOL):
        # int f^a = (2 pi sigma^2)^{(1-a)/2} a^{-1/2};  int (x-m)^2 f^a = sigma^2/a * int f^a
        s2 = self.sigma**2
        mass = (2 * math.pi * s2) ** ((1 - a) / 2) / math.sqrt(a)
        return WeightedMoments(
            mass,
            np.zeros(1),
            np.array([[mass / (a * s2)]]),
            np.array([[mass / s2]]),
        )

    def _ab_exponent(self, d, params):
        c = 1.0 + params.gamma
        ab = 0.0 if params.branch != "generic" else params.A * params.B
        return ab * d * d / (2 * c * self.sigma**2)

    def s_divergence_closed(self, theta, theta0, params) -> float:
        # kappa (1+gamma)/(AB) [1 - exp(-t)] = kappa d^2/(2 sigma^2) * exprel(-t)
        d = float(as_theta(theta, 1)[0] - as_theta(theta0, 1)[0])
        t = self._ab_exponent(d, params)
        return self.kappa(params.gamma) * d * d / (2 * self.sigma**2) * float(exprel(-t))

    def s_gradient_closed(self, theta, theta0, params) -> np.ndarray:
        d = float(as_theta(theta, 1)[0] - as_theta(theta0, 1)[0])
        t = self._ab_exponent(d, params)
        return np.array([self.kappa(params.gamma) * d / self.sigma**2 * math.exp(-t)])

    def kappa(self, gamma: float) -> float:
        return normal_kappa(gamma, self.sigma)

    def upsilon(self, beta: float) -> float:
        return normal_upsilon(beta, self.sigma)


def normal_kappa(gamma: float, sigma: float) -> float:
    """``int f^{1+gamma}`` for ``N(., sigma^2)``: (2 pi)^{-gamma/2} sigma^{-gamma} (1+gamma)^{-1/2}."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return (2 * math.pi) ** (-gamma / 2) * sigma ** (-gamma) / math.sqrt(1 + gamma)


def normal_upsilon(beta: float, sigma: float) -> float:
    """Asymptotic variance of the normal-mean MDPDE."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    return (1 + beta) ** 3 / (1 + 2 * beta) ** 1.5 * sigma**2


@dataclass(frozen=True)
class NormalModel(ParametricModel):
    """``N(mu, sigma^2)`` with ``theta = (mu, sigma)``; no closed forms."""

    param_dim = 2

    def valid(self, theta):
        th = as_theta(theta, 2)
        return bool(np.all(np.isfinite(th)) and th[1] > 0)

    def logpdf(self, theta, x):
        mu, sd = as_theta(theta, 2)
        z = (np.asarray(x, dtype=float) - mu) / sd
        return -0.5 * z * z - math.log(math.sqrt(2 * math.pi) * sd)

    def score(self, theta, x):
        mu, sd = as_theta(theta, 2)
        r = np.asarray(x, dtype=float) - mu
        return np.stack([r / sd**2, (r * r - sd**2) / sd**3], axis=-1)

    def curvature(self, theta, x):
        mu, sd = as_theta(theta, 2)
        r = np.asarray(x, dtype=float) - mu
        out = np.empty(r.shape + (2, 2))
        out[..., 0, 0] = 1.0 / sd**2
        out[..., 0, 1] = out[..., 1, 0] = 2 * r / sd**3
        out[..., 1, 1] = 3 * r * r / sd**4 - 1.0 / sd**2
        return out

    def integration_hint(self, theta):
        mu, sd = as_theta(theta, 2)
        return float(mu), float(sd)

    def initial_guesses(self, sample):
        s = np.asarray(sample, dtype=float)
        mad = 1.4826 * np.median(np.abs(s - np.median(s)))
        guesses = [np.array([s.mean(), max(s.std(), 1e-3)])]
        if mad > 0:
            guesses.insert(0, np.array([np.median(s), mad]))
        return guesses


@dataclass(frozen=True)
class ExponentialModel(ParametricModel):
    """Exponential distribution with rate ``theta`` on ``[0, inf)``."""

    param_dim = 1
    support = (0.0, np.inf)

    def valid(self, theta):
        return bool(as_theta(theta, 1)[0] > 0)

    def logpdf(self, theta, x):
        rate = float(as_theta(theta, 1)[0])
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, math.log(rate) - rate * x, -np.inf)

    def score(self, theta, x):
        rate = float(as_theta(theta, 1)[0])
        return (1.0 / rate - np.asarray(x, dtype=float))[..., None]

    def curvature(self, theta, x):
        rate = float(as_theta(theta, 1)[0])
        x = np.asarray(x, dtype=float)
        return np.full(x.shape + (1, 1), 1.0 / rate**2)

    def integration_hint(self, theta):
        rate = float(as_theta(theta, 1)[0])
        return 0.0, 1.0 / rate

    def initial_guesses(self, sample):
        s = np.asarray(sample, dtype=float)
        guesses = [np.array([1.0 / s.mean()])]
        med = np.median(s)
        if med > 0:
            guesses.insert(0, np.array([math.log(2) / med]))
        return guesses
