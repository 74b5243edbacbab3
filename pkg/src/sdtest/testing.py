"""The S-divergence test of a simple null, its null law and power approximations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import exprel

from . import chi2mix
from .chi2mix import ChiSqMixture
from .divergence import SParams, model_s_divergence, s_gradient, s_hessian_at_null
from .estimation import MdpdeFit, fit_mdpde, if_mdpde, model_matrices
from .models import DEFAULT_TOL, NormalKnownVarModel, ParametricModel, as_theta

SERIES_TOL = 1e-10
MAX_SAMPLE_SIZE = 10**8


class DegenerateAlternativeError(ArithmeticError):
    pass


@dataclass(frozen=True)
class HypothesisSpec:
    theta0: np.ndarray
    alpha: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "theta0", as_theta(self.theta0))
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class ContaminationSpec:
    """Contamination ``eps/sqrt(n)`` at ``y`` on top of the drift ``theta0 + Delta/sqrt(n)``."""

    epsilon: float = 0.0
    y: float = 0.0
    Delta: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        object.__setattr__(self, "Delta", as_theta(self.Delta))


@dataclass(frozen=True)
class TestOutcome:
    statistic: float
    critical_value: float
    p_value: float
    reject: bool
    theta_hat: np.ndarray
    n: int
    gamma: float
    lam: float
    beta: float
    alpha: float
    mixture: ChiSqMixture

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "critical_value": self.critical_value,
            "p_value": self.p_value,
            "reject": self.reject,
            "theta_hat": [float(v) for v in self.theta_hat],
            "n": self.n,
            "params": {"gamma": self.gamma, "lambda": self.lam, "beta": self.beta, "alpha": self.alpha},
            "mixture": {"zeta": list(self.mixture.zeta), "delta": list(self.mixture.delta)},
        }


# --- statistic --------------------------------------------------------------------------


def normal_statistic(theta_hat, theta0, n, sigma: float, params: SParams):
    """``2 n S(f_theta_hat, f_theta0)`` for the normal mean, vectorised over ``theta_hat``.

    ``2 n kappa (1+gamma)/(AB) [1 - exp(-AB d^2 / (2 (1+gamma) sigma^2))]``, which
    tends to ``n kappa d^2 / sigma^2`` as ``AB -> 0``.
    """
    d = np.asarray(theta_hat, dtype=float) - float(np.ravel(theta0)[0])
    c = 1.0 + params.gamma
    ab = params.A * params.B if params.branch == "generic" else 0.0
    t = ab * d * d / (2 * c * sigma**2)
    return n * NormalKnownVarModel(sigma).kappa(params.gamma) * d * d / sigma**2 * exprel(-t)


def sdt_statistic(sample, model: ParametricModel, spec: HypothesisSpec, params: SParams, beta: float,
                  tol: float = DEFAULT_TOL, fit: MdpdeFit | None = None) -> float:
    """``2 n S_{(gamma,lambda)}(f_{theta_hat_beta}, f_theta0)`` with the MDPDE at ``beta``."""
    x = np.asarray(sample, dtype=float).ravel()
    if fit is None:
        fit = fit_mdpde(x, model, beta, tol=tol)
    return 2.0 * x.size * model_s_divergence(model, fit.theta_hat, spec.theta0, params, tol)


# --- null law -----------------------------------------------------------------------------


def null_mixture(model: ParametricModel, theta0, gamma: float, beta: float, tol: float = DEFAULT_TOL) -> ChiSqMixture:
    """Weights are the nonzero eigenvalues of ``A_gamma(theta0) Sigma_beta(theta0)``."""
    th0 = as_theta(theta0, model.param_dim)
    A = s_hessian_at_null(model, th0, gamma, tol)
    _, _, Sigma = model_matrices(model, th0, beta, tol)
    return chi2mix.build_mixture(A, Sigma)


def critical_value(mixture: ChiSqMixture, alpha: float) -> float:
    return chi2mix.upper_quantile(mixture, alpha, tol=SERIES_TOL)


def run_test(sample, model: ParametricModel, spec: HypothesisSpec, params: SParams, beta: float,
             tol: float = DEFAULT_TOL) -> TestOutcome:
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    fit = fit_mdpde(x, model, beta, tol=tol)
    stat = sdt_statistic(x, model, spec, params, beta, tol, fit=fit)
    mix = null_mixture(model, spec.theta0, params.gamma, beta, tol)
    crit = critical_value(mix, spec.alpha)
    pval = float(chi2mix.sf(mix, stat, tol=SERIES_TOL))
    # the critical value is bisected on the same survival function, so the
    # two decisions only differ inside the bisection resolution
    reject = bool(pval < spec.alpha)
    return TestOutcome(float(stat), float(crit), pval, reject, fit.theta_hat, int(x.size),
                       params.gamma, params.lam, float(beta), spec.alpha, mix)


# --- asymptotic power ------------------------------------------------------------------------


def power_approx(model: ParametricModel, theta_star, spec: HypothesisSpec, params: SParams, beta: float,
                 n: int, tol: float = DEFAULT_TOL) -> float:
    """Normal approximation to ``P(2 n S(f_theta_hat, f_theta0) > t_alpha)`` at a fixed alternative."""
    th = as_theta(theta_star, model.param_dim)
    th0 = spec.theta0
    if np.array_equal(th, th0):
        raise DegenerateAlternativeError("theta_star equals theta0")
    t_alpha = critical_value(null_mixture(model, th0, params.gamma, beta, tol), spec.alpha)
    S = model_s_divergence(model, th, th0, params, tol)
    M = s_gradient(model, th, th0, params, tol)
    _, _, Sigma = model_matrices(model, th, beta, tol)
    var = float(M @ Sigma @ M)
    if not var > 0:
        raise DegenerateAlternativeError("zero asymptotic variance at theta_star")
    z = math.sqrt(n) / math.sqrt(var) * (t_alpha / (2 * n) - S)
    return float(stats.norm.sf(z))


def sample_size_for_power(model: ParametricModel, theta_star, spec: HypothesisSpec, params: SParams,
                          beta: float, target_power: float, tol: float = DEFAULT_TOL) -> int:
    """Smallest ``n`` with ``power_approx(n) >= target_power``."""
    if not 0.0 < target_power < 1.0:
        raise ValueError("target power must lie in (0, 1)")

    def power(n):
        return power_approx(model, theta_star, spec, params, beta, n, tol)

    if power(1) >= target_power:
        return 1
    lo, hi = 1, 2
    while power(hi) < target_power:
        lo, hi = hi, 2 * hi
        if hi > MAX_SAMPLE_SIZE:
            raise ValueError(f"target power {target_power} not reached below n = {MAX_SAMPLE_SIZE}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if power(mid) >= target_power:
            hi = mid
        else:
            lo = mid
    return hi


def _power_from_shift(model, theta0, shift, gamma, beta, alpha, tol, method):
    th0 = as_theta(theta0, model.param_dim)
    A = s_hessian_at_null(model, th0, gamma, tol)
    _, _, Sigma = model_matrices(model, th0, beta, tol)
    t_alpha = critical_value(chi2mix.build_mixture(A, Sigma), alpha)
    alt = chi2mix.build_mixture(A, Sigma, shift)
    return float(chi2mix.sf(alt, t_alpha, tol=SERIES_TOL, method=method))


def contiguous_power(model: ParametricModel, theta0, Delta, gamma: float, beta: float, alpha: float,
                     tol: float = DEFAULT_TOL, method: str = "auto") -> float:
    """Asymptotic power at ``theta_n = theta0 + Delta / sqrt(n)``."""
    return _power_from_shift(model, theta0, as_theta(Delta, model.param_dim), gamma, beta, alpha, tol, method)


def contaminated_power(model: ParametricModel, theta0, cont: ContaminationSpec, gamma: float, beta: float,
                       alpha: float, tol: float = DEFAULT_TOL, method: str = "auto") -> float:
    """Asymptotic power with the shift ``Delta + epsilon * IF(y)``; ``Delta = 0`` gives the level."""
    shift = as_theta(cont.Delta, model.param_dim)
    if cont.epsilon:
        shift = shift + cont.epsilon * if_mdpde(cont.y, model, theta0, beta, tol)
    return _power_from_shift(model, theta0, shift, gamma, beta, alpha, tol, method)
