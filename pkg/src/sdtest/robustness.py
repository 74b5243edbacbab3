"""Influence diagnostics of the S-divergence test and the chi-square inflation factor."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from . import chi2mix
from .divergence import s_hessian_at_null
from .estimation import if_mdpde, model_matrices
from .models import DEFAULT_TOL, ParametricModel, as_theta
from .testing import SERIES_TOL, critical_value

FD_STEP = 1e-4


@dataclass(frozen=True)
class ContaminatedDensity:
    """``g_eps = (1 - eps) f_theta0 + eps * point mass at y``."""

    model: ParametricModel
    theta0: np.ndarray
    epsilon: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "theta0", as_theta(self.theta0, self.model.param_dim))
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")

    def expect(self, h: Callable, integral_against_f: float | None = None, tol: float = DEFAULT_TOL) -> float:
        """``int h dg = (1 - eps) int h f + eps h(y)``."""
        if integral_against_f is None:
            th = self.theta0
            integral_against_f = self.model.integrate(
                lambda x: float(h(x)) * float(self.model.density(th, x)), [th], tol)
        return (1 - self.epsilon) * integral_against_f + self.epsilon * float(h(self.y))


def _scalar_or_array(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


# --- second order influence ---------------------------------------------------------------


def if2_test(y, model: ParametricModel, theta0, gamma: float, beta: float, tol: float = DEFAULT_TOL):
    """``IF(y; T_beta)^T A_gamma(theta0) IF(y; T_beta)``; vectorised over ``y``."""
    A = s_hessian_at_null(model, theta0, gamma, tol)
    IF = if_mdpde(y, model, theta0, beta, tol)
    return _scalar_or_array(np.einsum("...i,ij,...j->...", IF, A, IF))


def if2_normal_closed(y, sigma: float, theta0: float, gamma: float, beta: float):
    """Reference closed form printed for the normal mean.

    ``(1+beta)^{3/2} / ((sqrt(2 pi) sigma)^{beta+gamma} sigma^4 sqrt(1+gamma)) (y-theta0)^2 exp(-beta (y-theta0)^2/sigma^2)``.
    Agrees with :func:`if2_test` only at ``sigma = 1, beta = 0``; kept for comparison.
    """
    d = np.asarray(y, dtype=float) - theta0
    const = (1 + beta) ** 1.5 / ((math.sqrt(2 * math.pi) * sigma) ** (beta + gamma) * sigma**4 * math.sqrt(1 + gamma))
    return _scalar_or_array(const * d * d * np.exp(-beta * d * d / sigma**2))


# --- power and level influence ------------------------------------------------------------


def _scalar_power_derivative(t, Sigma, zeta, t_alpha):
    """``d/dt P(zeta chi2_1(t^2/Sigma) > t_alpha)``.

    The Poisson weights ``C_v(t)`` with mean ``t^2/(2 Sigma)`` satisfy
    ``dC_v/dt = (t/Sigma)(C_{v-1} - C_v)``, so the derivative is
    ``(t/Sigma) sum_v C_v (S_{v+1} - S_v)`` with ``S_v = P(chi2_{1+2v} > t_alpha/zeta)``.
    """
    if t == 0:
        return 0.0
    lam = t * t / (2 * Sigma)
    vmax = int(lam + 12 * math.sqrt(lam) + 60)
    v = np.arange(vmax + 2)
    S = stats.chi2.sf(t_alpha / zeta, 1 + 2 * v)
    C = stats.poisson.pmf(v[:-1], lam)
    return t / Sigma * float(np.dot(C, S[1:] - S[:-1]))


def _series_power(A, Sigma, shift, t_alpha, N):
    mix = chi2mix.build_mixture(A, Sigma, shift)
    C = chi2mix.kotz_coefficients(mix.zeta, mix.delta, N)
    S = stats.chi2.sf(t_alpha / min(mix.zeta), mix.r + 2 * np.arange(N + 1))
    return float(np.dot(C, S))


def power_gradient(model: ParametricModel, theta0, Delta, gamma: float, beta: float, alpha: float,
                   tol: float = DEFAULT_TOL) -> np.ndarray:
    """``C* = sum_v grad_t C_v(theta0, t)|_{t=Delta} P(chi2_{r+2v} > t_alpha / zeta_min)``.

    Analytic Poisson form for ``p = 1``; otherwise central differences of step
    ``1e-4`` with one Richardson refinement on the coefficient map, order fixed.
    """
    th0 = as_theta(theta0, model.param_dim)
    D = as_theta(Delta, model.param_dim)
    A = s_hessian_at_null(model, th0, gamma, tol)
    _, _, Sigma = model_matrices(model, th0, beta, tol)
    t_alpha = critical_value(chi2mix.build_mixture(A, Sigma), alpha)
    if model.param_dim == 1:
        zeta = float(A[0, 0] * Sigma[0, 0])
        return np.array([_scalar_power_derivative(float(D[0]), float(Sigma[0, 0]), zeta, t_alpha)])

    # the order is fixed across the perturbed shifts; a margin covers the step
    N = chi2mix.series_coefficients(chi2mix.build_mixture(A, Sigma, D), tol=SERIES_TOL * 1e-2).N + 20
    grad = np.empty(D.size)
    for j in range(D.size):
        e = np.zeros(D.size)
        e[j] = 1.0

        def diff(h):
            return (_series_power(A, Sigma, D + h * e, t_alpha, N) - _series_power(A, Sigma, D - h * e, t_alpha, N)) / (2 * h)

        grad[j] = (4 * diff(FD_STEP / 2) - diff(FD_STEP)) / 3
    return grad


def pif(y, model: ParametricModel, theta0, Delta, gamma: float, beta: float, alpha: float,
        tol: float = DEFAULT_TOL):
    """Power influence function ``IF(y; T_beta)^T C*``; vectorised over ``y``."""
    IF = if_mdpde(y, model, theta0, beta, tol)
    if not np.all(np.isfinite(IF)):
        raise ArithmeticError("estimator influence function is not finite on the grid")
    return _scalar_or_array(IF @ power_gradient(model, theta0, Delta, gamma, beta, alpha, tol))


def lif(y, model: ParametricModel, theta0, gamma: float, beta: float, alpha: float, tol: float = DEFAULT_TOL):
    """Level influence function: :func:`pif` at ``Delta = 0``."""
    return pif(y, model, theta0, np.zeros(model.param_dim), gamma, beta, alpha, tol)


# --- chi-square inflation factor (scalar parameter) ------------------------------------------


def _require_scalar(model):
    if model.param_dim != 1:
        raise ValueError("the inflation factor is defined for a scalar parameter")


def _pointwise(model, th, beta, y):
    u = float(model.score(th, y)[0])
    i = float(model.curvature(th, y)[0, 0])
    fb = math.exp(beta * float(model.logpdf(th, y)))
    return u, i, fb


def inflation_components(g, model: ParametricModel, theta0, beta: float, tol: float = DEFAULT_TOL):
    """``(J_beta(g), V_beta(g))`` for a contaminated density or a density callable ``g``.

    ``J = int u^2 f^{1+beta} + int (i - beta u^2)(g - f) f^beta`` and
    ``V = int u^2 f^{2 beta} g - (int u f^beta g)^2``.
    """
    _require_scalar(model)
    th = as_theta(theta0, 1)
    m1 = model.weighted_moments(th, 1.0 + beta, tol)
    m2 = model.weighted_moments(th, 1.0 + 2.0 * beta, tol)
    M, N = float(m1.score_outer[0, 0]), float(m1.score[0])
    K = float(m1.curvature[0, 0]) - beta * M  # int (i - beta u^2) f^{1+beta}
    M2 = float(m2.score_outer[0, 0])

    if isinstance(g, ContaminatedDensity):
        eps = g.epsilon
        u, i, fb = _pointwise(model, th, beta, g.y)
        J = M + eps * ((i - beta * u * u) * fb - K)
        V = (1 - eps) * M2 + eps * u * u * fb * fb - ((1 - eps) * N + eps * u * fb) ** 2
        return J, V

    def q(h):
        def integrand(x):
            u, i, fb = _pointwise(model, th, beta, x)
            return h(u, i, fb) * float(g(x))
        return model.integrate(integrand, [th], tol)

    J = M + q(lambda u, i, fb: (i - beta * u * u) * fb) - K
    V = q(lambda u, i, fb: u * u * fb * fb) - q(lambda u, i, fb: u * fb) ** 2
    return J, V


def inflation_factor(g, model: ParametricModel, theta0, gamma: float, beta: float, tol: float = DEFAULT_TOL) -> float:
    """``c(g) = A_gamma(theta0) V_beta(g) / J_beta(g)^2``."""
    J, V = inflation_components(g, model, theta0, beta, tol)
    if not J > 0:
        raise ArithmeticError(f"J_beta(g) = {J:.3e} is not positive")
    A = float(s_hessian_at_null(model, theta0, gamma, tol)[0, 0])
    return A * V / (J * J)


def inflation_ratio(epsilon: float, y: float, model: ParametricModel, theta0, gamma: float, beta: float,
                    tol: float = DEFAULT_TOL) -> float:
    """``c(g_eps) / c(f_theta0)`` for a point-mass contamination at ``y``."""
    g = ContaminatedDensity(model, theta0, epsilon, y)
    f = ContaminatedDensity(model, theta0, 0.0, y)
    return inflation_factor(g, model, theta0, gamma, beta, tol) / inflation_factor(f, model, theta0, gamma, beta, tol)


def _slope_constants(model, th, gamma, beta, tol):
    m1 = model.weighted_moments(th, 1.0 + beta, tol)
    m2 = model.weighted_moments(th, 1.0 + 2.0 * beta, tol)
    A = float(s_hessian_at_null(model, th, gamma, tol)[0, 0])
    M, N = float(m1.score_outer[0, 0]), float(m1.score[0])
    M2 = float(m2.score_outer[0, 0])
    return A, M, N, M2, float(m1.curvature[0, 0])


def inflation_slope(y, model: ParametricModel, theta0, gamma: float, beta: float, tol: float = DEFAULT_TOL):
    """``d c(g_eps) / d eps`` at ``eps = 0``.

    With ``M = int u^2 f^{1+beta}``, ``N = int u f^{1+beta}``, ``M2 = int u^2 f^{1+2beta}``
    and ``K = int i f^{1+beta} - beta M``::

        A / M^3 [ M (u^2 f^{2beta}(y) - M2 - 2 N u f^beta(y) + 2 N^2)
                  - 2 (M2 - N^2) ((i(y) - beta u^2(y)) f^beta(y) - K) ]
    """
    _require_scalar(model)
    th = as_theta(theta0, 1)
    A, M, N, M2, I = _slope_constants(model, th, gamma, beta, tol)
    K = I - beta * M
    y_arr = np.asarray(y, dtype=float)
    u = np.asarray(model.score(th, y_arr), dtype=float)[..., 0]
    i = np.asarray(model.curvature(th, y_arr), dtype=float)[..., 0, 0]
    fb = np.exp(beta * np.asarray(model.logpdf(th, y_arr), dtype=float))
    dV = u * u * fb * fb - M2 - 2 * N * u * fb + 2 * N * N
    dJ = (i - beta * u * u) * fb - K
    return _scalar_or_array(A / M**3 * (M * dV - 2 * (M2 - N * N) * dJ))


def inflation_slope_printed(y, model: ParametricModel, theta0, gamma: float, beta: float, tol: float = DEFAULT_TOL):
    """Reference: the published general slope expression, braces read as a sum.

    Differs from :func:`inflation_slope` by the constant ``A M2 / M^2`` when ``N = 0``.
    """
    _require_scalar(model)
    th = as_theta(theta0, 1)
    A, M, N, M2, I = _slope_constants(model, th, gamma, beta, tol)
    y_arr = np.asarray(y, dtype=float)
    u = np.asarray(model.score(th, y_arr), dtype=float)[..., 0]
    i = np.asarray(model.curvature(th, y_arr), dtype=float)[..., 0, 0]
    fb = np.exp(beta * np.asarray(model.logpdf(th, y_arr), dtype=float))
    ups = 2 * (M2 - N * N) * (I - (1 + beta) * M)
    inner = N * M * u + (M2 - N * N) * (i - beta * u * u)
    return _scalar_or_array(A / M**3 * (M * u * u * fb * fb - 2 * fb * inner + ups))


def inflation_slope_normal_closed(y, sigma: float, theta0: float, gamma: float, beta: float):
    """Reference closed form printed for the normal mean:
    ``kappa_gamma (1+beta)^2 sqrt(1+2beta) / (kappa_beta^2 kappa_{2beta}) (y-theta0) exp(-beta (y-theta0)^2/sigma^2)``.
    """
    def kappa(a):
        return (2 * math.pi) ** (-a / 2) * sigma ** (-a) / math.sqrt(1 + a)

    d = np.asarray(y, dtype=float) - theta0
    const = kappa(gamma) * (1 + beta) ** 2 * math.sqrt(1 + 2 * beta) / (kappa(beta) ** 2 * kappa(2 * beta))
    return _scalar_or_array(const * d * np.exp(-beta * d * d / sigma**2))
