"""S-divergence family, the density power divergence and the MDPDE objective."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import exprel

from .models import DEFAULT_TOL, ParametricModel, as_theta, integrate

BRANCH_THRESHOLD = 1e-10
_LOG_FLOOR = -745.0
_TINY = 1e-300


class InvalidDensityError(ValueError):
    pass


@dataclass(frozen=True)
class SParams:
    """Divergence tuning pair ``(gamma, lambda)``."""

    gamma: float
    lam: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not math.isfinite(self.lam):
            raise ValueError("lambda must be finite")

    @property
    def A(self) -> float:
        return 1.0 + self.lam * (1.0 - self.gamma)

    @property
    def B(self) -> float:
        return self.gamma - self.lam * (1.0 - self.gamma)

    @property
    def branch(self) -> str:
        if abs(self.A) < BRANCH_THRESHOLD:
            return "A_zero"
        if abs(self.B) < BRANCH_THRESHOLD:
            return "B_zero"
        return "generic"


def _cross_term(log_base, d, exponent):
    """``exp(log_base) * (exp(exponent*d) - 1) / exponent``, finite at ``exponent = 0``.

    Written as ``exp(log_base) * d * exprel(exponent*d)`` where the direct
    quotient would cancel.
    """
    t = exponent * d
    small = np.abs(t) <= 1.0
    out = np.empty_like(d)
    out[small] = np.exp(log_base[small]) * d[small] * exprel(t[small])
    big = ~small
    if np.any(big):
        out[big] = (np.exp(log_base[big] + t[big]) - np.exp(log_base[big])) / exponent
    return out


def s_integrand(log_g, log_f, params: SParams):
    """Pointwise integrand of ``S_{(gamma,lambda)}(g, f)`` from log-densities.

    The three-term expression is rearranged around whichever of ``A``/``B``
    is smaller in magnitude, so both limits ``A -> 0`` and ``B -> 0`` are
    continuous and the limit branches fall out at ``exprel(0) = 1``.
    """
    log_g = np.atleast_1d(np.asarray(log_g, dtype=float))
    log_f = np.atleast_1d(np.asarray(log_f, dtype=float))
    keep = (log_g > math.log(_TINY)) & (log_f > math.log(_TINY))
    out = np.zeros(np.broadcast(log_g, log_f).shape)
    lg = np.maximum(np.broadcast_to(log_g, out.shape)[keep], _LOG_FLOOR)
    lf = np.maximum(np.broadcast_to(log_f, out.shape)[keep], _LOG_FLOOR)
    c = 1.0 + params.gamma
    A, B = params.A, params.B
    if params.branch == "A_zero":
        A = 0.0
    elif params.branch == "B_zero":
        B = 0.0
    gc, fc = np.exp(c * lg), np.exp(c * lf)
    if abs(B) >= abs(A):
        # (g^c - f^c - (1+gamma)(f^B g^A - f^c)/A) / B
        lf_c = c * lf
        out[keep] = (gc - fc - _cross_term(lf_c, c * (lg - lf), A / c)) / B
    else:
        lg_c = c * lg
        out[keep] = (fc - gc - _cross_term(lg_c, c * (lf - lg), B / c)) / A
    return out


def _log_of(density):
    def log_density(x):
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(np.asarray(density(x), dtype=float), 0.0))
    return log_density


def s_divergence(
    g: Callable,
    f: Callable,
    params: SParams,
    support=(-np.inf, np.inf),
    tol: float = DEFAULT_TOL,
    *,
    points=(0.0,),
    scale: float = 1.0,
    log_densities: bool = False,
) -> float:
    """S-divergence ``S_{(gamma,lambda)}(g, f)`` between two densities.

    ``g`` and ``f`` are vectorised callables returning densities (or log
    densities when ``log_densities`` is set).  ``points``/``scale`` locate the
    mass for the quadrature.

    Raises
    ------
    InvalidDensityError
        When the value is below ``-10 * tol``, which only happens for inputs
        that are not densities.
    """
    lg = g if log_densities else _log_of(g)
    lf = f if log_densities else _log_of(f)

    def h(x):
        return float(s_integrand(lg(x), lf(x), params)[0])

    val = integrate(h, support, tol, points=points, scale=scale)
    if val < -10 * tol:
        raise InvalidDensityError(f"S-divergence evaluated to {val:.3e} < 0; inputs are not densities")
    return max(val, 0.0)


def dpd(
    g: Callable,
    f: Callable,
    beta: float,
    support=(-np.inf, np.inf),
    tol: float = DEFAULT_TOL,
    *,
    points=(0.0,),
    scale: float = 1.0,
) -> float:
    """Density power divergence ``d_beta(g, f)``; Kullback-Leibler at ``beta = 0``."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")

    if beta == 0:
        def h(x):
            gx, fx = float(g(x)), float(f(x))
            if gx < _TINY:
                return 0.0
            return gx * (math.log(gx) - math.log(max(fx, _TINY)))
    else:
        def h(x):
            gx, fx = float(g(x)), float(f(x))
            return fx ** (1 + beta) - (1 + beta) / beta * fx**beta * gx + gx ** (1 + beta) / beta

    val = integrate(h, support, tol, points=points, scale=scale)
    if val < -10 * tol:
        raise InvalidDensityError(f"DPD evaluated to {val:.3e} < 0; inputs are not densities")
    return max(val, 0.0)


# --- model-level quantities ------------------------------------------------------------


def model_s_divergence(model: ParametricModel, theta, theta0, params: SParams, tol=DEFAULT_TOL) -> float:
    """``S_{(gamma,lambda)}(f_theta, f_theta0)`` within a model family."""
    th, th0 = as_theta(theta, model.param_dim), as_theta(theta0, model.param_dim)
    closed = getattr(model, "s_divergence_closed", None)
    if closed is not None:
        return closed(th, th0, params)
    c0, s0 = model.integration_hint(th0)
    c1, s1 = model.integration_hint(th)
    return s_divergence(
        lambda x: model.logpdf(th, x), lambda x: model.logpdf(th0, x), params,
        model.support, tol, points=(c0, c1), scale=min(s0, s1), log_densities=True,
    )


def s_gradient(model: ParametricModel, theta, theta0, params: SParams, tol=DEFAULT_TOL) -> np.ndarray:
    """Gradient in ``theta`` of ``S_{(gamma,lambda)}(f_theta, f_theta0)``.

    ``(1+gamma)/B [int f_theta^{1+gamma} u_theta - int f_theta0^B f_theta^A u_theta]``,
    arranged as ``-(1+gamma) int f_theta^{1+gamma} u_theta e exprel(B e)`` with
    ``e = log f_theta0 - log f_theta`` so that ``B = 0`` is covered.
    """
    p = model.param_dim
    th, th0 = as_theta(theta, p), as_theta(theta0, p)
    closed = getattr(model, "s_gradient_closed", None)
    if closed is not None:
        return closed(th, th0, params)
    c = 1.0 + params.gamma
    B = 0.0 if params.branch == "B_zero" else params.B

    def piece(x, j):
        lt = np.atleast_1d(model.logpdf(th, x))
        l0 = np.atleast_1d(model.logpdf(th0, x))
        if lt[0] < math.log(_TINY) or l0[0] < math.log(_TINY):
            return 0.0
        lt, l0 = np.maximum(lt, _LOG_FLOOR), np.maximum(l0, _LOG_FLOOR)
        u = model.score(th, x)[..., j]
        return float(-u * _cross_term(c * lt, c * (l0 - lt), B / c)[0])

    hints = [model.integration_hint(th), model.integration_hint(th0)]
    pts, scale = [h[0] for h in hints], min(h[1] for h in hints)
    return np.array([integrate(lambda x, j=j: piece(x, j), model.support, tol, points=pts, scale=scale)
                     for j in range(p)])


def s_hessian_at_null(model: ParametricModel, theta0, gamma: float, tol=DEFAULT_TOL) -> np.ndarray:
    """``A_gamma(theta0) = (1+gamma) int u u^T f^{1+gamma}``; free of lambda."""
    mom = model.weighted_moments(as_theta(theta0, model.param_dim), 1.0 + gamma, tol)
    return (1.0 + gamma) * mom.score_outer


def mdpde_objective(sample, model: ParametricModel, theta, beta: float, tol=DEFAULT_TOL) -> float:
    """Empirical DPD objective minimised by the MDPDE.

    ``int f^{1+beta} - (1+beta)/beta * mean f^beta(X_i)`` for ``beta > 0`` and
    the negative mean log-likelihood at ``beta = 0``.
    """
    x = np.asarray(sample, dtype=float)
    if x.size == 0:
        raise ValueError("empty sample")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    th = as_theta(theta, model.param_dim)
    logf = np.asarray(model.logpdf(th, x), dtype=float)
    if beta == 0:
        return float(-logf.mean())
    mass = model.weighted_moments(th, 1.0 + beta, tol).mass
    return float(mass - (1 + beta) / beta * np.exp(beta * logf).mean())


def mdpde_objective_gradient(sample, model: ParametricModel, theta, beta: float, tol=DEFAULT_TOL):
    """``(1+beta)[int u f^{1+beta} - mean u f^beta(X_i)]``; ``-mean u`` at ``beta = 0``."""
    x = np.asarray(sample, dtype=float)
    th = as_theta(theta, model.param_dim)
    u = np.asarray(model.score(th, x), dtype=float).reshape(x.size, model.param_dim)
    if beta == 0:
        return -u.mean(axis=0)
    w = np.exp(beta * np.asarray(model.logpdf(th, x), dtype=float)).reshape(-1, 1)
    xi = model.weighted_moments(th, 1.0 + beta, tol).score
    return (1 + beta) * (xi - (u * w).mean(axis=0))
