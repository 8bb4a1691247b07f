"""Gaussian quasi-MLE and the one-step efficient update.

The quasi-MLE maximizes ``sum(-log(h_i)/2 - eps_i^2 / (2 h_i))`` over the
box-constrained parameter space.  The one-step update rescales it with the
null-family scores,

    theta_hat = theta_tilde - Ihat(theta_tilde)^{-1}
                * mean_i W_i(theta_tilde) (psi0(eta_i), phi0(eta_i))',

which is a single scoring iteration for the criterion
``-log(h)/2 + log f0(eta)`` whose per-observation score is
``-W_i (psi0, phi0)'``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .distributions import NullFamily, family_from_key
from .errors import EstimationError, NumericError
from .models import (
    ArGarchParams,
    ArmaGarchParams,
    FilteredPath,
    GarchParams,
    ModelParams,
    ParamBounds,
    filter_series,
    gradients,
    w_blocks,
)

__all__ = [
    "FitResult",
    "FourthMomentWarning",
    "gaussian_qmle",
    "information_matrix",
    "score_mean",
    "scoring_step",
    "one_step_update",
    "fit_model",
    "quasi_loglik",
    "fourth_moment_ok",
]

logger = logging.getLogger(__name__)

_COND_LIMIT = 1e12


class FourthMomentWarning(UserWarning):
    """Fitted GARCH(1,1) coefficients violate 3a^2 + 2ab + b^2 < 1."""


@dataclass
class FitResult:
    theta_tilde: ModelParams
    theta_hat: ModelParams
    info: np.ndarray | None
    loglik: float
    converged: bool
    iterations: int
    se: np.ndarray | None = None
    projected: bool = False


def quasi_loglik(series, params: ModelParams) -> float:
    """Gaussian quasi-log-likelihood (without the constant -n*log(2*pi)/2)."""
    path = filter_series(series, params)
    return float(np.sum(-0.5 * np.log(path.h) - path.eps**2 / (2.0 * path.h)))


def _optimizer_bounds(template: ModelParams, b: ParamBounds) -> list[tuple]:
    garch_box = [(b.alpha0_lower, b.alpha0_upper)]
    if isinstance(template, GarchParams):
        ncoef = template.alpha.size + template.beta.size
    else:
        ncoef = 2
    garch_box += [(b.coef_lower, b.coef_upper)] * ncoef
    ar_box = [(-b.ar_bound, b.ar_bound)]
    if isinstance(template, GarchParams):
        return garch_box
    if isinstance(template, ArGarchParams):
        return ar_box + garch_box
    return ar_box * 2 + garch_box


def _simplex_violation(template: ModelParams, vec: np.ndarray, rho0: float) -> float:
    if isinstance(template, GarchParams):
        s = vec[1:].sum()
    else:
        s = vec[-2] + vec[-1]
    return max(0.0, s - rho0)


def _moment_seed(y: np.ndarray, template: ModelParams, b: ParamBounds) -> ModelParams:
    v = float(np.var(y))
    alpha0 = max(0.1 * v, b.alpha0_lower * 10.0)
    if isinstance(template, GarchParams):
        p1, p2 = template.alpha.size, template.beta.size
        return GarchParams(alpha0, np.full(p1, 0.1 / p1), np.full(p2, 0.7 / p2))
    yc = y - y.mean()
    denom = float(yc @ yc)
    acf1 = float(yc[1:] @ yc[:-1]) / denom if denom > 0 else 0.0
    a = float(np.clip(acf1, -0.95, 0.95))
    if isinstance(template, ArGarchParams):
        return ArGarchParams(a, alpha0, 0.1, 0.7)
    if a == 0.0:
        a = 0.01  # keep a + b away from zero
    return ArmaGarchParams(a, 0.0, alpha0, 0.1, 0.7)


def gaussian_qmle(
    series,
    model: ModelParams,
    *,
    init: ModelParams | None = None,
    bounds: ParamBounds | None = None,
    max_iter: int = 500,
) -> FitResult:
    """Fit by Gaussian quasi-maximum likelihood over the box constraints.

    ``model`` fixes the model kind and orders (its coefficient values are
    ignored when ``init`` is given or the moment-based seed is used).
    Non-convergence is flagged on the result, not raised.
    """
    b = bounds or ParamBounds()
    y = np.ascontiguousarray(series, dtype=float)
    if y.size < 50:
        raise EstimationError("need at least 50 observations to fit")
    if not np.all(np.isfinite(y)):
        raise EstimationError("series contains non-finite values")
    if np.var(y) < 1e-12 * (1.0 + float(np.mean(y)) ** 2):
        raise EstimationError("series is (near-)constant; model is degenerate")

    seed = init if init is not None else _moment_seed(y, model, b)
    x0 = seed.to_array()
    box = _optimizer_bounds(model, b)
    x0 = np.clip(x0, [lo for lo, _ in box], [hi for _, hi in box])

    def objective(vec: np.ndarray) -> float:
        viol = _simplex_violation(model, vec, b.rho0)
        if viol > 0.0:
            return 1e10 * (1.0 + viol)
        p = model.replace_array(vec)
        path = filter_series(y, p)
        return float(np.sum(0.5 * np.log(path.h) + path.eps**2 / (2.0 * path.h)))

    res = optimize.minimize(
        objective,
        x0,
        method="L-BFGS-B",
        jac="3-point",
        bounds=box,
        options={"maxiter": max_iter, "gtol": 1e-8, "finite_diff_rel_step": 1e-6},
    )
    vec, _ = _project(res.x, model, b)
    theta = model.replace_array(vec)
    return FitResult(
        theta_tilde=theta,
        theta_hat=theta,
        info=None,
        loglik=-float(res.fun),
        converged=bool(res.success),
        iterations=int(res.nit),
    )


def information_matrix(path: FilteredPath, family) -> np.ndarray:
    """Sample information ``mean_i W_i diag(b1, b2) W_i'``.

    Block layout: top-left ``b1*W11 W11' + b2*W12 W12'`` (location),
    off-diagonal ``b2*W12 W22'``, bottom-right ``b2*W22 W22'``.
    """
    family = family_from_key(family)
    W11, W12, W22 = w_blocks(path)
    b1, b2 = family.fisher_constants()
    n = path.n
    q, r = path.q, path.r
    info = np.empty((q + r, q + r))
    info[:q, :q] = (b1 * (W11.T @ W11) + b2 * (W12.T @ W12)) / n
    info[:q, q:] = b2 * (W12.T @ W22) / n
    info[q:, :q] = info[:q, q:].T
    info[q:, q:] = b2 * (W22.T @ W22) / n
    info = (info + info.T) / 2.0
    if np.linalg.cond(info) > _COND_LIMIT:
        raise NumericError("information matrix is numerically singular")
    return info


def score_mean(path: FilteredPath, family) -> np.ndarray:
    """``mean_i W_i (psi0(eta_i), phi0(eta_i))'`` as a (q+r)-vector."""
    family = family_from_key(family)
    W11, W12, W22 = w_blocks(path)
    psi = family.psi0(path.eta)
    phi = family.phi0(path.eta)
    n = path.n
    top = (W11.T @ psi + W12.T @ phi) / n
    bot = (W22.T @ phi) / n
    return np.concatenate([top, bot])


def scoring_step(theta_vec: np.ndarray, score: np.ndarray, info: np.ndarray) -> np.ndarray:
    """One scoring iteration: ``theta - info^{-1} score`` (no projection)."""
    try:
        return theta_vec - np.linalg.solve(info, score)
    except np.linalg.LinAlgError as exc:
        raise NumericError("information matrix solve failed") from exc


def _project(vec: np.ndarray, template: ModelParams, b: ParamBounds):
    box = _optimizer_bounds(template, b)
    out = np.clip(vec, [lo for lo, _ in box], [hi for _, hi in box])
    if _simplex_violation(template, out, b.rho0) > 0.0:
        coef = slice(1, None) if isinstance(template, GarchParams) else slice(-2, None)
        # strictly inside the simplex so float round-off cannot re-violate it
        out[coef] *= (b.rho0 - 1e-9) / out[coef].sum()
        out[coef] = np.maximum(out[coef], b.coef_lower)
    changed = not np.array_equal(out, vec)
    return out, changed


def one_step_update(
    series,
    theta_tilde: ModelParams,
    family,
    *,
    bounds: ParamBounds | None = None,
) -> ModelParams:
    """Apply the scoring step at ``theta_tilde`` and project back into the
    parameter space if the raw update exits it."""
    b = bounds or ParamBounds()
    path = gradients(series, theta_tilde)
    info = information_matrix(path, family)
    g = score_mean(path, family)
    vec = scoring_step(theta_tilde.to_array(), g, info)
    vec, changed = _project(vec, theta_tilde, b)
    if changed:
        logger.info("one-step update projected back into the parameter space")
    return theta_tilde.replace_array(vec)


def fourth_moment_ok(params: ModelParams) -> bool | None:
    """Check 3*alpha^2 + 2*alpha*beta + beta^2 < 1 for GARCH(1,1) terms.

    Returns None for GARCH orders where the condition does not apply.
    """
    if isinstance(params, GarchParams):
        if params.alpha.size != 1 or params.beta.size != 1:
            return None
        al, be = float(params.alpha[0]), float(params.beta[0])
    else:
        al, be = params.alpha, params.beta
    return 3.0 * al * al + 2.0 * al * be + be * be < 1.0


def fit_model(
    series,
    model: ModelParams,
    family,
    *,
    init: ModelParams | None = None,
    bounds: ParamBounds | None = None,
    max_iter: int = 500,
) -> FitResult:
    """Full pipeline: Gaussian QMLE, one-step update, information and SEs."""
    family = family_from_key(family)
    fit = gaussian_qmle(series, model, init=init, bounds=bounds, max_iter=max_iter)
    theta_hat = one_step_update(series, fit.theta_tilde, family, bounds=bounds)
    path = gradients(series, theta_hat)
    info = information_matrix(path, family)
    fit.theta_hat = theta_hat
    fit.info = info
    fit.loglik = quasi_loglik(series, theta_hat)
    fit.se = np.sqrt(np.diag(np.linalg.inv(info)) / path.n)
    if fourth_moment_ok(theta_hat) is False:
        warnings.warn(
            "fitted coefficients violate the finite fourth-moment condition "
            "3*alpha^2 + 2*alpha*beta + beta^2 < 1",
            FourthMomentWarning,
            stacklevel=2,
        )
    return fit
