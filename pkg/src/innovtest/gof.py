"""Weighted residual empirical process and the goodness-of-fit statistic.

The r-vector process

    K_n(x) = (1 / (2 sqrt(n))) * sum_i W22_i [ I(eta_i <= x) - F0(x) ]

is a step function with jumps at the order statistics of the standardized
residuals.  Between jumps each component is affine in F0(x), so the
quadratic form ``Q(x) = K_n(x)' Ihat_n^{-1} K_n(x)`` is convex there and
its supremum over the whole line is attained at a jump point or a left
limit.  The reported statistic is ``T = sup_x Q(x)``, on the same scale as
the tabulated limit distribution ``sup_x ||Z(x)||^2``.

The module also carries a Monte Carlo harness for the uniform expansion of
generally weighted and perturbed residual empirical processes, used as
decay evidence for the asymptotic approximations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from .distributions import NullFamily, family_from_key
from .errors import NumericError
from .models import FilteredPath, ModelParams, filter_series, gradients, simulate, w_blocks

__all__ = [
    "ProcessEval",
    "k_process",
    "process_on_points",
    "ihat_n",
    "kn_statistic",
    "ExpansionConfig",
    "ExpansionResult",
    "sup_gap",
    "expansion_harness",
    "iid_perturbation_draw",
    "model_perturbation_draw",
    "drift_expansion_gap",
]

logger = logging.getLogger(__name__)

_COND_LIMIT = 1e12


@dataclass
class ProcessEval:
    """The process on its candidate points.

    ``xs`` holds every order statistic twice, left limit first; ``K`` holds
    the matching process values, shape (2n, r).
    """

    xs: np.ndarray
    K: np.ndarray
    Ihat: np.ndarray | None = None
    T: float | None = None
    argmax_x: float | None = None


def _sorted_weights(path: FilteredPath):
    W11, W12, W22 = w_blocks(path)
    order = np.argsort(path.eta, kind="stable")
    return path.eta[order], W22[order]


def k_process(path: FilteredPath, family) -> ProcessEval:
    """Evaluate K_n at every order statistic and every left limit."""
    family = family_from_key(family)
    es, Ws = _sorted_weights(path)
    n = es.shape[0]
    csum = np.cumsum(Ws, axis=0)
    total = csum[-1]
    F = np.atleast_1d(family.cdf(es))
    scale = 1.0 / (2.0 * np.sqrt(n))

    hi = np.searchsorted(es, es, side="right") - 1
    lo = np.searchsorted(es, es, side="left")
    incl = csum[hi]
    excl = np.zeros_like(incl)
    pos = lo > 0
    excl[pos] = csum[lo[pos] - 1]

    K_at = scale * (incl - F[:, None] * total)
    K_left = scale * (excl - F[:, None] * total)

    xs = np.repeat(es, 2)
    K = np.empty((2 * n, Ws.shape[1]))
    K[0::2] = K_left
    K[1::2] = K_at
    return ProcessEval(xs=xs, K=K)


def process_on_points(path: FilteredPath, family, xs):
    """K_n at arbitrary points: (value, left limit) arrays of shape (m, r)."""
    family = family_from_key(family)
    es, Ws = _sorted_weights(path)
    n = es.shape[0]
    csum = np.vstack([np.zeros(Ws.shape[1]), np.cumsum(Ws, axis=0)])
    total = csum[-1]
    xs = np.asarray(xs, dtype=float)
    F = np.atleast_1d(family.cdf(xs))
    scale = 1.0 / (2.0 * np.sqrt(n))
    K_at = scale * (csum[np.searchsorted(es, xs, side="right")] - F[:, None] * total)
    K_left = scale * (csum[np.searchsorted(es, xs, side="left")] - F[:, None] * total)
    return K_at, K_left


def ihat_n(path: FilteredPath) -> np.ndarray:
    """Normalizer ``(1/(4n)) sum_i W22_i W22_i'``; symmetric PSD."""
    _, _, W22 = w_blocks(path)
    n = W22.shape[0]
    mat = (W22.T @ W22) / (4.0 * n)
    mat = (mat + mat.T) / 2.0
    if np.linalg.cond(mat) > _COND_LIMIT:
        raise NumericError("Ihat_n is numerically singular")
    return mat


def _solve_spd(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        factor = linalg.cho_factor(mat)
    except np.linalg.LinAlgError:
        jitter = 1e-10 * np.trace(mat) / mat.shape[0]
        logger.warning("Ihat_n factorization failed; retrying with jitter %.3e", jitter)
        try:
            factor = linalg.cho_factor(mat + jitter * np.eye(mat.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise NumericError("Ihat_n factorization failed") from exc
    return linalg.cho_solve(factor, rhs)


def kn_statistic(path: FilteredPath, family) -> tuple[float, float]:
    """Supremum of the quadratic form over the candidate points.

    Returns ``(T, argmax_x)`` where ``T = sup_x K' Ihat^{-1} K`` is compared
    directly with the tabulated percentage points.
    """
    pe = k_process(path, family)
    pe.Ihat = ihat_n(path)
    sol = _solve_spd(pe.Ihat, pe.K.T)
    Q = np.einsum("ij,ji->i", pe.K, sol)
    idx = int(np.argmax(Q))
    pe.T = float(Q[idx])
    pe.argmax_x = float(pe.xs[idx])
    return pe.T, pe.argmax_x


# ---------------------------------------------------------------------------
# uniform-expansion Monte Carlo harness


def sup_gap(eta, gamma, tau, xi, cdf) -> float:
    """Sup over the jump-point set of |U_tilde - U_star| for one sample.

    U_tilde uses per-observation scale perturbations ``tau`` and location
    perturbations ``xi`` inside both the indicator and the compensator;
    U_star is the unperturbed weighted empirical process.
    """
    eta = np.asarray(eta, float)
    gamma = np.asarray(gamma, float)
    tau = np.asarray(tau, float)
    xi = np.asarray(xi, float)
    n = eta.shape[0]
    if np.any(1.0 + tau <= 0.0):
        raise ValueError("scale perturbations must keep 1 + tau positive")
    scale = 1.0 / np.sqrt(n)
    z = (eta - xi) / (1.0 + tau)
    xs = np.unique(np.concatenate([eta, z]))

    order_e = np.argsort(eta, kind="stable")
    e_sorted, ge = eta[order_e], gamma[order_e]
    ce = np.concatenate([[0.0], np.cumsum(ge)])
    order_z = np.argsort(z, kind="stable")
    z_sorted, gz = z[order_z], gamma[order_z]
    cz = np.concatenate([[0.0], np.cumsum(gz)])

    best = 0.0
    chunk = 512
    for start in range(0, xs.size, chunk):
        x = xs[start : start + chunk]
        # compensator difference summed per observation: exactly zero when
        # tau = xi = 0
        h0 = np.atleast_1d(cdf(x))[:, None]
        hdiff = (gamma[None, :] * (
            np.atleast_1d(cdf(x[:, None] * (1.0 + tau[None, :]) + xi[None, :])) - h0
        )).sum(axis=1)
        sz_in = cz[np.searchsorted(z_sorted, x, side="right")]
        sz_ex = cz[np.searchsorted(z_sorted, x, side="left")]
        se_in = ce[np.searchsorted(e_sorted, x, side="right")]
        se_ex = ce[np.searchsorted(e_sorted, x, side="left")]
        d_at = (sz_in - se_in) - hdiff
        d_left = (sz_ex - se_ex) - hdiff
        best = max(best, np.abs(d_at).max(), np.abs(d_left).max())
    return float(scale * best)


@dataclass
class ExpansionConfig:
    draw: Callable[[np.random.Generator, int], tuple]
    cdf: Callable
    sizes: tuple[int, ...] = (200, 400, 800, 1600, 3200)
    reps: int = 100
    seed: int = 0


@dataclass
class ExpansionResult:
    sup_gaps: dict[int, np.ndarray] = field(default_factory=dict)

    def median(self, n: int) -> float:
        return float(np.median(self.sup_gaps[n]))

    def summary(self) -> dict:
        return {
            n: {
                "median": float(np.median(g)),
                "q90": float(np.quantile(g, 0.90)),
                "max": float(g.max()),
            }
            for n, g in self.sup_gaps.items()
        }


def expansion_harness(config: ExpansionConfig) -> ExpansionResult:
    """Sup-discrepancy per replication across sample sizes."""
    result = ExpansionResult()
    for n in config.sizes:
        gaps = np.empty(config.reps)
        for rep in range(config.reps):
            rng = np.random.default_rng(np.random.SeedSequence((config.seed, n, rep)))
            eta, gamma, tau, xi = config.draw(rng, n)
            gaps[rep] = sup_gap(eta, gamma, tau, xi, config.cdf)
        result.sup_gaps[n] = gaps
    return result


def iid_perturbation_draw(family, gamma=1.0, tau=0.0, xi=0.0):
    """Draw factory for i.i.d. innovations with simple perturbation rules.

    Each of ``gamma``, ``tau``, ``xi`` may be a constant, a callable
    ``(rng, n) -> array``, or one of the strings ``"inv-sqrt-n"`` /
    ``"neg-inv-sqrt-n"`` meaning +-1/sqrt(n) for every observation.
    """
    family = family_from_key(family)

    def resolve(spec, rng, n):
        if callable(spec):
            return np.asarray(spec(rng, n), float)
        if spec == "inv-sqrt-n":
            return np.full(n, 1.0 / np.sqrt(n))
        if spec == "neg-inv-sqrt-n":
            return np.full(n, -1.0 / np.sqrt(n))
        return np.full(n, float(spec))

    def draw(rng, n):
        eta = family.sample(rng, n)
        return (
            eta,
            resolve(gamma, rng, n),
            resolve(tau, rng, n),
            resolve(xi, rng, n),
        )

    return draw


def model_perturbation_draw(params: ModelParams, family, t, component: int = 0):
    """Model-based draw: weights and perturbations from a local parameter move.

    For a fixed direction ``t``, the filter is run at ``theta`` and at
    ``theta + t/sqrt(n)``; the weights are the chosen W22 component at the
    moved point, and (tau, xi) are the induced relative scale and location
    shifts, so that ``I(eta_i(theta_t) <= x)`` equals
    ``I(eta_i <= x + x*tau_i + xi_i)`` exactly.
    """
    family = family_from_key(family)
    t = np.asarray(t, dtype=float)

    def draw(rng, n):
        y = simulate(params, n, innovations=family, burn_in=500, rng=rng)
        base = filter_series(y, params)
        moved = params.replace_array(params.to_array() + t / np.sqrt(n))
        moved.validate()
        path_t = gradients(y, moved)
        gamma = path_t.W22[:, component]
        tau = np.sqrt(path_t.h / base.h) - 1.0
        xi = (base.eps - path_t.eps) / np.sqrt(base.h)
        return base.eta, gamma, tau, xi

    return draw


# ---------------------------------------------------------------------------
# drift-corrected approximation check


def drift_expansion_gap(series, theta_hat: ModelParams, theta: ModelParams, family) -> float:
    """Sup-norm distance between K_n at the fitted point and its
    drift-corrected approximation at the true point.

    The correction subtracts ``x f0(x) / (4 b2 sqrt(n)) * sum_i W22_i phi0(eta_i)``
    (both evaluated at the true parameters) from K_n(x, theta).
    """
    family = family_from_key(family)
    path_hat = gradients(series, theta_hat)
    path_true = gradients(series, theta)
    n = path_true.n
    _, b2 = family.fisher_constants()
    phi = family.phi0(path_true.eta)
    s = path_true.W22.T @ phi  # (r,)

    xs = np.unique(np.concatenate([path_hat.eta, path_true.eta]))
    Kh_at, Kh_left = process_on_points(path_hat, family, xs)
    Kt_at, Kt_left = process_on_points(path_true, family, xs)
    drift = (xs * np.atleast_1d(family.pdf(xs)) / (4.0 * b2 * np.sqrt(n)))[:, None] * s

    gap_at = np.linalg.norm(Kh_at - (Kt_at - drift), axis=1)
    gap_left = np.linalg.norm(Kh_left - (Kt_left - drift), axis=1)
    return float(max(gap_at.max(), gap_left.max()))
