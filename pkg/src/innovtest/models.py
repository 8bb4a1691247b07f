"""GARCH(p1, p2), AR(1)-GARCH(1,1) and ARMA(1,1)-GARCH(1,1) models.

Provides stationary-path simulation, residual/variance filtering, the
analytic first-derivative recursions, and the per-observation weight
blocks ``W11 = dmu/sqrt(h)``, ``W12 = dh1/h``, ``W22 = dh2/h`` that feed
the information matrix and the weighted empirical process.  ``dh1`` and
``dh2`` are the gradients of the conditional variance with respect to the
location block (dimension q) and the scale block (dimension r).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import _recursions as rec
from .distributions import NullFamily, family_from_key
from .errors import InputError

__all__ = [
    "ParamBounds",
    "GarchParams",
    "ArGarchParams",
    "ArmaGarchParams",
    "ModelParams",
    "FilteredPath",
    "simulate",
    "filter_series",
    "gradients",
    "w_blocks",
    "innovation_sampler",
    "INNOVATION_LAWS",
    "params_from_dict",
]


@dataclass(frozen=True)
class ParamBounds:
    """Concrete parameter-space boxes used by the estimator.

    The stationarity simplex ``sum(alpha) + sum(beta) <= rho0`` applies to
    every model; the positive lower bounds keep the variance recursion away
    from zero during optimization.
    """

    rho0: float = 0.999
    coef_lower: float = 1e-6
    coef_upper: float = 0.999
    alpha0_lower: float = 1e-6
    alpha0_upper: float = np.inf
    ar_bound: float = 0.9999


@dataclass(frozen=True)
class GarchParams:
    """GARCH(p1, p2) coefficients; p1 = len(alpha), p2 = len(beta)."""

    alpha0: float
    alpha: np.ndarray
    beta: np.ndarray

    kind = "garch"

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.atleast_1d(np.asarray(self.alpha, float)))
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, float)))

    @property
    def q(self) -> int:
        return 0

    @property
    def r(self) -> int:
        return 1 + self.alpha.size + self.beta.size

    def validate(self, bounds: ParamBounds | None = None) -> None:
        b = bounds or ParamBounds()
        if not np.isfinite(self.alpha0) or self.alpha0 <= 0.0:
            raise ValueError("alpha0 must be positive")
        if np.any(self.alpha < 0.0) or np.any(self.beta < 0.0):
            raise ValueError("alpha and beta coefficients must be nonnegative")
        if self.alpha.sum() + self.beta.sum() > b.rho0 + 1e-10:
            raise ValueError(
                f"sum(alpha) + sum(beta) = {self.alpha.sum() + self.beta.sum():.6g} "
                f"exceeds the stationarity bound {b.rho0}"
            )

    def unconditional_variance(self) -> float:
        return self.alpha0 / (1.0 - self.alpha.sum() - self.beta.sum())

    def to_array(self) -> np.ndarray:
        return np.concatenate(([self.alpha0], self.alpha, self.beta))

    def replace_array(self, vec: np.ndarray) -> "GarchParams":
        p1 = self.alpha.size
        return GarchParams(float(vec[0]), vec[1 : 1 + p1].copy(), vec[1 + p1 :].copy())

    def names(self) -> list[str]:
        return (
            ["alpha0"]
            + [f"alpha{j + 1}" for j in range(self.alpha.size)]
            + [f"beta{j + 1}" for j in range(self.beta.size)]
        )


@dataclass(frozen=True)
class ArGarchParams:
    """AR(1)-GARCH(1,1): y_i = a*y_{i-1} + eps_i with GARCH(1,1) errors."""

    a: float
    alpha0: float
    alpha: float
    beta: float

    kind = "ar-garch"

    @property
    def q(self) -> int:
        return 1

    @property
    def r(self) -> int:
        return 3

    def validate(self, bounds: ParamBounds | None = None) -> None:
        b = bounds or ParamBounds()
        if abs(self.a) >= 1.0:
            raise ValueError("|a| must be < 1")
        _validate_garch11(self.alpha0, self.alpha, self.beta, b)

    def unconditional_variance(self) -> float:
        return self.alpha0 / (1.0 - self.alpha - self.beta)

    def to_array(self) -> np.ndarray:
        return np.array([self.a, self.alpha0, self.alpha, self.beta])

    def replace_array(self, vec: np.ndarray) -> "ArGarchParams":
        return ArGarchParams(*map(float, vec))

    def names(self) -> list[str]:
        return ["a", "alpha0", "alpha", "beta"]


@dataclass(frozen=True)
class ArmaGarchParams:
    """ARMA(1,1)-GARCH(1,1): y_i = a*y_{i-1} + b*eps_{i-1} + eps_i."""

    a: float
    b: float
    alpha0: float
    alpha: float
    beta: float

    kind = "arma-garch"

    @property
    def q(self) -> int:
        return 2

    @property
    def r(self) -> int:
        return 3

    def validate(self, bounds: ParamBounds | None = None) -> None:
        bb = bounds or ParamBounds()
        if abs(self.a) >= 1.0 or abs(self.b) >= 1.0:
            raise ValueError("|a| and |b| must be < 1")
        if self.a + self.b == 0.0:
            raise ValueError("a + b must be nonzero (ARMA(1,1) identifiability)")
        _validate_garch11(self.alpha0, self.alpha, self.beta, bb)

    def unconditional_variance(self) -> float:
        return self.alpha0 / (1.0 - self.alpha - self.beta)

    def to_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.alpha0, self.alpha, self.beta])

    def replace_array(self, vec: np.ndarray) -> "ArmaGarchParams":
        return ArmaGarchParams(*map(float, vec))

    def names(self) -> list[str]:
        return ["a", "b", "alpha0", "alpha", "beta"]


ModelParams = Union[GarchParams, ArGarchParams, ArmaGarchParams]


def _validate_garch11(alpha0, alpha, beta, b: ParamBounds) -> None:
    if not np.isfinite(alpha0) or alpha0 <= 0.0:
        raise ValueError("alpha0 must be positive")
    if alpha < 0.0 or beta < 0.0:
        raise ValueError("alpha and beta must be nonnegative")
    if alpha + beta > b.rho0 + 1e-10:
        raise ValueError(
            f"alpha + beta = {alpha + beta:.6g} exceeds the stationarity bound {b.rho0}"
        )


@dataclass
class FilteredPath:
    """Residuals, conditional variances and derivative states for one series.

    ``dmu`` is d(mu_i)/d(location params) with shape (n, q); ``dh`` stacks
    the variance gradient for location then scale parameters, shape
    (n, q + r).  The W blocks are populated by :func:`w_blocks`.
    """

    params: ModelParams
    eps: np.ndarray
    h: np.ndarray
    eta: np.ndarray
    dmu: np.ndarray | None = None
    dh: np.ndarray | None = None
    W11: np.ndarray | None = None
    W12: np.ndarray | None = None
    W22: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.eps.shape[0]

    @property
    def q(self) -> int:
        return self.params.q

    @property
    def r(self) -> int:
        return self.params.r


# ---------------------------------------------------------------------------
# innovation laws


def _mixture_normal(rng: np.random.Generator, n: int) -> np.ndarray:
    shift = np.where(rng.random(n) < 0.5, -3.0, 3.0)
    return (rng.standard_normal(n) + shift) / np.sqrt(10.0)


INNOVATION_LAWS: dict[str, Callable[[np.random.Generator, int], np.ndarray]] = {
    "normal": lambda rng, n: rng.standard_normal(n),
    "a1": lambda rng, n: np.sqrt(3.0 / 5.0) * rng.standard_t(5, size=n),
    "a2": lambda rng, n: np.sqrt(1.0 / 2.0) * rng.standard_t(4, size=n),
    "a3": lambda rng, n: np.sqrt(1.0 / 3.0) * rng.standard_t(3, size=n),
    "a4": lambda rng, n: rng.laplace(0.0, 1.0, size=n),
    "a5": _mixture_normal,
    "dexp": lambda rng, n: rng.laplace(0.0, 1.0, size=n),
}


def innovation_sampler(law, rescale: bool = False):
    """Resolve an innovation law to a ``(rng, n) -> draws`` callable.

    ``law`` may be a key from :data:`INNOVATION_LAWS`, a null family, or a
    callable.  ``rescale=True`` standardizes the double-exponential laws to
    unit variance (they have variance 2 otherwise).
    """
    if isinstance(law, NullFamily):
        return law.sample
    if callable(law):
        return law
    try:
        base = INNOVATION_LAWS[law]
    except KeyError:
        raise ValueError(
            f"unknown innovation law {law!r}; expected one of {sorted(INNOVATION_LAWS)}"
        ) from None
    if rescale and law in ("a4", "dexp"):
        return lambda rng, n: base(rng, n) / np.sqrt(2.0)
    return base


# ---------------------------------------------------------------------------
# simulation and filtering


def simulate(
    params: ModelParams,
    n: int,
    *,
    innovations="normal",
    burn_in: int = 500,
    rng: np.random.Generator | None = None,
    rescale: bool = False,
    return_internals: bool = False,
):
    """Simulate a stationary path of length ``n``.

    The recursion is seeded at the unconditional variance and the first
    ``burn_in`` draws are discarded.  With ``return_internals=True`` the
    conditional variances and the injected innovations of the retained
    window are returned alongside the series.
    """
    params.validate()
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    if rng is None:
        rng = np.random.default_rng()
    sampler = innovation_sampler(innovations, rescale=rescale)
    eta = np.asarray(sampler(rng, n + burn_in), dtype=float)
    h_init = params.unconditional_variance()
    if isinstance(params, GarchParams):
        y, h = rec.garch_simulate(eta, params.alpha0, params.alpha, params.beta, h_init)
    else:
        a, b = _arma_coeffs(params)
        y, _, h = rec.armagarch_simulate(
            eta, a, b, params.alpha0, params.alpha, params.beta, h_init
        )
    if return_internals:
        return y[burn_in:], h[burn_in:], eta[burn_in:]
    return y[burn_in:]


def _arma_coeffs(params: ModelParams) -> tuple[float, float]:
    if isinstance(params, ArGarchParams):
        return params.a, 0.0
    return params.a, params.b


def _check_series(series: np.ndarray, params: ModelParams) -> np.ndarray:
    series = np.ascontiguousarray(series, dtype=float)
    if series.ndim != 1:
        raise InputError("series must be one-dimensional")
    if not np.all(np.isfinite(series)):
        raise InputError("series contains non-finite values")
    if isinstance(params, GarchParams):
        min_len = max(params.alpha.size, params.beta.size) + 1
    else:
        min_len = 2
    if series.size < min_len:
        raise InputError(f"series too short: need at least {min_len} observations")
    return series


def filter_series(
    series, params: ModelParams, *, presample_h: float | None = None
) -> FilteredPath:
    """Run the residual and conditional-variance recursions over a series."""
    params.validate()
    y = _check_series(series, params)
    h_init = params.unconditional_variance() if presample_h is None else presample_h
    if isinstance(params, GarchParams):
        h = rec.garch_filter(y, params.alpha0, params.alpha, params.beta, h_init)
        eps = y
    else:
        a, b = _arma_coeffs(params)
        eps, h = rec.armagarch_filter(
            y, a, b, params.alpha0, params.alpha, params.beta, h_init
        )
    return FilteredPath(params=params, eps=eps, h=h, eta=eps / np.sqrt(h))


def gradients(
    series, params: ModelParams, *, presample_h: float | None = None
) -> FilteredPath:
    """Filter a series and evaluate all first-derivative recursions."""
    path = filter_series(series, params, presample_h=presample_h)
    y = np.ascontiguousarray(series, dtype=float)
    h_init = params.unconditional_variance() if presample_h is None else presample_h
    if isinstance(params, GarchParams):
        path.dmu = np.zeros((path.n, 0))
        path.dh = rec.garch_gradients(
            y, path.h, params.alpha0, params.alpha, params.beta, h_init
        )
    else:
        a, b = _arma_coeffs(params)
        deps, dh = rec.armagarch_gradients(
            y, path.eps, path.h, a, b, params.alpha0, params.alpha, params.beta, h_init
        )
        if isinstance(params, ArGarchParams):
            # drop the MA column: the location block is (a,) only
            deps = deps[:, :1]
            dh = dh[:, [0, 2, 3, 4]]
        path.dmu = -deps
        path.dh = dh
    w_blocks(path)
    return path


def w_blocks(path: FilteredPath):
    """Populate and return the weight blocks (W11, W12, W22)."""
    if path.dh is None:
        raise ValueError("gradients must be populated before building W blocks")
    if path.W22 is None:
        q = path.q
        sqrt_h = np.sqrt(path.h)[:, None]
        hcol = path.h[:, None]
        path.W11 = path.dmu / sqrt_h
        path.W12 = path.dh[:, :q] / hcol
        path.W22 = path.dh[:, q:] / hcol
    return path.W11, path.W12, path.W22


# ---------------------------------------------------------------------------
# config helpers


def params_from_dict(kind: str, values: dict) -> ModelParams:
    """Build a parameter object from flat config values."""
    try:
        if kind == "garch":
            alpha = values.get("alpha", 0.0)
            beta = values.get("beta", 0.0)
            return GarchParams(float(values["alpha0"]), np.atleast_1d(alpha), np.atleast_1d(beta))
        if kind == "ar-garch":
            return ArGarchParams(
                float(values["a"]),
                float(values["alpha0"]),
                float(values["alpha"]),
                float(values["beta"]),
            )
        if kind == "arma-garch":
            return ArmaGarchParams(
                float(values["a"]),
                float(values.get("b", 0.0)),
                float(values["alpha0"]),
                float(values["alpha"]),
                float(values["beta"]),
            )
    except KeyError as exc:
        raise InputError(f"missing parameter {exc} for model {kind!r}") from None
    raise InputError(f"unknown model kind {kind!r}; expected garch, ar-garch or arma-garch")
