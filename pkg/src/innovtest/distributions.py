"""Null distributions for the innovation goodness-of-fit test.

Each family bundles the density, cdf, quantile, the location score
``psi0 = f'/f`` and scale score ``phi0(x) = (1 + x*psi0(x))/2``, and the
Fisher-information constants ``b1 = E[psi0(eta)^2]`` and
``b2 = E[phi0(eta)^2]``.  Both implemented families are symmetric around
zero, so the location and scale scores are orthogonal under the null.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate
from scipy.special import ndtr, ndtri

from .errors import NumericError

__all__ = [
    "NullFamily",
    "StandardNormal",
    "DoubleExponential",
    "FAMILIES",
    "family_from_key",
]

_QUAD_TOL = 1e-10


class NullFamily:
    """Abstract null distribution.

    Subclasses provide ``pdf``, ``cdf``, ``quantile``, ``psi0`` and
    ``sample``; ``phi0`` and the Fisher constants are derived here.
    Instances are immutable and safe to share across workers.
    """

    key: str = ""
    #: sup-norm evaluation range used when tabulating the limit process
    grid_range: tuple[float, float] = (0.0, 0.0)

    def __init__(self) -> None:
        self._constants: tuple[float, float] | None = None

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, p):
        raise NotImplementedError

    def psi0(self, x):
        """Location score f'(x)/f(x)."""
        raise NotImplementedError

    def phi0(self, x):
        """Scale score (1 + x*psi0(x))/2."""
        x = np.asarray(x, dtype=float)
        return (1.0 + x * self.psi0(x)) / 2.0

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def fisher_constants(self) -> tuple[float, float]:
        """(b1, b2) via adaptive quadrature over the whole line, cached."""
        if self._constants is None:
            b1, e1 = integrate.quad(
                lambda x: self.psi0(x) ** 2 * self.pdf(x),
                -np.inf, np.inf, epsabs=_QUAD_TOL,
            )
            b2, e2 = integrate.quad(
                lambda x: self.phi0(x) ** 2 * self.pdf(x),
                -np.inf, np.inf, epsabs=_QUAD_TOL,
            )
            if not (np.isfinite(b1) and np.isfinite(b2)) or max(e1, e2) > 1e-7:
                raise NumericError(
                    f"Fisher-constant quadrature did not converge for {self.key!r}"
                )
            self._constants = (b1, b2)
        return self._constants

    @property
    def b1(self) -> float:
        return self.fisher_constants()[0]

    @property
    def b2(self) -> float:
        return self.fisher_constants()[1]

    def _check_prob(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise ValueError("quantile requires probabilities strictly inside (0, 1)")
        return p

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class StandardNormal(NullFamily):
    """N(0, 1) null: psi0(x) = -x, phi0(x) = (1 - x^2)/2, (b1, b2) = (1, 1/2)."""

    key = "normal"
    grid_range = (-4.0, 4.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)

    def cdf(self, x):
        return ndtr(np.asarray(x, dtype=float))

    def quantile(self, p):
        return ndtri(self._check_prob(p))

    def psi0(self, x):
        return -np.asarray(x, dtype=float)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.standard_normal(n)


class DoubleExponential(NullFamily):
    """Unit Laplace null with density exp(-|x|)/2 (variance 2, not rescaled).

    psi0(x) = -sign(x) with the kink value psi0(0) = 0, phi0(x) = (1 - |x|)/2,
    (b1, b2) = (1, 1/4).
    """

    key = "dexp"
    grid_range = (-8.0, 8.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.exp(-np.abs(x))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0.0, 0.5 * np.exp(x), 1.0 - 0.5 * np.exp(-x))

    def quantile(self, p):
        p = self._check_prob(p)
        return np.where(p < 0.5, np.log(2.0 * p), -np.log(2.0 * (1.0 - p)))

    def psi0(self, x):
        return -np.sign(np.asarray(x, dtype=float))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.laplace(0.0, 1.0, size=n)


FAMILIES: dict[str, type[NullFamily]] = {
    StandardNormal.key: StandardNormal,
    DoubleExponential.key: DoubleExponential,
}


def family_from_key(key) -> NullFamily:
    """Resolve ``"normal"`` or ``"dexp"`` (or pass a family through)."""
    if isinstance(key, NullFamily):
        return key
    try:
        return FAMILIES[key]()
    except KeyError:
        raise ValueError(
            f"unknown null family {key!r}; expected one of {sorted(FAMILIES)}"
        ) from None
