"""Limit distribution of the test statistic and its critical values.

The statistic converges to ``K = sup_x ||Z(x)||^2`` where Z is an r-vector
of independent mean-zero Gaussian processes with covariance

    rho(x, y) = F0(min(x, y)) - F0(x) F0(y) - x y f0(x) f0(y) / (4 b2).

K depends only on the fitted null family, so its upper percentage points
are tabulated once per family by simulating Z on a fixed grid from a
one-time Cholesky factorization of the grid covariance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .distributions import family_from_key
from .errors import InputError, NumericError

__all__ = [
    "LEVELS",
    "REFERENCE_UPPER_POINTS",
    "rho",
    "rho_matrix",
    "simulate_sup_norms",
    "simulate_K_distribution",
    "percentile",
    "CritTable",
    "simulate_crit_table",
    "write_tables_csv",
    "read_tables_csv",
    "default_tables",
    "critical_value",
    "k_sample",
    "mc_pvalue",
]

LEVELS = (0.01, 0.03, 0.05, 0.10, 0.15, 0.20)

DEFAULT_GRID_POINTS = 2000
DEFAULT_REPS = 10_000
#: default tabulation seeds, embedded in the shipped table artifacts
DEFAULT_SEEDS = {"normal": 20060401, "dexp": 88}

# Independently tabulated upper percentage points of K, used as regression
# fixtures when validating regenerated tables.  Rows follow LEVELS, columns
# r = 1..10.  The (r=10, alpha=0.20) double-exponential entry breaks
# monotonicity in r and is a suspected misprint in the source tabulation.
REFERENCE_UPPER_POINTS = {
    "normal": np.array([
        [2.465, 3.150, 3.737, 4.361, 4.769, 5.173, 5.642, 6.065, 6.508, 6.938],
        [1.890, 2.595, 3.100, 3.640, 4.094, 4.468, 4.946, 5.336, 5.677, 6.083],
        [1.650, 2.289, 2.804, 3.267, 3.751, 4.118, 4.553, 4.922, 5.298, 5.679],
        [1.317, 1.891, 2.382, 2.822, 3.262, 3.628, 4.033, 4.384, 4.716, 5.106],
        [1.113, 1.666, 2.126, 2.552, 2.980, 3.325, 3.685, 4.022, 4.367, 4.720],
        [0.988, 1.498, 1.931, 2.339, 2.750, 3.089, 3.436, 3.768, 4.101, 4.445],
    ]),
    "dexp": np.array([
        [2.402, 3.149, 3.702, 4.298, 4.809, 5.173, 5.683, 5.937, 6.360, 6.845],
        [1.876, 2.523, 3.073, 3.569, 4.015, 4.399, 4.872, 5.260, 5.611, 6.015],
        [1.630, 2.250, 2.781, 3.218, 3.680, 4.067, 4.500, 4.865, 5.247, 5.607],
        [1.299, 1.873, 2.344, 2.788, 3.222, 3.605, 3.969, 4.335, 4.680, 5.051],
        [1.098, 1.640, 2.092, 2.533, 2.933, 3.279, 3.639, 3.991, 4.317, 4.691],
        [0.961, 1.464, 1.902, 2.314, 2.703, 3.046, 3.399, 3.729, 4.065, 4.046],
    ]),
}

SUSPECT_REFERENCE_ENTRIES = {("dexp", 10, 0.20)}


def reference_upper_point(family_key: str, r: int, alpha: float) -> float:
    """Fixture lookup; raises for untabulated (r, alpha)."""
    values = REFERENCE_UPPER_POINTS[family_key]
    i = LEVELS.index(round(alpha, 2))
    if not 1 <= r <= values.shape[1]:
        raise ValueError(f"r={r} outside the tabulated range 1..{values.shape[1]}")
    return float(values[i, r - 1])


def rho(x, y, family):
    """Covariance of the limit process at (x, y)."""
    family = family_from_key(family)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _, b2 = family.fisher_constants()
    return (
        family.cdf(np.minimum(x, y))
        - family.cdf(x) * family.cdf(y)
        - x * y * family.pdf(x) * family.pdf(y) / (4.0 * b2)
    )


def rho_matrix(xs, family) -> np.ndarray:
    family = family_from_key(family)
    xs = np.asarray(xs, dtype=float)
    _, b2 = family.fisher_constants()
    F = np.atleast_1d(family.cdf(xs))
    xf = xs * np.atleast_1d(family.pdf(xs))
    return np.minimum.outer(F, F) - np.outer(F, F) - np.outer(xf, xf) / (4.0 * b2)


def _factor_covariance(C: np.ndarray) -> np.ndarray:
    eye = np.eye(C.shape[0])
    for jitter in (0.0, 1e-12, 1e-10, 1e-8):
        try:
            return np.linalg.cholesky(C + jitter * eye if jitter else C)
        except np.linalg.LinAlgError:
            continue
    raise NumericError("grid covariance factorization failed even with jitter 1e-8")


def simulate_sup_norms(
    family,
    r_max: int,
    *,
    grid_points: int = DEFAULT_GRID_POINTS,
    reps: int = DEFAULT_REPS,
    rng: np.random.Generator | None = None,
    grid_range: tuple[float, float] | None = None,
) -> np.ndarray:
    """Monte Carlo draws of ``sup_x ||Z(x)||^2`` for every r = 1..r_max.

    Coordinates of Z are independent, so one set of r_max paths per
    replication yields the statistic for all nested dimensions at once.
    Returns an array of shape (reps, r_max).
    """
    family = family_from_key(family)
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    if reps < 1:
        raise ValueError("reps must be at least 1")
    lo, hi = grid_range if grid_range is not None else family.grid_range
    xs = np.linspace(lo, hi, grid_points)
    L = _factor_covariance(rho_matrix(xs, family))
    if rng is None:
        rng = np.random.default_rng()

    out = np.empty((reps, r_max))
    chunk = max(1, 2048 // r_max)
    for start in range(0, reps, chunk):
        size = min(chunk, reps - start)
        Z = L @ rng.standard_normal((grid_points, size * r_max))
        Z = Z.reshape(grid_points, size, r_max)
        out[start : start + size] = np.cumsum(Z * Z, axis=2).max(axis=0)
    return out


def simulate_K_distribution(
    family,
    r: int,
    *,
    grid_points: int = DEFAULT_GRID_POINTS,
    reps: int = DEFAULT_REPS,
    rng: np.random.Generator | None = None,
    grid_range: tuple[float, float] | None = None,
) -> np.ndarray:
    """Sorted Monte Carlo sample of the limit statistic for dimension r."""
    sups = simulate_sup_norms(
        family, r, grid_points=grid_points, reps=reps, rng=rng, grid_range=grid_range
    )
    return np.sort(sups[:, r - 1])


def percentile(samples, alpha: float) -> float:
    """Upper-alpha point: element ceil((1 - alpha) * len) of the sorted sample."""
    samples = np.asarray(samples)
    if samples.size == 0:
        raise ValueError("empty sample")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    idx = math.ceil((1.0 - alpha) * samples.size) - 1
    return float(samples[idx])


@dataclass
class CritTable:
    """Upper percentage points indexed by (r, alpha) for one null family."""

    family: str
    r_values: tuple[int, ...]
    levels: tuple[float, ...]
    values: np.ndarray  # shape (len(r_values), len(levels))
    grid_points: int
    range_lo: float
    range_hi: float
    reps: int
    seed: int

    def value(self, r: int, alpha: float) -> float:
        try:
            i = self.r_values.index(r)
            j = self.levels.index(round(alpha, 4))
        except ValueError:
            raise ValueError(
                f"(r={r}, alpha={alpha}) not tabulated for family {self.family!r}"
            ) from None
        return float(self.values[i, j])

    def has(self, r: int, alpha: float) -> bool:
        return r in self.r_values and round(alpha, 4) in self.levels


def simulate_crit_table(
    family,
    r_max: int = 10,
    *,
    levels: tuple[float, ...] = LEVELS,
    grid_points: int = DEFAULT_GRID_POINTS,
    reps: int = DEFAULT_REPS,
    seed: int | None = None,
    grid_range: tuple[float, float] | None = None,
) -> CritTable:
    """Tabulate upper percentage points for r = 1..r_max at the given levels.

    ``seed=None`` selects the family's default tabulation seed, so the
    shipped artifacts are regenerated bit-for-bit.
    """
    family = family_from_key(family)
    lo, hi = grid_range if grid_range is not None else family.grid_range
    if seed is None:
        seed = DEFAULT_SEEDS.get(family.key, 0)
    family_tag = sum(ord(c) for c in family.key)
    rng = np.random.default_rng(np.random.SeedSequence((seed, family_tag)))
    sups = simulate_sup_norms(
        family, r_max, grid_points=grid_points, reps=reps, rng=rng, grid_range=(lo, hi)
    )
    values = np.empty((r_max, len(levels)))
    for i in range(r_max):
        column = np.sort(sups[:, i])
        values[i] = [percentile(column, a) for a in levels]
    return CritTable(
        family=family.key,
        r_values=tuple(range(1, r_max + 1)),
        levels=tuple(levels),
        values=values,
        grid_points=grid_points,
        range_lo=lo,
        range_hi=hi,
        reps=reps,
        seed=seed,
    )


def write_tables_csv(tables, path) -> None:
    """Write tables in the cache format: one row per (family, r, alpha)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["family", "r", "alpha", "value", "grid_points", "range_lo", "range_hi", "reps", "seed"]
        )
        for t in tables:
            for i, r in enumerate(t.r_values):
                for j, a in enumerate(t.levels):
                    writer.writerow(
                        [t.family, r, f"{a:g}", f"{t.values[i, j]:.6f}",
                         t.grid_points, t.range_lo, t.range_hi, t.reps, t.seed]
                    )


def read_tables_csv(path) -> dict[str, CritTable]:
    """Read the cache format back into one CritTable per family."""
    rows: dict[str, list] = {}
    meta: dict[str, tuple] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"family", "r", "alpha", "value"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise InputError(f"{path}: not a critical-value table (missing columns)")
        for line, row in enumerate(reader, start=2):
            try:
                fam = row["family"]
                rows.setdefault(fam, []).append(
                    (int(row["r"]), float(row["alpha"]), float(row["value"]))
                )
                meta[fam] = (
                    int(row["grid_points"]), float(row["range_lo"]),
                    float(row["range_hi"]), int(row["reps"]), int(row["seed"]),
                )
            except (KeyError, ValueError) as exc:
                raise InputError(f"{path}:{line}: bad table row ({exc})") from None
    tables = {}
    for fam, entries in rows.items():
        r_values = tuple(sorted({r for r, _, _ in entries}))
        levels = tuple(sorted({a for _, a, _ in entries}))
        values = np.full((len(r_values), len(levels)), np.nan)
        for r, a, v in entries:
            values[r_values.index(r), levels.index(a)] = v
        gp, lo, hi, reps, seed = meta[fam]
        tables[fam] = CritTable(fam, r_values, levels, values, gp, lo, hi, reps, seed)
    return tables


_DEFAULT_TABLES: dict[str, CritTable] | None = None
_K_SAMPLES: dict[str, np.ndarray] | None = None


def default_tables() -> dict[str, CritTable]:
    """Shipped critical-value tables (regenerated artifacts, packaged)."""
    global _DEFAULT_TABLES
    if _DEFAULT_TABLES is None:
        ref = resources.files("innovtest").joinpath("tables/critical_values.csv")
        with resources.as_file(ref) as path:
            _DEFAULT_TABLES = read_tables_csv(path)
    return _DEFAULT_TABLES


def k_sample(family_key: str, r: int) -> np.ndarray:
    """Shipped sorted Monte Carlo sample of K for p-value interpolation."""
    global _K_SAMPLES
    if _K_SAMPLES is None:
        ref = resources.files("innovtest").joinpath("tables/k_samples.npz")
        with resources.as_file(ref) as path:
            with np.load(path) as data:
                _K_SAMPLES = {k: data[k] for k in data.files}
    key = f"{family_key}_r{r}"
    if key not in _K_SAMPLES:
        raise ValueError(f"no cached K sample for family {family_key!r}, r={r}")
    return _K_SAMPLES[key]


def mc_pvalue(T: float, family, r: int) -> float:
    """Monte Carlo p-value P(K > T) from the cached sample."""
    family = family_from_key(family)
    sample = k_sample(family.key, r)
    return float(1.0 - np.searchsorted(sample, T, side="right") / sample.size)


def critical_value(
    family,
    r: int,
    alpha: float,
    *,
    table: CritTable | None = None,
    lookup_only: bool = False,
    grid_points: int = DEFAULT_GRID_POINTS,
    reps: int = DEFAULT_REPS,
    seed: int | None = None,
) -> float:
    """Upper-alpha critical value: cached table lookup, else fresh simulation."""
    family = family_from_key(family)
    if table is None:
        try:
            table = default_tables().get(family.key)
        except FileNotFoundError:
            table = None
    if table is not None and table.has(r, alpha):
        return table.value(r, alpha)
    if lookup_only:
        raise ValueError(
            f"(r={r}, alpha={alpha}) not in the cached table and lookup_only=True"
        )
    if seed is None:
        seed = DEFAULT_SEEDS.get(family.key, 0)
    rng = np.random.default_rng(np.random.SeedSequence((seed, r)))
    sample = simulate_K_distribution(
        family, r, grid_points=grid_points, reps=reps, rng=rng
    )
    return percentile(sample, alpha)
