"""Experiment orchestration: size/power studies, single-series reports,
critical-value tabulation and the local-power probe.

Replications are independent and reproducible: replication ``i`` of a run
with seed ``s`` always uses the random stream derived from ``(s, i)``, so
results are identical regardless of how many workers execute them.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .distributions import family_from_key
from .errors import EstimationError, InnovTestError, InputError
from .estimation import fit_model, fourth_moment_ok, gaussian_qmle, one_step_update
from .gof import kn_statistic
from .limitdist import (
    LEVELS,
    CritTable,
    critical_value,
    mc_pvalue,
    simulate_crit_table,
    write_tables_csv,
)
from .models import (
    gradients,
    innovation_sampler,
    params_from_dict,
    simulate,
)

__all__ = [
    "ExperimentConfig",
    "SizePowerResult",
    "TestReport",
    "LocalPowerResult",
    "MixtureLaw",
    "read_series",
    "write_series",
    "qm_diagnostic",
    "run_size_power",
    "analyze",
    "tabulate",
    "local_power_probe",
]


# ---------------------------------------------------------------------------
# series I/O


def read_series(path) -> np.ndarray:
    """Read a single-column CSV (one observation per line, header optional)."""
    values: list[float] = []
    try:
        fh = open(path)
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise InputError(f"{path}:{lineno}: not a number: {line!r}") from None
    if not values:
        raise InputError(f"{path}: no observations found")
    return np.asarray(values, dtype=float)


def write_series(series, path) -> None:
    with open(path, "w") as fh:
        for v in np.asarray(series, dtype=float):
            fh.write(f"{float(v)!r}\n")


# ---------------------------------------------------------------------------
# residual diagnostics


def qm_diagnostic(eta, lags: int) -> float:
    """Ljung-Box statistic on the squared standardized residuals.

    A descriptive adequacy diagnostic for the fitted variance dynamics,
    approximately chi-square(lags) for an adequate model; it is reported,
    never used as a gate.
    """
    eta = np.asarray(eta, dtype=float)
    n = eta.shape[0]
    if lags == 0:
        return 0.0
    if lags < 0 or lags >= n / 4:
        raise ValueError("lag count must satisfy 0 <= lags < n/4")
    x = eta * eta
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom <= 1e-14 * n * (1.0 + float(x.mean()) ** 2):
        warnings.warn("squared residuals are constant; QM diagnostic set to 0")
        return 0.0
    stat = 0.0
    for k in range(1, lags + 1):
        r_k = float(xc[k:] @ xc[:-k]) / denom
        stat += r_k * r_k / (n - k)
    return float(n * (n + 2) * stat)


# ---------------------------------------------------------------------------
# configs and results


@dataclass(frozen=True)
class MixtureLaw:
    """Innovation law drawing from an alternative with fixed probability."""

    family_key: str
    alt_law: str
    weight: float
    rescale: bool = False

    def __call__(self, rng: np.random.Generator, n: int) -> np.ndarray:
        fam = family_from_key(self.family_key)
        alt = innovation_sampler(self.alt_law, rescale=self.rescale)
        out = fam.sample(rng, n)
        pick = rng.random(n) < self.weight
        draws = alt(rng, n)
        out[pick] = draws[pick]
        return out


@dataclass
class ExperimentConfig:
    model: str = "ar-garch"
    params: dict = field(
        default_factory=lambda: {"a": 0.5, "alpha0": 0.025, "alpha": 0.25, "beta": 0.5}
    )
    n: int = 400
    reps: int = 500
    innovation_law: object = "normal"
    levels: tuple = (0.01, 0.05, 0.10)
    null_family: str = "normal"
    seed: int = 0
    workers: int = 1
    burn_in: int = 500
    rescale_alternatives: bool = False

    def validate(self) -> None:
        if self.reps < 1:
            raise InputError("reps must be at least 1")
        if self.n < 100:
            raise InputError("n must be at least 100")
        tabulated = {round(a, 4) for a in LEVELS}
        if not {round(a, 4) for a in self.levels} <= tabulated:
            raise InputError(f"levels must be a subset of {LEVELS}")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot open {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise InputError(f"{path}: config must be a JSON object")
        kwargs = {}
        for key in (
            "model", "n", "reps", "innovation_law", "null_family",
            "seed", "workers", "burn_in", "rescale_alternatives",
        ):
            if key in data:
                kwargs[key] = data.pop(key)
        if "levels" in data:
            lv = data.pop("levels")
            if isinstance(lv, str):
                lv = [float(x) for x in lv.split(",")]
            kwargs["levels"] = tuple(float(x) for x in lv)
        kwargs["params"] = {k: float(v) for k, v in data.items()}
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def to_json_dict(self) -> dict:
        out = {
            "model": self.model,
            "n": self.n,
            "reps": self.reps,
            "innovation_law": str(self.innovation_law),
            "levels": list(self.levels),
            "null_family": self.null_family,
            "seed": self.seed,
            "workers": self.workers,
            "burn_in": self.burn_in,
            "rescale_alternatives": self.rescale_alternatives,
        }
        out.update(self.params)
        return out


@dataclass
class SizePowerResult:
    config: ExperimentConfig
    statistics: np.ndarray
    converged: np.ndarray
    critical_values: dict[float, float]
    n_failed: int

    @property
    def reps_effective(self) -> int:
        return int(np.isfinite(self.statistics).sum())

    @property
    def n_nonconverged(self) -> int:
        return int((~self.converged).sum())

    def rate(self, alpha: float) -> float:
        ok = np.isfinite(self.statistics)
        return float(np.mean(self.statistics[ok] > self.critical_values[alpha]))

    def rates(self) -> dict[float, float]:
        return {a: self.rate(a) for a in self.config.levels}

    def binomial_se(self, alpha: float) -> float:
        p = self.rate(alpha)
        m = self.reps_effective
        return float(np.sqrt(p * (1.0 - p) / m)) if m else float("nan")

    def to_json_dict(self) -> dict:
        return {
            "config": self.config.to_json_dict(),
            "critical_values": {f"{a:g}": v for a, v in self.critical_values.items()},
            "rates": {f"{a:g}": self.rate(a) for a in self.config.levels},
            "binomial_se": {f"{a:g}": self.binomial_se(a) for a in self.config.levels},
            "reps_effective": self.reps_effective,
            "n_failed": self.n_failed,
            "n_nonconverged": self.n_nonconverged,
        }

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("model,law,null_family,n,reps,level,critical_value,rate,se,failed\n")
            c = self.config
            for a in c.levels:
                fh.write(
                    f"{c.model},{c.innovation_law},{c.null_family},{c.n},"
                    f"{self.reps_effective},{a:g},{self.critical_values[a]:.6f},"
                    f"{self.rate(a):.6f},{self.binomial_se(a):.6f},{self.n_failed}\n"
                )


@dataclass
class TestReport:
    model: str
    null_family: str
    n: int
    param_names: list[str]
    theta_hat: np.ndarray
    se: np.ndarray
    loglik: float
    qm: dict[int, float]
    T: float
    argmax_x: float
    critical_values: dict[float, float]
    decisions: dict[float, str]
    pvalue_mc: float | None
    fourth_moment_ok: bool | None
    converged: bool

    def to_json_dict(self) -> dict:
        return {
            "model": self.model,
            "null_family": self.null_family,
            "n": self.n,
            "parameters": {
                name: {"estimate": float(est), "se": float(se)}
                for name, est, se in zip(self.param_names, self.theta_hat, self.se)
            },
            "loglik": self.loglik,
            "qm": {str(m): v for m, v in self.qm.items()},
            "statistic": self.T,
            "argmax_x": self.argmax_x,
            "critical_values": {f"{a:g}": v for a, v in self.critical_values.items()},
            "decisions": {f"{a:g}": d for a, d in self.decisions.items()},
            "pvalue_mc": self.pvalue_mc,
            "fourth_moment_ok": self.fourth_moment_ok,
            "converged": self.converged,
        }

    def to_text(self) -> str:
        lines = [
            f"Model: {self.model}   null: {self.null_family}   n = {self.n}",
            "",
            "  parameter   estimate      std.err",
        ]
        for name, est, se in zip(self.param_names, self.theta_hat, self.se):
            lines.append(f"  {name:<10}  {est:>10.4f}   ({se:.4f})")
        lines.append("")
        lines.append(f"  log-likelihood: {self.loglik:.2f}")
        for m, v in self.qm.items():
            lines.append(f"  QM({m}): {v:.2f}")
        if self.fourth_moment_ok is False:
            lines.append("  WARNING: fourth-moment condition 3a^2+2ab+b^2 < 1 violated")
        lines.append("")
        lines.append(f"  statistic K = {self.T:.4f}   (sup attained near x = {self.argmax_x:.3f})")
        if self.pvalue_mc is not None:
            lines.append(f"  Monte Carlo p-value: {self.pvalue_mc:.4f}")
        for a in sorted(self.critical_values):
            lines.append(
                f"  level {a:>5g}: critical value {self.critical_values[a]:.3f}"
                f" -> {self.decisions[a]}"
            )
        if not self.converged:
            lines.append("  NOTE: quasi-MLE optimizer did not report convergence")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# size / power experiments


def _one_replication(args):
    config, rep = args
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, rep)))
    params = params_from_dict(config.model, config.params)
    try:
        y = simulate(
            params,
            config.n,
            innovations=config.innovation_law,
            burn_in=config.burn_in,
            rng=rng,
            rescale=config.rescale_alternatives,
        )
        fit = gaussian_qmle(y, params)
        theta_hat = one_step_update(y, fit.theta_tilde, config.null_family)
        path = gradients(y, theta_hat)
        T, _ = kn_statistic(path, config.null_family)
        return rep, T, bool(fit.converged)
    except (InnovTestError, ValueError, np.linalg.LinAlgError):
        return rep, float("nan"), False


def run_size_power(config: ExperimentConfig) -> SizePowerResult:
    """Rejection frequencies of the test across seeded replications.

    Replications that fail to fit are excluded from the rates when they are
    fewer than 2% of the total; otherwise the run errors out.
    """
    config.validate()
    params = params_from_dict(config.model, config.params)
    cvs = {a: critical_value(config.null_family, params.r, a) for a in config.levels}

    tasks = [(config, rep) for rep in range(config.reps)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            raw = list(pool.map(_one_replication, tasks, chunksize=max(1, config.reps // (4 * config.workers))))
    else:
        raw = [_one_replication(t) for t in tasks]
    raw.sort(key=lambda item: item[0])
    stats = np.array([t for _, t, _ in raw])
    conv = np.array([ok for _, _, ok in raw], dtype=bool)
    failed = int((~np.isfinite(stats)).sum())
    if failed > 0 and failed >= 0.02 * config.reps:
        raise EstimationError(
            f"{failed}/{config.reps} replications failed to fit; results unreliable"
        )
    return SizePowerResult(
        config=config,
        statistics=stats,
        converged=conv,
        critical_values=cvs,
        n_failed=failed,
    )


# ---------------------------------------------------------------------------
# single-series analysis


def analyze(
    series,
    model: str = "ar-garch",
    null_family: str = "normal",
    levels: tuple = (0.01, 0.05, 0.10),
    *,
    p1: int = 1,
    p2: int = 1,
    table: CritTable | None = None,
) -> TestReport:
    """Full pipeline on one series: fit, test statistic, decisions."""
    if isinstance(series, (str, bytes)) or hasattr(series, "__fspath__"):
        series = read_series(series)
    y = np.asarray(series, dtype=float)
    finite = np.isfinite(y)
    if finite.size < 100 or not finite.all():
        raise InputError(
            f"need at least 100 finite observations, got {int(finite.sum())}"
            + ("" if finite.all() else " (series contains non-finite values)")
        )
    template = _template_params(model, p1, p2)
    family = family_from_key(null_family)
    fit = fit_model(y, template, family)
    path = gradients(y, fit.theta_hat)
    T, argmax_x = kn_statistic(path, family)
    qm = {m: qm_diagnostic(path.eta, m) for m in (6, 12)}
    cvs = {a: critical_value(family, template.r, a, table=table) for a in levels}
    decisions = {a: ("reject" if T > cvs[a] else "accept") for a in levels}
    try:
        pvalue = mc_pvalue(T, family, template.r)
    except (ValueError, FileNotFoundError):
        pvalue = None
    return TestReport(
        model=model,
        null_family=family.key,
        n=y.size,
        param_names=fit.theta_hat.names(),
        theta_hat=fit.theta_hat.to_array(),
        se=fit.se,
        loglik=fit.loglik,
        qm=qm,
        T=T,
        argmax_x=argmax_x,
        critical_values=cvs,
        decisions=decisions,
        pvalue_mc=pvalue,
        fourth_moment_ok=fourth_moment_ok(fit.theta_hat),
        converged=fit.converged,
    )


def _template_params(model: str, p1: int, p2: int):
    if model == "garch":
        return params_from_dict(
            "garch",
            {"alpha0": 0.1, "alpha": [0.1 / p1] * p1, "beta": [0.7 / p2] * p2},
        )
    if model == "ar-garch":
        return params_from_dict("ar-garch", {"a": 0.0, "alpha0": 0.1, "alpha": 0.1, "beta": 0.7})
    if model == "arma-garch":
        return params_from_dict(
            "arma-garch", {"a": 0.1, "b": 0.0, "alpha0": 0.1, "alpha": 0.1, "beta": 0.7}
        )
    raise InputError(f"unknown model kind {model!r}")


# ---------------------------------------------------------------------------
# tabulation and local power


def tabulate(
    family,
    r_max: int = 10,
    *,
    reps: int = 10_000,
    grid_points: int = 2000,
    seed: int | None = None,
    out=None,
) -> CritTable:
    """Simulate a critical-value table and optionally write the CSV cache."""
    if reps < 1000:
        warnings.warn(f"critical-value table from only {reps} replications is low-precision")
    t = simulate_crit_table(family, r_max, reps=reps, grid_points=grid_points, seed=seed)
    if out is not None:
        write_tables_csv([t], out)
    return t


@dataclass
class LocalPowerResult:
    delta: float
    alt_law: str
    results: dict[int, SizePowerResult]

    def rate(self, n: int, alpha: float) -> float:
        return self.results[n].rate(alpha)

    def nontrivial(self, alpha: float) -> bool:
        """Rates strictly between the level and one at every sample size."""
        return all(alpha < r.rate(alpha) < 1.0 for r in self.results.values())

    def to_json_dict(self) -> dict:
        return {
            "delta": self.delta,
            "alt_law": self.alt_law,
            "by_n": {str(n): r.to_json_dict() for n, r in self.results.items()},
        }


def local_power_probe(
    config: ExperimentConfig,
    delta: float,
    alt_law: str,
    sizes: tuple[int, ...] = (400, 1600),
) -> LocalPowerResult:
    """Rejection rates under innovation laws drifting to the null at rate
    ``delta / sqrt(n)`` (mixture weight on the fixed alternative)."""
    if not 0.0 <= delta < 1.0:
        raise InputError("delta must lie in [0, 1)")
    results: dict[int, SizePowerResult] = {}
    for n in sizes:
        law = MixtureLaw(
            family_key=config.null_family,
            alt_law=alt_law,
            weight=delta / np.sqrt(n),
            rescale=config.rescale_alternatives,
        )
        cfg = replace(config, n=n, innovation_law=law)
        res = run_size_power(cfg)
        results[n] = res
        for a in cfg.levels:
            rate = res.rate(a)
            if not (a < rate < 1.0) and delta > 0.0:
                warnings.warn(
                    f"local-power rate {rate:.3f} at level {a} (n={n}) is degenerate"
                )
    return LocalPowerResult(delta=delta, alt_law=str(alt_law), results=results)
