"""Goodness-of-fit testing for the innovation distribution of GARCH and
ARMA-GARCH models, based on weighted residual empirical processes."""

from .distributions import (
    FAMILIES,
    DoubleExponential,
    NullFamily,
    StandardNormal,
    family_from_key,
)
from .errors import EstimationError, InnovTestError, InputError, NumericError
from .estimation import (
    FitResult,
    fit_model,
    gaussian_qmle,
    information_matrix,
    one_step_update,
)
from .gof import (
    ExpansionConfig,
    expansion_harness,
    ihat_n,
    k_process,
    kn_statistic,
)
from .harness import (
    ExperimentConfig,
    TestReport,
    analyze,
    local_power_probe,
    qm_diagnostic,
    read_series,
    run_size_power,
    tabulate,
    write_series,
)
from .limitdist import (
    CritTable,
    critical_value,
    percentile,
    rho,
    simulate_crit_table,
    simulate_K_distribution,
)
from .models import (
    ArGarchParams,
    ArmaGarchParams,
    FilteredPath,
    GarchParams,
    ParamBounds,
    filter_series,
    gradients,
    innovation_sampler,
    simulate,
    w_blocks,
)

__version__ = "0.1.0"
