"""Numerical toolkit for entropy, Fisher information and the entropy power
inequality on log-concave densities and their heat flows."""

__version__ = "0.1.0"

from .densities import (  # noqa: E402
    AnalyticDensity,
    Family,
    GridDensity,
    GridSpec,
    check_log_concavity,
    discretize,
    gaussian_mixture,
    make_family,
    make_gaussian,
    make_product,
)
from .epiflow import (  # noqa: E402
    FlowTrace,
    StrengthenedEpiReport,
    deficit_P,
    lambda_limit,
    lambda_trace,
    optimal_kappa,
    strengthened_epi,
    verify_str1,
)
from .errors import (  # noqa: E402
    ConfigError,
    ContractError,
    HorizonTooShortError,
    LcepiError,
    LogConcavityError,
    ParameterDomainError,
    PreconditionError,
    ResolutionError,
    TruncationError,
)
from .functionals import (  # noqa: E402
    FunctionalReport,
    analyze,
    cross_h,
    entropy,
    entropy_power,
    fisher,
    fisher_production,
    score_moments,
    scores,
)
from .heatflow import HeatEvolution, convolve, heat_step  # noqa: E402
from .inequalities import InequalityVerdict, Name, analyze_pair, verify_pair  # noqa: E402

__all__ = [
    "AnalyticDensity",
    "Family",
    "GridDensity",
    "GridSpec",
    "check_log_concavity",
    "discretize",
    "gaussian_mixture",
    "make_family",
    "make_gaussian",
    "make_product",
    "FlowTrace",
    "StrengthenedEpiReport",
    "deficit_P",
    "lambda_limit",
    "lambda_trace",
    "optimal_kappa",
    "strengthened_epi",
    "verify_str1",
    "ConfigError",
    "ContractError",
    "HorizonTooShortError",
    "LcepiError",
    "LogConcavityError",
    "ParameterDomainError",
    "PreconditionError",
    "ResolutionError",
    "TruncationError",
    "FunctionalReport",
    "analyze",
    "cross_h",
    "entropy",
    "entropy_power",
    "fisher",
    "fisher_production",
    "score_moments",
    "scores",
    "HeatEvolution",
    "convolve",
    "heat_step",
    "InequalityVerdict",
    "Name",
    "analyze_pair",
    "verify_pair",
]
