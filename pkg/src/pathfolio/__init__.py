"""Pathwise Itô calculus for constant rebalanced, CPPI and universal portfolios."""

from .calculus import (
    IntegralPath,
    IntegrandPath,
    SmoothFunction,
    doleans_exponential,
    exponential_ode_residual,
    follmer_integral,
    inversion_check,
    ito_formula_residual,
    ito_logarithm,
    log_ito_residual,
)
from .errors import PathfolioError
from .paths import (
    GridSpec,
    MultiPath,
    SampledPath,
    VariationPath,
    covariation,
    covariation_matrix,
    generate_geometric,
    generate_walk,
    grid_times,
    ingest_csv,
    quadratic_variation,
)
from .strategies import (
    CppiParams,
    SharesPath,
    SimplexWeights,
    StrategyPath,
    constant_rebalanced_value,
    cppi,
    portfolio_value,
    shares_to_strategy,
    strategy_to_shares,
)
from .universal import (
    DiscreteSimplexMeasure,
    UniversalResult,
    measure_grid,
    measure_uniform_dirichlet,
    universal_consistency_residual,
    universal_portfolio,
)

__version__ = "0.1.0"
