"""Inequality checks for constant rebalanced portfolios and convergence runs.

The four comparisons between a CRP and its constituents are evaluated on the
finite-level covariation matrix ``C_t`` of ``log S``. ``C_t`` is a Gram matrix
of increment vectors, hence positive semidefinite, so the inequalities hold
exactly at every level up to roundoff. The path-level statements that only
hold in the limit (e.g. the quadratic variation of the actual ``log V`` path)
are reported separately as convergence diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calculus import (
    SmoothFunction,
    exponential_ode_residual,
    ito_formula_residual,
    log_ito_residual,
)
from .errors import PathfolioError
from .paths import GridSpec, MultiPath, SampledPath, generate_geometric, quadratic_variation
from .strategies import (
    SimplexWeights,
    StrategyPath,
    _require_positive,
    constant_rebalanced_value,
    log_gram_path,
    self_financing_residual,
    strategy_to_shares,
)
from .universal import measure_uniform_dirichlet, universal_consistency_residual, universal_portfolio

__all__ = [
    "InequalityReport",
    "ConvergenceReport",
    "MARGIN_TOL",
    "ZERO_FLOOR",
    "check_geometric_mean_bound",
    "check_growth_rate",
    "check_variance_bound",
    "check_volatility_bound",
    "check_all",
    "variance_crosscheck",
    "convergence_suite",
    "standard_fixture",
    "FIXTURES",
]

MARGIN_TOL = 1e-10
# residuals at or below this are treated as exact zeros by the monotonicity flag
ZERO_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class InequalityReport:
    """Signed margins (``>= 0`` means the inequality holds) per grid time."""

    name: str
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    margins: np.ndarray
    notes: dict = field(default_factory=dict)

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margins))

    @property
    def scale(self) -> float:
        return float(max(1.0, np.max(np.abs(self.lhs)), np.max(np.abs(self.rhs))))

    @property
    def passed(self) -> bool:
        return self.min_margin >= -MARGIN_TOL * self.scale

    def to_dict(self) -> dict:
        out = {"name": self.name, "min_margin": self.min_margin, "pass": self.passed, "scale": self.scale}
        out.update(self.notes)
        return out


@dataclass(frozen=True)
class ConvergenceReport:
    name: str
    levels: tuple[int, ...]
    residuals: tuple[float, ...]

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise PathfolioError(f"levels must be strictly increasing: {self.levels}")
        if not all(np.isfinite(self.residuals)):
            raise PathfolioError(f"non-finite residual in {self.name}")

    @property
    def monotone(self) -> bool:
        for prev, nxt in zip(self.residuals, self.residuals[1:]):
            if not (nxt < prev or (prev <= ZERO_FLOOR and nxt <= ZERO_FLOOR)):
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "levels": list(self.levels),
            "residuals": list(self.residuals),
            "monotone_decrease": self.monotone,
            "pass": self.monotone,
        }


def _prepare(pi: SimplexWeights, s: MultiPath, level: int, gram: np.ndarray | None, qv_corruption: float):
    level = s.grid.check_level(level)
    _require_positive(s)
    if pi.d != s.d:
        raise PathfolioError(f"{pi.d} weights for {s.d} assets")
    if gram is None:
        gram = log_gram_path(s, level)
    if qv_corruption:
        # fault injection: inflate off-diagonal covariations so C stops being PSD
        bump = qv_corruption * np.einsum("kii->k", gram)[:, None, None]
        off = 1.0 - np.eye(s.d)
        gram = gram + bump * off
    w = pi.w
    diag = np.einsum("kii->ki", gram) @ w
    quad = np.einsum("i,kij,j->k", w, gram, w)
    return level, gram, w, diag, quad


def check_geometric_mean_bound(
    pi: SimplexWeights, s: MultiPath, level: int, gram: np.ndarray | None = None, qv_corruption: float = 0.0
) -> InequalityReport:
    """``log V^pi_t >= sum pi_i log(S^i_t / S^i_0)``."""
    level, gram, w, diag, quad = _prepare(pi, s, level, gram, qv_corruption)
    x = np.log(s.values(level))
    rhs = (x - x[0]) @ w
    margin = 0.5 * (diag - quad)
    return InequalityReport("geometric_mean", s.grid.times(level), rhs + margin, rhs, margin)


def check_growth_rate(
    pi: SimplexWeights, s: MultiPath, level: int, gram: np.ndarray | None = None, qv_corruption: float = 0.0
) -> InequalityReport:
    """Finite-horizon growth rates: the geometric-mean margins divided by ``t > 0``."""
    part1 = check_geometric_mean_bound(pi, s, level, gram, qv_corruption)
    t = part1.times[1:]
    return InequalityReport(
        "growth_rate",
        t,
        part1.lhs[1:] / t,
        part1.rhs[1:] / t,
        part1.margins[1:] / t,
        notes={"asymptotic": "not evaluated"},
    )


def check_variance_bound(
    pi: SimplexWeights, s: MultiPath, level: int, gram: np.ndarray | None = None, qv_corruption: float = 0.0
) -> InequalityReport:
    """``<log V^pi>_t = pi' C_t pi <= sum pi_i <log S^i>_t``."""
    level, gram, w, diag, quad = _prepare(pi, s, level, gram, qv_corruption)
    return InequalityReport("realized_variance", s.grid.times(level), quad, diag, diag - quad)


def check_volatility_bound(
    pi: SimplexWeights, s: MultiPath, level: int, gram: np.ndarray | None = None, qv_corruption: float = 0.0
) -> InequalityReport:
    """``sqrt(pi' C_t pi) <= sum pi_i sqrt(<log S^i>_t)``."""
    level, gram, w, diag, quad = _prepare(pi, s, level, gram, qv_corruption)
    vols = np.sqrt(np.clip(np.einsum("kii->ki", gram), 0.0, None)) @ w
    lhs = np.sqrt(np.clip(quad, 0.0, None))
    return InequalityReport("realized_volatility", s.grid.times(level), lhs, vols, vols - lhs)


def check_all(
    pi: SimplexWeights, s: MultiPath, level: int, gram: np.ndarray | None = None, qv_corruption: float = 0.0
) -> list[InequalityReport]:
    if gram is None:
        gram = log_gram_path(s, level)
    return [
        check(pi, s, level, gram, qv_corruption)
        for check in (check_geometric_mean_bound, check_growth_rate, check_variance_bound, check_volatility_bound)
    ]


def variance_crosscheck(pi: SimplexWeights, s: MultiPath, level: int) -> float:
    """``sup_t |<log V^pi>_t - pi' C_t pi|`` using the quadratic variation of the value path."""
    gram = log_gram_path(s, level)
    v = constant_rebalanced_value(pi, s, level, gram)
    qv = quadratic_variation(v.apply(np.log), level).values
    return float(np.max(np.abs(qv - np.einsum("i,kij,j->k", pi.w, gram, pi.w))))


# --- fixtures and convergence ---------------------------------------------

STANDARD_SIGMAS = (0.2, 0.35)
STANDARD_SEEDS = (11, 12)
FIXTURE_MEASURE = dict(k=200, seed=7)


def standard_fixture(finest_level: int = 12) -> MultiPath:
    """Two geometric Rademacher paths on ``[0, 1]`` with sigma 0.2 and 0.35."""
    grid = GridSpec(1.0, finest_level)
    return MultiPath(
        grid,
        tuple(generate_geometric(grid, seed, sigma) for seed, sigma in zip(STANDARD_SEEDS, STANDARD_SIGMAS)),
        positive=True,
    )


def constant_fixture(finest_level: int = 12) -> MultiPath:
    grid = GridSpec(1.0, finest_level)
    return MultiPath(
        grid,
        (SampledPath(grid, np.full(2**finest_level + 1, 1.0)), SampledPath(grid, np.full(2**finest_level + 1, 2.5))),
        positive=True,
    )


FIXTURES = {"geometric": standard_fixture, "constant": constant_fixture}

_EXP = SmoothFunction(
    value=lambda x, a: np.exp(x[:, 0]),
    grad_x=lambda x, a: np.exp(x),
    hess_x=lambda x, a: np.exp(x)[:, :, None],
)


def convergence_suite(fixture: str | MultiPath, levels: Sequence[int]) -> list[ConvergenceReport]:
    """Run the five refinement residuals on a fixture at each level.

    The residuals are: Itô formula for ``exp`` of the first log-price,
    ``dZ = Z dX`` for its Doléans-Dade exponential, the Itô-logarithm
    integral identity for the first price, the self-financing gap of the
    equal-weight CRP and the universal-portfolio value consistency.
    """
    if isinstance(fixture, str):
        try:
            s = FIXTURES[fixture]()
        except KeyError:
            raise PathfolioError(f"unknown fixture {fixture!r}; choose from {sorted(FIXTURES)}") from None
    else:
        s = fixture
    levels = tuple(int(n) for n in levels)
    if not levels:
        raise PathfolioError("no levels given")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise PathfolioError(f"levels must be strictly increasing: {levels}")
    for n in levels:
        s.grid.check_level(n)

    log_first = s.assets[0].apply(np.log)
    equal = SimplexWeights.equal(s.d)
    mu = measure_uniform_dirichlet(s.d, **FIXTURE_MEASURE)

    rows: dict[str, list[float]] = {
        "ito_formula": [],
        "exponential_ode": [],
        "log_ito": [],
        "self_financing": [],
        "universal_consistency": [],
    }
    for n in levels:
        rows["ito_formula"].append(ito_formula_residual(_EXP, log_first, n))
        rows["exponential_ode"].append(exponential_ode_residual(log_first, n))
        rows["log_ito"].append(log_ito_residual(s.assets[0], n))
        shares = strategy_to_shares(StrategyPath.constant(s.grid, n, equal), s, n)
        rows["self_financing"].append(self_financing_residual(shares, s))
        rows["universal_consistency"].append(universal_consistency_residual(universal_portfolio(mu, s, n), s, n))
    return [ConvergenceReport(name, levels, tuple(vals)) for name, vals in rows.items()]
