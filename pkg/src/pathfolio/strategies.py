"""Portfolio strategies, self-financing share holdings, CRPs and CPPI.

A portfolio strategy ``pi_t`` gives capital fractions; its value is

    V^pi = ℰ( ∫ pi dℒ(S) ).

The quadratic variation fed into ℰ is the one of the martingale part
``∫ pi d log S``: the Itô-logarithm correction ``1/2 ∫ pi d<log S>`` has finite
variation and therefore no quadratic variation in the limit. Dropping it at
finite level makes ``pi = e_i`` reproduce ``S^i / S^i_0`` and constant ``pi``
reproduce the closed form of :func:`constant_rebalanced_value` up to roundoff.
``qv_mode="direct"`` keeps the literal quadratic variation of the integral
instead; the two agree in the refinement limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .calculus import IntegrandPath, follmer_integral, ito_logarithm
from .errors import DimensionError, GridMismatchError, LevelError, PathfolioError, PositivityError, SimplexError
from .paths import GridSpec, MultiPath, SampledPath, covariation_paths, quadratic_variation
from .summation import running_sum

__all__ = [
    "SimplexWeights",
    "StrategyPath",
    "SharesPath",
    "CppiParams",
    "CppiResult",
    "log_prices",
    "log_gram_path",
    "portfolio_value",
    "constant_rebalanced_value",
    "strategy_to_shares",
    "shares_to_strategy",
    "shares_from_weights",
    "self_financing_residual",
    "cppi",
]

SUM_TOL = 1e-10
NEG_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SimplexWeights:
    """A point of the standard simplex: a constant rebalanced strategy."""

    w: np.ndarray

    def __post_init__(self):
        w = np.array(np.atleast_1d(self.w), dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise DimensionError("weights must be a non-empty vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise SimplexError(f"weights must be finite and nonnegative: {w}")
        if abs(math.fsum(w.tolist()) - 1.0) > 1e-12:
            raise SimplexError(f"weights sum to {math.fsum(w.tolist())!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @classmethod
    def equal(cls, d: int) -> "SimplexWeights":
        return cls(np.full(d, 1.0 / d))

    @classmethod
    def vertex(cls, d: int, i: int) -> "SimplexWeights":
        w = np.zeros(d)
        w[i] = 1.0
        return cls(w)

    @property
    def d(self) -> int:
        return self.w.size


@dataclass(frozen=True, eq=False)
class StrategyPath:
    """Weights ``pi_t`` at level-``level`` grid times.

    ``mode="simplex"`` forbids short positions; ``"generalized"`` (CPPI only)
    lets components go negative as long as each row still sums to one.
    """

    grid: GridSpec
    level: int
    values: np.ndarray
    mode: Literal["simplex", "generalized"] = "simplex"

    def __post_init__(self):
        self.grid.check_level(self.level)
        if self.mode not in ("simplex", "generalized"):
            raise ValueError(f"unknown strategy mode {self.mode!r}")
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != 2**self.level + 1:
            raise DimensionError(f"expected {2**self.level + 1} rows, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise ValueError("strategy values must be finite")
        if np.any(np.abs(values.sum(axis=1) - 1.0) > SUM_TOL):
            raise SimplexError("every strategy row must sum to 1")
        if self.mode == "simplex" and np.any(values < -NEG_TOL):
            raise SimplexError("negative weight in a simplex-mode strategy")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: GridSpec, level: int, pi: SimplexWeights) -> "StrategyPath":
        return cls(grid, level, np.tile(pi.w, (2**level + 1, 1)))

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class SharesPath:
    """Share counts ``xi_t`` with the value path ``V_t = xi_t . S_t``."""

    grid: GridSpec
    level: int
    shares: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        for name in ("shares", "value"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.shares.ndim != 2 or self.shares.shape[0] != self.value.shape[0]:
            raise DimensionError("shares must have shape (n_times, d) matching value")


@dataclass(frozen=True)
class CppiParams:
    """Floor fraction ``alpha``, multiplier ``m`` and constant short rate."""

    floor_fraction: float
    multiplier: float
    rate: float = 0.0

    def __post_init__(self):
        if not 0 <= self.floor_fraction < 1:
            raise PathfolioError(f"floor fraction must lie in [0, 1), got {self.floor_fraction}")
        if not self.multiplier > 0:
            raise PathfolioError(f"multiplier must be positive, got {self.multiplier}")


@dataclass(frozen=True, eq=False)
class CppiResult:
    strategy: StrategyPath
    value: SampledPath
    cushion: SampledPath
    floor: SampledPath
    market: MultiPath  # (risky asset, money market) on the finest grid
    leveraged: np.ndarray  # True where pi^1 > 1, i.e. the weights left the simplex

    @property
    def floor_margin(self) -> np.ndarray:
        return self.value.values - self.floor.values


def _require_positive(s: MultiPath) -> None:
    if not s.positive and np.any(s.values() <= 0):
        raise PositivityError("prices must be strictly positive")


def log_prices(s: MultiPath) -> MultiPath:
    _require_positive(s)
    return MultiPath.from_array(s.grid, np.log(s.values()), names=s.names, level=s.level)


def log_gram_path(s: MultiPath, level: int) -> np.ndarray:
    """Covariation matrices of ``log S`` at every level-``level`` time."""
    return covariation_paths(log_prices(s), level)


def _check_pi(pi: StrategyPath, s: MultiPath, level: int) -> int:
    if pi.grid != s.grid:
        raise GridMismatchError("strategy and prices live on different grids")
    level = s.grid.check_level(level)
    if pi.level != level:
        raise LevelError(f"strategy at level {pi.level}, value requested at level {level}")
    if pi.d != s.d:
        raise DimensionError(f"strategy has {pi.d} weights for {s.d} assets")
    return level


def portfolio_value(
    pi: StrategyPath,
    s: MultiPath,
    level: int,
    qv_mode: Literal["reduced", "direct"] = "reduced",
) -> SampledPath:
    """``V^pi = ℰ(∫ pi dℒ(S))`` at level-``level`` times; ``V_0 = 1``."""
    level = _check_pi(pi, s, level)
    _require_positive(s)
    ells = MultiPath(
        s.grid, tuple(ito_logarithm(a, level) for a in s.assets)
    )
    integral = follmer_integral(IntegrandPath(s.grid, level, pi.values), ells, level).values
    if qv_mode == "reduced":
        dlog = np.diff(np.log(s.values(level)), axis=0)
        qv = running_sum(np.einsum("ki,ki->k", pi.values[:-1], dlog) ** 2)
    elif qv_mode == "direct":
        qv = quadratic_variation(SampledPath(s.grid, integral, level), level).values
    else:
        raise ValueError(f"unknown qv_mode {qv_mode!r}")
    return SampledPath(s.grid, np.exp(integral - 0.5 * qv), level)


def constant_rebalanced_value(
    pi: SimplexWeights, s: MultiPath, level: int, gram: np.ndarray | None = None
) -> SampledPath:
    """Closed form ``prod (S^i_t/S^i_0)^pi_i * exp((sum pi_i c_ii - pi'C pi) / 2)``.

    ``C`` is the level-``level`` covariation matrix of ``log S``; pass a
    precomputed ``gram`` path to skip recomputing it.
    """
    level = s.grid.check_level(level)
    _require_positive(s)
    if pi.d != s.d:
        raise DimensionError(f"{pi.d} weights for {s.d} assets")
    if gram is None:
        gram = log_gram_path(s, level)
    x = np.log(s.values(level))
    w = pi.w
    diag = np.einsum("kii->ki", gram)
    exponent = (x - x[0]) @ w + 0.5 * (diag @ w - np.einsum("i,kij,j->k", w, gram, w))
    return SampledPath(s.grid, np.exp(exponent), level)


def shares_from_weights(pi: StrategyPath, value: np.ndarray, s: MultiPath) -> SharesPath:
    """``xi^i_t = pi^i_t V_t / S^i_t`` without any sign requirement."""
    level = pi.level
    sv = s.values(level)
    value = np.asarray(value, dtype=float)
    return SharesPath(s.grid, level, pi.values * value[:, None] / sv, value)


def strategy_to_shares(pi: StrategyPath, s: MultiPath, level: int) -> SharesPath:
    """Self-financing share counts that implement a simplex strategy."""
    if pi.mode != "simplex":
        raise SimplexError("strategy_to_shares needs a simplex-mode strategy")
    if np.any(pi.values < 0):
        raise SimplexError("negative weight in a simplex-mode strategy")
    value = portfolio_value(pi, s, level)
    return shares_from_weights(pi, value.values, s)


def shares_to_strategy(xi: SharesPath, s: MultiPath) -> StrategyPath:
    """Capital fractions ``pi^i_t = xi^i_t S^i_t / V_t`` of a no-short-sales strategy."""
    v = xi.value
    if abs(v[0] - 1.0) > 1e-12:
        raise PathfolioError(f"initial value must be 1, got {v[0]!r}")
    if np.any(v <= 0):
        raise PositivityError("value process must stay positive")
    if np.any(xi.shares < 0):
        raise SimplexError("negative share count")
    if xi.grid != s.grid:
        raise GridMismatchError("shares and prices live on different grids")
    pi = xi.shares * s.values(xi.level) / v[:, None]
    return StrategyPath(xi.grid, xi.level, pi, "simplex")


def self_financing_residual(xi: SharesPath, s: MultiPath) -> float:
    """``sup_t |V_t - V_0 - sum xi_s . dS_s|`` along the shares' level."""
    ds = np.diff(s.values(xi.level), axis=0)
    gains = running_sum(np.einsum("ki,ki->k", xi.shares[:-1], ds))
    return float(np.max(np.abs(xi.value - xi.value[0] - gains)))


def cppi(
    params: CppiParams,
    s: SampledPath,
    level: int,
    money_market: SampledPath | None = None,
) -> CppiResult:
    """Constant proportion portfolio insurance in closed form.

    The cushion is ``C_t = (1-a)(S_t/S_0)^m B_t^(1-m) exp(-m(m-1)<log S>_t/2)``,
    the value ``V = C + a B`` and the risky weight ``pi^1 = m C / V``.
    ``B_t = exp(r t)`` unless a money-market path is supplied.
    """
    level = s.grid.check_level(level)
    if np.any(s.values <= 0):
        raise PositivityError("risky asset must be strictly positive")
    if money_market is None:
        money_market = SampledPath(s.grid, np.exp(params.rate * s.grid.times(s.level)), s.level)
    elif money_market.grid != s.grid:
        raise GridMismatchError("money market path must share the grid of the risky asset")
    elif np.any(money_market.values <= 0):
        raise PositivityError("money market account must be strictly positive")

    alpha, m = params.floor_fraction, params.multiplier
    sv = s.at_level(level)
    b = money_market.at_level(level)
    log_s = SampledPath(s.grid, np.log(sv), level)
    q = quadratic_variation(log_s, level).values

    cushion = (1 - alpha) * (sv / sv[0]) ** m * b ** (1 - m) * np.exp(-0.5 * m * (m - 1) * q)
    floor = alpha * b
    value = cushion + floor
    pi1 = m * cushion / value
    weights = np.column_stack([pi1, 1.0 - pi1])

    market = MultiPath(s.grid, (s, money_market), positive=True, names=("S", "B"))
    return CppiResult(
        strategy=StrategyPath(s.grid, level, weights, "generalized"),
        value=SampledPath(s.grid, value, level),
        cushion=SampledPath(s.grid, cushion, level),
        floor=SampledPath(s.grid, floor, level),
        market=market,
        leveraged=pi1 > 1,
    )
