"""Cover-style universal portfolio as a performance-weighted CRP average.

For a discrete measure ``mu = sum_k w_k delta_{pi_k}`` on the simplex,

    V_hat_t  = sum_k w_k V^{pi_k}_t
    pi_hat_t = sum_k w_k pi_k V^{pi_k}_t / V_hat_t

and ``pi_hat`` is itself a portfolio strategy whose value process is
``V_hat``. :func:`universal_consistency_residual` measures how closely the
finite-level value of ``pi_hat`` reproduces ``V_hat``.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, PathfolioError, SimplexError
from .paths import MultiPath, SampledPath
from .strategies import SimplexWeights, StrategyPath, log_gram_path, portfolio_value, _require_positive

__all__ = [
    "DiscreteSimplexMeasure",
    "UniversalResult",
    "measure_uniform_dirichlet",
    "measure_grid",
    "measure_from_csv",
    "parse_measure_spec",
    "crp_values",
    "universal_portfolio",
    "universal_consistency_residual",
    "DEFAULT_MEASURE",
    "MAX_GRID_ATOMS",
]

DEFAULT_MEASURE = "dirichlet:k=500,seed=7"
MAX_GRID_ATOMS = 200_000


@dataclass(frozen=True, eq=False)
class DiscreteSimplexMeasure:
    """Finitely many atoms ``points[k]`` in the simplex with weights ``weights[k]``."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        weights = np.array(self.weights, dtype=float).ravel()
        if points.ndim != 2 or points.shape[0] == 0:
            raise DimensionError("a measure needs at least one atom")
        if weights.shape != (points.shape[0],):
            raise DimensionError(f"{weights.size} weights for {points.shape[0]} atoms")
        if np.any(points < 0) or np.any(np.abs(points.sum(axis=1) - 1.0) > 1e-12):
            raise SimplexError("every atom must lie in the simplex")
        if np.any(weights <= 0) or abs(math.fsum(weights.tolist()) - 1.0) > 1e-12:
            raise PathfolioError("atom weights must be positive and sum to 1")
        points.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def dirac(cls, pi: SimplexWeights) -> "DiscreteSimplexMeasure":
        return cls(pi.w[None, :], np.ones(1))

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def atoms(self) -> list[tuple[SimplexWeights, float]]:
        return [(SimplexWeights(p), float(w)) for p, w in zip(self.points, self.weights)]

    def __len__(self) -> int:
        return self.points.shape[0]


def measure_uniform_dirichlet(d: int, k: int, seed: int) -> DiscreteSimplexMeasure:
    """``k`` equally weighted atoms drawn uniformly on the simplex.

    Uses normalised standard exponentials, which is the flat Dirichlet law.
    """
    if d < 1 or k < 1:
        raise PathfolioError(f"need d >= 1 and k >= 1, got d={d}, k={k}")
    rng = np.random.default_rng(seed)
    e = rng.standard_exponential((k, d))
    return DiscreteSimplexMeasure(e / e.sum(axis=1, keepdims=True), np.full(k, 1.0 / k))


def measure_grid(d: int, resolution: int, max_atoms: int = MAX_GRID_ATOMS) -> DiscreteSimplexMeasure:
    """All points of the simplex with coordinates in ``{0, 1/r, ..., 1}``."""
    if d < 1 or resolution < 1:
        raise PathfolioError(f"need d >= 1 and resolution >= 1, got d={d}, resolution={resolution}")
    count = math.comb(resolution + d - 1, d - 1)
    if count > max_atoms:
        raise PathfolioError(f"grid measure would have {count} atoms (cap {max_atoms})")
    points = []
    # stars and bars: bar positions split `resolution` into d ordered parts
    for bars in itertools.combinations(range(resolution + d - 1), d - 1):
        edges = (-1, *bars, resolution + d - 1)
        points.append([edges[i + 1] - edges[i] - 1 for i in range(d)])
    points = np.array(points, dtype=float) / resolution
    return DiscreteSimplexMeasure(points, np.full(count, 1.0 / count))


def measure_from_csv(source, d: int | None = None) -> DiscreteSimplexMeasure:
    """Rows ``w, pi^1, ..., pi^d``; weights are normalised to sum to one."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    try:
        data = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise PathfolioError(f"unparsable measure file: {exc}") from None
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] < 2:
        raise PathfolioError("measure file needs rows of the form w,pi1,...,pid")
    if d is not None and data.shape[1] - 1 != d:
        raise DimensionError(f"measure atoms have dimension {data.shape[1] - 1}, expected {d}")
    weights = data[:, 0]
    if np.any(weights <= 0):
        raise PathfolioError("measure weights must be positive")
    points = data[:, 1:]
    if np.any(points < 0) or np.any(np.abs(points.sum(axis=1) - 1.0) > 1e-9):
        raise SimplexError("measure atoms must lie in the simplex")
    points = points / points.sum(axis=1, keepdims=True)
    return DiscreteSimplexMeasure(points, weights / math.fsum(weights.tolist()))


def _spec_options(text: str) -> dict[str, str]:
    opts = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, sep, value = part.partition("=")
        if not sep:
            raise PathfolioError(f"expected key=value in measure spec, got {part!r}")
        opts[key.strip()] = value.strip()
    return opts


def parse_measure_spec(spec: str, d: int) -> DiscreteSimplexMeasure:
    """Build a measure from ``dirichlet:k=..,seed=..``, ``grid:resolution=..`` or ``file:<path>``."""
    kind, _, rest = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "file":
        return measure_from_csv(rest, d)
    opts = _spec_options(rest)
    try:
        if kind == "dirichlet":
            return measure_uniform_dirichlet(d, int(opts.get("k", 500)), int(opts.get("seed", 7)))
        if kind == "grid":
            return measure_grid(d, int(opts["resolution"]))
    except (KeyError, ValueError) as exc:
        raise PathfolioError(f"bad measure spec {spec!r}: {exc}") from None
    raise PathfolioError(f"unknown measure kind {kind!r}")


@dataclass(frozen=True, eq=False)
class UniversalResult:
    v_hat: SampledPath
    pi_hat: StrategyPath
    atom_values: np.ndarray  # shape (n_times, k): V^{pi_k}_t
    measure: DiscreteSimplexMeasure


def crp_values(points: np.ndarray, s: MultiPath, level: int, gram: np.ndarray | None = None) -> np.ndarray:
    """Closed-form CRP values for many weight vectors; shape ``(n_times, k)``."""
    level = s.grid.check_level(level)
    _require_positive(s)
    points = np.asarray(points, dtype=float)
    if points.shape[1] != s.d:
        raise DimensionError(f"atoms have dimension {points.shape[1]}, prices have {s.d} assets")
    if gram is None:
        gram = log_gram_path(s, level)
    x = np.log(s.values(level))
    diag = np.einsum("kii->ki", gram)
    quad = np.einsum("pi,kij,pj->kp", points, gram, points)
    exponent = (x - x[0]) @ points.T + 0.5 * (diag @ points.T - quad)
    return np.exp(exponent)


def universal_portfolio(mu: DiscreteSimplexMeasure, s: MultiPath, level: int) -> UniversalResult:
    """Average the CRP values under ``mu`` and derive the weights ``pi_hat``."""
    level = s.grid.check_level(level)
    if mu.d != s.d:
        raise DimensionError(f"measure on a {mu.d}-asset simplex, prices have {s.d} assets")
    values = crp_values(mu.points, s, level)
    weighted = values * mu.weights
    # dividing by the stored weight total keeps V_hat_0 = 1 exactly
    v_hat = weighted.sum(axis=1) / mu.weights.sum()
    pi_hat = (weighted @ mu.points) / v_hat[:, None]
    # rows are convex combinations; renormalise away the last-ulp drift
    pi_hat = np.clip(pi_hat, 0.0, None)
    pi_hat /= pi_hat.sum(axis=1, keepdims=True)
    return UniversalResult(
        v_hat=SampledPath(s.grid, v_hat, level),
        pi_hat=StrategyPath(s.grid, level, pi_hat),
        atom_values=values,
        measure=mu,
    )


def universal_consistency_residual(result: UniversalResult, s: MultiPath, level: int) -> float:
    """``sup_t |V^{pi_hat}_t - V_hat_t| / V_hat_t``."""
    level = s.grid.check_level(level)
    if result.v_hat.level != level:
        raise PathfolioError(f"result computed at level {result.v_hat.level}, not {level}")
    v_pi = portfolio_value(result.pi_hat, s, level).values
    v_hat = result.v_hat.values
    return float(np.max(np.abs(v_pi - v_hat) / v_hat))
