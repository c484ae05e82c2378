"""Dyadic partitions, sampled trajectories and their (co)variation.

A :class:`GridSpec` fixes the horizon ``T`` and the finest level ``N``; the
level-``n`` partition is ``t_k = k T 2**-n`` for ``k = 0..2**n``. Because the
grids are dyadic, every level-``n`` point is a finest-grid point, so a path is
stored once at level ``N`` and read at coarser levels by striding.

Quadratic variation at a level-``n`` time ``t`` only counts increments
``[s, s']`` of the level-``n`` partition with ``s' <= t``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import (
    DimensionError,
    GridMismatchError,
    LevelError,
    MissingColumnError,
    NonpositivePriceError,
    PositivityError,
    TooFewRowsError,
    UnparsableRowError,
)
from .summation import running_sum

__all__ = [
    "GridSpec",
    "SampledPath",
    "MultiPath",
    "VariationPath",
    "grid_times",
    "quadratic_variation",
    "covariation",
    "covariation_paths",
    "covariation_matrix",
    "generate_walk",
    "generate_geometric",
    "rademacher_signs",
    "ingest_csv",
]


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GridSpec:
    """Family of dyadic partitions of ``[0, horizon]`` down to ``finest_level``."""

    horizon: float
    finest_level: int

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon}")
        if int(self.finest_level) != self.finest_level or self.finest_level < 1:
            raise LevelError(f"finest_level must be an integer >= 1, got {self.finest_level}")
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "finest_level", int(self.finest_level))

    def check_level(self, level: int) -> int:
        if int(level) != level or not 1 <= level <= self.finest_level:
            raise LevelError(f"level {level} outside 1..{self.finest_level}")
        return int(level)

    def size(self, level: int | None = None) -> int:
        """Number of grid points at ``level`` (``2**level + 1``)."""
        level = self.finest_level if level is None else self.check_level(level)
        return 2**level + 1

    def stride(self, level: int) -> int:
        """Finest-grid index distance between consecutive level-``level`` points."""
        return 2 ** (self.finest_level - self.check_level(level))

    def mesh(self, level: int) -> float:
        return self.horizon / 2 ** self.check_level(level)

    def times(self, level: int | None = None) -> np.ndarray:
        level = self.finest_level if level is None else self.check_level(level)
        return np.arange(2**level + 1) * (self.horizon / 2**level)


def grid_times(grid: GridSpec, level: int) -> np.ndarray:
    """Level-``level`` partition points ``k T 2**-level``."""
    return grid.times(grid.check_level(level))


@dataclass(frozen=True, eq=False)
class SampledPath:
    """One trajectory sampled on the level-``level`` partition of ``grid``.

    ``level`` defaults to the finest level; paths produced by level-``n``
    operations (exponentials, logarithms, portfolio values) carry ``level=n``.
    """

    grid: GridSpec
    values: np.ndarray
    level: int | None = None

    def __post_init__(self):
        level = self.grid.finest_level if self.level is None else self.grid.check_level(self.level)
        object.__setattr__(self, "level", level)
        values = _frozen(self.values)
        if values.shape != (2**level + 1,):
            raise DimensionError(
                f"expected {2**level + 1} values at level {level}, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("path values must be finite")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, SampledPath):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.level == other.level
            and np.array_equal(self.values, other.values)
        )

    @property
    def times(self) -> np.ndarray:
        return self.grid.times(self.level)

    def at_level(self, level: int) -> np.ndarray:
        """Values on the coarser level-``level`` partition."""
        level = self.grid.check_level(level)
        if level > self.level:
            raise LevelError(f"path sampled at level {self.level} cannot be read at level {level}")
        return self.values[:: 2 ** (self.level - level)]

    def coarsen(self, level: int) -> "SampledPath":
        return SampledPath(self.grid, self.at_level(level), level)

    def __add__(self, other: "SampledPath") -> "SampledPath":
        _require_same_grid(self, other)
        return SampledPath(self.grid, self.values + other.values, self.level)

    def __mul__(self, scalar: float) -> "SampledPath":
        return SampledPath(self.grid, self.values * float(scalar), self.level)

    __rmul__ = __mul__

    def apply(self, func) -> "SampledPath":
        return SampledPath(self.grid, func(self.values), self.level)


def _require_same_grid(a: SampledPath, b: SampledPath) -> None:
    if a.grid != b.grid or a.level != b.level:
        raise GridMismatchError(
            f"grids differ: {a.grid} level {a.level} vs {b.grid} level {b.level}"
        )


@dataclass(frozen=True, eq=False)
class MultiPath:
    """``d`` trajectories on one grid; ``positive`` marks price paths."""

    grid: GridSpec
    assets: tuple[SampledPath, ...]
    positive: bool = False
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        assets = tuple(self.assets)
        if not assets:
            raise DimensionError("a MultiPath needs at least one asset")
        for a in assets:
            if a.grid != self.grid or a.level != assets[0].level:
                raise GridMismatchError("all assets of a MultiPath must share one grid and level")
        if self.positive:
            for i, a in enumerate(assets):
                if np.any(a.values <= 0):
                    raise PositivityError(f"asset {i} has a nonpositive value")
        names = tuple(self.names) or tuple(f"S{i + 1}" for i in range(len(assets)))
        if len(names) != len(assets):
            raise DimensionError(f"{len(names)} names for {len(assets)} assets")
        object.__setattr__(self, "assets", assets)
        object.__setattr__(self, "names", names)

    @classmethod
    def from_array(
        cls,
        grid: GridSpec,
        values: np.ndarray,
        positive: bool = False,
        names: Sequence[str] = (),
        level: int | None = None,
    ) -> "MultiPath":
        """Build from an array of shape ``(n_times, d)``."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        return cls(
            grid,
            tuple(SampledPath(grid, values[:, i], level) for i in range(values.shape[1])),
            positive=positive,
            names=tuple(names),
        )

    @classmethod
    def of(cls, *paths: SampledPath, positive: bool = False) -> "MultiPath":
        return cls(paths[0].grid, tuple(paths), positive=positive)

    @property
    def d(self) -> int:
        return len(self.assets)

    @property
    def level(self) -> int:
        return self.assets[0].level

    def values(self, level: int | None = None) -> np.ndarray:
        """Array of shape ``(2**level + 1, d)``."""
        level = self.level if level is None else level
        return np.column_stack([a.at_level(level) for a in self.assets])

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiPath):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.positive == other.positive
            and self.names == other.names
            and all(a == b for a, b in zip(self.assets, other.assets))
            and self.d == other.d
        )


@dataclass(frozen=True, eq=False)
class VariationPath:
    """Running (co)variation sampled on the level-``level`` partition."""

    grid: GridSpec
    level: int
    values: np.ndarray

    def __post_init__(self):
        self.grid.check_level(self.level)
        values = _frozen(self.values)
        if values.shape != (2**self.level + 1,):
            raise DimensionError(f"expected {2**self.level + 1} values, got {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times(self.level)

    @property
    def terminal(self) -> float:
        return float(self.values[-1])

    def as_path(self) -> SampledPath:
        return SampledPath(self.grid, self.values, self.level)


def _increments(path: SampledPath, level: int) -> np.ndarray:
    return np.diff(path.at_level(level))


def quadratic_variation(path: SampledPath, level: int) -> VariationPath:
    """Running sum of squared level-``level`` increments."""
    level = path.grid.check_level(level)
    dx = _increments(path, level)
    return VariationPath(path.grid, level, running_sum(dx * dx))


def covariation(x: SampledPath, y: SampledPath, level: int) -> VariationPath:
    """Running sum of products of level-``level`` increments of ``x`` and ``y``."""
    if x.grid != y.grid:
        raise GridMismatchError(f"grids differ: {x.grid} vs {y.grid}")
    level = x.grid.check_level(level)
    return VariationPath(x.grid, level, running_sum(_increments(x, level) * _increments(y, level)))


def covariation_paths(paths: MultiPath, level: int) -> np.ndarray:
    """Gram-matrix path: array ``C`` of shape ``(2**level + 1, d, d)``.

    ``C[k, i, j]`` is the level-``level`` covariation of assets ``i`` and
    ``j`` at the ``k``-th grid time. Only the upper triangle is summed; the
    lower triangle is a copy, so every ``C[k]`` is exactly symmetric.
    """
    level = paths.grid.check_level(level)
    dx = np.diff(paths.values(level), axis=0)
    d = paths.d
    out = np.empty((dx.shape[0] + 1, d, d))
    for i in range(d):
        for j in range(i, d):
            out[:, i, j] = running_sum(dx[:, i] * dx[:, j])
            out[:, j, i] = out[:, i, j]
    return out


def covariation_matrix(paths: MultiPath, level: int, t_index: int) -> np.ndarray:
    """The ``d x d`` covariation matrix at the ``t_index``-th level-``level`` time."""
    level = paths.grid.check_level(level)
    if int(t_index) != t_index or not 0 <= t_index <= 2**level:
        raise IndexError(f"t_index {t_index} outside 0..{2**level}")
    dx = np.diff(paths.values(level)[: int(t_index) + 1], axis=0)
    d = paths.d
    out = np.zeros((d, d))
    for i in range(d):
        for j in range(i, d):
            out[i, j] = out[j, i] = math.fsum((dx[:, i] * dx[:, j]).tolist())
    return out


def rademacher_signs(seed: int, count: int) -> np.ndarray:
    """The +-1 stream used by :func:`generate_walk` for ``seed``."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, size=count) * 2.0 - 1.0


def generate_walk(grid: GridSpec, seed: int, sigma: float = 1.0, drift: float = 0.0) -> SampledPath:
    """Rademacher walk ``X_0 = 0``, steps ``drift*dt + sigma*sqrt(dt)*eps``.

    The driftless part has finest-level quadratic variation ``sigma**2 * T``
    (exactly, whenever ``sqrt(dt)`` is representable, e.g. ``T = 1`` and even
    ``N``).
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    n_steps = 2**grid.finest_level
    dt = grid.horizon / n_steps
    eps = rademacher_signs(seed, n_steps)
    steps = sigma * math.sqrt(dt) * eps
    if drift:
        steps = steps + drift * dt
    return SampledPath(grid, running_sum(steps))


def generate_geometric(
    grid: GridSpec, seed: int, sigma: float = 1.0, drift: float = 0.0, s0: float = 1.0
) -> SampledPath:
    """``S_t = s0 * exp(W_t)`` with ``W`` from :func:`generate_walk`."""
    if not s0 > 0:
        raise PositivityError(f"s0 must be positive, got {s0}")
    walk = generate_walk(grid, seed, sigma, drift)
    return SampledPath(grid, s0 * np.exp(walk.values))


# --- CSV ingestion --------------------------------------------------------

_YEAR_SECONDS = 365.25 * 86400.0


def _parse_time(text: str, line: int) -> tuple[float, bool]:
    text = text.strip()
    try:
        return float(text), False
    except ValueError:
        pass
    try:
        stamp = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise UnparsableRowError(f"line {line}: cannot parse time {text!r}") from None
    return stamp.timestamp(), True


def ingest_csv(
    source: IO | str | bytes,
    column_names: Iterable[str] | None = None,
    finest_level: int | None = None,
    horizon: float | None = None,
) -> MultiPath:
    """Read a price CSV and resample it onto a dyadic grid.

    The first column holds times (real numbers or ISO-8601), the others
    prices. Times are rescaled so the data span maps onto ``[0, horizon]``;
    each grid point takes the last observed price at or before it
    (left-constant, so nothing from the future leaks in).

    ``horizon`` defaults to the data span (in years for ISO timestamps) and
    ``finest_level`` to the smallest ``N`` with ``2**N >= rows - 1``.
    """
    if isinstance(source, bytes):
        source = io.StringIO(source.decode("utf-8"))
    elif isinstance(source, str):
        source = io.StringIO(source)
    else:
        raw = source.read()
        source = io.StringIO(raw.decode("utf-8") if isinstance(raw, bytes) else raw)

    reader = csv.reader(source)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise TooFewRowsError("empty CSV") from None
    if len(header) < 2:
        raise MissingColumnError("need a time column and at least one price column")
    wanted = list(column_names) if column_names is not None else header[1:]
    if not wanted:
        raise MissingColumnError("no price columns requested")
    missing = [c for c in wanted if c not in header[1:]]
    if missing:
        raise MissingColumnError(f"columns not in header: {missing}")
    cols = [header.index(c) for c in wanted]

    times, rows = [], []
    is_iso = None
    for line, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise UnparsableRowError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        t, iso = _parse_time(row[0], line)
        if is_iso is None:
            is_iso = iso
        elif iso != is_iso:
            raise UnparsableRowError(f"line {line}: mixed numeric and ISO-8601 times")
        try:
            prices = [float(row[c]) for c in cols]
        except ValueError:
            raise UnparsableRowError(f"line {line}: unparsable price in {row!r}") from None
        if not all(math.isfinite(p) for p in prices):
            raise UnparsableRowError(f"line {line}: non-finite price")
        for name, p in zip(wanted, prices):
            if p <= 0:
                raise NonpositivePriceError(f"line {line}: nonpositive price {p} in column {name!r}")
        if times and t <= times[-1]:
            raise UnparsableRowError(f"line {line}: times must be strictly increasing")
        times.append(t)
        rows.append(prices)

    if len(rows) < 2:
        raise TooFewRowsError(f"need at least 2 data rows, got {len(rows)}")

    span = times[-1] - times[0]
    if horizon is None:
        horizon = span / _YEAR_SECONDS if is_iso else span
    if finest_level is None:
        finest_level = max(1, math.ceil(math.log2(len(rows) - 1)))
    grid = GridSpec(horizon, finest_level)

    # Fractions of the data span; a source time within 1e-6 of a grid spacing
    # above a grid point counts as observed there (absorbs rescaling roundoff).
    n_grid = 2**finest_level
    frac = (np.asarray(times) - times[0]) / span * n_grid
    idx = np.searchsorted(frac, np.arange(n_grid + 1) + 1e-6, side="right") - 1
    data = np.asarray(rows)[idx]
    return MultiPath.from_array(grid, data, positive=True, names=wanted)
