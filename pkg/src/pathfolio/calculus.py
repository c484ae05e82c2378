"""Föllmer integrals, Doléans-Dade exponential and Itô logarithm on a grid.

Everything is evaluated at level-``n`` partition points. The pathwise Itô
integral is the nonanticipative Riemann sum

    sum over s in T_n with s' <= t of  xi_s . (X_{s'} - X_s)

so integrands are plain arrays of their values at the left endpoints. The
residual functions measure how far the finite-level objects are from the
identities that hold in the refinement limit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CallbackError, DimensionError, GridMismatchError, LevelError, PositivityError
from .paths import GridSpec, MultiPath, SampledPath, VariationPath, quadratic_variation
from .summation import running_sum

__all__ = [
    "IntegrandPath",
    "IntegralPath",
    "SmoothFunction",
    "InversionDeviation",
    "follmer_integral",
    "doleans_exponential",
    "ito_logarithm",
    "inversion_check",
    "ito_formula_residual",
    "exponential_ode_residual",
    "log_ito_residual",
]


@dataclass(frozen=True, eq=False)
class IntegrandPath:
    """Integrand values, one ``d``-vector per level-``level`` grid time."""

    grid: GridSpec
    level: int
    values: np.ndarray

    def __post_init__(self):
        self.grid.check_level(self.level)
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] != 2**self.level + 1:
            raise DimensionError(
                f"integrand needs {2**self.level + 1} rows at level {self.level}, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("integrand values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @classmethod
    def constant(cls, grid: GridSpec, level: int, vector) -> "IntegrandPath":
        vector = np.atleast_1d(np.asarray(vector, dtype=float))
        return cls(grid, level, np.tile(vector, (2**level + 1, 1)))


@dataclass(frozen=True, eq=False)
class IntegralPath:
    """Running Föllmer integral at level-``level`` grid times (0 at t = 0)."""

    grid: GridSpec
    level: int
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def as_path(self) -> SampledPath:
        return SampledPath(self.grid, self.values, self.level)


def _as_multipath(x: MultiPath | SampledPath) -> MultiPath:
    if isinstance(x, SampledPath):
        return MultiPath(x.grid, (x,))
    return x


def follmer_integral(xi: IntegrandPath, x: MultiPath | SampledPath, level: int) -> IntegralPath:
    """Nonanticipative Riemann sum of ``xi`` against ``x`` along level ``level``."""
    x = _as_multipath(x)
    if xi.grid != x.grid:
        raise GridMismatchError(f"integrand grid {xi.grid} differs from path grid {x.grid}")
    level = x.grid.check_level(level)
    if xi.level != level:
        raise LevelError(f"integrand sampled at level {xi.level}, integral requested at {level}")
    if xi.d != x.d:
        raise DimensionError(f"integrand has dimension {xi.d}, path has {x.d} assets")
    dx = np.diff(x.values(level), axis=0)
    terms = np.einsum("ki,ki->k", xi.values[:-1], dx)
    return IntegralPath(x.grid, level, running_sum(terms))


def doleans_exponential(x: SampledPath, qv: VariationPath) -> SampledPath:
    """``exp(X_t - <X>_t / 2)`` at the level of ``qv``.

    ``qv`` is passed in rather than recomputed so that callers can supply the
    quadratic variation of a path that differs from ``x`` by a finite-variation
    term (which has the same limiting quadratic variation).
    """
    if x.grid != qv.grid:
        raise GridMismatchError(f"path grid {x.grid} differs from qv grid {qv.grid}")
    if qv.level > x.level:
        raise LevelError(f"qv at level {qv.level} is finer than the path (level {x.level})")
    values = np.exp(x.at_level(qv.level) - 0.5 * qv.values)
    return SampledPath(x.grid, values, qv.level)


def _log_path(y: SampledPath, level: int) -> SampledPath:
    vals = y.at_level(level)
    if np.any(vals <= 0):
        raise PositivityError("Itô logarithm needs a strictly positive path")
    return SampledPath(y.grid, np.log(vals), level)


def ito_logarithm(y: SampledPath, level: int) -> SampledPath:
    """``log Y_t + <log Y>_t / 2`` at level-``level`` times."""
    level = y.grid.check_level(level)
    log_y = _log_path(y, level)
    qv = quadratic_variation(log_y, level)
    return SampledPath(y.grid, log_y.values + 0.5 * qv.values, level)


@dataclass(frozen=True)
class InversionDeviation:
    """Sup-norm deviations of the two compositions of ℰ and ℒ.

    ``exp_of_log`` is relative (``|ℰ(ℒ(Y)) - Y| / Y``) and ``None`` when the
    input is not strictly positive. ``log_of_exp`` is absolute.
    """

    exp_of_log: float | None
    log_of_exp: float

    @property
    def deviation(self) -> float:
        return max(self.log_of_exp, self.exp_of_log or 0.0)


def inversion_check(path: SampledPath, level: int) -> InversionDeviation:
    """Check that ℰ and ℒ invert each other at one level.

    ℰ(ℒ(Y)) reuses ``<log Y>`` as the quadratic variation of ℒ(Y), so the
    correction terms cancel algebraically. ℒ(ℰ(X)) recomputes ``<log ℰ(X)>``
    from the path; its gap to ``<X>`` is the finite-variation cross term that
    only vanishes as the mesh goes to zero.
    """
    level = path.grid.check_level(level)
    vals = path.at_level(level)

    exp_of_log = None
    if np.all(vals > 0):
        log_y = _log_path(path, level)
        qv_log = quadratic_variation(log_y, level)
        ell = SampledPath(path.grid, log_y.values + 0.5 * qv_log.values, level)
        back = doleans_exponential(ell, qv_log)
        exp_of_log = float(np.max(np.abs(back.values - vals) / vals))

    x = path.coarsen(level)
    z = doleans_exponential(x, quadratic_variation(x, level))
    log_of_exp = float(np.max(np.abs(ito_logarithm(z, level).values - x.values)))
    return InversionDeviation(exp_of_log, log_of_exp)


@dataclass(frozen=True)
class SmoothFunction:
    """``f(x, a)`` with derivatives, all vectorised over the time axis.

    Each callback receives ``x`` of shape ``(m, d)`` and ``a`` of shape
    ``(m, k)`` (or ``None`` when there is no finite-variation argument) and
    returns, respectively, shapes ``(m,)``, ``(m, d)``, ``(m, d, d)`` and
    ``(m, k)``.
    """

    value: Callable
    grad_x: Callable
    hess_x: Callable
    grad_a: Callable | None = None


def _call(cb: Callable, name: str, shape: tuple, *args) -> np.ndarray:
    try:
        out = np.asarray(cb(*args), dtype=float)
    except Exception as exc:  # noqa: BLE001 - user callback, re-raised with context
        raise CallbackError(f"{name} callback failed: {exc}") from exc
    if out.shape != shape:
        try:
            out = np.broadcast_to(out, shape)
        except ValueError:
            raise CallbackError(f"{name} returned shape {out.shape}, expected {shape}") from None
    if not np.all(np.isfinite(out)):
        raise CallbackError(f"{name} returned non-finite values")
    return out


def ito_formula_residual(
    f: SmoothFunction,
    x: MultiPath | SampledPath,
    level: int,
    a: MultiPath | SampledPath | None = None,
) -> float:
    """Sup-norm gap between both sides of the pathwise Itô formula.

    Left side: ``f(X_t, A_t) - f(X_0, A_0)``. Right side: left-point sums of
    ``f_a . dA``, ``grad_x f . dX`` and ``1/2 sum f_xixj d<X^i, X^j>``, where
    the covariation increments at level ``n`` are ``dX^i dX^j``.
    """
    x = _as_multipath(x)
    level = x.grid.check_level(level)
    xv = x.values(level)
    m, d = xv.shape
    dx = np.diff(xv, axis=0)

    av = None
    if a is not None:
        a = _as_multipath(a)
        if a.grid != x.grid:
            raise GridMismatchError("finite-variation path must share the grid of x")
        if f.grad_a is None:
            raise CallbackError("a finite-variation path was given but grad_a is missing")
        av = a.values(level)

    fv = _call(f.value, "value", (m,), xv, av)
    grad = _call(f.grad_x, "grad_x", (m, d), xv, av)
    hess = _call(f.hess_x, "hess_x", (m, d, d), xv, av)

    terms = np.einsum("ki,ki->k", grad[:-1], dx)
    terms += 0.5 * np.einsum("kij,ki,kj->k", hess[:-1], dx, dx)
    if av is not None:
        ga = _call(f.grad_a, "grad_a", av.shape, xv, av)
        terms += np.einsum("ki,ki->k", ga[:-1], np.diff(av, axis=0))

    rhs = running_sum(terms)
    lhs = fv - fv[0]
    return float(np.max(np.abs(lhs - rhs)))


def exponential_ode_residual(x: SampledPath, level: int) -> float:
    """Sup-norm gap in ``Z_t = Z_0 + sum Z_s dX_s`` for ``Z = ℰ(X)``."""
    level = x.grid.check_level(level)
    z = doleans_exponential(x, quadratic_variation(x, level)).values
    dx = np.diff(x.at_level(level))
    integral = z[0] + running_sum(z[:-1] * dx)
    return float(np.max(np.abs(z - integral)))


def log_ito_residual(y: SampledPath, level: int) -> float:
    """Sup-norm gap in ``ℒ(Y)_t = log Y_0 + sum dY_s / Y_s``."""
    level = y.grid.check_level(level)
    ell = ito_logarithm(y, level).values
    yv = y.at_level(level)
    integral = np.log(yv[0]) + running_sum(np.diff(yv) / yv[:-1])
    return float(np.max(np.abs(ell - integral)))
