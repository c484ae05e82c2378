"""Command-line entry point: ``pathfolio <subcommand> [options]``.

Subcommands: ``simulate``, ``cppi`` (simulate with a CPPI strategy),
``universal``, ``verify`` and ``ingest``. Options may also come from a flat
``key=value`` file passed with ``--config``; flags on the command line win.

Exit codes: 0 success, 1 a verification check failed, 2 configuration
error, 3 numeric failure (e.g. a nonpositive price).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import MissingColumnError, PathfolioError
from .paths import GridSpec, MultiPath, generate_geometric, ingest_csv, quadratic_variation
from .strategies import (
    CppiParams,
    SimplexWeights,
    StrategyPath,
    cppi,
    log_gram_path,
    portfolio_value,
    self_financing_residual,
    shares_from_weights,
    strategy_to_shares,
)
from .universal import DEFAULT_MEASURE, parse_measure_spec, universal_consistency_residual, universal_portfolio
from .verify import FIXTURES, check_all, convergence_suite

DEFAULT_HORIZON = 1.0
DEFAULT_FINEST_LEVEL = 12
DEFAULT_ASSETS = "gbm:d=2,sigma=0.2/0.35"
DEFAULT_VERIFY_LEVELS = (8, 10, 12)
CONFIG_KEYS = (
    "horizon", "finest_level", "level", "seed", "assets", "strategy",
    "measure", "out", "format", "levels", "columns", "sweep",
)


class ConfigError(PathfolioError):
    def __init__(self, key: str, message: str):
        super().__init__(f"config error [{key}]: {message}")
        self.key = key


@dataclass
class RunConfig:
    horizon: float | None = None
    finest_level: int | None = None
    level: int | None = None
    seed: int = 0
    assets: str = DEFAULT_ASSETS
    strategy: str | None = None
    measure: str = DEFAULT_MEASURE
    out: Path = field(default_factory=lambda: Path(os.environ.get("PATHFOLIO_OUT", "pathfolio-out")))
    format: str = "csv"
    levels: tuple[int, ...] = DEFAULT_VERIFY_LEVELS
    columns: tuple[str, ...] | None = None
    sweep: int = 20
    corrupt_qv: float = 0.0


# --- config parsing -------------------------------------------------------


def _convert(key: str, raw) -> object:
    if raw is None:
        return None
    try:
        if key == "horizon":
            value = float(raw)
            if not value > 0:
                raise ValueError("must be positive")
            return value
        if key in ("finest_level", "level", "seed", "sweep"):
            return int(raw)
        if key == "levels":
            return tuple(int(x) for x in str(raw).replace("/", ",").split(",") if x.strip())
        if key == "columns":
            return tuple(c.strip() for c in str(raw).split(",") if c.strip())
        if key == "out":
            return Path(raw)
        if key == "format":
            if raw not in ("csv", "json"):
                raise ValueError("must be csv or json")
            return raw
        if key == "corrupt_qv":
            return float(raw)
    except ValueError as exc:
        raise ConfigError(key, f"invalid value {raw!r}: {exc}") from None
    return str(raw)


def read_config_file(path: Path) -> dict[str, str]:
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    values = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(key or "config", f"line {lineno} is not key=value")
        if key not in CONFIG_KEYS:
            raise ConfigError(key, f"unknown key on line {lineno}")
        values[key] = value.strip()
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    raw: dict[str, object] = {}
    if getattr(args, "config", None):
        raw.update(read_config_file(Path(args.config)))
    for key in CONFIG_KEYS + ("corrupt_qv",):
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    cfg = RunConfig()
    for key, value in raw.items():
        cfg = replace(cfg, **{key: _convert(key, value)})
    if cfg.finest_level is not None and cfg.finest_level < 1:
        raise ConfigError("finest_level", "must be >= 1")
    if cfg.sweep < 0:
        raise ConfigError("sweep", "must be >= 0")
    return cfg


def _options(text: str, key: str) -> dict[str, str]:
    opts = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        k, sep, v = part.partition("=")
        if not sep:
            raise ConfigError(key, f"expected name=value, got {part!r}")
        opts[k.strip()] = v.strip()
    return opts


def load_assets(cfg: RunConfig) -> MultiPath:
    """Materialise the asset spec: ``gbm:...``, ``csv:<path>`` or ``fixture:<name>``."""
    kind, _, rest = cfg.assets.partition(":")
    kind = kind.strip().lower()
    if kind == "csv":
        path = Path(rest)
        if not path.is_file():
            raise ConfigError("assets", f"CSV file not found: {path}")
        try:
            with path.open("rb") as fh:
                return ingest_csv(fh, cfg.columns, cfg.finest_level, cfg.horizon)
        except MissingColumnError as exc:
            raise ConfigError("columns", str(exc)) from None
    if kind == "fixture":
        if rest not in FIXTURES:
            raise ConfigError("assets", f"unknown fixture {rest!r}")
        return FIXTURES[rest](cfg.finest_level or DEFAULT_FINEST_LEVEL)
    if kind == "gbm":
        opts = _options(rest, "assets")
        unknown = set(opts) - {"d", "sigma", "drift", "s0"}
        if unknown:
            raise ConfigError("assets", f"unknown gbm options {sorted(unknown)}")
        try:
            sigmas = [float(x) for x in opts.get("sigma", "0.2").split("/")]
            d = int(opts.get("d", len(sigmas)))
            drifts = [float(x) for x in opts.get("drift", "0").split("/")]
            s0s = [float(x) for x in opts.get("s0", "1").split("/")]
        except ValueError as exc:
            raise ConfigError("assets", str(exc)) from None

        def per_asset(vals, name):
            if len(vals) == 1:
                return vals * d
            if len(vals) != d:
                raise ConfigError("assets", f"{name} has {len(vals)} entries for d={d}")
            return vals

        sigmas, drifts, s0s = per_asset(sigmas, "sigma"), per_asset(drifts, "drift"), per_asset(s0s, "s0")
        if d < 1 or any(sg < 0 for sg in sigmas) or any(x <= 0 for x in s0s):
            raise ConfigError("assets", "need d >= 1, sigma >= 0 and s0 > 0")
        grid = GridSpec(cfg.horizon or DEFAULT_HORIZON, cfg.finest_level or DEFAULT_FINEST_LEVEL)
        paths = tuple(
            generate_geometric(grid, cfg.seed + i, sigmas[i], drifts[i], s0s[i]) for i in range(d)
        )
        return MultiPath(grid, paths, positive=True)
    raise ConfigError("assets", f"unknown asset source {kind!r}")


def resolve_level(cfg: RunConfig, s: MultiPath) -> int:
    level = s.grid.finest_level if cfg.level is None else cfg.level
    if not 1 <= level <= s.grid.finest_level:
        raise ConfigError("level", f"level {level} outside 1..{s.grid.finest_level}")
    return level


def parse_constant(spec: str, d: int) -> SimplexWeights:
    body = spec.partition(":")[2].strip()
    if body in ("", "equal"):
        return SimplexWeights.equal(d)
    try:
        w = [float(x) for x in body.replace("/", ",").split(",")]
    except ValueError as exc:
        raise ConfigError("strategy", str(exc)) from None
    if len(w) != d:
        raise ConfigError("strategy", f"{len(w)} weights for {d} assets")
    try:
        return SimplexWeights(np.array(w))
    except PathfolioError as exc:
        raise ConfigError("strategy", str(exc)) from None


def parse_cppi(spec: str) -> CppiParams:
    opts = _options(spec.partition(":")[2], "strategy")
    try:
        return CppiParams(float(opts.get("alpha", 0.8)), float(opts.get("m", 3)), float(opts.get("r", 0.0)))
    except (ValueError, PathfolioError) as exc:
        raise ConfigError("strategy", str(exc)) from None


# --- output ---------------------------------------------------------------


def _num(x) -> str:
    return repr(float(x))


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(out: Path, stem: str, columns: Sequence[str], data: np.ndarray, fmt: str) -> Path:
    data = np.asarray(data, dtype=float)
    if fmt == "json":
        doc = {"columns": list(columns), "data": [[float(x) for x in row] for row in data]}
        path = out / f"{stem}.json"
        _atomic_write(path, json.dumps(doc) + "\n")
        return path
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for row in data:
        writer.writerow([_num(x) for x in row])
    path = out / f"{stem}.csv"
    _atomic_write(path, buf.getvalue())
    return path


def write_json(out: Path, name: str, doc: dict) -> Path:
    path = out / name
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def write_prices(out: Path, s: MultiPath) -> None:
    # prices always go out as CSV so they can be re-ingested
    write_table(out, "prices", ["t", *s.names], np.column_stack([s.grid.times(s.level), s.values()]), "csv")


# --- commands -------------------------------------------------------------


def cmd_simulate(cfg: RunConfig) -> int:
    s = load_assets(cfg)
    level = resolve_level(cfg, s)
    spec = cfg.strategy or "constant:equal"
    kind = spec.partition(":")[0].strip().lower()
    times = s.grid.times(level)
    summary: dict = {"level": level, "finest_level": s.grid.finest_level, "horizon": s.grid.horizon,
                     "assets": list(s.names), "strategy": spec}

    if kind == "constant":
        pi = parse_constant(spec, s.d)
        path = StrategyPath.constant(s.grid, level, pi)
        value = portfolio_value(path, s, level)
        shares = strategy_to_shares(path, s, level)
        weights, weight_names = path.values, list(s.names)
        value_table = np.column_stack([times, value.values])
        value_cols = ["t", "value"]
        summary["self_financing_residual"] = self_financing_residual(shares, s)
    elif kind == "cppi":
        if s.d != 1:
            raise ConfigError("assets", f"cppi needs exactly one risky asset, got {s.d}")
        params = parse_cppi(spec)
        res = cppi(params, s.assets[0], level)
        value = res.value
        weights, weight_names = res.strategy.values, [s.names[0], "B"]
        value_table = np.column_stack([times, value.values, res.floor.values, res.cushion.values])
        value_cols = ["t", "value", "floor", "cushion"]
        shares = shares_from_weights(res.strategy, value.values, res.market)
        summary.update(
            alpha=params.floor_fraction,
            multiplier=params.multiplier,
            rate=params.rate,
            min_floor_margin=float(np.min(res.floor_margin)),
            leveraged_times=int(np.count_nonzero(res.leveraged)),
            self_financing_residual=self_financing_residual(shares, res.market),
        )
    else:
        raise ConfigError("strategy", f"simulate supports constant:... or cppi:..., got {spec!r}")

    qv = quadratic_variation(value.apply(np.log), level)
    summary["final_value"] = float(value.values[-1])
    summary["realized_variance"] = qv.terminal

    write_prices(cfg.out, s)
    write_table(cfg.out, "value", value_cols, value_table, cfg.format)
    write_table(cfg.out, "weights", ["t", *weight_names], np.column_stack([times, weights]), cfg.format)
    write_table(cfg.out, "qv", ["t", "value"], np.column_stack([times, qv.values]), cfg.format)
    write_json(cfg.out, "summary.json", summary)
    return 0


def _half_spec(spec: str) -> str | None:
    """Same measure family at half the size, for a sensitivity figure."""
    kind, _, rest = spec.partition(":")
    if kind not in ("dirichlet", "grid"):
        return None
    key = "k" if kind == "dirichlet" else "resolution"
    opts = _options(rest, "measure")
    size = int(opts.get(key, 500 if kind == "dirichlet" else 0)) // 2
    if size < 1:
        return None
    opts[key] = str(size)
    return f"{kind}:" + ",".join(f"{k}={v}" for k, v in opts.items())


def cmd_universal(cfg: RunConfig) -> int:
    s = load_assets(cfg)
    level = resolve_level(cfg, s)
    try:
        mu = parse_measure_spec(cfg.measure, s.d)
    except PathfolioError as exc:
        raise ConfigError("measure", str(exc)) from None
    result = universal_portfolio(mu, s, level)
    residual = universal_consistency_residual(result, s, level)
    times = s.grid.times(level)

    write_prices(cfg.out, s)
    write_table(cfg.out, "v_hat", ["t", "value"], np.column_stack([times, result.v_hat.values]), cfg.format)
    write_table(cfg.out, "pi_hat", ["t", *s.names], np.column_stack([times, result.pi_hat.values]), cfg.format)
    atoms = np.column_stack([mu.weights, mu.points, result.atom_values[-1]])
    write_table(cfg.out, "atoms", ["weight", *s.names, "final_value"], atoms, cfg.format)

    report = {
        "level": level,
        "measure": cfg.measure,
        "atoms": len(mu),
        "v_hat_final": float(result.v_hat.values[-1]),
        "best_atom_final": float(np.max(result.atom_values[-1])),
        "consistency_residual": residual,
    }
    half = _half_spec(cfg.measure)
    if half is not None:
        other = universal_portfolio(parse_measure_spec(half, s.d), s, level)
        report["sensitivity"] = {"measure": half, "v_hat_final": float(other.v_hat.values[-1])}
    write_json(cfg.out, "report.json", report)
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    s = load_assets(cfg)
    level = resolve_level(cfg, s)
    levels = cfg.levels
    if not levels or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError("levels", f"levels must be strictly increasing, got {list(levels)}")
    if any(not 1 <= n <= s.grid.finest_level for n in levels):
        raise ConfigError("levels", f"levels must lie in 1..{s.grid.finest_level}")

    cases = [("equal", SimplexWeights.equal(s.d))]
    if cfg.strategy:
        if not cfg.strategy.startswith("constant"):
            raise ConfigError("strategy", "verify checks constant strategies only")
        cases.insert(0, ("strategy", parse_constant(cfg.strategy, s.d)))
    cases += [(f"vertex{i + 1}", SimplexWeights.vertex(s.d, i)) for i in range(s.d)]
    rng = np.random.default_rng(cfg.seed)
    cases += [(f"random{k}", SimplexWeights(w)) for k, w in enumerate(rng.dirichlet(np.ones(s.d), cfg.sweep))]

    gram = log_gram_path(s, level)
    checks, series = [], {}
    for label, pi in cases:
        for rep in check_all(pi, s, level, gram, cfg.corrupt_qv):
            entry = rep.to_dict()
            entry.update(case=label, weights=[float(x) for x in pi.w], level=level)
            checks.append(entry)
            times, cols = series.setdefault(rep.name, (rep.times, {}))
            cols[label] = rep.margins

    convergence = [r.to_dict() for r in convergence_suite(s, levels)]
    passed = all(c["pass"] for c in checks) and all(c["pass"] for c in convergence)

    for name, (times, cols) in series.items():
        write_table(cfg.out / "margins", name, ["t", *cols], np.column_stack([times, *cols.values()]), "csv")
    write_json(cfg.out, "report.json", {
        "pass": passed,
        "level": level,
        "levels": list(levels),
        "checks": checks,
        "convergence": convergence,
    })
    return 0 if passed else 1


def cmd_ingest(cfg: RunConfig, source: str) -> int:
    cfg = replace(cfg, assets=f"csv:{source}")
    s = load_assets(cfg)
    level = resolve_level(cfg, s)
    write_prices(cfg.out, s)
    times = s.grid.times(level)
    for asset, name in zip(s.assets, s.names):
        qv = quadratic_variation(asset.apply(np.log), level)
        write_table(cfg.out, f"qv_{name}", ["t", "value"], np.column_stack([times, qv.values]), cfg.format)
    write_json(cfg.out, "summary.json", {
        "assets": list(s.names),
        "finest_level": s.grid.finest_level,
        "horizon": s.grid.horizon,
        "level": level,
    })
    return 0


# --- argument parsing -----------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathfolio", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value config file")
    common.add_argument("--horizon", help="time horizon T")
    common.add_argument("--finest-level", dest="finest_level", help="finest dyadic level N")
    common.add_argument("--level", help="working level n <= N (default N)")
    common.add_argument("--seed", help="seed for synthetic paths")
    common.add_argument("--assets", help="gbm:d=..,sigma=..,drift=..,s0=.. | csv:<path> | fixture:<name>")
    common.add_argument("--columns", help="comma-separated CSV price columns")
    common.add_argument("--strategy", help="constant:w1,..,wd | constant:equal | cppi:alpha=..,m=..,r=..")
    common.add_argument("--measure", help="dirichlet:k=..,seed=.. | grid:resolution=.. | file:<path>")
    common.add_argument("--out", help="output directory (default $PATHFOLIO_OUT)")
    common.add_argument("--format", help="csv or json for tabular outputs")

    sub.add_parser("simulate", parents=[common], help="run a constant or CPPI strategy")
    sub.add_parser("cppi", parents=[common], help="simulate with a CPPI strategy")
    sub.add_parser("universal", parents=[common], help="build the universal portfolio")
    p_verify = sub.add_parser("verify", parents=[common], help="check CRP inequalities and convergence")
    p_verify.add_argument("--levels", help="increasing levels for convergence, e.g. 8,10,12")
    p_verify.add_argument("--sweep", help="number of random weight vectors to check")
    p_verify.add_argument("--corrupt-qv", dest="corrupt_qv", help=argparse.SUPPRESS)
    p_ingest = sub.add_parser("ingest", parents=[common], help="resample a price CSV onto a dyadic grid")
    p_ingest.add_argument("source", help="CSV file to ingest")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "cppi":
            if cfg.strategy is None:
                cfg = replace(cfg, strategy="cppi:alpha=0.8,m=3,r=0.0")
            elif not cfg.strategy.startswith("cppi"):
                raise ConfigError("strategy", "the cppi command needs a cppi:... strategy")
            if cfg.assets == DEFAULT_ASSETS:
                cfg = replace(cfg, assets="gbm:d=1,sigma=0.2")
            return cmd_simulate(cfg)
        if args.command == "universal":
            return cmd_universal(cfg)
        if args.command == "verify":
            if cfg.assets == DEFAULT_ASSETS:
                cfg = replace(cfg, assets="fixture:geometric")
            return cmd_verify(cfg)
        if args.command == "ingest":
            if not Path(args.source).is_file():
                raise ConfigError("source", f"file not found: {args.source}")
            return cmd_ingest(cfg, args.source)
    except ConfigError as exc:
        print(f"pathfolio: {exc}", file=sys.stderr)
        return 2
    except PathfolioError as exc:
        print(f"pathfolio: numeric failure: {exc}", file=sys.stderr)
        return 3
    parser.error(f"unknown command {args.command}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
