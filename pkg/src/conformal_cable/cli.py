"""Command-line harness: ``conformal-cable simulate|compare|symmetry|algebra``.

Each run reads one JSON config::

    {
      "geometry": {"d0": 1, "a": 0, "nu": 0, "x_min": 0, "x_max": 6.283185307179586},
      "params":   {"c_M": 1, "r_M": 1, "r_L": 1},
      "grid":     {"n": 401, "dt": 0.001, "t_end": 1},
      "scenario": "cosine_mode",
      "options":  {"k": 1},
      "output":   "out.csv"
    }

Exit codes: 0 success, 2 config or domain error, 3 numeric failure,
4 verification failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import __version__
from .algebra import certify, write_algebra_csv
from .geometry import CableParams, DendriteGeometry, DomainError, Regime, RegimeError, diffusivity
from .pde import BoundaryCondition, Grid1D, NonFiniteFieldError, SolverError, convergence_orders, solve, write_field_csv
from .solutions import (
    ConstantMode,
    CosineMode,
    HeatKernel,
    ModeSpec,
    cylindrical_kernel,
    cylindrical_mode,
    general_solution,
    parabolic_solution,
)
from .special import UnsupportedOrderError
from .symmetry import (
    ConformalMap,
    SingularTimeError,
    check_invariance,
    competing_transform,
    random_map,
    write_invariance_csv,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4

SCENARIOS = ("cosine_mode", "heat_kernel", "constant", "bessel_mode", "zero")

_SECTIONS = {
    "geometry": {"d0", "a", "nu", "x_min", "x_max"},
    "params": {"c_M", "r_M", "r_L"},
    "grid": {"n", "dt", "t_end"},
}
_OPTIONAL_GRID = {"dt", "t_end"}
_OPTIONS = {
    "k", "E", "A", "B", "t0", "center", "boundary", "save_every", "levels", "tolerance",
    "seed", "maps", "map", "t_window", "x_window", "t",
}
_MAP_KEYS = {"alpha", "beta", "gamma", "delta", "l", "v", "c"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    geom: DendriteGeometry
    params: CableParams
    n: int
    dt: Optional[float]
    t_end: Optional[float]
    scenario: str
    options: dict = field(default_factory=dict)
    output: Optional[str] = None
    digest: str = ""

    @property
    def seed(self) -> int:
        return int(self.options.get("seed", 0))


def _number(section, key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{section}.{key} must be finite")
    return float(value)


def _block(raw, name, required, optional=frozenset()):
    if name not in raw or not isinstance(raw[name], dict):
        raise ConfigError(f"missing object '{name}'")
    block = raw[name]
    unknown = set(block) - required
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {sorted(unknown)}")
    missing = required - optional - set(block)
    if missing:
        raise ConfigError(f"missing keys in {name}: {sorted(missing)}")
    return {k: _number(name, k, v) for k, v in block.items()}


def parse_config(text: str) -> RunConfig:
    """Validate a JSON config; every problem raises :class:`ConfigError`."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - {"geometry", "params", "grid", "scenario", "options", "output"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    geo = _block(raw, "geometry", _SECTIONS["geometry"])
    par = _block(raw, "params", _SECTIONS["params"])
    grid = _block(raw, "grid", _SECTIONS["grid"], _OPTIONAL_GRID)
    scenario = raw.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
    options = raw.get("options", {})
    if not isinstance(options, dict):
        raise ConfigError("options must be an object")
    bad = set(options) - _OPTIONS
    if bad:
        raise ConfigError(f"unknown options: {sorted(bad)}")
    if "map" in options:
        m = options["map"]
        if not isinstance(m, dict) or set(m) - _MAP_KEYS:
            raise ConfigError(f"options.map takes keys {sorted(_MAP_KEYS)}")
    output = raw.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output must be a path string")
    n = grid["n"]
    if n != int(n) or n < 5:
        raise ConfigError("grid.n must be an integer >= 5")
    for key in ("dt", "t_end"):
        if key in grid and grid[key] <= 0:
            raise ConfigError(f"grid.{key} must be positive")
    try:
        geom = DendriteGeometry(**geo)
        params = CableParams(**par)
    except DomainError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    digest = hashlib.sha256(text.encode()).hexdigest()
    return RunConfig(geom, params, int(n), grid.get("dt"), grid.get("t_end"), scenario, options, output, digest)


def _opt(cfg: RunConfig, key, default):
    value = cfg.options.get(key, default)
    if isinstance(default, float):
        return _number("options", key, value)
    return value


def analytic_solution(cfg: RunConfig) -> Callable:
    """Closed-form solution named by the scenario, in the geometry's regime."""
    geom, params, scen = cfg.geom, cfg.params, cfg.scenario
    regime = geom.regime
    if scen == "zero":
        return lambda x, t: np.zeros(np.broadcast(np.asarray(x), np.asarray(t)).shape)
    if scen == "bessel_mode":
        if not geom.has_z_map:
            raise ConfigError("bessel_mode needs a != 0 and nu != 2")
        mode = ModeSpec(_opt(cfg, "E", 1.0), _opt(cfg, "A", 1.0), _opt(cfg, "B", 0.0))
        return general_solution(params, geom, mode)
    if regime is Regime.GENERAL:
        raise ConfigError(f"scenario {scen!r} is not available for the general profile; use bessel_mode")
    D = diffusivity(geom, params)
    if scen == "cosine_mode":
        k = _opt(cfg, "k", 1.0)
        if regime is Regime.CYLINDRICAL:
            return cylindrical_mode(params, geom, k)
        return parabolic_solution(params, geom, CosineMode(D, k))
    if scen == "heat_kernel":
        t0, center = _opt(cfg, "t0", 1.0), _opt(cfg, "center", 0.5 * (geom.x_min + geom.x_max))
        if regime is Regime.CYLINDRICAL:
            return cylindrical_kernel(params, geom, t0, center)
        return parabolic_solution(params, geom, HeatKernel(D, t0, center))
    if regime is Regime.CYLINDRICAL:
        return cylindrical_mode(params, geom, 0.0)
    return parabolic_solution(params, geom, ConstantMode())


def _header(cfg: RunConfig, command: str):
    return [
        f"conformal-cable {__version__}",
        f"command: {command}",
        f"config-sha256: {cfg.digest}",
        f"seed: {cfg.seed}",
    ]


def _need_time(cfg):
    if cfg.dt is None or cfg.t_end is None:
        raise ConfigError("grid.dt and grid.t_end are required for this command")
    return cfg.dt, cfg.t_end


def _boundary(cfg, solution):
    kind = cfg.options.get("boundary", "sealed")
    if kind == "sealed":
        return BoundaryCondition.sealed()
    if kind == "clamped":
        return BoundaryCondition.clamped()
    if kind == "analytic":
        xl, xr = cfg.geom.x_min, cfg.geom.x_max
        return BoundaryCondition.clamped(lambda t: float(solution(xl, t)), lambda t: float(solution(xr, t)))
    raise ConfigError("options.boundary is 'sealed', 'clamped' or 'analytic'")


def _save_every(cfg):
    s = cfg.options.get("save_every", 1)
    if not isinstance(s, int) or isinstance(s, bool) or s < 1:
        raise ConfigError("options.save_every must be a positive integer")
    return s


def _write(dest, writer):
    if dest in (None, "-"):
        writer(sys.stdout)
    else:
        with open(dest, "w", newline="") as fh:
            writer(fh)


def cmd_simulate(cfg: RunConfig, out: Optional[str]) -> int:
    dt, t_end = _need_time(cfg)
    sol = analytic_solution(cfg)
    grid = Grid1D.on(cfg.geom, cfg.n)
    V0 = np.asarray(sol(grid.x, 0.0), dtype=float) * np.ones(grid.n)
    field_ = solve(cfg.geom, cfg.params, grid, _boundary(cfg, sol), V0, dt, t_end, save_every=_save_every(cfg))
    _write(out, lambda fh: write_field_csv(field_, fh, _header(cfg, "simulate")))
    return EXIT_OK


def _levels(cfg, default):
    levels = cfg.options.get("levels", default)
    if not isinstance(levels, list) or len(levels) < 2 or not all(isinstance(n, int) and n >= 5 for n in levels):
        raise ConfigError("options.levels must be a list of at least two integers >= 5")
    return levels


def cmd_compare(cfg: RunConfig, out: Optional[str]) -> int:
    dt, t_end = _need_time(cfg)
    if cfg.scenario == "zero":
        raise ConfigError("compare needs a non-trivial analytic scenario")
    sol = analytic_solution(cfg)
    n0 = cfg.n
    levels = _levels(cfg, [n0, 2 * n0 - 1, 4 * n0 - 3])
    save = _save_every(cfg)
    rows, finals = [], []
    for n in levels:
        grid = Grid1D.on(cfg.geom, n)
        level_dt = dt * (n0 - 1) / (n - 1)
        field_ = solve(
            cfg.geom, cfg.params, grid, _boundary(cfg, sol), sol(grid.x, 0.0) * np.ones(n), level_dt, t_end,
            save_every=save * (n - 1) // (n0 - 1),
        )
        exact = sol(grid.x[None, :], field_.times[:, None])
        err = field_.values - exact
        for k, t in enumerate(field_.times):
            l2 = math.sqrt(grid.h * float(np.sum(err[k] ** 2)))
            ref = math.sqrt(grid.h * float(np.sum(exact[k] ** 2)))
            rows.append([n, grid.h, level_dt, t, l2, l2 / ref if ref else math.inf, float(np.max(np.abs(err[k])))])
        finals.append(rows[-1][5])
    orders = convergence_orders(finals)

    def writer(fh):
        for line in _header(cfg, "compare"):
            fh.write(f"# {line}\n")
        for n, o in zip(levels[1:], orders):
            fh.write(f"# order n={n}: {o:.6f}\n")
        fh.write("n,h,dt,t,l2_error,rel_l2_error,linf_error\n")
        for r in rows:
            fh.write("%d,%s\n" % (r[0], ",".join("%.17g" % v for v in r[1:])))

    _write(out, writer)
    tol = cfg.options.get("tolerance")
    if tol is not None and finals[0] > _number("options", "tolerance", tol):
        return EXIT_VERIFY
    return EXIT_OK


def _map_from(cfg) -> ConformalMap:
    m = {k: _number("options.map", k, v) for k, v in cfg.options["map"].items()}
    try:
        if "l" in m:
            return ConformalMap(**m)
        return ConformalMap.from_mobius(
            m.get("alpha", 1.0), m.get("beta", 0.0), m.get("gamma", 0.0), m.get("delta", 1.0), m.get("v", 0.0), m.get("c", 0.0)
        )
    except ValueError as exc:
        raise ConfigError(f"options.map: {exc}") from None


def _check_window(cmap: ConformalMap, t_window):
    back = cmap.alpha - cmap.gamma * np.asarray(t_window, dtype=float)
    if back[0] * back[1] <= 0:
        raise SingularTimeError("gamma*t + delta crosses zero on the time window")


def cmd_symmetry(cfg: RunConfig, out: Optional[str], negative: bool = False) -> int:
    if cfg.scenario == "zero":
        raise ConfigError("symmetry needs a non-trivial analytic scenario")
    sol = analytic_solution(cfg)
    t_window = tuple(float(v) for v in cfg.options.get("t_window", [0.1, 0.6]))
    if len(t_window) != 2 or not t_window[0] < t_window[1]:
        raise ConfigError("options.t_window must be [t_start, t_end] with t_start < t_end")
    x_window = cfg.options.get("x_window")
    if x_window is not None:
        x_window = tuple(float(v) for v in x_window)
    levels = _levels(cfg, [201, 401, 801])
    restricted = cfg.geom.regime is Regime.GENERAL
    if "map" in cfg.options:
        maps = [_map_from(cfg)]
        if restricted and not maps[0].is_restricted:
            raise RegimeError("v and c must vanish for the general profile")
        _check_window(maps[0], t_window)
    else:
        count = cfg.options.get("maps", 10)
        if not isinstance(count, int) or count < 1:
            raise ConfigError("options.maps must be a positive integer")
        rng = np.random.default_rng(cfg.seed)
        maps = [random_map(rng, t_window, restricted=restricted) for _ in range(count)]
    results = []
    for cmap in maps:
        alt = competing_transform(cmap, cfg.geom, cfg.params, sol) if negative else None
        results.append(check_invariance(cmap, cfg.geom, cfg.params, sol, t_window, levels, x_window, alt))
    _write(out, lambda fh: write_invariance_csv(results, fh, _header(cfg, "symmetry")))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def cmd_algebra(cfg: RunConfig, out: Optional[str], negative: bool = False) -> int:
    levels = _levels(cfg, [201, 401, 801])
    t = _opt(cfg, "t", 0.0)
    report = certify(cfg.geom, cfg.params, t, levels, include_corrupted=negative)
    _write(out, lambda fh: write_algebra_csv(report, fh, _header(cfg, "algebra")))
    return EXIT_OK if report.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conformal-cable", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=("simulate", "compare", "symmetry", "algebra"))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="CSV destination (default: config 'output', else stdout)")
    parser.add_argument(
        "--self-test-negative",
        action="store_true",
        help="run a check that is expected to fail (algebra: corrupted relation; symmetry: competing closed forms)",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
        out = args.out or cfg.output
        if args.command == "simulate":
            if args.self_test_negative:
                raise ConfigError("--self-test-negative applies to symmetry and algebra")
            return cmd_simulate(cfg, out)
        if args.command == "compare":
            if args.self_test_negative:
                raise ConfigError("--self-test-negative applies to symmetry and algebra")
            return cmd_compare(cfg, out)
        if args.command == "symmetry":
            return cmd_symmetry(cfg, out, args.self_test_negative)
        return cmd_algebra(cfg, out, args.self_test_negative)
    except (OSError, ConfigError, DomainError, RegimeError, UnsupportedOrderError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, NonFiniteFieldError, FloatingPointError, OverflowError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
