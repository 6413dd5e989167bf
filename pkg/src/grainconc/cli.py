"""Command-line front end: bound tables, simulations and comparison reports.

Subcommands
-----------
bound            evaluate the requested bound families on the deviation grid
simulate         estimate the empirical tail of the covered volume
compare          join bounds and simulation; flag any bound violations
verify-identity  run the finite-space verification battery

All commands read a JSON config (``--config``), write plot-ready CSV into the
output directory and exit 0 on success, 2 on a config error and 3 when
``compare`` detects a bound violation.  Outputs are byte-identical across
runs with the same config and seed.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np
import scipy.stats

from . import bounds as _bounds
from . import measure as _measure
from . import simulate as _sim
from .errors import ConfigError, DomainError
from .testbed import verification_battery

__all__ = ["main", "RunConfig", "load_config"]

_FMT = ".12g"


def _fmt(x):
    return format(float(x), _FMT)


# ---------------------------------------------------------------------------
# configuration


@dataclass(eq=True)
class RunConfig:
    """Validated run configuration; round-trips exactly through to_dict."""

    seed: int = 0
    output_dir: str = "out"
    dimension: int = None
    germ_intensity: float = None
    grain: dict = None
    volume_law: dict = None
    window_lower: tuple = None
    window_upper: tuple = None
    r_min: float = None
    r_max: float = None
    r_count: int = None
    r_spacing: str = "linear"
    bounds: tuple = ()
    n_reps: int = 1000
    volume_method: str = "auto"
    n_points: int = 8192
    ci_level: float = 0.95
    nu_star_samples: int = 100_000
    checks: tuple = None

    def to_dict(self):
        out = {"seed": self.seed, "output_dir": self.output_dir}
        if self.dimension is not None:
            model = {"dimension": self.dimension, "germ_intensity": self.germ_intensity}
            if self.grain is not None:
                model["grain"] = dict(self.grain)
            if self.volume_law is not None:
                model["volume_law"] = dict(self.volume_law)
            out["model"] = model
        if self.window_lower is not None:
            out["window"] = {"lower": list(self.window_lower), "upper": list(self.window_upper)}
        if self.r_min is not None:
            out["r_grid"] = {
                "min": self.r_min,
                "max": self.r_max,
                "count": self.r_count,
                "spacing": self.r_spacing,
            }
        if self.bounds:
            out["bounds"] = list(self.bounds)
        out["simulation"] = {
            "n_reps": self.n_reps,
            "volume_method": self.volume_method,
            "n_points": self.n_points,
            "ci_level": self.ci_level,
            "nu_star_samples": self.nu_star_samples,
        }
        if self.checks is not None:
            out["checks"] = list(self.checks)
        return out

    # derived objects -------------------------------------------------

    def r_grid(self):
        if self.r_min is None:
            raise ConfigError("config is missing an r_grid section")
        if self.r_spacing == "linear":
            return np.linspace(self.r_min, self.r_max, self.r_count)
        return np.geomspace(self.r_min, self.r_max, self.r_count)

    def window(self):
        if self.window_lower is None:
            raise ConfigError("config is missing a window section")
        return _sim.Window(self.window_lower, self.window_upper)

    def grain_model(self):
        if self.grain is None:
            return None
        return _grain_from_dict(self.grain)

    def model_spec(self):
        grain = self.grain_model()
        if grain is None:
            raise ConfigError("this command requires a grain shape in the model")
        return _sim.BooleanModelSpec(self.dimension, self.germ_intensity, grain)

    def law(self):
        if self.volume_law is not None:
            return _law_from_dict(self.volume_law)
        if self.grain is not None:
            return _measure.volume_law_for(self.model_spec())
        return None

    def summary(self):
        window = self.window()
        if self.grain is not None:
            return _bounds.StationaryModelSummary.from_model(self.model_spec(), window)
        law = self.law()
        if law is None:
            raise ConfigError("the model needs either a grain or a volume_law")
        gamma1 = self.germ_intensity * law.mean()
        gamma2 = self.germ_intensity * law.second_moment()
        if not gamma1 > 0:
            raise ConfigError("the volume intensity gamma1 must be positive")
        return _bounds.StationaryModelSummary.from_intensity(gamma1, gamma2, window.volume)


def _grain_from_dict(d):
    kind = d.get("kind")
    if kind == "fixed_ball":
        return _sim.FixedBall(radius=float(d["radius"]))
    if kind == "fixed_interval":
        return _sim.FixedInterval(length=float(d["length"]))
    if kind == "fixed_box":
        return _sim.FixedBox(sides=tuple(float(s) for s in d["sides"]))
    if kind == "random_ball":
        dist_name = d["dist"]
        params = {k: v for k, v in d.items() if k not in ("kind", "dist", "truncation_quantile")}
        try:
            frozen = getattr(scipy.stats, dist_name)(**params)
        except (AttributeError, TypeError) as exc:
            raise ConfigError(f"bad radius law {dist_name!r}: {exc}") from exc
        quantile = float(d.get("truncation_quantile", 1.0 - 1e-6))
        return _sim.RandomBall(frozen, quantile)
    raise ConfigError(f"unknown grain kind {kind!r}")


def _law_from_dict(d):
    kind = d.get("kind")
    if kind == "point_mass":
        return _measure.PointMassVolume(float(d["volume"]))
    if kind == "gamma":
        return _measure.GammaVolume(float(d["shape"]), float(d["rate"]))
    if kind == "gamma_levy":
        return _measure.GammaLevyVolume(float(d["shape"]), float(d["rate"]))
    if kind == "exponential":
        return _measure.ExponentialVolume(float(d["rate"]))
    if kind == "empirical":
        atoms = d["atoms"]
        return _measure.EmpiricalVolume(
            _measure.DiscreteMeasure([a[0] for a in atoms], [a[1] for a in atoms])
        )
    raise ConfigError(f"unknown volume law kind {kind!r}")


def load_config(path, seed_override=None, out_override=None):
    """Load and validate a JSON config; raises ConfigError with the reason."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    return parse_config(raw, seed_override, out_override)


def parse_config(raw, seed_override=None, out_override=None):
    cfg = RunConfig()
    cfg.seed = int(raw.get("seed", 0)) if seed_override is None else int(seed_override)
    cfg.output_dir = str(raw.get("output_dir", "out")) if out_override is None else str(out_override)

    model = raw.get("model")
    if model is not None:
        cfg.dimension = int(model.get("dimension", 0))
        if cfg.dimension not in (1, 2, 3):
            raise ConfigError("model.dimension must be 1, 2 or 3")
        cfg.germ_intensity = float(model.get("germ_intensity", -1.0))
        if not cfg.germ_intensity >= 0:
            raise ConfigError("model.germ_intensity must be nonnegative")
        if "grain" in model and "volume_law" in model:
            raise ConfigError("model takes either grain or volume_law, not both")
        if "grain" not in model and "volume_law" not in model:
            raise ConfigError("model needs a grain or a volume_law")
        cfg.grain = dict(model["grain"]) if "grain" in model else None
        cfg.volume_law = dict(model["volume_law"]) if "volume_law" in model else None

    window = raw.get("window")
    if window is not None:
        cfg.window_lower = tuple(float(v) for v in window["lower"])
        cfg.window_upper = tuple(float(v) for v in window["upper"])

    grid = raw.get("r_grid")
    if grid is not None:
        cfg.r_min = float(grid["min"])
        cfg.r_max = float(grid["max"])
        cfg.r_count = int(grid["count"])
        cfg.r_spacing = str(grid.get("spacing", "linear"))
        if cfg.r_min <= 0 or cfg.r_max < cfg.r_min:
            raise ConfigError("r_grid must satisfy 0 < min <= max")
        if cfg.r_count < 1:
            raise ConfigError("r_grid.count must be at least 1")
        if cfg.r_spacing not in ("linear", "log"):
            raise ConfigError("r_grid.spacing must be 'linear' or 'log'")

    cfg.bounds = tuple(str(b) for b in raw.get("bounds", ()))
    for tid in cfg.bounds:
        if tid not in _bounds.THEOREM_IDS:
            raise ConfigError(f"unknown theorem id {tid!r}")

    sim = raw.get("simulation", {})
    cfg.n_reps = int(sim.get("n_reps", 1000))
    cfg.volume_method = str(sim.get("volume_method", "auto"))
    cfg.n_points = int(sim.get("n_points", 8192))
    cfg.ci_level = float(sim.get("ci_level", 0.95))
    cfg.nu_star_samples = int(sim.get("nu_star_samples", 100_000))
    if cfg.volume_method not in ("auto", "exact_1d", "grid", "quasi_mc"):
        raise ConfigError(f"unknown volume method {cfg.volume_method!r}")
    if not 0.5 < cfg.ci_level < 1.0:
        raise ConfigError("simulation.ci_level must lie in (0.5, 1)")
    if cfg.n_points < 1:
        raise ConfigError("simulation.n_points must be positive")

    if "checks" in raw:
        cfg.checks = tuple(str(c) for c in raw["checks"])
        if not cfg.checks:
            raise ConfigError("checks must not be empty when given")

    # validate model construction and bound applicability eagerly
    if cfg.grain is not None:
        try:
            cfg.model_spec()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if cfg.bounds:
        if cfg.dimension is None:
            raise ConfigError("bounds require a model section")
        if cfg.window_lower is None:
            raise ConfigError("bounds require a window section")
        try:
            ctx = _build_context(cfg, with_nu_star=False)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if cfg.grain is not None:
            # applicability only needs to know a jump measure will be
            # constructible; the real discretization is built per command
            ctx.nu_star = _measure.DiscreteMeasure.point_mass(1.0)
        for tid in cfg.bounds:
            problem = _bounds.applicability_error(tid, ctx)
            if problem:
                raise ConfigError(f"bound {tid}: {problem}")
    return cfg


# ---------------------------------------------------------------------------
# shared model assembly


def _build_context(cfg, with_nu_star=True):
    window = cfg.window()
    summary = cfg.summary()
    law = cfg.law()
    ctx = _bounds.BoundContext(summary=summary, law=law)
    if cfg.grain is not None:
        spec = cfg.model_spec()
        ctx.a = min(window.volume, spec.grain.max_volume(spec.dimension))
        if isinstance(law, _measure.PointMassVolume):
            ctx.grain_volume = law.volume
        if with_nu_star:
            ctx.nu_star = _load_or_build_nu_star(cfg, spec, window)
    else:
        ctx.a = window.volume
    return ctx


def _load_or_build_nu_star(cfg, spec, window):
    cache = os.path.join(cfg.output_dir, "nu_star.csv")
    if os.path.exists(cache):
        return _measure.DiscreteMeasure.from_csv(cache)
    nu_star = _measure.stationary_jump_measure(spec, window, cfg.nu_star_samples, cfg.seed)
    os.makedirs(cfg.output_dir, exist_ok=True)
    nu_star.to_csv(cache)
    return nu_star


def _needs_nu_star(bound_ids):
    return any(tid in ("T3_5", "T3_7", "C3_8_i0", "C3_8_i1", "C3_8_i2") for tid in bound_ids)


def _write_rows(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_bound(cfg):
    if not cfg.bounds:
        raise ConfigError("the bound command needs a nonempty bounds list")
    os.makedirs(cfg.output_dir, exist_ok=True)
    ctx = _build_context(cfg, with_nu_star=_needs_nu_star(cfg.bounds))
    r_grid = cfg.r_grid()
    curves = []
    for tid in cfg.bounds:
        curve = _bounds.evaluate_curve(tid, ctx, r_grid)
        curve.to_csv(os.path.join(cfg.output_dir, f"bound_{tid}.csv"))
        curves.append(curve)

    rows = []
    for r in r_grid:
        row = [_fmt(r)]
        for curve in curves:
            try:
                row.append(_fmt(curve.value_at(r)))
            except KeyError:
                row.append("")
        best_id, _ = _bounds.best_bound(curves, float(r))
        row.append(best_id)
        rows.append(row)
    _write_rows(
        os.path.join(cfg.output_dir, "bounds_merged.csv"),
        ["r"] + list(cfg.bounds) + ["best_bound"],
        rows,
    )
    return 0


def _run_simulation(cfg):
    if cfg.n_reps < 100:
        raise ConfigError("simulation.n_reps must be at least 100")
    spec = cfg.model_spec()
    window = cfg.window()
    tail = _sim.estimate_tail(
        spec,
        window,
        cfg.r_grid(),
        cfg.n_reps,
        cfg.seed,
        method=cfg.volume_method,
        n_points=cfg.n_points,
        ci_level=cfg.ci_level,
    )
    frac, frac_se = _sim.estimate_volume_fraction(
        spec, window, min(cfg.n_points, 1024), max(100, cfg.n_reps // 10), cfg.seed + 1
    )
    gamma1 = spec.gamma1()
    meta = {
        "dimension": spec.dimension,
        "germ_intensity": spec.germ_intensity,
        "gamma1": gamma1,
        "gamma2": spec.gamma2(),
        "volume_fraction_analytic": spec.volume_fraction(),
        "volume_fraction_empirical": frac,
        "volume_fraction_se": frac_se,
        "window_volume": window.volume,
        "mean_f_analytic": spec.volume_fraction() * window.volume,
        "mean_f_empirical": tail.mean_f_hat,
        "mean_f_se": tail.se_mean,
        "mean_f_reference_used": tail.mean_f_ref,
        "truncation_bias_gamma1": spec.germ_intensity
        * spec.grain.gamma1_truncation_bias(spec.dimension),
        "model_exact": spec.grain.is_exact,
        "n_reps": cfg.n_reps,
        "ci_level": cfg.ci_level,
        "seed": cfg.seed,
    }
    return tail, meta


def cmd_simulate(cfg):
    tail, meta = _run_simulation(cfg)
    os.makedirs(cfg.output_dir, exist_ok=True)
    tail.to_csv(os.path.join(cfg.output_dir, "tail.csv"))
    with open(os.path.join(cfg.output_dir, "metadata.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def cmd_compare(cfg):
    if not cfg.bounds:
        raise ConfigError("the compare command needs a nonempty bounds list")
    tail, meta = _run_simulation(cfg)
    ctx = _build_context(cfg, with_nu_star=_needs_nu_star(cfg.bounds))
    r_grid = cfg.r_grid()
    curves = [_bounds.evaluate_curve(tid, ctx, r_grid) for tid in cfg.bounds]

    violations = 0
    rows = []
    for i, r in enumerate(r_grid):
        row = [_fmt(r), _fmt(tail.tail_hat[i]), _fmt(tail.ci_low[i]), _fmt(tail.ci_high[i])]
        values = {}
        for curve in curves:
            try:
                values[curve.theorem_id] = curve.value_at(r)
                row.append(_fmt(values[curve.theorem_id]))
            except KeyError:
                row.append("")
        best_id, best_value = _bounds.best_bound(curves, float(r))
        flag = 1 if tail.ci_low[i] > best_value + 1e-12 else 0
        violations += flag
        row += [best_id, str(flag)]
        rows.append(row)

    os.makedirs(cfg.output_dir, exist_ok=True)
    tail.to_csv(os.path.join(cfg.output_dir, "tail.csv"))
    with open(os.path.join(cfg.output_dir, "metadata.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_rows(
        os.path.join(cfg.output_dir, "compare.csv"),
        ["r", "tail", "ci_low", "ci_high"] + list(cfg.bounds) + ["best_bound", "violation_flag"],
        rows,
    )
    if violations:
        print(f"bound violations detected at {violations} grid point(s)", file=sys.stderr)
        return 3
    return 0


def cmd_verify_identity(cfg):
    rows = verification_battery(cfg.seed, n_samples=100_000, checks=cfg.checks)
    _write_rows(
        os.path.join(cfg.output_dir, "verify.csv"),
        ["check_name", "statistic", "threshold", "pass"],
        [[row.name, _fmt(row.statistic), _fmt(row.threshold), str(int(row.passed))] for row in rows],
    )
    return 0


# ---------------------------------------------------------------------------
# entry point


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="grainconc",
        description="Tail bounds and Monte Carlo validation for germ-grain coverage models",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("bound", "evaluate bound curves on the deviation grid"),
        ("simulate", "estimate the empirical tail of the covered volume"),
        ("compare", "join bounds with simulation and flag violations"),
        ("verify-identity", "run the finite-space verification battery"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="path to the JSON run config")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
        cmd.add_argument("--out", default=None, help="override the output directory")

    args = parser.parse_args(argv)
    handlers = {
        "bound": cmd_bound,
        "simulate": cmd_simulate,
        "compare": cmd_compare,
        "verify-identity": cmd_verify_identity,
    }
    try:
        cfg = load_config(args.config, seed_override=args.seed, out_override=args.out)
        return handlers[args.command](cfg)
    except (ConfigError, DomainError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
