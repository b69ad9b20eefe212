"""Command-line front end: analysis, simulation, figure sweeps and validation."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import optimizer, relay, rrs, searchspace, sim, validation
from .config import ConfigError, PowerSplit, SystemConfig, db_to_linear
from .numerics import ConvergenceError

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

CONFIG_KEYS = {
    "mean_load", "channels", "max_per_channel", "alpha", "mu", "theta", "tau",
    "phi1_db", "phi2_db", "delta", "a1", "rho", "seed",
    "payload_bits", "relay_time", "bandwidth", "rank_a1",
}

FIGURE_REPLICATIONS = 20_000


class RecipeError(RuntimeError):
    """A sweep point failed; the message names the point."""


# ---------------------------------------------------------------------------
# Configuration


def parse_config(text: str, source: str = "<config>") -> tuple[SystemConfig, Optional[int]]:
    """Build a SystemConfig (and optional seed) from a JSON document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    unknown = sorted(set(doc) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"{source}: unknown keys: {', '.join(unknown)}")

    kwargs = {}
    for key in ("mean_load", "alpha", "mu", "theta", "tau", "rho"):
        if key in doc:
            kwargs[key] = float(doc[key])
    for key in ("channels", "max_per_channel"):
        if key in doc:
            value = doc[key]
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{source}: {key} must be an integer")
            kwargs[key] = value
    if "phi1_db" in doc:
        kwargs["phi1"] = db_to_linear(float(doc["phi1_db"]))
    if "phi2_db" in doc:
        kwargs["phi2"] = db_to_linear(float(doc["phi2_db"]))

    triple = [k for k in ("payload_bits", "relay_time", "bandwidth") if k in doc]
    if triple:
        if len(triple) != 3:
            raise ConfigError(f"{source}: payload_bits, relay_time and bandwidth go together")
        if "tau" in doc:
            raise ConfigError(f"{source}: give either tau or (payload_bits, relay_time, bandwidth)")
        t, w = float(doc["relay_time"]), float(doc["bandwidth"])
        if not (t > 0 and w > 0):
            raise ConfigError(f"{source}: relay_time and bandwidth must be positive")
        kwargs["tau"] = float(doc["payload_bits"]) / (t * w)

    delta = float(doc.get("delta", 1.0))
    if not delta > 0:
        raise ConfigError(f"{source}: delta must be positive")
    a1 = float(doc["a1"]) if "a1" in doc else delta / 2.0
    if not 0.0 <= a1 <= delta:
        raise ConfigError(f"{source}: a1 must lie in [0, delta]")
    kwargs["split"] = PowerSplit.from_a1(a1, delta)
    if "rank_a1" in doc:
        kwargs["rank_splits"] = tuple(PowerSplit.from_a1(float(a), delta) for a in doc["rank_a1"])

    seed = doc.get("seed")
    if seed is not None and (not isinstance(seed, int) or not 0 <= seed < 2 ** 64):
        raise ConfigError(f"{source}: seed must be an unsigned 64-bit integer")
    return SystemConfig(**kwargs), seed


def load_config(path) -> SystemConfig:
    return load_config_and_seed(path)[0]


def load_config_and_seed(path) -> tuple[SystemConfig, Optional[int]]:
    text = Path(path).read_text(encoding="utf-8")
    return parse_config(text, str(path))


# ---------------------------------------------------------------------------
# CSV


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.10g" % float(value)
    return str(value)


def write_csv(path: Optional[Path], header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# Recipes


@dataclass(frozen=True)
class ExperimentRecipe:
    name: str
    header: tuple[str, ...]
    points: tuple
    evaluate: Callable   # (base cfg, point, replications, seed) -> list of rows
    simulate: bool = True

    def __post_init__(self) -> None:
        if any(not a < b for a, b in zip(self.points, self.points[1:])):
            raise ValueError(f"{self.name}: sweep grid must be strictly increasing")


def _sim_kbar(cfg: SystemConfig, scheme: str, replications: int, seed: int) -> tuple[float, float]:
    return sim.run(sim.SimSpec(cfg, scheme, replications, seed), workers=1).kbar_ar


def _searchspace_point(cfg, n, replications, seed):
    return [[n] + [searchspace.avg_dim(m, n) for m in (10.0, 20.0, 60.0, 120.0)]]


def _schemes_row(cfg: SystemConfig, replications: int, seed: int, pmfs=None) -> list:
    row = []
    pmfs = pmfs or {}
    for scheme in ("rrs", "crs", "oma"):
        row.append(relay.evaluate(cfg, scheme, pmfs.get(scheme)).overall)
    if replications:
        for offset, scheme in enumerate(("rrs", "crs", "oma")):
            row.extend(_sim_kbar(cfg, scheme, replications, seed + offset))
    return row


def _served_vs_n_point(cfg, n, replications, seed):
    c = cfg.replace(channels=n)
    pmfs = {s: relay.scheme_pmf(c, s) for s in ("rrs", "crs", "oma")}
    return [[n, tau] + _schemes_row(c.replace(tau=tau), replications, seed + 10 * i, pmfs)
            for i, tau in enumerate((0.1, 0.3))]


def _served_vs_phi2_point(cfg, point, replications, seed):
    phi1_db, phi2_db = point
    c = cfg.replace(phi1=db_to_linear(phi1_db), phi2=db_to_linear(phi2_db))
    pmfs = {s: _cached_pmf(c.replace(phi2=cfg.phi2), s) for s in ("rrs", "crs", "oma")}
    return [[phi1_db, phi2_db] + _schemes_row(c, replications, seed, pmfs)]


_PMF_CACHE: dict = {}


def _cached_pmf(cfg: SystemConfig, scheme: str):
    key = (cfg, scheme)
    if key not in _PMF_CACHE:
        _PMF_CACHE[key] = relay.scheme_pmf(cfg, scheme)
    return _PMF_CACHE[key]


def _a1_vs_phi1_point(cfg, point, replications, seed):
    mu, phi1_db = point
    c = cfg.replace(mu=mu, phi1=db_to_linear(phi1_db))
    eq = optimizer.equal_reliability_a1(c, region="positive")
    best = optimizer.max_served_a1(c, "aggregation")
    return [[mu, phi1_db, eq.a1, eq.degenerate, best.a1, best.value, best.flat]]


def _served_vs_delta_point(cfg, point, replications, seed):
    tau, delta = point
    best = optimizer.max_served_a1(cfg.replace(tau=tau, delta=delta), "end-to-end")
    return [[tau, delta, best.a1, best.value, best.flat]]


def _served_vs_mu_point(cfg, mu, replications, seed):
    c = cfg.replace(mu=mu)
    return [[mu] + _schemes_row(c, replications, seed)]


_SCHEME_COLS = ("kbar_rrs_analytic", "kbar_crs_analytic", "kbar_oma_analytic")
_SIM_COLS = ("kbar_rrs_sim", "kbar_rrs_sim_stderr", "kbar_crs_sim", "kbar_crs_sim_stderr",
             "kbar_oma_sim", "kbar_oma_sim_stderr")


def recipes() -> dict[str, ExperimentRecipe]:
    phi2_grid = tuple(float(x) for x in range(-40, -8, 2))
    phi1_grid = tuple(float(x) for x in range(-20, 1))
    return {r.name: r for r in (
        ExperimentRecipe("fig-searchspace", ("N", "avg_dim_m10", "avg_dim_m20", "avg_dim_m60", "avg_dim_m120"),
                         tuple(range(5, 51)), _searchspace_point, simulate=False),
        ExperimentRecipe("fig-served-vs-N", ("N", "tau") + _SCHEME_COLS + _SIM_COLS,
                         tuple(range(5, 61, 5)), _served_vs_n_point),
        ExperimentRecipe("fig-served-vs-phi2", ("phi1_db", "phi2_db") + _SCHEME_COLS + _SIM_COLS,
                         tuple((p1, p2) for p1 in (-15.0, -5.0) for p2 in phi2_grid), _served_vs_phi2_point),
        ExperimentRecipe("fig-a1-vs-phi1", ("mu", "phi1_db", "a1_equal_reliability", "equal_reliability_degenerate",
                                            "a1_max_kbar", "kbar_max", "kbar_flat"),
                         tuple((mu, p) for mu in (0.0, 0.1) for p in phi1_grid), _a1_vs_phi1_point, simulate=False),
        ExperimentRecipe("fig-served-vs-delta", ("tau", "delta", "a1_opt", "kbar_ar_max", "flat"),
                         tuple((tau, d) for tau in (0.1, 0.3) for d in (0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0)),
                         _served_vs_delta_point, simulate=False),
        ExperimentRecipe("fig-served-vs-mu", ("mu",) + _SCHEME_COLS + _SIM_COLS,
                         tuple(round(0.05 * i, 2) for i in range(21)), _served_vs_mu_point),
    )}


RECIPE_NAMES = ("fig-searchspace", "fig-served-vs-N", "fig-served-vs-phi2", "fig-a1-vs-phi1",
                "fig-served-vs-delta", "fig-served-vs-mu", "validate-all")


def _evaluate_point(recipe_name: str, cfg: SystemConfig, index: int, point, replications: int, seed: int):
    recipe = recipes()[recipe_name]
    try:
        return recipe.evaluate(cfg, point, replications, seed + 1000 * index)
    except (ValueError, ArithmeticError, ConvergenceError) as exc:
        raise RecipeError(f"{recipe_name}: sweep point {point!r}: {type(exc).__name__}: {exc}") from exc


def run_recipe(name: str, cfg: SystemConfig, out_dir: Path, seed: int,
               replications: Optional[int] = None, workers: Optional[int] = None) -> Path:
    """Evaluate every sweep point of a recipe and write ``<out_dir>/<name>.csv``."""
    if name == "validate-all":
        return run_validate_all(out_dir, seed, replications, workers)
    recipe = recipes()[name]
    reps = 0 if not recipe.simulate else (FIGURE_REPLICATIONS if replications is None else replications)
    if recipe.simulate and reps < 1000:
        raise ConfigError("simulation recipes need at least 1000 replications")
    workers = sim.worker_count() if workers is None else workers
    args = [(name, cfg, i, p, reps, seed) for i, p in enumerate(recipe.points)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate_point, *zip(*args)))
    else:
        results = [_evaluate_point(*a) for a in args]
    header = recipe.header
    rows = [row for block in results for row in block]
    path = out_dir / f"{name}.csv"
    write_csv(path, header, rows)
    return path


def run_validate_all(out_dir: Path, seed: int, replications: Optional[int] = None,
                     workers: Optional[int] = None) -> Path:
    reps = validation.DEFAULT_REPLICATIONS if replications is None else replications
    checks = validation.run_all(seed, reps, workers)
    path = out_dir / "validate-all.csv"
    write_csv(path, ("criterion", "name", "status", "measured", "threshold", "detail"),
              [(c.criterion, c.name, c.status, c.measured, c.threshold, c.detail) for c in checks])
    return path


# ---------------------------------------------------------------------------
# Subcommands


def _config_from_args(args) -> tuple[SystemConfig, int]:
    if args.config:
        cfg, file_seed = load_config_and_seed(args.config)
    else:
        cfg, file_seed = SystemConfig(), None
    seed = args.seed if args.seed is not None else (file_seed if file_seed is not None else 0)
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return cfg, seed


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_analyze(args) -> int:
    cfg, _ = _config_from_args(args)
    scheme = args.scheme or "rrs"
    if scheme == "opt-tiny":
        raise ConfigError("opt-tiny has no analytical model; use simulate")
    c = cfg.replace(max_per_channel=1) if scheme == "oma" else cfg
    result = relay.evaluate(cfg, scheme)
    pmf = relay.scheme_pmf(cfg, scheme)
    summary = {"scheme": scheme, "kbar": result.aggregated, "kbar_ar": result.overall,
               "truncation_mass": pmf.truncation_mass}
    p11, p12, p22 = rrs.success_probabilities(c)
    summary.update(p11=p11, p12=p12, p22=p22)
    _emit(summary)
    if args.out:
        write_csv(Path(args.out) / f"analyze-{scheme}.csv", ("k1", "probability", "relay_success"),
                  zip(pmf.support, pmf.probabilities, result.per_k1))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg, seed = _config_from_args(args)
    scheme = args.scheme or "rrs"
    spec = sim.SimSpec(cfg, scheme, args.replications or FIGURE_REPLICATIONS, seed, args.condition_k,
                       args.full_interference_on_failure)
    report = sim.run(spec)
    summary = {"scheme": scheme, "replications": report.replications, "seed": seed,
               "kbar": list(report.kbar), "kbar_ar": list(report.kbar_ar)}
    for slot in sim.SLOTS:
        summary[f"p{slot}"] = list(report.slot_probability(slot))
    if report.paired_epochs:
        summary["cross_pairing_frequency"] = report.cross_pairings / report.paired_epochs
    _emit(summary)
    if args.out:
        pmf = report.pmf()
        rows = [(k, pmf[k], *report.relay_probability(k)) for k in range(len(pmf))]
        write_csv(Path(args.out) / f"simulate-{scheme}.csv",
                  ("k1", "probability", "relay_success", "relay_stderr"), rows)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, seed = _config_from_args(args)
    path = run_recipe(args.recipe, cfg, Path(args.out or "."), seed, args.replications)
    print(path)
    if args.recipe == "validate-all":
        return _validation_exit(path)
    return EXIT_OK


def _validation_exit(path: Path) -> int:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        print(f"criterion {row['criterion']}: {row['status']}  {row['name']}  ({row['detail']})")
    return EXIT_OK if all(r["status"] == "PASS" for r in rows) else EXIT_VALIDATION


def cmd_validate(args) -> int:
    _, seed = _config_from_args(args)
    path = run_validate_all(Path(args.out or "."), seed, args.replications)
    return _validation_exit(path)


def cmd_optimize(args) -> int:
    cfg, _ = _config_from_args(args)
    scheme = args.scheme or "rrs"
    out = {}
    for region in ("remark", "positive"):
        try:
            eq = optimizer.equal_reliability_a1(cfg, region=region)
            out[f"equal_reliability_{region}"] = {"a1": eq.a1, "gap": eq.gap, "degenerate": eq.degenerate}
        except optimizer.InfeasibleError as exc:
            out[f"equal_reliability_{region}"] = {"error": str(exc)}
    for objective in optimizer.OBJECTIVES:
        best = optimizer.max_served_a1(cfg, objective, scheme)
        out[f"max_{objective}"] = {"a1": best.a1, "value": best.value, "flat": best.flat}
    _emit(out)
    return EXIT_OK


def cmd_searchspace(args) -> int:
    cfg, _ = _config_from_args(args)
    n = cfg.channels
    log_value = searchspace.log_avg_dim(cfg.mean_load, n)
    _emit({"channels": n, "mean_load": cfg.mean_load, "log10_avg_dim": log_value / math.log(10.0)})
    if args.out:
        rows = searchspace.discrepancy_report()
        write_csv(Path(args.out) / "searchspace-counts.csv",
                  ("k", "n", "paper_count", "matching_count", "enumerated_paper", "enumerated_matching"),
                  rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmtc-agg", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON scenario file")
    common.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
    common.add_argument("--replications", type=int, help="Monte Carlo replications")
    common.add_argument("--out", help="output directory for CSV files")
    common.add_argument("--scheme", choices=("rrs", "crs", "oma", "opt-tiny"))
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("analyze", parents=[common], help="closed-form metrics").set_defaults(func=cmd_analyze)
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo run")
    p.add_argument("--condition-k", type=int, help="fix the number of requesting MTDs")
    p.add_argument("--full-interference-on-failure", action="store_true",
                   help="second decode sees the full first signal when the first decode fails")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("sweep", parents=[common], help="figure recipe to CSV")
    p.add_argument("recipe", choices=RECIPE_NAMES)
    p.set_defaults(func=cmd_sweep)
    sub.add_parser("optimize", parents=[common], help="power-split searches").set_defaults(func=cmd_optimize)
    sub.add_parser("searchspace", parents=[common], help="search-space size").set_defaults(func=cmd_searchspace)
    sub.add_parser("validate", parents=[common], help="acceptance table").set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RecipeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL if isinstance(exc.__cause__, ConvergenceError) else EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
