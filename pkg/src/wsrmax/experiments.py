"""Batch experiment runner: configs in, artifacts out.

A flat key=value config describes a family of random instances (scenario
parameters plus a seed list) and what to do with them: solve each one,
certify duality on each one, sweep the interference scale, or time the
iteration kernels. Every run writes self-contained artifacts -- the exact
network instance, the per-iteration trace, and a summary document -- so
results can be regenerated and diffed byte for byte from the config alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bench import benchmark_complexity
from .duality import certify_duality
from .network import Scenario, random_network, save_network
from .solver import MonotonicityError, SolverConfig, solve

CONFIG_FORMAT = "wsrmax-experiment"
CONFIG_VERSION = 1

EXIT_OK = 0
EXIT_BAD_CONFIG = 1
EXIT_SOLVER_ABORT = 2


class ConfigError(ValueError):
    """The experiment config is missing, malformed, or inconsistent."""


@dataclass
class ExperimentConfig:
    """Parsed experiment description.

    mode selects the action: "solve" and "certify" run per seed, "sweep"
    runs the seed list at each interference scale in `alphas`, and "bench"
    ignores seeds/scenario and times the iteration kernels.
    """

    mode: str = "solve"
    seeds: tuple[int, ...] = (0,)
    scenario: Scenario = field(default_factory=Scenario)
    solver: SolverConfig = field(default_factory=SolverConfig)
    alphas: tuple[float, ...] = (0.1, 1.0, 5.0)
    bench_links: tuple[int, ...] = (2, 4, 8, 16)
    bench_antennas: tuple[int, ...] = (2, 4, 8, 16)
    out: str | None = None

    def __post_init__(self):
        if self.mode not in ("solve", "certify", "sweep", "bench"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode != "bench" and not self.seeds:
            raise ConfigError("empty seed list")


_SCENARIO_KEYS = {
    "links": int,
    "tx": int,
    "rx": int,
    "alpha": float,
    "total_power": float,
    "n_cells": int,
    "constraint": str,
    "weight_low": float,
    "weight_high": float,
}
_SOLVER_KEYS = {
    "max_iters": int,
    "obj_tol": float,
    "kkt_tol": float,
    "rank_tol": float,
    "bisection_tol": float,
}
_LIST_KEYS = {"seeds", "alphas", "bench_links", "bench_antennas"}
_KNOWN_KEYS = (
    {"format", "version", "mode", "out"}
    | set(_SCENARIO_KEYS)
    | set(_SOLVER_KEYS)
    | _LIST_KEYS
)


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines into a raw string mapping.

    Blank lines and `#` comments are ignored; duplicate keys and lines
    without `=` are errors.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def _parse_list(value: str, cast):
    try:
        return tuple(cast(item.strip()) for item in value.split(",") if item.strip())
    except ValueError as exc:
        raise ConfigError(f"bad list value {value!r}") from exc


def config_from_mapping(raw: dict) -> ExperimentConfig:
    """Validate a raw key/value mapping and build an ExperimentConfig."""
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if raw.get("format", CONFIG_FORMAT) != CONFIG_FORMAT:
        raise ConfigError(f"unsupported config format {raw['format']!r}")
    try:
        version = int(raw.get("version", CONFIG_VERSION))
    except ValueError as exc:
        raise ConfigError("version must be an integer") from exc
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version}")

    scen_kwargs = {}
    try:
        for key, cast in _SCENARIO_KEYS.items():
            if key in raw:
                scen_kwargs[key] = cast(raw[key])
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw[key]!r}") from exc
    scenario = Scenario()
    if "links" in scen_kwargs:
        scenario = replace(scenario, links=scen_kwargs["links"])
    if "tx" in scen_kwargs:
        scenario = replace(scenario, tx=scen_kwargs["tx"])
    if "rx" in scen_kwargs:
        scenario = replace(scenario, rx=scen_kwargs["rx"])
    if "alpha" in scen_kwargs:
        scenario = replace(scenario, interference_scale=scen_kwargs["alpha"])
    if "total_power" in scen_kwargs:
        scenario = replace(scenario, total_power=scen_kwargs["total_power"])
    if "n_cells" in scen_kwargs:
        scenario = replace(scenario, n_cells=scen_kwargs["n_cells"])
    if "constraint" in scen_kwargs:
        scenario = replace(scenario, constraint_mode=scen_kwargs["constraint"])
    if "weight_low" in scen_kwargs or "weight_high" in scen_kwargs:
        lo = scen_kwargs.get("weight_low", scenario.weight_range[0])
        hi = scen_kwargs.get("weight_high", scenario.weight_range[1])
        scenario = replace(scenario, weight_range=(lo, hi))
    try:
        scenario.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    solver_kwargs = {}
    try:
        for key, cast in _SOLVER_KEYS.items():
            if key in raw:
                solver_kwargs[key] = cast(raw[key])
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw[key]!r}") from exc
    try:
        solver = SolverConfig(**solver_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    kwargs: dict = {"scenario": scenario, "solver": solver}
    if "mode" in raw:
        kwargs["mode"] = raw["mode"]
    if "out" in raw:
        kwargs["out"] = raw["out"]
    if "seeds" in raw:
        kwargs["seeds"] = _parse_list(raw["seeds"], int)
    if "alphas" in raw:
        kwargs["alphas"] = _parse_list(raw["alphas"], float)
    if "bench_links" in raw:
        kwargs["bench_links"] = _parse_list(raw["bench_links"], int)
    if "bench_antennas" in raw:
        kwargs["bench_antennas"] = _parse_list(raw["bench_antennas"], int)
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    """Read and validate a config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_mapping(parse_config_text(text))


def emit_convergence_plot_data(trace, metadata: dict | None = None) -> dict:
    """Plot-ready objective-vs-iteration series from an iteration trace."""
    return {
        "series": [
            [i, obj] for i, obj in enumerate(trace.objective, start=1)
        ],
        "metadata": dict(metadata or {}),
    }


def _summary_doc(seed: int, cfg: ExperimentConfig, res) -> dict:
    return {
        "seed": seed,
        "objective_nats": res.objective,
        "rates_nats": [float(r) for r in res.rates],
        "iterations": res.iterations,
        "converged": res.converged,
        "termination": res.termination,
        "kkt_max_residual": res.kkt.max_residual,
        "mu": [float(m) for m in res.dual.mu],
        "scenario": cfg.scenario.to_dict(),
    }


def _write_json(path: Path, doc: dict) -> None:
    with open(path, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")


def _iterations_to_tol(res) -> int:
    return res.iterations


def run_experiment(config: ExperimentConfig | str | Path, out_dir=None) -> int:
    """Run the configured experiment and write artifacts.

    Returns a process exit status: 0 on success, 1 for a malformed config,
    2 if the solver aborted on a monotonicity violation. `out_dir`
    overrides the config's `out` key; one of the two must be set.
    """
    try:
        if not isinstance(config, ExperimentConfig):
            config = load_config(config)
        out = Path(out_dir) if out_dir is not None else (
            Path(config.out) if config.out else None
        )
        if out is None:
            raise ConfigError("no output directory (set 'out' or pass --out)")
    except ConfigError as exc:
        print(f"config error: {exc}")
        return EXIT_BAD_CONFIG
    out.mkdir(parents=True, exist_ok=True)

    try:
        if config.mode == "solve":
            _run_solve(config, out)
        elif config.mode == "certify":
            _run_certify(config, out)
        elif config.mode == "sweep":
            _run_sweep(config, out)
        else:
            _run_bench(config, out)
    except MonotonicityError as exc:
        print(f"solver abort: {exc}")
        return EXIT_SOLVER_ABORT
    return EXIT_OK


def _run_solve(config: ExperimentConfig, out: Path) -> None:
    for seed in config.seeds:
        net = random_network(seed, config.scenario)
        save_network(net, out / f"network_seed{seed}.json")
        res = solve(net, cfg=config.solver)
        res.trace.to_csv(out / f"trace_seed{seed}.csv")
        _write_json(out / f"summary_seed{seed}.json",
                    _summary_doc(seed, config, res))
        _write_json(
            out / f"convergence_seed{seed}.json",
            emit_convergence_plot_data(
                res.trace,
                {"seed": seed,
                 "alpha": config.scenario.interference_scale,
                 "constraint": config.scenario.constraint_mode},
            ),
        )


def _run_certify(config: ExperimentConfig, out: Path) -> None:
    for seed in config.seeds:
        net = random_network(seed, config.scenario)
        save_network(net, out / f"network_seed{seed}.json")
        report = certify_duality(net, cfg=config.solver)
        doc = report.to_dict()
        doc["seed"] = seed
        doc["scenario"] = config.scenario.to_dict()
        _write_json(out / f"certificate_seed{seed}.json", doc)


def _run_sweep(config: ExperimentConfig, out: Path) -> None:
    rows = []
    for alpha in config.alphas:
        scen = replace(config.scenario, interference_scale=alpha)
        for seed in config.seeds:
            net = random_network(seed, scen)
            res = solve(net, cfg=config.solver)
            rows.append((alpha, seed, _iterations_to_tol(res), res.objective))
    with open(out / "sweep.csv", "w") as f:
        f.write("alpha,seed,iterations_to_tol,final_objective\n")
        for alpha, seed, iters, obj in rows:
            f.write(f"{alpha!r},{seed},{iters},{obj!r}\n")


def _run_bench(config: ExperimentConfig, out: Path) -> None:
    result = benchmark_complexity(
        link_counts=config.bench_links,
        antenna_counts=config.bench_antennas,
    )
    result.to_csv(out / "bench.csv")
    _write_json(out / "bench_slopes.json", {
        "slope_links": result.slope_links,
        "slope_antennas": result.slope_antennas,
        "fixed_links": result.fixed_links,
        "fixed_antennas": result.fixed_antennas,
    })


def summarize_sweep(path) -> dict:
    """Per-alpha medians of iterations and final objective from a sweep CSV."""
    rows = []
    with open(path) as f:
        header = f.readline()
        if header.strip() != "alpha,seed,iterations_to_tol,final_objective":
            raise ConfigError("not a sweep table")
        for line in f:
            alpha, seed, iters, obj = line.strip().split(",")
            rows.append((float(alpha), int(seed), int(iters), float(obj)))
    out: dict[float, dict] = {}
    for alpha in sorted({r[0] for r in rows}):
        sel = [r for r in rows if r[0] == alpha]
        out[alpha] = {
            "median_iterations": float(np.median([r[2] for r in sel])),
            "median_objective": float(np.median([r[3] for r in sel])),
            "runs": len(sel),
        }
    return out
