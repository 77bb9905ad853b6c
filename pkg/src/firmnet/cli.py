"""``firmnet`` command-line entry point.

Subcommands read and write plain UTF-8 tables in a directory layout::

    firms.csv           firm registry
    edges.csv           year,source,target,relation
    panel.fnp           binary panel (preferred over edges.csv when present)
    growth.csv          year,firm,log_growth

Every run writes ``run_manifest.json`` next to its outputs.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical error (spectral guard).
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .counterfactual import (
    COUNTERFACTUAL_PARAMS,
    DECOMPOSITION_HEADER,
    PROFILE_HEADER,
    SPLITS,
    aggregate_decomposition,
    counterfactual_grid,
    grid_table,
)
from .estimation import ChainConfig, PriorSpec, gibbs_sample, measurement_error_experiment
from .exceptions import ConfigError, ConvergenceError, PanelFormatError
from .io import (
    load_panel,
    read_growth,
    read_panel,
    read_params,
    read_registry,
    save_panel,
    write_edge_list,
    write_growth,
    write_params,
    write_registry,
    write_table,
)
from .model import PARAM_NAMES, StructuralParams
from .network import link_diff, neighbor_growth_stats
from .synthetic import GeneratorConfig, generate_panel

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("generate", "describe", "estimate", "counterfact", "experiment")
RUN_KEYS = {
    "input", "out", "seed", "threads", "plot_data", "logdet_method", "generator", "chain", "priors", "params",
    "params_file", "mode", "noise_sd", "shock_years", "splits", "base_year", "max_order",
}


@dataclass
class RunConfig:
    command: str
    input: Path | None = None
    out: Path = Path(".")
    seed: int | None = None
    threads: int | None = None
    plot_data: bool = False
    logdet_method: str | None = None
    generator: dict = field(default_factory=dict)
    chain: dict = field(default_factory=dict)
    priors: dict = field(default_factory=dict)
    params: dict | None = None
    params_file: Path | None = None
    mode: str = "profile"
    noise_sd: float = 0.15
    shock_years: list | None = None
    splits: list = field(default_factory=lambda: list(SPLITS))
    base_year: int | None = None
    max_order: int = 3

    def manifest(self) -> dict:
        doc = {}
        for k, v in self.__dict__.items():
            doc[k] = str(v) if isinstance(v, Path) else v
        return doc


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="firmnet", description="Firm-network growth propagation toolkit.")
    p.add_argument("--version", action="version", version=f"firmnet {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--out", type=Path, help="output directory (default: current)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--threads", type=int, help="BLAS/OpenMP thread cap (default: all cores)")
    p.add_argument("--plot-data", action="store_true", help="also emit plot-ready tables")
    p.add_argument("--input", type=Path, help="input data directory")
    p.add_argument("--params", type=Path, dest="params_file", help="parameter JSON for counterfact")
    p.add_argument("--mode", choices=("profile", "aggregate"), help="counterfact mode")
    p.add_argument("--noise-sd", type=float, help="measurement noise sd for experiment")
    p.add_argument("--logdet", choices=("trace_series", "dense", "none"), dest="logdet_method")
    return p


def build_config(argv) -> RunConfig:
    args = _parser().parse_args(argv)
    doc = {}
    if args.config is not None:
        try:
            doc = json.loads(args.config.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(doc) - RUN_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
    cli = {k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None and v is not False}
    doc.update(cli)
    for key in ("input", "out", "params_file"):
        if key in doc and doc[key] is not None:
            doc[key] = Path(doc[key])
    cfg = RunConfig(command=args.command, **doc)
    if cfg.threads is not None and cfg.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return cfg


# ---------------------------------------------------------------------------
# inputs


def _load_inputs(cfg: RunConfig):
    if cfg.input is None:
        raise ConfigError(f"{cfg.command} needs --input DIR")
    root = cfg.input
    if not root.is_dir():
        raise ConfigError(f"input directory {root} does not exist")
    if (root / "panel.fnp").exists():
        panel = read_panel(root / "panel.fnp")
    else:
        for name in ("firms.csv", "edges.csv"):
            if not (root / name).exists():
                raise PanelFormatError(f"missing {root / name}")
        panel = load_panel(root / "edges.csv", read_registry(root / "firms.csv"))
    if not (root / "growth.csv").exists():
        raise PanelFormatError(f"missing {root / 'growth.csv'}")
    growth = read_growth(root / "growth.csv", panel.firm_ids)
    return panel, growth


def _require_years(panel, growth):
    missing = [y for y in panel.years if y not in growth.years]
    if missing:
        raise PanelFormatError(f"growth data missing for panel years {missing}")


def _params(cfg: RunConfig, default=None) -> StructuralParams:
    if cfg.params_file is not None:
        return read_params(cfg.params_file)
    if cfg.params is not None:
        return read_params(cfg.params)
    if default is None:
        raise ConfigError("parameters required: pass --params FILE or a 'params' config entry")
    return default


def _generator(cfg: RunConfig) -> GeneratorConfig:
    gen = GeneratorConfig.from_dict(cfg.generator)
    if cfg.seed is not None:
        gen = gen.replace(seed=cfg.seed)
    gen.validate()
    return gen


def _chain(cfg: RunConfig) -> ChainConfig:
    doc = dict(cfg.chain)
    if cfg.seed is not None:
        doc["seed"] = cfg.seed
    if cfg.logdet_method is not None:
        doc["logdet_method"] = cfg.logdet_method
    try:
        return ChainConfig.from_dict(doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# commands


def cmd_generate(cfg: RunConfig) -> list:
    gen = _generator(cfg)
    data = generate_panel(gen)
    out = cfg.out
    ids = data.panel.firm_ids
    write_registry(ids, out / "firms.csv")
    write_edge_list(data.panel, out / "edges.csv")
    save_panel(data.panel, out / "panel.fnp")
    write_growth(data.growth, ids, out / "growth.csv")
    write_growth(data.growth, ids, out / "latent_growth.csv", latent=True)
    write_table(out / "shocks.csv", ("year", "firm", "shock"),
                ((y, f, v) for t, y in enumerate(data.growth.years) for f, v in zip(ids, data.shocks[t].tolist())))
    write_params(gen.params, out / "truth.json")
    (out / "generator.json").write_text(json.dumps(gen.to_dict(), indent=2) + "\n", encoding="utf-8")
    return ["firms.csv", "edges.csv", "panel.fnp", "growth.csv", "latent_growth.csv", "shocks.csv", "truth.json",
            "generator.json"]


TABLE1_HEADER = ("year", "mean", "sd", "firms")
TABLE2_HEADER = ("year", "nnz_G", "formed_G", "severed_G", "nnz_H", "formed_H", "severed_H")


def _table3_header(max_order):
    cols = ["year", "type", "links"]
    for k in range(1, max_order + 1):
        cols += [f"order{k}_pos", f"order{k}_neg"]
    return tuple(cols)


def cmd_describe(cfg: RunConfig) -> list:
    panel, growth = _load_inputs(cfg)
    missing = [y for y in panel.years if y not in growth.years]
    if missing:
        print(f"firmnet: growth missing for years {missing}; they are skipped", file=sys.stderr)
    t1 = [(y, float(growth.at(y).mean()), float(growth.at(y).std()), growth.firm_count) for y in growth.years]
    t2 = []
    for k, y in enumerate(panel.years):
        g, h = panel.nnz(y)
        if k == 0:
            t2.append((y, g, "", "", h, "", ""))
            continue
        c = link_diff(panel, y).counts
        t2.append((y, g, c["formed_G"], c["severed_G"], h, c["formed_H"], c["severed_H"]))
    t3 = []
    for y in panel.years[1:]:
        if y in missing:
            continue
        for rec in neighbor_growth_stats(panel, growth, y, cfg.max_order):
            row = [y, rec.type, rec.link_count]
            for pp, pn in zip(rec.proportion_positive, rec.proportion_negative):
                row += [pp, pn]
            t3.append(row)
    write_table(cfg.out / "table1.csv", TABLE1_HEADER, t1)
    write_table(cfg.out / "table2.csv", TABLE2_HEADER, t2)
    write_table(cfg.out / "table3.csv", _table3_header(cfg.max_order), t3)
    return ["table1.csv", "table2.csv", "table3.csv"]


def cmd_estimate(cfg: RunConfig) -> list:
    panel, growth = _load_inputs(cfg)
    priors = PriorSpec.from_dict(cfg.priors) if cfg.priors else PriorSpec()
    chain_cfg = _chain(cfg)
    chain = gibbs_sample(panel, growth, priors, chain_cfg)
    summary = chain.summary()
    write_table(cfg.out / "chain.csv", ("draw",) + PARAM_NAMES,
                ((k, *row) for k, row in enumerate(chain.samples.tolist())))
    write_table(cfg.out / "summary.csv", ("parameter", "mean", "lower", "upper"), summary.table())
    write_params(chain.means, cfg.out / "estimate.json")
    (cfg.out / "acceptance.json").write_text(json.dumps(chain.acceptance, indent=2) + "\n", encoding="utf-8")
    print(summary.format())
    return ["chain.csv", "summary.csv", "estimate.json", "acceptance.json"]


def cmd_counterfact(cfg: RunConfig) -> list:
    panel, growth = _load_inputs(cfg)
    _require_years(panel, growth)
    if cfg.mode == "profile":
        params = _params(cfg, COUNTERFACTUAL_PARAMS)
        grid = counterfactual_grid(panel, growth, params, cfg.splits, cfg.shock_years)
        summary = [
            {"shock_year": r.shock_year, "split": r.split, "own_sd": r.own_sd, "argmin_year": r.argmin_year()}
            for r in grid
        ]
        files = ["counterfact_summary.json"]
        if cfg.plot_data:
            write_table(cfg.out / "profile_grid.csv", PROFILE_HEADER, grid_table(grid))
            files.append("profile_grid.csv")
    elif cfg.mode == "aggregate":
        params = _params(cfg)
        dec = aggregate_decomposition(panel, growth, params, cfg.base_year)
        summary = dec.summary()
        files = ["counterfact_summary.json"]
        if cfg.plot_data:
            write_table(cfg.out / "decomposition.csv", DECOMPOSITION_HEADER, dec.rows())
            files.append("decomposition.csv")
        print(json.dumps(summary, indent=2))
    else:
        raise ConfigError(f"unknown counterfact mode {cfg.mode!r}")
    (cfg.out / "counterfact_summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return files


def cmd_experiment(cfg: RunConfig) -> list:
    gen = _generator(cfg)
    priors = PriorSpec.from_dict(cfg.priors) if cfg.priors else PriorSpec()
    report = measurement_error_experiment(gen, cfg.noise_sd, priors, _chain(cfg))
    (cfg.out / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"r_theoretical = {report.r_theoretical:.4g}")
    for k, v in report.r_empirical.items():
        print(f"r_empirical[{k}] = {v:.4g}")
    return ["report.json"]


HANDLERS = {
    "generate": cmd_generate,
    "describe": cmd_describe,
    "estimate": cmd_estimate,
    "counterfact": cmd_counterfact,
    "experiment": cmd_experiment,
}


def _thread_limit(threads):
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=threads or os.cpu_count())


def run(cfg: RunConfig) -> dict:
    """Execute one subcommand and write its manifest; returns the manifest."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    with _thread_limit(cfg.threads):
        files = HANDLERS[cfg.command](cfg)
    manifest = {
        "command": cfg.command,
        "config": cfg.manifest(),
        "outputs": files,
        "versions": {
            "firmnet": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "timings": {"total_seconds": time.perf_counter() - start},
    }
    (cfg.out / "run_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest


def main(argv=None) -> int:
    try:
        cfg = build_config(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    except (ConfigError, TypeError) as exc:
        print(f"firmnet: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        run(cfg)
    except ConvergenceError as exc:
        print(f"firmnet: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigError as exc:
        print(f"firmnet: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PanelFormatError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"firmnet: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
