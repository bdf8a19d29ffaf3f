"""Command-line entry point: evolve, count, sweep, analyze, eval.

Configs are JSON with a versioned schema; unknown keys are hard errors so a
typo cannot silently change an experiment.  Exit codes: 0 success, 2 config
or argument validation failure, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    FAMILIES,
    average_trajectories_grouped,
    read_trajectory_csv,
    window_sweep,
    write_trajectory_csv,
)
from .envs import EnvSpec, evaluate, make_env
from .evolution import ES1Config, ES2Config, GenomeSpec, evolve
from .network import NetworkTopology, WeightInit
from .plasticity import (
    NEURON_CENTRIC,
    REFERENCE_NETWORKS,
    SCHEMES,
    SYNAPTIC,
    WEIGHTLESS_NEURON_CENTRIC,
    EtaMode,
    load_genome,
    param_count,
)

__all__ = ["ConfigError", "RunConfig", "main", "entrypoint"]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """A config file or argument failed validation (exit code 2)."""


def _check_keys(section: dict, allowed: set[str], required: set[str], ctx: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"{ctx}: expected an object")
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"{ctx}: unknown keys {unknown}")
    missing = sorted(required - set(section))
    if missing:
        raise ConfigError(f"{ctx}: missing keys {missing}")


def _parse_eta_mode(section: dict) -> EtaMode:
    _check_keys(section, {"kind", "eta0"}, {"kind"}, "eta_mode")
    kind = section["kind"]
    if kind == "evolved":
        if "eta0" in section:
            raise ConfigError("eta_mode: eta0 only applies to kind 'fixed'")
        return EtaMode.evolved()
    if kind == "fixed":
        return EtaMode.fixed(float(section.get("eta0", 0.1)))
    raise ConfigError(f"eta_mode.kind: expected 'fixed' or 'evolved', got {kind!r}")


def _parse_weight_init(section: dict) -> WeightInit:
    _check_keys(section, {"mode", "low", "high"}, {"mode"}, "weight_init")
    mode = section["mode"]
    if mode == "zeros":
        if set(section) - {"mode"}:
            raise ConfigError("weight_init: bounds only apply to mode 'uniform'")
        return WeightInit.zeros()
    if mode == "uniform":
        try:
            return WeightInit.uniform(section.get("low", -0.1), section.get("high", 0.1))
        except ValueError as err:
            raise ConfigError(f"weight_init: {err}") from err
    raise ConfigError(f"weight_init.mode: expected 'uniform' or 'zeros', got {mode!r}")


def _parse_strategy(section: dict, seed: int) -> ES1Config | ES2Config:
    if not isinstance(section, dict) or "name" not in section:
        raise ConfigError("strategy: missing name")
    name = section["name"]
    try:
        if name == "es1":
            _check_keys(
                section,
                {"name", "population_size", "elites", "sigma", "generations"},
                {"name"},
                "strategy",
            )
            return ES1Config(
                population_size=int(section.get("population_size", 40)),
                elites=int(section["elites"]) if "elites" in section else None,
                sigma=float(section.get("sigma", 0.35)),
                generations=int(section.get("generations", 500)),
                seed=seed,
            )
        if name == "es2":
            _check_keys(
                section,
                {"name", "population_size", "sigma", "lr", "sigma_decay", "lr_decay", "generations"},
                {"name"},
                "strategy",
            )
            return ES2Config(
                population_size=int(section.get("population_size", 500)),
                sigma=float(section.get("sigma", 0.1)),
                lr=float(section.get("lr", 0.2)),
                sigma_decay=float(section.get("sigma_decay", 0.999)),
                lr_decay=float(section.get("lr_decay", 0.995)),
                generations=int(section.get("generations", 500)),
                seed=seed,
            )
    except ValueError as err:
        raise ConfigError(f"strategy: {err}") from err
    raise ConfigError(f"strategy.name: expected 'es1' or 'es2', got {name!r}")


class RunConfig:
    """Validated run configuration; see README for the schema."""

    TOP_KEYS = {
        "schema_version",
        "seed",
        "scheme",
        "eta_mode",
        "topology",
        "weight_init",
        "environment",
        "episode_steps",
        "episodes_per_eval",
        "strategy",
        "memory_window",
        "output_dir",
    }
    REQUIRED = {"schema_version", "seed", "scheme", "eta_mode", "topology", "environment",
                "episode_steps", "strategy"}

    def __init__(self, doc: dict, *, seed_override: int | None = None):
        _check_keys(doc, self.TOP_KEYS, self.REQUIRED, "config")
        if doc["schema_version"] != SCHEMA_VERSION:
            raise ConfigError(
                f"schema_version: expected {SCHEMA_VERSION}, got {doc['schema_version']!r}"
            )
        self.seed = int(doc["seed"]) if seed_override is None else int(seed_override)
        if doc["scheme"] not in SCHEMES:
            raise ConfigError(f"scheme: expected one of {list(SCHEMES)}, got {doc['scheme']!r}")
        self.scheme = doc["scheme"]
        self.eta_mode = _parse_eta_mode(doc["eta_mode"])
        try:
            self.topology = NetworkTopology(tuple(int(v) for v in doc["topology"]))
        except (TypeError, ValueError) as err:
            raise ConfigError(f"topology: {err}") from err

        env_section = doc["environment"]
        _check_keys(env_section, {"name", "params"}, {"name"}, "environment")
        episode_steps = int(doc["episode_steps"])
        if episode_steps < 1:
            raise ConfigError("episode_steps: must be >= 1")
        self.env_spec = EnvSpec(
            name=env_section["name"],
            params=dict(env_section.get("params", {})),
            episode_steps=episode_steps,
        )
        try:
            env = make_env(self.env_spec)
        except ValueError as err:
            raise ConfigError(f"environment: {err}") from err
        if self.topology.n_inputs != env.observation_dim:
            raise ConfigError(
                f"topology[0]={self.topology.n_inputs} must equal the "
                f"{self.env_spec.name} observation_dim={env.observation_dim}"
            )
        if self.topology.n_outputs != env.action_dim:
            raise ConfigError(
                f"topology[-1]={self.topology.n_outputs} must equal the "
                f"{self.env_spec.name} action_dim={env.action_dim}"
            )

        if "weight_init" in doc:
            self.weight_init = _parse_weight_init(doc["weight_init"])
        elif self.scheme == WEIGHTLESS_NEURON_CENTRIC:
            self.weight_init = WeightInit.zeros()
        else:
            self.weight_init = WeightInit.uniform(-0.1, 0.1)

        self.memory_window = int(doc["memory_window"]) if "memory_window" in doc else None
        if self.scheme == WEIGHTLESS_NEURON_CENTRIC:
            if self.weight_init.mode != "zeros":
                raise ConfigError(
                    "scheme 'weightless_neuron_centric' requires weight_init.mode 'zeros' "
                    f"(got {self.weight_init.mode!r}); the weightless model assumes "
                    "zero initial weights by construction"
                )
            if self.memory_window is None or self.memory_window < 1:
                raise ConfigError("memory_window: required (>= 1) for the weightless scheme")
        elif self.memory_window is not None:
            raise ConfigError("memory_window: only applies to scheme 'weightless_neuron_centric'")

        self.episodes_per_eval = int(doc.get("episodes_per_eval", 1))
        if self.episodes_per_eval < 1:
            raise ConfigError("episodes_per_eval: must be >= 1")
        self.strategy = _parse_strategy(doc["strategy"], self.seed)
        self.output_dir = doc.get("output_dir")

    @classmethod
    def from_file(cls, path, *, seed_override: int | None = None) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: invalid JSON ({err})") from err
        return cls(doc, seed_override=seed_override)

    def genome_spec(self) -> GenomeSpec:
        return GenomeSpec(
            scheme=self.scheme,
            eta_mode=self.eta_mode,
            topology=self.topology,
            weight_init=self.weight_init,
            memory_window=self.memory_window,
        )

    def resolved(self) -> dict:
        """Normalized config dict sufficient to reproduce the run."""
        strategy: dict = {"name": "es1" if isinstance(self.strategy, ES1Config) else "es2"}
        if isinstance(self.strategy, ES1Config):
            strategy.update(
                population_size=self.strategy.population_size,
                elites=self.strategy.elites,
                sigma=self.strategy.sigma,
                generations=self.strategy.generations,
            )
        else:
            strategy.update(
                population_size=self.strategy.population_size,
                sigma=self.strategy.sigma,
                lr=self.strategy.lr,
                sigma_decay=self.strategy.sigma_decay,
                lr_decay=self.strategy.lr_decay,
                generations=self.strategy.generations,
            )
        doc = {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "scheme": self.scheme,
            "eta_mode": (
                {"kind": "fixed", "eta0": self.eta_mode.eta0}
                if self.eta_mode.is_fixed
                else {"kind": "evolved"}
            ),
            "topology": list(self.topology.layer_sizes),
            "weight_init": (
                {"mode": "zeros"}
                if self.weight_init.mode == "zeros"
                else {"mode": "uniform", "low": self.weight_init.low, "high": self.weight_init.high}
            ),
            "environment": {"name": self.env_spec.name, "params": dict(self.env_spec.params)},
            "episode_steps": self.env_spec.episode_steps,
            "episodes_per_eval": self.episodes_per_eval,
            "strategy": strategy,
        }
        if self.memory_window is not None:
            doc["memory_window"] = self.memory_window
        if self.output_dir is not None:
            doc["output_dir"] = self.output_dir
        return doc


def _write_manifest(out_dir: Path, config: RunConfig) -> None:
    resolved = config.resolved()
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    manifest = {
        "format": "run-manifest-v1",
        "engine_version": __version__,
        "seed": config.seed,
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "config": resolved,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")


def cmd_evolve(args) -> int:
    config = RunConfig.from_file(args.config, seed_override=args.seed_override)
    out_dir = args.out or config.output_dir
    if out_dir is None:
        raise ConfigError("output_dir: set it in the config or pass --out")
    out_dir = Path(out_dir)
    result = evolve(
        config.strategy,
        config.genome_spec(),
        config.env_spec,
        config.episodes_per_eval,
        out_dir=out_dir,
        threads=args.threads,
    )
    _write_manifest(out_dir, config)
    print(f"best_fitness {result.best_fitness!r}")
    print(f"artifacts {out_dir}")
    return 0


def _parse_topology_arg(text: str) -> NetworkTopology:
    try:
        sizes = tuple(int(part) for part in text.split(","))
        return NetworkTopology(sizes)
    except ValueError as err:
        raise ConfigError(f"topology: {err}") from err


def _count_row(name: str, topology: NetworkTopology, eta_mode: EtaMode) -> list[str]:
    synaptic = param_count(SYNAPTIC, topology, eta_mode)
    neuron = param_count(NEURON_CENTRIC, topology, eta_mode)
    return [
        name,
        "x".join(str(s) for s in topology.layer_sizes),
        eta_mode.kind,
        str(topology.synapse_count),
        str(topology.neuron_count),
        str(synaptic.total),
        str(neuron.total),
        f"{synaptic.ratio:.2f}",
    ]


def cmd_count(args) -> int:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(
        ["name", "layers", "eta", "weights", "neurons", "synaptic", "neuron_centric", "ratio"]
    )
    if args.table1:
        for name, sizes, kind in REFERENCE_NETWORKS:
            eta = EtaMode.fixed() if kind == "fixed" else EtaMode.evolved()
            writer.writerow(_count_row(name, NetworkTopology(sizes), eta))
        return 0
    if not args.topology:
        raise ConfigError("count: pass --topology or --table1")
    topology = _parse_topology_arg(args.topology)
    eta = EtaMode.fixed(args.eta0) if args.eta == "fixed" else EtaMode.evolved()
    writer.writerow(_count_row("custom", topology, eta))
    return 0


def cmd_sweep(args) -> int:
    config = RunConfig.from_file(args.config)
    try:
        windows = [int(w) for w in args.windows.split(",")]
    except ValueError as err:
        raise ConfigError(f"windows: {err}") from err
    if not windows or any(w < 1 for w in windows):
        raise ConfigError("windows: every window size must be >= 1")
    checkpoint_dir = Path(args.checkpoints)
    paths = sorted(checkpoint_dir.glob("*.json")) if checkpoint_dir.is_dir() else []
    if not paths:
        raise ConfigError(f"checkpoints: no genome checkpoints found in {checkpoint_dir}")
    genomes = []
    for path in paths:
        genome = load_genome(path)
        if genome.scheme != NEURON_CENTRIC:
            raise ConfigError(
                f"{path}: scheme {genome.scheme!r} is not 'neuron_centric'; the sweep "
                "compares stored-weight and weightless twins of neuron-centric genomes"
            )
        genomes.append(genome)
    rows = window_sweep(genomes, config.env_spec, windows, seed=args.seed)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["window", "f_ratio_mean", "f_ratio_std", "memory_ratio", "samples"])
        for row in rows:
            writer.writerow(
                [
                    str(row.window),
                    repr(row.f_ratio_mean),
                    repr(row.f_ratio_std),
                    repr(row.memory_ratio),
                    str(row.samples),
                ]
            )
    finally:
        if args.out:
            out.close()
    return 0


def cmd_analyze(args) -> int:
    if not args.files:
        raise ConfigError("analyze: no trajectory files given")
    records = []
    for path in args.files:
        try:
            records.append(read_trajectory_csv(path))
        except (OSError, ValueError) as err:
            raise ConfigError(f"{path}: {err}") from err
    first = records[0]
    for path, record in zip(args.files, records):
        if record.inputs.shape[1] != first.inputs.shape[1]:
            raise ConfigError(
                f"{path}: input dim {record.inputs.shape[1]} != expected {first.inputs.shape[1]}"
            )
        if record.postsyn.shape[1] != first.postsyn.shape[1]:
            raise ConfigError(
                f"{path}: output dim {record.postsyn.shape[1]} != expected {first.postsyn.shape[1]}"
            )
        if record.steps != first.steps:
            raise ConfigError(f"{path}: {record.steps} steps != expected {first.steps}")
    averaged = average_trajectories_grouped(records, args.family, k=2)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["f1", "f2", "step", "label"])
        for label, table in averaged.items():
            for f1, f2, step in table:
                writer.writerow([repr(float(f1)), repr(float(f2)), str(int(step)), label])
    finally:
        if args.out:
            out.close()
    return 0


def cmd_eval(args) -> int:
    config = RunConfig.from_file(args.config)
    genome = load_genome(args.checkpoint)
    if genome.scheme == WEIGHTLESS_NEURON_CENTRIC and config.memory_window is None:
        raise ConfigError(
            f"{args.checkpoint}: weightless genome needs memory_window in the config"
        )
    result = evaluate(
        genome,
        config.env_spec,
        capture=bool(args.capture),
        seed=args.seed,
        weight_init=config.weight_init,
        memory_window=config.memory_window,
        label=args.label,
    )
    if args.capture:
        write_trajectory_csv(result.trajectory, args.capture)
    print(f"fitness {result.fitness!r}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hebbnets",
        description="Plastic-network neuroevolution: runs, counts, sweeps, analyses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="run an evolution strategy from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, default=1, help="evaluation parallelism cap")
    p.add_argument("--seed-override", type=int, default=None)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("count", help="parameter counts per scheme")
    p.add_argument("--table1", action="store_true", help="emit the eight reference networks")
    p.add_argument("--topology", default=None, help="comma-separated layer sizes")
    p.add_argument("--eta", choices=["fixed", "evolved"], default="fixed")
    p.add_argument("--eta0", type=float, default=0.1)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("sweep", help="memory-window sweep over stored checkpoints")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoints", required=True, help="directory of genome checkpoints")
    p.add_argument("--windows", required=True, help="comma-separated window sizes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="average projected trajectories per label")
    p.add_argument("files", nargs="*", help="trajectory capture CSVs")
    p.add_argument("--family", choices=list(FAMILIES), required=True)
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("eval", help="single-genome rollout")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--capture", default=None, help="write per-step trajectory CSV here")
    p.add_argument("--label", default="run")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:  # argparse reports its own errors
        return int(exit_.code or 0)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(f"error: {err}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())
