"""Two evolution strategies over flat genomes, plus the run orchestrator.

The first strategy keeps a population, recombines the best slice into a mean
vector, and resamples around it with a single elite carried over verbatim.
The second keeps only a center point, samples mirrored Gaussian perturbations
around it, and moves the center along the rank-weighted perturbation sum with
decaying step sizes.

Every run is a pure function of (seed, config, environment version).  All
randomness flows from the run seed through documented streams:

* ``(0,)``         initial population / center
* ``(1, g)``       perturbation noise for generation ``g`` (1-based)
* ``(2, e)``       seed of evaluation episode ``e`` (shared by all
                   individuals and generations, so the objective is
                   stationary across a run)

Noise is drawn in full before any evaluation is dispatched, so results do not
depend on the degree of evaluation parallelism.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .envs import EnvSpec, evaluate
from .network import NetworkTopology, WeightInit
from .plasticity import (
    WEIGHTLESS_NEURON_CENTRIC,
    EtaMode,
    Genome,
    param_count,
    save_genome,
)

__all__ = [
    "ES1Config",
    "ES2Config",
    "ES2State",
    "FitnessReport",
    "GenomeSpec",
    "RunResult",
    "EvolutionError",
    "centered_ranks",
    "es1_step",
    "es2_step",
    "evolve",
]


class EvolutionError(RuntimeError):
    """Raised when a run cannot proceed (bad fitness, bad shapes)."""


@dataclass(frozen=True)
class ES1Config:
    """Population strategy: mean of the elites plus Gaussian resampling.

    ``elites`` defaults to half the population; the published setup fixes
    population 40, sigma 0.35, 500 generations.
    """

    population_size: int = 40
    elites: int | None = None
    sigma: float = 0.35
    generations: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.elites is None:
            object.__setattr__(self, "elites", self.population_size // 2)
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if not 1 <= self.elites <= self.population_size:
            raise ValueError(
                f"elites must be in [1, {self.population_size}], got {self.elites}"
            )
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError("sigma must be positive")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")


@dataclass(frozen=True)
class ES2Config:
    """Center-point strategy with mirrored sampling and rank-shaped updates.

    The published setup fixes population 500, sigma 0.1, learning rate 0.2,
    decays 0.999 / 0.995, 500 generations.  The population must be even so
    perturbations can be mirrored.
    """

    population_size: int = 500
    sigma: float = 0.1
    lr: float = 0.2
    sigma_decay: float = 0.999
    lr_decay: float = 0.995
    generations: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2 or self.population_size % 2:
            raise ValueError("population_size must be an even number >= 2")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError("sigma must be positive")
        if not (np.isfinite(self.lr) and self.lr > 0):
            raise ValueError("lr must be positive")
        for name, value in (("sigma_decay", self.sigma_decay), ("lr_decay", self.lr_decay)):
            if not 0 < value <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")


@dataclass
class ES2State:
    """Live (decayed) step sizes of an ES2 run."""

    sigma: float
    lr: float

    @classmethod
    def from_config(cls, cfg: ES2Config) -> "ES2State":
        return cls(sigma=cfg.sigma, lr=cfg.lr)


@dataclass(frozen=True)
class FitnessReport:
    """One generation's summary statistics."""

    generation: int
    best: float
    mean: float
    std: float
    best_genome_ref: str | None = None

    def __post_init__(self):
        if self.std > 0 and self.best < self.mean - 5.0 * self.std:
            raise ValueError(
                f"inconsistent report: best {self.best} < mean - 5*std "
                f"({self.mean} - 5*{self.std})"
            )


@dataclass(frozen=True)
class GenomeSpec:
    """What kind of genome a run evolves and how its networks start."""

    scheme: str
    eta_mode: EtaMode
    topology: NetworkTopology
    weight_init: WeightInit = field(default_factory=lambda: WeightInit.uniform(-0.1, 0.1))
    memory_window: int | None = None

    def __post_init__(self):
        if self.scheme == WEIGHTLESS_NEURON_CENTRIC:
            if self.weight_init.mode != "zeros":
                raise ValueError("weightless scheme requires zero weight init")
            if self.memory_window is None or self.memory_window < 1:
                raise ValueError("weightless scheme requires memory_window >= 1")

    @property
    def dimension(self) -> int:
        return param_count(self.scheme, self.topology, self.eta_mode).total


@dataclass(frozen=True)
class RunResult:
    reports: tuple[FitnessReport, ...]
    best_values: np.ndarray
    best_fitness: float
    out_dir: Path | None = None


def centered_ranks(values) -> np.ndarray:
    """Map fitnesses to ranks centered on zero, in [-0.5, 0.5].

    Ties share the average rank, so a generation whose fitnesses are all
    equal maps to exactly zero everywhere (an uninformative generation must
    not move the center).  Any strictly increasing transform of the
    fitnesses leaves the result unchanged.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("centered_ranks expects a 1-D array")
    if v.size == 1:
        return np.zeros(1)
    ranks = rankdata(v, method="average")
    return (ranks - 1.0) / (v.size - 1.0) - 0.5


def es1_step(population, fitnesses, cfg: ES1Config, rng: np.random.Generator) -> np.ndarray:
    """Produce the next population (row 0 is the surviving elite).

    The recombination mean averages the ``cfg.elites`` best rows (fitness
    ties break toward the lower index); the other ``population_size - 1``
    rows are that mean plus i.i.d. Gaussian noise, drawn individual-major.
    """
    pop = np.asarray(population, dtype=np.float64)
    fit = np.asarray(fitnesses, dtype=np.float64)
    if pop.ndim != 2 or pop.shape[0] != cfg.population_size:
        raise ValueError(
            f"population must be ({cfg.population_size}, dim), got {pop.shape}"
        )
    if fit.shape != (cfg.population_size,):
        raise ValueError(f"fitness list length {fit.shape} != {cfg.population_size}")
    if not np.all(np.isfinite(fit)):
        raise EvolutionError("non-finite fitness in es1_step")
    order = np.argsort(-fit, kind="stable")
    mean = pop[order[: cfg.elites]].mean(axis=0)
    children = mean + rng.normal(0.0, cfg.sigma, size=(cfg.population_size - 1, pop.shape[1]))
    return np.vstack([pop[order[0]][None, :], children])


def es2_step(
    center,
    state: ES2State,
    cfg: ES2Config,
    rng: np.random.Generator,
    evaluate_batch,
) -> tuple[np.ndarray, np.ndarray]:
    """Move the center along the rank-weighted perturbation sum.

    Draws mirrored perturbations from N(0, state.sigma), evaluates the
    population via ``evaluate_batch`` (a (m, dim) -> (m,) callback), applies

        center + lr / (m * sigma) * sum_k eps_k * rank_k

    and then decays sigma and lr in place.  Returns (new_center, fitnesses,
    candidates) so callers can log and checkpoint the evaluated population.
    """
    center = np.asarray(center, dtype=np.float64)
    half = cfg.population_size // 2
    base = rng.normal(0.0, state.sigma, size=(half, center.size))
    noise = np.concatenate([base, -base], axis=0)
    candidates = center[None, :] + noise
    fitnesses = np.asarray(evaluate_batch(candidates), dtype=np.float64)
    if fitnesses.shape != (cfg.population_size,):
        raise EvolutionError(
            f"evaluation returned {fitnesses.shape}, expected ({cfg.population_size},)"
        )
    bad = np.flatnonzero(~np.isfinite(fitnesses))
    if bad.size:
        raise EvolutionError(f"candidate {int(bad[0])} returned non-finite fitness")
    shaped = centered_ranks(fitnesses)
    update = noise.T @ shaped
    new_center = center + (state.lr / (cfg.population_size * state.sigma)) * update
    state.sigma *= cfg.sigma_decay
    state.lr *= cfg.lr_decay
    return new_center, fitnesses, candidates


def _episode_seed(run_seed: int, episode: int) -> int:
    return int(np.random.SeedSequence(run_seed, spawn_key=(2, episode)).generate_state(1)[0])


def _generation_rng(run_seed: int, generation: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(run_seed, spawn_key=(1, generation)))


def _init_rng(run_seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(run_seed, spawn_key=(0,)))


class _Evaluator:
    """Maps genome value rows to fitness, optionally on a thread pool.

    Episode seeds are fixed up front, so identical rows always see identical
    episodes and the result is independent of the thread count.
    """

    def __init__(self, spec: GenomeSpec, env_spec: EnvSpec, episodes: int, run_seed: int, threads: int):
        self.spec = spec
        self.env_spec = env_spec
        self.episode_seeds = [_episode_seed(run_seed, e) for e in range(episodes)]
        self.threads = max(1, int(threads))

    def _one(self, values: np.ndarray) -> float:
        genome = Genome(values, self.spec.scheme, self.spec.eta_mode, self.spec.topology)
        total = 0.0
        for s in self.episode_seeds:
            total += evaluate(
                genome,
                self.env_spec,
                seed=s,
                weight_init=self.spec.weight_init,
                memory_window=self.spec.memory_window,
            ).fitness
        return total / len(self.episode_seeds)

    def __call__(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        if self.threads == 1:
            fits = [self._one(r) for r in rows]
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                fits = list(pool.map(self._one, rows))
        for i, f in enumerate(fits):
            if not np.isfinite(f):
                raise EvolutionError(f"individual {i} returned non-finite fitness {f}")
        return np.asarray(fits, dtype=np.float64)


class _RunWriter:
    """Streams the run artifacts: log rows, timing sidecar, checkpoints.

    Wall time goes to a sidecar file so the main log stays byte-identical
    across reruns and thread counts.
    """

    LOG_COLUMNS = ("generation", "best", "mean", "std", "sigma", "lr")

    def __init__(self, out_dir: Path | None):
        self.out_dir = out_dir
        self.log_rows: list[tuple] = []
        self.timing_rows: list[tuple] = []
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "checkpoints").mkdir(exist_ok=True)

    def log(self, generation: int, best: float, mean: float, std: float, sigma, lr, wall_ms: int):
        fmt = lambda x: "" if x is None else repr(float(x))
        self.log_rows.append((str(generation), fmt(best), fmt(mean), fmt(std), fmt(sigma), fmt(lr)))
        self.timing_rows.append((str(generation), str(int(wall_ms))))

    def checkpoint(self, generation: int, genome: Genome, seed: int) -> str | None:
        if self.out_dir is None:
            return None
        path = self.out_dir / "checkpoints" / f"gen_{generation:05d}.json"
        save_genome(genome, path, seed=seed)
        return str(path)

    def finish(self, best_genome: Genome, seed: int) -> None:
        if self.out_dir is None:
            return
        with open(self.out_dir / "log.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.LOG_COLUMNS)
            writer.writerows(self.log_rows)
        with open(self.out_dir / "timings.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("generation", "wall_ms"))
            writer.writerows(self.timing_rows)
        save_genome(best_genome, self.out_dir / "best.json", seed=seed)


def evolve(
    cfg: ES1Config | ES2Config,
    genome_spec: GenomeSpec,
    env_spec: EnvSpec,
    episodes_per_eval: int = 1,
    *,
    out_dir=None,
    threads: int = 1,
) -> RunResult:
    """Run the configured strategy and emit one report per generation.

    Fitness of a genome is the mean episode fitness over
    ``episodes_per_eval`` rollouts.  Writes log.csv, timings.csv,
    per-generation best checkpoints, and best.json when ``out_dir`` is given.
    """
    if episodes_per_eval < 1:
        raise ValueError("episodes_per_eval must be >= 1")
    out_dir = Path(out_dir) if out_dir is not None else None
    evaluator = _Evaluator(genome_spec, env_spec, episodes_per_eval, cfg.seed, threads)
    writer = _RunWriter(out_dir)
    dim = genome_spec.dimension
    reports: list[FitnessReport] = []

    def wrap(values: np.ndarray) -> Genome:
        return Genome(values, genome_spec.scheme, genome_spec.eta_mode, genome_spec.topology)

    best_values: np.ndarray
    best_fitness: float

    if isinstance(cfg, ES1Config):
        population = _init_rng(cfg.seed).uniform(-1.0, 1.0, size=(cfg.population_size, dim))
        try:
            fitnesses = evaluator(population)
        except EvolutionError as err:
            raise EvolutionError(f"generation 0: {err}") from err
        top = int(np.argmax(fitnesses))
        best_values, best_fitness = population[top].copy(), float(fitnesses[top])
        for gen in range(1, cfg.generations + 1):
            started = time.perf_counter()
            rng = _generation_rng(cfg.seed, gen)
            population = es1_step(population, fitnesses, cfg, rng)
            try:
                fitnesses = evaluator(population)
            except EvolutionError as err:
                raise EvolutionError(f"generation {gen}: {err}") from err
            top = int(np.argmax(fitnesses))
            if fitnesses[top] > best_fitness:
                best_values, best_fitness = population[top].copy(), float(fitnesses[top])
            wall_ms = (time.perf_counter() - started) * 1000.0
            ref = writer.checkpoint(gen, wrap(population[top]), cfg.seed)
            reports.append(
                FitnessReport(
                    generation=gen,
                    best=float(fitnesses[top]),
                    mean=float(np.mean(fitnesses)),
                    std=float(np.std(fitnesses)),
                    best_genome_ref=ref,
                )
            )
            writer.log(
                gen, fitnesses[top], np.mean(fitnesses), np.std(fitnesses),
                cfg.sigma, None, wall_ms,
            )
    else:
        center = np.zeros(dim)
        state = ES2State.from_config(cfg)
        if cfg.generations == 0:
            best_values = center.copy()
            best_fitness = float(evaluator(center[None, :])[0])
        else:
            best_values, best_fitness = center.copy(), -np.inf
        for gen in range(1, cfg.generations + 1):
            started = time.perf_counter()
            rng = _generation_rng(cfg.seed, gen)
            try:
                center, fitnesses, candidates = es2_step(center, state, cfg, rng, evaluator)
            except EvolutionError as err:
                raise EvolutionError(f"generation {gen}: {err}") from err
            top = int(np.argmax(fitnesses))
            if fitnesses[top] > best_fitness:
                best_values, best_fitness = candidates[top].copy(), float(fitnesses[top])
            wall_ms = (time.perf_counter() - started) * 1000.0
            ref = writer.checkpoint(gen, wrap(candidates[top]), cfg.seed)
            reports.append(
                FitnessReport(
                    generation=gen,
                    best=float(fitnesses[top]),
                    mean=float(np.mean(fitnesses)),
                    std=float(np.std(fitnesses)),
                    best_genome_ref=ref,
                )
            )
            writer.log(
                gen, fitnesses[top], np.mean(fitnesses), np.std(fitnesses),
                state.sigma, state.lr, wall_ms,
            )

    writer.finish(wrap(best_values), cfg.seed)
    return RunResult(
        reports=tuple(reports),
        best_values=best_values,
        best_fitness=best_fitness,
        out_dir=out_dir,
    )
