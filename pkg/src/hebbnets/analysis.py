"""Quantitative analyses: parameter scaling, memory-window sweeps, and
behavioral-trajectory projection.

The PCA here is deliberately self-contained: the covariance matrix is
diagonalized by cyclic Jacobi rotations, which behave deterministically even
on degenerate spectra (an iterative power method would not).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .envs import EnvSpec, TrajectoryRecord, evaluate
from .network import NetworkTopology, WeightInit
from .plasticity import (
    NEURON_CENTRIC,
    WEIGHTLESS_NEURON_CENTRIC,
    EtaMode,
    Genome,
    as_scheme,
    param_count,
)

__all__ = [
    "PcaModel",
    "WindowSweepRow",
    "ScalingRow",
    "TrajectoryRecord",
    "pca_fit",
    "average_trajectories",
    "average_trajectories_grouped",
    "bounding_box_area",
    "window_sweep",
    "scaling_table",
    "write_trajectory_csv",
    "read_trajectory_csv",
]

FAMILIES = ("input", "pre", "post")


def _jacobi_eigensystem(
    matrix: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100
) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and eigenvectors of a symmetric matrix.

    Cyclic Jacobi: rotate away each off-diagonal entry in a fixed order until
    the off-diagonal mass falls below ``tol`` relative to the matrix norm.
    """
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    vectors = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), vectors
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                app, aqq = a[p, p], a[q, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = a[q, p] = 0.0
                for r in range(n):
                    if r == p or r == q:
                        continue
                    arp, arq = a[r, p], a[r, q]
                    a[r, p] = a[p, r] = c * arp - s * arq
                    a[r, q] = a[q, r] = s * arp + c * arq
                vp = vectors[:, p].copy()
                vq = vectors[:, q].copy()
                vectors[:, p] = c * vp - s * vq
                vectors[:, q] = s * vp + c * vq
    eigenvalues = np.diag(a).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvalues[order], vectors[:, order]


@dataclass(frozen=True)
class PcaModel:
    """Mean, orthonormal components (rows), and explained-variance fractions.

    ``degenerate`` flags data with no variance at all, in which case the
    component rows are an arbitrary orthonormal basis and the fractions are
    zero.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    degenerate: bool = False

    def transform(self, data) -> np.ndarray:
        return (np.asarray(data, dtype=np.float64) - self.mean) @ self.components.T

    def inverse_transform(self, projected) -> np.ndarray:
        return np.asarray(projected, dtype=np.float64) @ self.components + self.mean


def pca_fit(data, k: int) -> PcaModel:
    """Top-``k`` principal axes of row-sample ``data``.

    Components are sorted by descending eigenvalue of the sample covariance
    and sign-fixed so each component's largest-magnitude coordinate is
    positive.
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("pca_fit needs a 2-D array with at least 2 rows")
    if not 1 <= k <= x.shape[1]:
        raise ValueError(f"k must lie in [1, {x.shape[1]}], got {k}")
    mean = x.mean(axis=0)
    centered = x - mean
    covariance = centered.T @ centered / (x.shape[0] - 1)
    eigenvalues, eigenvectors = _jacobi_eigensystem(covariance)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    total = float(eigenvalues.sum())
    degenerate = total <= 0.0
    fractions = np.zeros(k) if degenerate else eigenvalues[:k] / total
    components = eigenvectors[:, :k].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(
        mean=mean, components=components, explained_variance=fractions, degenerate=degenerate
    )


def _family_matrices(records: list[TrajectoryRecord], family: str) -> list[np.ndarray]:
    if not records:
        raise ValueError("no trajectory records given")
    mats = [r.family(family) for r in records]
    shape = mats[0].shape
    for r, m in zip(records, mats):
        if m.shape != shape:
            raise ValueError(
                f"record {r.label!r}: family {family!r} shape {m.shape} != {shape}"
            )
    return mats


def average_trajectories(records: list[TrajectoryRecord], family: str, k: int = 2) -> np.ndarray:
    """Mean projected trajectory of ``records`` for one data family.

    One PCA is fitted on the pooled family rows of all records; every record
    is projected through it and the projections are averaged per step index.
    Returns one row per step with columns (f1, ..., fk, step).
    """
    mats = _family_matrices(records, family)
    model = pca_fit(np.vstack(mats), k)
    stacked = np.stack([model.transform(m) for m in mats])
    mean_projection = stacked.mean(axis=0)
    steps = np.arange(mean_projection.shape[0], dtype=np.float64)
    return np.column_stack([mean_projection, steps])


def average_trajectories_grouped(
    records: list[TrajectoryRecord], family: str, k: int = 2
) -> dict[str, np.ndarray]:
    """Per-label mean projected trajectories in one shared projection basis.

    The PCA is fitted once on everything pooled, so trajectories of different
    labels are directly comparable in the same plane.
    """
    mats = _family_matrices(records, family)
    model = pca_fit(np.vstack(mats), k)
    steps = np.arange(mats[0].shape[0], dtype=np.float64)
    out: dict[str, np.ndarray] = {}
    labels = []
    for record in records:
        if record.label not in labels:
            labels.append(record.label)
    for label in labels:
        group = [m for r, m in zip(records, mats) if r.label == label]
        mean_projection = np.stack([model.transform(m) for m in group]).mean(axis=0)
        out[label] = np.column_stack([mean_projection, steps])
    return out


def bounding_box_area(points) -> float:
    """Area of the axis-aligned box around 2-D points (first two columns)."""
    p = np.asarray(points, dtype=np.float64)[:, :2]
    spans = p.max(axis=0) - p.min(axis=0)
    return float(spans[0] * spans[1])


@dataclass(frozen=True)
class WindowSweepRow:
    window: int
    f_ratio_mean: float
    f_ratio_std: float
    memory_ratio: float
    samples: int


def window_sweep(
    genomes: list[Genome],
    env_spec: EnvSpec,
    windows: list[int],
    *,
    episode_steps: int | None = None,
    seed: int = 0,
) -> list[WindowSweepRow]:
    """Fitness of the weightless model relative to its weight-storing twin.

    Every genome must be neuron-centric and is evaluated once with stored
    weights (zero-initialized) and once per window size without them.
    Genomes whose stored-weight fitness is not positive are left out of that
    window's statistics rather than producing infinities.  ``memory_ratio``
    is stored activations per stored weight, window * neurons / synapses.
    """
    if not genomes:
        raise ValueError("no genomes given")
    for g in genomes:
        if g.scheme != NEURON_CENTRIC:
            raise ValueError(f"window_sweep expects neuron-centric genomes, got {g.scheme!r}")
    topo = genomes[0].topology
    if any(g.topology != topo for g in genomes):
        raise ValueError("all genomes must share one topology")
    windows = [int(w) for w in windows]
    if any(w < 1 for w in windows):
        raise ValueError("window sizes must be >= 1")
    steps = env_spec.episode_steps if episode_steps is None else int(episode_steps)
    zeros = WeightInit.zeros()
    baseline = [
        evaluate(g, env_spec, steps, seed=seed, weight_init=zeros).fitness for g in genomes
    ]
    rows = []
    for window in windows:
        ratios = []
        for genome, base in zip(genomes, baseline):
            if base <= 0.0:
                continue
            weightless = as_scheme(genome, WEIGHTLESS_NEURON_CENTRIC)
            fit = evaluate(
                weightless, env_spec, steps, seed=seed, weight_init=zeros, memory_window=window
            ).fitness
            ratios.append(fit / base)
        rows.append(
            WindowSweepRow(
                window=window,
                f_ratio_mean=float(np.mean(ratios)) if ratios else float("nan"),
                f_ratio_std=float(np.std(ratios)) if ratios else float("nan"),
                memory_ratio=window * topo.neuron_count / topo.synapse_count,
                samples=len(ratios),
            )
        )
    return rows


@dataclass(frozen=True)
class ScalingRow:
    hidden_layers: int
    width: int
    synaptic_params: int
    neuron_params: int


def scaling_table(max_hidden: int, layers: list[int]) -> list[ScalingRow]:
    """Parameter counts of both schemes on 1-input/1-output toy networks.

    For each hidden-layer count and width from 1 to ``max_hidden``, tabulates
    the 5-per-synapse and 5-per-neuron totals.  Synaptic counts grow
    quadratically in the width once there are two or more hidden layers;
    neuron-centric counts grow linearly.
    """
    if max_hidden < 1 or not layers or any(l < 1 for l in layers):
        raise ValueError("scaling_table needs positive widths and layer counts")
    evolved = EtaMode.evolved()
    rows = []
    for depth in layers:
        for width in range(1, max_hidden + 1):
            topo = NetworkTopology((1, *([width] * depth), 1))
            rows.append(
                ScalingRow(
                    hidden_layers=depth,
                    width=width,
                    synaptic_params=param_count("synaptic", topo, evolved).total,
                    neuron_params=param_count("neuron_centric", topo, evolved).total,
                )
            )
    return rows


def write_trajectory_csv(record: TrajectoryRecord, path) -> None:
    """One row per forward step: step, inputs, pre-sums, post-activations, label."""
    in_dim = record.inputs.shape[1]
    out_dim = record.postsyn.shape[1]
    header = (
        ["step"]
        + [f"in_{i}" for i in range(in_dim)]
        + [f"pre_{i}" for i in range(out_dim)]
        + [f"post_{i}" for i in range(out_dim)]
        + ["label"]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for t in range(record.steps):
            row = (
                [str(t)]
                + [repr(float(v)) for v in record.inputs[t]]
                + [repr(float(v)) for v in record.presyn[t]]
                + [repr(float(v)) for v in record.postsyn[t]]
                + [record.label]
            )
            writer.writerow(row)


def read_trajectory_csv(path) -> TrajectoryRecord:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "step" or header[-1] != "label":
            raise ValueError(f"{path}: not a trajectory capture file")
        in_dim = sum(1 for h in header if h.startswith("in_"))
        out_dim = sum(1 for h in header if h.startswith("pre_"))
        inputs, presyn, postsyn = [], [], []
        label = "run"
        for row in reader:
            values = [float(v) for v in row[1 : 1 + in_dim + 2 * out_dim]]
            inputs.append(values[:in_dim])
            presyn.append(values[in_dim : in_dim + out_dim])
            postsyn.append(values[in_dim + out_dim :])
            label = row[-1]
    if not inputs:
        raise ValueError(f"{path}: empty trajectory")
    return TrajectoryRecord(
        inputs=np.array(inputs), presyn=np.array(presyn), postsyn=np.array(postsyn), label=label
    )
