"""Dense feed-forward network core for plastic controllers.

Networks are bias-free stacks of fully connected tanh layers.  Every forward
pass keeps the per-neuron activations and pre-activation sums around so that
plasticity rules and trajectory capture can read them afterwards.  Input
neurons expose the raw input values as their activation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["NetworkTopology", "WeightInit", "PlasticNetwork", "dense_forward"]


@dataclass(frozen=True)
class NetworkTopology:
    """Layer sizes of a bias-free dense feed-forward network.

    ``layer_sizes`` runs input, hidden..., output.  There are no bias units:
    the synapse count is exactly the sum of products of adjacent layer sizes.
    """

    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError(f"need at least input and output layers, got {sizes}")
        if any(s < 1 for s in sizes):
            raise ValueError(f"every layer size must be >= 1, got {sizes}")

    @property
    def synapse_count(self) -> int:
        sizes = self.layer_sizes
        return int(sum(a * b for a, b in zip(sizes[:-1], sizes[1:])))

    @property
    def neuron_count(self) -> int:
        return int(sum(self.layer_sizes))

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def layer_shapes(self) -> tuple[tuple[int, int], ...]:
        """(pre, post) size of each weight matrix, in layer order."""
        sizes = self.layer_sizes
        return tuple((a, b) for a, b in zip(sizes[:-1], sizes[1:]))

    def neuron_offset(self, layer: int) -> int:
        """Global index of the first neuron of ``layer`` (input layer is 0)."""
        return int(sum(self.layer_sizes[:layer]))


@dataclass(frozen=True)
class WeightInit:
    """Initial-weight scheme: i.i.d. uniform over [low, high), or all zeros."""

    mode: str
    low: float = -0.1
    high: float = 0.1

    def __post_init__(self):
        if self.mode not in ("uniform", "zeros"):
            raise ValueError(f"unknown weight init mode {self.mode!r}")
        if self.mode == "uniform":
            if not (np.isfinite(self.low) and np.isfinite(self.high)):
                raise ValueError("uniform weight init bounds must be finite")
            if not self.low < self.high:
                raise ValueError(f"uniform init needs low < high, got [{self.low}, {self.high}]")

    @classmethod
    def uniform(cls, low: float = -0.1, high: float = 0.1) -> "WeightInit":
        return cls("uniform", float(low), float(high))

    @classmethod
    def zeros(cls) -> "WeightInit":
        return cls("zeros")


def dense_forward(
    topology: NetworkTopology,
    weights: list[np.ndarray],
    inputs,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Propagate ``inputs`` through ``weights`` layer by layer.

    Returns (activations, presynaptic_sums): activations has one vector per
    layer (the input layer holds the raw inputs), presynaptic_sums one vector
    per non-input layer, taken before tanh.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.shape != (topology.n_inputs,):
        raise ValueError(
            f"input length {x.shape} does not match input layer size {topology.n_inputs}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("input vector contains non-finite entries")
    activations = [x.copy()]
    presynaptic = []
    for w in weights:
        sums = activations[-1] @ w
        presynaptic.append(sums)
        activations.append(np.tanh(sums))
    return activations, presynaptic


class PlasticNetwork:
    """A dense tanh network whose weights change during an episode.

    Weights are unbounded: there is deliberately no normalization or clipping,
    so repeated plasticity updates may drive activations into saturation.
    Instances are single-threaded mutable state; independent instances can be
    evaluated concurrently.
    """

    def __init__(self, topology: NetworkTopology, weights: list[np.ndarray] | None = None):
        self.topology = topology
        if weights is None:
            weights = [np.zeros(shape) for shape in topology.layer_shapes]
        else:
            weights = [np.array(w, dtype=np.float64) for w in weights]
            for w, shape in zip(weights, topology.layer_shapes, strict=True):
                if w.shape != shape:
                    raise ValueError(f"weight matrix shape {w.shape} != expected {shape}")
        self.weights = weights
        self.last_activations: list[np.ndarray] | None = None
        self.last_presynaptic_sums: list[np.ndarray] | None = None

    def init_weights(self, init: WeightInit, seed: int) -> None:
        """Reset weights per ``init``; deterministic for a given seed."""
        if init.mode == "zeros":
            for w in self.weights:
                w.fill(0.0)
        else:
            rng = np.random.default_rng(seed)
            for k, shape in enumerate(self.topology.layer_shapes):
                self.weights[k] = rng.uniform(init.low, init.high, size=shape)
        self.last_activations = None
        self.last_presynaptic_sums = None

    def forward(self, inputs) -> np.ndarray:
        """Run one forward pass and record per-neuron state.

        Pure in (weights, inputs): identical calls return identical outputs.
        """
        activations, presynaptic = dense_forward(self.topology, self.weights, inputs)
        self.last_activations = activations
        self.last_presynaptic_sums = presynaptic
        return activations[-1].copy()
