"""Hebbian rule models, genome encodings, and parameter accounting.

Three rule schemes are supported:

* ``synaptic`` — every synapse carries its own coefficient set
  (pre, post, correlation, bias, optionally a learning rate).
* ``neuron_centric`` — coefficients attach to neurons; a synapse's update
  combines its pre- and post-neuron records.
* ``weightless_neuron_centric`` — neuron-centric coefficients, but no stored
  weights: weights are re-derived each step from a bounded window of past
  activations (initial weights are zero by construction).

A weight update never looks at the reward signal, only at the activations of
the two neurons a synapse connects.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .network import NetworkTopology, dense_forward

__all__ = [
    "SYNAPTIC",
    "NEURON_CENTRIC",
    "WEIGHTLESS_NEURON_CENTRIC",
    "SCHEMES",
    "EtaMode",
    "Genome",
    "ParamCount",
    "MemoryFootprint",
    "NeuronParams",
    "SynapticRuleParams",
    "NeuronRuleParams",
    "WeightlessState",
    "param_count",
    "memory_footprint",
    "delta_synaptic",
    "delta_neuron_centric",
    "decode_genome",
    "apply_hebbian_update",
    "weightless_weights",
    "step_weightless",
    "lift_neuron_to_synaptic",
    "random_rule_genome",
    "as_scheme",
    "save_genome",
    "load_genome",
    "REFERENCE_NETWORKS",
]

SYNAPTIC = "synaptic"
NEURON_CENTRIC = "neuron_centric"
WEIGHTLESS_NEURON_CENTRIC = "weightless_neuron_centric"
SCHEMES = (SYNAPTIC, NEURON_CENTRIC, WEIGHTLESS_NEURON_CENTRIC)

DEFAULT_FIXED_RATE = 0.1

#: The eight published reference configurations (name, layer sizes, eta kind).
REFERENCE_NETWORKS = (
    ("biped-low", (8, 8, 10), "fixed"),
    ("biped-medium", (20, 20, 10), "fixed"),
    ("biped-high", (29, 29, 10), "fixed"),
    ("worm-low", (3, 3, 7), "fixed"),
    ("worm-medium", (28, 28, 7), "fixed"),
    ("worm-high", (31, 31, 7), "fixed"),
    ("ant-medium", (28, 128, 64, 8), "evolved"),
    ("ant-high", (28, 256, 128, 8), "evolved"),
)


@dataclass(frozen=True)
class EtaMode:
    """Learning-rate handling: a fixed shared rate, or one evolved per record."""

    kind: str
    eta0: float = DEFAULT_FIXED_RATE

    def __post_init__(self):
        if self.kind not in ("fixed", "evolved"):
            raise ValueError(f"unknown eta mode {self.kind!r}")
        if self.kind == "fixed" and not np.isfinite(self.eta0):
            raise ValueError("fixed learning rate must be finite")

    @classmethod
    def fixed(cls, eta0: float = DEFAULT_FIXED_RATE) -> "EtaMode":
        return cls("fixed", float(eta0))

    @classmethod
    def evolved(cls) -> "EtaMode":
        return cls("evolved")

    @property
    def is_fixed(self) -> bool:
        return self.kind == "fixed"


@dataclass(frozen=True)
class ParamCount:
    """Parameter total for one scheme plus the synaptic/neuron-centric ratio."""

    total: int
    ratio: float


@dataclass(frozen=True)
class MemoryFootprint:
    values_stored: int
    bytes_at_32bit: int


def param_count(scheme: str, topology: NetworkTopology, eta_mode: EtaMode) -> ParamCount:
    """Number of rule parameters to optimize for ``scheme`` on ``topology``.

    With an evolved rate: 5 per synapse, or 5 per neuron.  With a fixed rate:
    4 per synapse; per neuron, 4 minus 2 for every input neuron (input neurons
    are never post-synaptic, so they keep only the pre and correlation
    coefficients).  The ratio column is synaptic/neuron-centric truncated to
    two decimals, matching the published table.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    synapses = topology.synapse_count
    neurons = topology.neuron_count
    if eta_mode.is_fixed:
        synaptic_total = 4 * synapses
        neuron_total = 4 * neurons - 2 * topology.n_inputs
    else:
        synaptic_total = 5 * synapses
        neuron_total = 5 * neurons
    ratio = math.floor(synaptic_total / neuron_total * 100) / 100
    total = synaptic_total if scheme == SYNAPTIC else neuron_total
    return ParamCount(total=total, ratio=ratio)


def memory_footprint(
    scheme: str,
    topology: NetworkTopology,
    eta_mode: EtaMode,
    window_size: int | None = None,
) -> MemoryFootprint:
    """Values a deployed model has to keep resident, and their 32-bit size.

    Weight-storing schemes hold the weights, the rule parameters, and one
    activation per non-input neuron.  The weightless scheme holds no weights
    at all, but one activation per neuron for every step of its window.
    """
    params = param_count(scheme, topology, eta_mode).total
    if scheme == WEIGHTLESS_NEURON_CENTRIC:
        if window_size is None or window_size < 1:
            raise ValueError("weightless footprint needs a window size >= 1")
        values = params + topology.neuron_count * int(window_size)
    else:
        values = topology.synapse_count + params + (topology.neuron_count - topology.n_inputs)
    return MemoryFootprint(values_stored=int(values), bytes_at_32bit=4 * int(values))


@dataclass(frozen=True)
class Genome:
    """Flat vector of Hebbian rule parameters under one encoding scheme."""

    values: np.ndarray
    scheme: str
    eta_mode: EtaMode
    topology: NetworkTopology

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        values = np.array(self.values, dtype=np.float64).ravel()
        expected = param_count(self.scheme, self.topology, self.eta_mode).total
        if values.size != expected:
            raise ValueError(
                f"genome for scheme {self.scheme!r} on {self.topology.layer_sizes} "
                f"needs {expected} values, got {values.size}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)


def as_scheme(genome: Genome, scheme: str) -> Genome:
    """Reinterpret a genome under a parameter-compatible scheme.

    Only the two neuron-centric encodings are interchangeable; the synaptic
    layout is different and cannot be converted by relabeling.
    """
    if scheme == genome.scheme:
        return genome
    compatible = {NEURON_CENTRIC, WEIGHTLESS_NEURON_CENTRIC}
    if not {scheme, genome.scheme} <= compatible:
        raise ValueError(f"cannot reinterpret scheme {genome.scheme!r} as {scheme!r}")
    return replace(genome, scheme=scheme)


class NeuronParams(NamedTuple):
    """One neuron's rule record (missing entries materialized as neutral)."""

    pre_coef: float
    post_coef: float
    corr_coef: float
    bias: float
    rate: float


class _LayerRule:
    """Per-layer coefficient arrays shaped so the update is one expression.

    Both schemes funnel through :meth:`delta`, which guarantees that a
    neuron-centric genome and its synaptic lift produce bit-identical updates.
    """

    __slots__ = ("rate", "pre", "post", "corr", "bias")

    def __init__(self, rate, pre, post, corr, bias):
        self.rate = rate
        self.pre = pre
        self.post = post
        self.corr = corr
        self.bias = bias

    def delta(self, pre_acts: np.ndarray, post_acts: np.ndarray) -> np.ndarray:
        ai = pre_acts[:, None]
        aj = post_acts[None, :]
        return self.rate * (self.pre * ai + self.post * aj + self.corr * (ai * aj) + self.bias)


@dataclass(frozen=True)
class SynapticRuleParams:
    """Decoded per-synapse rule coefficients, one array set per layer."""

    topology: NetworkTopology
    eta_mode: EtaMode
    pre: tuple[np.ndarray, ...]
    post: tuple[np.ndarray, ...]
    corr: tuple[np.ndarray, ...]
    bias: tuple[np.ndarray, ...]
    rate: tuple[np.ndarray, ...] | None  # None when the rate is fixed

    def layer_rules(self) -> list[_LayerRule]:
        rules = []
        for k in range(len(self.topology.layer_shapes)):
            rate = self.eta_mode.eta0 if self.rate is None else self.rate[k]
            rules.append(_LayerRule(rate, self.pre[k], self.post[k], self.corr[k], self.bias[k]))
        return rules

    def to_genome(self) -> Genome:
        chunks = []
        for k in range(len(self.topology.layer_shapes)):
            blocks = [self.pre[k], self.post[k], self.corr[k], self.bias[k]]
            if self.rate is not None:
                blocks.append(self.rate[k])
            chunks.extend(b.ravel() for b in blocks)
        return Genome(np.concatenate(chunks), SYNAPTIC, self.eta_mode, self.topology)


@dataclass(frozen=True)
class NeuronRuleParams:
    """Decoded per-neuron rule records over all neurons in layer order.

    Entries a neuron does not carry under the fixed-rate encoding are
    materialized with neutral values: post coefficient 0 (input neurons are
    never post-synaptic) and bias 1 (so the bias product reduces to the
    post-neuron's bias alone).  The rate array holds the fixed rate everywhere
    when the rate is not evolved.
    """

    topology: NetworkTopology
    eta_mode: EtaMode
    pre: np.ndarray
    post: np.ndarray
    corr: np.ndarray
    bias: np.ndarray
    rate: np.ndarray

    def neuron(self, index: int) -> NeuronParams:
        return NeuronParams(
            float(self.pre[index]),
            float(self.post[index]),
            float(self.corr[index]),
            float(self.bias[index]),
            float(self.rate[index]),
        )

    def layer_rules(self) -> list[_LayerRule]:
        topo = self.topology
        rules = []
        for k, (n_pre, n_post) in enumerate(topo.layer_shapes):
            lo, hi = topo.neuron_offset(k), topo.neuron_offset(k) + n_pre
            plo, phi = topo.neuron_offset(k + 1), topo.neuron_offset(k + 1) + n_post
            if self.eta_mode.is_fixed:
                rate = self.eta_mode.eta0
            else:
                rate = (self.rate[lo:hi, None] + self.rate[None, plo:phi]) / 2.0
            rules.append(
                _LayerRule(
                    rate,
                    self.pre[lo:hi, None],
                    self.post[None, plo:phi],
                    self.corr[lo:hi, None] * self.corr[None, plo:phi],
                    self.bias[lo:hi, None] * self.bias[None, plo:phi],
                )
            )
        return rules

    def to_genome(self, scheme: str = NEURON_CENTRIC) -> Genome:
        topo = self.topology
        n_inputs = topo.n_inputs
        out = []
        for i in range(topo.neuron_count):
            if self.eta_mode.is_fixed:
                if i < n_inputs:
                    out.extend((self.pre[i], self.corr[i]))
                else:
                    out.extend((self.pre[i], self.post[i], self.corr[i], self.bias[i]))
            else:
                out.extend((self.pre[i], self.post[i], self.corr[i], self.bias[i], self.rate[i]))
        return Genome(np.array(out), scheme, self.eta_mode, topo)


def decode_genome(genome: Genome) -> SynapticRuleParams | NeuronRuleParams:
    """Expand a flat genome into per-layer (or per-neuron) coefficient arrays.

    ``decode`` then ``to_genome`` reproduces the original vector exactly.
    """
    topo = genome.topology
    values = genome.values
    if genome.scheme == SYNAPTIC:
        n_blocks = 4 if genome.eta_mode.is_fixed else 5
        pre, post, corr, bias, rate = [], [], [], [], []
        cursor = 0
        for shape in topo.layer_shapes:
            size = shape[0] * shape[1]
            blocks = []
            for _ in range(n_blocks):
                blocks.append(values[cursor : cursor + size].reshape(shape))
                cursor += size
            pre.append(blocks[0])
            post.append(blocks[1])
            corr.append(blocks[2])
            bias.append(blocks[3])
            if n_blocks == 5:
                rate.append(blocks[4])
        return SynapticRuleParams(
            topology=topo,
            eta_mode=genome.eta_mode,
            pre=tuple(pre),
            post=tuple(post),
            corr=tuple(corr),
            bias=tuple(bias),
            rate=tuple(rate) if rate else None,
        )

    n = topo.neuron_count
    n_inputs = topo.n_inputs
    if not genome.eta_mode.is_fixed:
        table = values.reshape(n, 5)
        return NeuronRuleParams(
            topology=topo,
            eta_mode=genome.eta_mode,
            pre=table[:, 0].copy(),
            post=table[:, 1].copy(),
            corr=table[:, 2].copy(),
            bias=table[:, 3].copy(),
            rate=table[:, 4].copy(),
        )
    pre = np.zeros(n)
    post = np.zeros(n)
    corr = np.zeros(n)
    bias = np.ones(n)  # neutral under the pairwise bias product
    rate = np.full(n, genome.eta_mode.eta0)
    cursor = 0
    for i in range(n):
        if i < n_inputs:
            pre[i], corr[i] = values[cursor], values[cursor + 1]
            cursor += 2
        else:
            pre[i], post[i], corr[i], bias[i] = values[cursor : cursor + 4]
            cursor += 4
    return NeuronRuleParams(
        topology=topo, eta_mode=genome.eta_mode, pre=pre, post=post, corr=corr, bias=bias, rate=rate
    )


def _require_finite(name: str, *values) -> None:
    for v in values:
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{name}: non-finite argument")


def delta_synaptic(params, pre_activation: float, post_activation: float, rate: float | None = None) -> float:
    """Single-synapse weight increment.

    ``params`` is (pre, post, corr, bias) or (pre, post, corr, bias, rate);
    an explicit ``rate`` argument must be given for 4-entry params and takes
    precedence over a 5th entry.
    """
    if len(params) == 5 and rate is None:
        rate = params[4]
    if rate is None:
        raise ValueError("delta_synaptic: no learning rate provided")
    a, b, c, d = params[0], params[1], params[2], params[3]
    _require_finite("delta_synaptic", a, b, c, d, rate, pre_activation, post_activation)
    return rate * (
        a * pre_activation
        + b * post_activation
        + c * (pre_activation * post_activation)
        + d
    )


def delta_neuron_centric(
    pre: NeuronParams, post: NeuronParams, pre_activation: float, post_activation: float
) -> float:
    """Weight increment combining the two neuron records of a synapse.

    The effective rate is the mean of the two neurons' rates (which reduces
    to the shared fixed rate when both carry it).
    """
    _require_finite("delta_neuron_centric", *pre, *post, pre_activation, post_activation)
    rate = (pre.rate + post.rate) / 2.0
    return rate * (
        pre.pre_coef * pre_activation
        + post.post_coef * post_activation
        + pre.corr_coef * post.corr_coef * (pre_activation * post_activation)
        + pre.bias * post.bias
    )


def apply_hebbian_update(net, genome_or_params) -> None:
    """Increment every weight of ``net`` from its last forward pass.

    All deltas are computed from the same activation snapshot, so update
    order is observationally irrelevant.  Weightless genomes are rejected:
    they never store weights to update.
    """
    params = genome_or_params
    if isinstance(params, Genome):
        if params.scheme == WEIGHTLESS_NEURON_CENTRIC:
            raise ValueError("weightless genomes have no stored weights to update")
        params = decode_genome(params)
    if net.last_activations is None:
        raise ValueError("apply_hebbian_update requires a forward pass first")
    acts = net.last_activations
    for k, rule in enumerate(params.layer_rules()):
        net.weights[k] += rule.delta(acts[k], acts[k + 1])


class WeightlessState:
    """Ring buffer of past activation snapshots for weight reconstruction.

    Holds at most ``window_size`` full per-layer activation snapshots; all
    neurons advance in lockstep.  One instance belongs to one episode (and
    one genome) and is confined to a single evaluation thread.
    """

    def __init__(self, topology: NetworkTopology, window_size: int):
        if window_size < 1:
            raise ValueError("window size must be >= 1")
        self.topology = topology
        self.window_size = int(window_size)
        self.window: deque[list[np.ndarray]] = deque(maxlen=self.window_size)
        self.step_count = 0
        self.last_activations: list[np.ndarray] | None = None
        self.last_presynaptic_sums: list[np.ndarray] | None = None
        # Running left-fold over the window, valid only while nothing has
        # been evicted yet (the fold order must stay oldest-to-newest).
        self._sum_cache: list[np.ndarray] | None = None
        self._cached_steps = 0

    def push(self, activations: list[np.ndarray]) -> None:
        self.window.append(activations)
        self.step_count += 1


def _accumulate_window(sums: list[np.ndarray], rules, snapshots) -> None:
    for acts in snapshots:
        for k, rule in enumerate(rules):
            sums[k] += rule.delta(acts[k], acts[k + 1])


def _reconstruct(state: WeightlessState, rules) -> list[np.ndarray]:
    """Weights as the oldest-to-newest fold of per-step deltas in the window.

    While the window has never evicted, the fold extends the cached prefix,
    which is bit-identical to refolding from scratch.
    """
    if state.step_count <= state.window_size and state._sum_cache is not None:
        sums = state._sum_cache
        fresh = list(state.window)[state._cached_steps :]
        _accumulate_window(sums, rules, fresh)
        state._cached_steps = len(state.window)
        return sums
    sums = [np.zeros(shape) for shape in state.topology.layer_shapes]
    _accumulate_window(sums, rules, state.window)
    if state.step_count <= state.window_size:
        state._sum_cache = sums
        state._cached_steps = len(state.window)
    return sums


def weightless_weights(state: WeightlessState, genome: Genome) -> list[np.ndarray]:
    """Materialize the weight tensors implied by the activation window.

    An empty window yields all-zero weights (initial weights are zero by
    construction, which is what makes not storing them possible).
    """
    if genome.scheme != WEIGHTLESS_NEURON_CENTRIC:
        raise ValueError(f"weightless_weights needs a weightless genome, got {genome.scheme!r}")
    rules = decode_genome(as_scheme(genome, NEURON_CENTRIC)).layer_rules()
    sums = [np.zeros(shape) for shape in state.topology.layer_shapes]
    _accumulate_window(sums, rules, state.window)
    return sums


def _step_weightless(state: WeightlessState, rules, inputs) -> np.ndarray:
    weights = _reconstruct(state, rules)
    activations, presynaptic = dense_forward(state.topology, weights, inputs)
    state.push(activations)
    state.last_activations = activations
    state.last_presynaptic_sums = presynaptic
    return activations[-1].copy()


def step_weightless(state: WeightlessState, genome: Genome, inputs) -> np.ndarray:
    """One weightless forward step: rebuild weights, propagate, record.

    Weights exist only for the duration of the call; the new activation
    snapshot is pushed into the window afterwards (evicting the oldest
    snapshot once the window is full).
    """
    if genome.scheme != WEIGHTLESS_NEURON_CENTRIC:
        raise ValueError(f"step_weightless needs a weightless genome, got {genome.scheme!r}")
    if genome.topology != state.topology:
        raise ValueError("genome and state topologies differ")
    rules = decode_genome(as_scheme(genome, NEURON_CENTRIC)).layer_rules()
    return _step_weightless(state, rules, inputs)


def lift_neuron_to_synaptic(genome: Genome) -> Genome:
    """Expand a neuron-centric genome into the synaptic scheme it spans.

    For every synapse the lifted coefficients are: pre of the pre-neuron,
    post of the post-neuron, the product of the two correlation coefficients,
    the product of the two biases, and the mean of the two rates.  The lifted
    genome produces bit-identical weight increments on every activation pair.
    Fixed-rate genomes are rejected: their input neurons carry no bias, so
    the corresponding synaptic bias is not a plain product.
    """
    if genome.scheme != NEURON_CENTRIC:
        raise ValueError(f"lift expects a neuron-centric genome, got {genome.scheme!r}")
    if genome.eta_mode.is_fixed:
        raise ValueError("lift of a fixed-rate genome is ambiguous; use an evolved rate")
    params = decode_genome(genome)
    topo = genome.topology
    pre, post, corr, bias, rate = [], [], [], [], []
    for k, (n_pre, n_post) in enumerate(topo.layer_shapes):
        lo, hi = topo.neuron_offset(k), topo.neuron_offset(k) + n_pre
        plo, phi = topo.neuron_offset(k + 1), topo.neuron_offset(k + 1) + n_post
        pre.append(np.broadcast_to(params.pre[lo:hi, None], (n_pre, n_post)).copy())
        post.append(np.broadcast_to(params.post[None, plo:phi], (n_pre, n_post)).copy())
        corr.append(params.corr[lo:hi, None] * params.corr[None, plo:phi])
        bias.append(params.bias[lo:hi, None] * params.bias[None, plo:phi])
        rate.append((params.rate[lo:hi, None] + params.rate[None, plo:phi]) / 2.0)
    lifted = SynapticRuleParams(
        topology=topo,
        eta_mode=genome.eta_mode,
        pre=tuple(pre),
        post=tuple(post),
        corr=tuple(corr),
        bias=tuple(bias),
        rate=tuple(rate),
    )
    return lifted.to_genome()


def random_rule_genome(
    scheme: str, topology: NetworkTopology, seed: int, eta_mode: EtaMode
) -> Genome:
    """Baseline genome with every parameter i.i.d. uniform in [-1, 1]."""
    total = param_count(scheme, topology, eta_mode).total
    rng = np.random.default_rng(seed)
    return Genome(rng.uniform(-1.0, 1.0, size=total), scheme, eta_mode, topology)


def save_genome(genome: Genome, path, *, seed: int | None = None) -> None:
    """Write a genome checkpoint; the value vector round-trips exactly."""
    doc = {
        "format": "genome-checkpoint-v1",
        "scheme": genome.scheme,
        "eta_mode": {"kind": genome.eta_mode.kind}
        | ({"eta0": genome.eta_mode.eta0} if genome.eta_mode.is_fixed else {}),
        "topology": list(genome.topology.layer_sizes),
        "seed": seed,
        # json serializes doubles via repr, which round-trips exactly
        "values": [float(v) for v in genome.values],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_genome(path) -> Genome:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "genome-checkpoint-v1":
        raise ValueError(f"{path}: not a genome checkpoint")
    eta = doc["eta_mode"]
    eta_mode = EtaMode.fixed(eta["eta0"]) if eta["kind"] == "fixed" else EtaMode.evolved()
    return Genome(
        np.array([float(v) for v in doc["values"]]),
        doc["scheme"],
        eta_mode,
        NetworkTopology(tuple(doc["topology"])),
    )
