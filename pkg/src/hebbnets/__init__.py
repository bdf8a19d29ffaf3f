"""Plastic feed-forward networks with evolvable Hebbian rules.

Subpackages: network (dense tanh core), plasticity (rule models and genome
encodings), evolution (the two strategies and the run engine), envs
(deterministic control tasks), analysis (scaling, memory sweeps, trajectory
PCA), cli (command-line front end).
"""

__version__ = "0.1.0"

from .network import NetworkTopology, PlasticNetwork, WeightInit
from .plasticity import (
    NEURON_CENTRIC,
    SYNAPTIC,
    WEIGHTLESS_NEURON_CENTRIC,
    EtaMode,
    Genome,
    WeightlessState,
    apply_hebbian_update,
    delta_neuron_centric,
    delta_synaptic,
    lift_neuron_to_synaptic,
    memory_footprint,
    param_count,
    random_rule_genome,
    step_weightless,
    weightless_weights,
)
from .envs import EnvSpec, PointNavigator, SegmentCrawler, TrajectoryRecord, evaluate
from .evolution import ES1Config, ES2Config, GenomeSpec, es1_step, es2_step, evolve

__all__ = [
    "NetworkTopology",
    "PlasticNetwork",
    "WeightInit",
    "SYNAPTIC",
    "NEURON_CENTRIC",
    "WEIGHTLESS_NEURON_CENTRIC",
    "EtaMode",
    "Genome",
    "WeightlessState",
    "apply_hebbian_update",
    "delta_neuron_centric",
    "delta_synaptic",
    "lift_neuron_to_synaptic",
    "memory_footprint",
    "param_count",
    "random_rule_genome",
    "step_weightless",
    "weightless_weights",
    "EnvSpec",
    "PointNavigator",
    "SegmentCrawler",
    "TrajectoryRecord",
    "evaluate",
    "ES1Config",
    "ES2Config",
    "GenomeSpec",
    "es1_step",
    "es2_step",
    "evolve",
]
