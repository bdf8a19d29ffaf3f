"""Deterministic desk-scale control environments and the evaluation loop.

Both environments are self-contained fixed-timestep simulations integrated
with semi-implicit Euler.  Identical (seed, action sequence) pairs reproduce
trajectories bit-exactly.  Fitness follows the locomotion convention: how far
the agent got, accumulated over the episode.

Observation ranges (no normalization is applied):

* SegmentCrawler — gap ratios stay roughly within [0.4, 1.6] for bounded
  actions; velocities roughly within [-3, 3].
* PointNavigator — relative waypoint coordinates within about +-6 units;
  velocity components bounded by force_scale / damping.
"""

from __future__ import annotations

import inspect
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .network import PlasticNetwork, WeightInit, dense_forward
from .plasticity import (
    NEURON_CENTRIC,
    WEIGHTLESS_NEURON_CENTRIC,
    Genome,
    WeightlessState,
    _step_weightless,
    as_scheme,
    decode_genome,
)

__all__ = [
    "EnvSpec",
    "SegmentCrawler",
    "PointNavigator",
    "TrajectoryRecord",
    "EvalResult",
    "make_env",
    "evaluate",
]


@dataclass(frozen=True)
class EnvSpec:
    """Recipe for building an environment: registry name, constructor params,
    and the episode length runs should use."""

    name: str
    params: Mapping = field(default_factory=dict)
    episode_steps: int = 1000


@dataclass(frozen=True)
class TrajectoryRecord:
    """Per-step behavioral capture of one rollout.

    ``inputs`` holds the observation fed to the network, ``presyn`` the
    output layer's pre-activation sums (unbounded), ``postsyn`` the output
    layer after tanh (in [-1, 1]).
    """

    inputs: np.ndarray
    presyn: np.ndarray
    postsyn: np.ndarray
    label: str = "run"

    def __post_init__(self):
        if not (len(self.inputs) == len(self.presyn) == len(self.postsyn)):
            raise ValueError("trajectory families must have the same number of steps")

    @property
    def steps(self) -> int:
        return int(len(self.inputs))

    def family(self, name: str) -> np.ndarray:
        try:
            return {"input": self.inputs, "pre": self.presyn, "post": self.postsyn}[name]
        except KeyError:
            raise ValueError(f"unknown trajectory family {name!r}") from None


@dataclass(frozen=True)
class EvalResult:
    fitness: float
    trajectory: TrajectoryRecord | None = None


class SegmentCrawler:
    """A chain of masses on a line that crawls like an inchworm.

    ``segments`` point masses are linked by actuated springs; each action
    entry sets the target length of one spring.  A compressed segment grips
    the ground (its drag rises by ``grip_gain`` times its compression), and a
    weak anisotropy makes sliding backward slightly more expensive than
    sliding forward.  Uncoordinated wiggling therefore goes nowhere much,
    uniform pumping creeps forward, and a wave of contraction traveling
    tail-ward drives the body forward hard.  Fitness is the displacement of
    the center of mass since reset, which makes it invariant to shifting the
    start position.
    """

    def __init__(
        self,
        segments: int = 5,
        rest_length: float = 1.0,
        stiffness: float = 30.0,
        spring_damping: float = 1.0,
        base_drag: float = 1.0,
        grip_gain: float = 12.0,
        forward_drag: float = 0.05,
        backward_drag: float = 0.6,
        extension_amplitude: float = 0.5,
        dt: float = 0.05,
        origin: float = 0.0,
        max_steps: int = 1000,
    ):
        if segments < 2:
            raise ValueError("need at least 2 segments")
        if backward_drag < forward_drag:
            raise ValueError("backward drag must be >= forward drag (anisotropy)")
        if base_drag <= 0 or grip_gain < 0:
            raise ValueError("base_drag must be positive and grip_gain >= 0")
        self.segments = int(segments)
        self.rest_length = float(rest_length)
        self.stiffness = float(stiffness)
        self.spring_damping = float(spring_damping)
        self.base_drag = float(base_drag)
        self.grip_gain = float(grip_gain)
        self.forward_drag = float(forward_drag)
        self.backward_drag = float(backward_drag)
        self.extension_amplitude = float(extension_amplitude)
        self.dt = float(dt)
        self.origin = float(origin)
        self.max_steps = int(max_steps)
        self.observation_dim = 2 * self.segments
        self.action_dim = self.segments - 1
        self.reset(0)

    def reset(self, seed: int) -> np.ndarray:
        # The layout is fully deterministic; the seed is accepted for
        # interface uniformity and stored for the record.
        self._seed = int(seed)
        self._x = self.origin + self.rest_length * np.arange(self.segments, dtype=np.float64)
        self._v = np.zeros(self.segments)
        self._start_com = float(np.mean(self._x))
        self._steps = 0
        self._done = False
        return self._observe()

    def _length_ratios(self) -> np.ndarray:
        gaps = (self._x[1:] - self._x[:-1]) / self.rest_length
        ratios = np.empty(self.segments)
        ratios[0] = gaps[0]
        ratios[-1] = gaps[-1]
        if self.segments > 2:
            ratios[1:-1] = 0.5 * (gaps[:-1] + gaps[1:])
        return ratios

    def _observe(self) -> np.ndarray:
        return np.concatenate([self._length_ratios(), self._v])

    @property
    def fitness(self) -> float:
        return float(np.mean(self._x) - self._start_com)

    def step(self, action) -> tuple[np.ndarray, bool]:
        action = np.asarray(action, dtype=np.float64)
        if action.shape != (self.action_dim,):
            raise ValueError(f"action length {action.shape} != {self.action_dim}")
        if self._done:
            return self._observe(), True
        if not np.all(np.isfinite(action)):
            self._done = True  # failed episode; fitness so far is retained
            return self._observe(), True
        action = np.clip(action, -1.0, 1.0)
        targets = self.rest_length * (1.0 + self.extension_amplitude * action)
        gaps = self._x[1:] - self._x[:-1]
        rel_v = self._v[1:] - self._v[:-1]
        spring = self.stiffness * (targets - gaps) - self.spring_damping * rel_v
        force = np.zeros(self.segments)
        force[1:] += spring  # positive spring force pushes the pair apart
        force[:-1] -= spring
        compression = np.clip(1.0 - self._length_ratios(), 0.0, None)
        anisotropy = np.where(self._v >= 0.0, self.forward_drag, self.backward_drag)
        force -= (self.base_drag * (1.0 + self.grip_gain * compression) + anisotropy) * self._v
        self._v += self.dt * force  # unit masses
        self._x += self.dt * self._v
        self._steps += 1
        if self._steps >= self.max_steps:
            self._done = True
        return self._observe(), self._done


class PointNavigator:
    """A damped point mass chasing a seeded waypoint sequence in the plane.

    The action is a 2D force; fitness counts completed waypoint legs plus
    fractional progress along the current leg.  Damping bounds the speed at
    force_scale / damping for any bounded action sequence.
    """

    DAMPING_FLOOR = 0.5

    def __init__(
        self,
        waypoints: int = 8,
        min_leg: float = 2.0,
        max_leg: float = 4.0,
        reach_radius: float = 0.5,
        force_scale: float = 2.0,
        damping: float = 1.5,
        dt: float = 0.1,
        max_steps: int = 1000,
    ):
        if damping < self.DAMPING_FLOOR:
            raise ValueError(f"damping must be >= {self.DAMPING_FLOOR}")
        if not 0 < min_leg <= max_leg:
            raise ValueError("waypoint leg lengths must satisfy 0 < min <= max")
        self.waypoints = int(waypoints)
        self.min_leg = float(min_leg)
        self.max_leg = float(max_leg)
        self.reach_radius = float(reach_radius)
        self.force_scale = float(force_scale)
        self.damping = float(damping)
        self.dt = float(dt)
        self.max_steps = int(max_steps)
        self.observation_dim = 4
        self.action_dim = 2
        self.reset(0)

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(int(seed))
        points = [np.zeros(2)]
        for _ in range(self.waypoints):
            heading = rng.uniform(0.0, 2.0 * np.pi)
            leg = rng.uniform(self.min_leg, self.max_leg)
            points.append(points[-1] + leg * np.array([np.cos(heading), np.sin(heading)]))
        self._anchors = np.array(points)  # row 0 is the start position
        self._pos = np.zeros(2)
        self._vel = np.zeros(2)
        self._current = 0  # index of the waypoint being chased (anchor row +1)
        self._steps = 0
        self._done = False
        return self._observe()

    def _target(self) -> np.ndarray:
        idx = min(self._current, self.waypoints - 1)
        return self._anchors[idx + 1]

    def _observe(self) -> np.ndarray:
        return np.concatenate([self._target() - self._pos, self._vel])

    @property
    def fitness(self) -> float:
        if self._current >= self.waypoints:
            return float(self.waypoints)
        target = self._anchors[self._current + 1]
        leg = float(np.linalg.norm(target - self._anchors[self._current]))
        remaining = float(np.linalg.norm(target - self._pos))
        partial = min(max(1.0 - remaining / leg, 0.0), 1.0)
        return float(self._current) + partial

    def step(self, action) -> tuple[np.ndarray, bool]:
        action = np.asarray(action, dtype=np.float64)
        if action.shape != (self.action_dim,):
            raise ValueError(f"action length {action.shape} != {self.action_dim}")
        if self._done:
            return self._observe(), True
        if not np.all(np.isfinite(action)):
            self._done = True  # failed episode; fitness so far is retained
            return self._observe(), True
        action = np.clip(action, -1.0, 1.0)
        self._vel += self.dt * (self.force_scale * action - self.damping * self._vel)
        self._pos += self.dt * self._vel
        while (
            self._current < self.waypoints
            and np.linalg.norm(self._anchors[self._current + 1] - self._pos) < self.reach_radius
        ):
            self._current += 1
        self._steps += 1
        if self._steps >= self.max_steps:
            self._done = True
        return self._observe(), self._done


_ENV_REGISTRY = {
    "segment_crawler": SegmentCrawler,
    "point_navigator": PointNavigator,
}


def make_env(spec: EnvSpec):
    """Instantiate the environment named by ``spec``.

    Unknown environment names or constructor parameters are rejected so a
    misspelled config key cannot silently change an experiment.  The episode
    length of the spec caps the environment's step budget.
    """
    try:
        cls = _ENV_REGISTRY[spec.name]
    except KeyError:
        raise ValueError(
            f"unknown environment {spec.name!r}; known: {sorted(_ENV_REGISTRY)}"
        ) from None
    allowed = set(inspect.signature(cls.__init__).parameters) - {"self"}
    params = dict(spec.params)
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise ValueError(f"environment {spec.name!r}: unknown params {unknown}")
    params.setdefault("max_steps", spec.episode_steps)
    return cls(**params)


def _default_weight_init(scheme: str) -> WeightInit:
    if scheme == WEIGHTLESS_NEURON_CENTRIC:
        return WeightInit.zeros()
    return WeightInit.uniform(-0.1, 0.1)


def evaluate(
    genome: Genome,
    env_spec: EnvSpec,
    episode_steps: int | None = None,
    capture: bool = False,
    *,
    seed: int = 0,
    weight_init: WeightInit | None = None,
    memory_window: int | None = None,
    label: str = "run",
) -> EvalResult:
    """Roll a genome out for one episode and return its fitness.

    Each step runs observation -> forward -> Hebbian update -> action.  For
    weightless genomes the update is implicit: the step pushes the activation
    snapshot into the window instead of touching stored weights.  The episode
    seed is split into an environment seed and a weight-init seed, so a
    (genome, seed) pair is fully reproducible.  With ``capture`` set, the
    (observation, output pre-activation, output activation) triple of every
    step is recorded; capture never changes the fitness.
    """
    steps = env_spec.episode_steps if episode_steps is None else int(episode_steps)
    env = make_env(replace(env_spec, episode_steps=steps))
    topo = genome.topology
    if topo.n_inputs != env.observation_dim or topo.n_outputs != env.action_dim:
        raise ValueError(
            f"genome topology {topo.layer_sizes} does not match environment dims "
            f"(observation {env.observation_dim}, action {env.action_dim})"
        )
    if steps > env.max_steps:
        raise ValueError(f"episode_steps {steps} exceeds environment max_steps {env.max_steps}")
    if weight_init is None:
        weight_init = _default_weight_init(genome.scheme)

    env_seed, net_seed = (int(s) for s in np.random.SeedSequence(seed).generate_state(2))
    obs = env.reset(env_seed)
    captured_in: list[np.ndarray] = []
    captured_pre: list[np.ndarray] = []
    captured_post: list[np.ndarray] = []

    if genome.scheme == WEIGHTLESS_NEURON_CENTRIC:
        if weight_init.mode != "zeros":
            raise ValueError("weightless genomes require zero-initialized weights")
        if memory_window is None:
            raise ValueError("weightless evaluation requires a memory_window")
        rules = decode_genome(as_scheme(genome, NEURON_CENTRIC)).layer_rules()
        state = WeightlessState(topo, memory_window)
        for _ in range(steps):
            out = _step_weightless(state, rules, obs)
            if capture:
                captured_in.append(np.array(obs))
                captured_pre.append(state.last_presynaptic_sums[-1].copy())
                captured_post.append(out.copy())
            obs, done = env.step(out)
            if done:
                break
    else:
        rules = decode_genome(genome).layer_rules()
        net = PlasticNetwork(topo)
        net.init_weights(weight_init, net_seed)
        for _ in range(steps):
            out = net.forward(obs)
            if capture:
                captured_in.append(np.array(obs))
                captured_pre.append(net.last_presynaptic_sums[-1].copy())
                captured_post.append(out.copy())
            acts = net.last_activations
            for k, rule in enumerate(rules):
                net.weights[k] += rule.delta(acts[k], acts[k + 1])
            obs, done = env.step(out)
            if done:
                break

    trajectory = None
    if capture:
        trajectory = TrajectoryRecord(
            inputs=np.array(captured_in),
            presyn=np.array(captured_pre),
            postsyn=np.array(captured_post),
            label=label,
        )
    return EvalResult(fitness=env.fitness, trajectory=trajectory)
