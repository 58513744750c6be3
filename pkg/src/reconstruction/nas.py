"""Reinforcement-learning architecture search over small occupancy MLPs.

A controller holds one categorical distribution per hidden-layer slot over
{terminate} and every (width, activation) pair. Sampled children borrow
their parameters from a shared supernet, train for a few epochs, and are
scored on the voxel grid; the size-penalized reward drives a REINFORCE
update of the controller after every round.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import softmax

from .config import ACC_BASE, DEFAULT_ACTIVATIONS, INPUT_DIM, MAX_HIDDEN, P_BASE, P_MAX, WIDTHS, SearchConfig
from .errors import ConfigurationError, NumericOverflowError, TrainingDivergedError
from .neuralnet import (
    Activation,
    ActivationKind,
    ArchSpec,
    Layer,
    MlpNetwork,
    full_grid_accuracy,
    parameter_count,
    train,
)

logger = logging.getLogger(__name__)

TERMINATE = 0


@dataclass(frozen=True)
class SearchSpace:
    widths: Tuple[int, ...] = WIDTHS
    activations: Tuple[ActivationKind, ...] = tuple(ActivationKind.from_name(n) for n in DEFAULT_ACTIVATIONS)
    max_hidden: int = MAX_HIDDEN

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(self.widths))
        object.__setattr__(self, "activations", tuple(ActivationKind(a) for a in self.activations))
        if not self.widths or list(self.widths) != sorted(set(self.widths)):
            raise ConfigurationError("search widths must be nonempty, sorted and distinct")
        if not self.activations:
            raise ConfigurationError("search space needs at least one activation")
        if self.max_hidden < 1:
            raise ConfigurationError("max_hidden must be at least 1")

    @classmethod
    def from_names(cls, activations=DEFAULT_ACTIVATIONS, widths=WIDTHS, max_hidden=MAX_HIDDEN):
        return cls(tuple(widths), tuple(ActivationKind.from_name(a) for a in activations), max_hidden)

    @property
    def choices(self):
        """(width, activation) pairs; decision index ``i + 1`` selects ``choices[i]``."""
        return [(w, Activation(a)) for w, a in product(self.widths, self.activations)]

    @property
    def decision_count(self):
        return 1 + len(self.widths) * len(self.activations)

    def contains(self, arch):
        return arch.in_space(self.widths, self.max_hidden, self.activations)

    def decisions(self, arch):
        """(slot, decision) pairs that produce ``arch``, terminate included when depth < max_hidden."""
        if not self.contains(arch):
            raise ConfigurationError(f"architecture {arch} is outside the search space")
        n_act = len(self.activations)
        steps = [
            (slot, 1 + self.widths.index(layer.width) * n_act + self.activations.index(layer.activation.kind))
            for slot, layer in enumerate(arch.hidden)
        ]
        if arch.depth < self.max_hidden:
            steps.append((arch.depth, TERMINATE))
        return steps

    def to_dict(self):
        return {
            "widths": list(self.widths),
            "activations": [a.name.lower() for a in self.activations],
            "max_hidden": self.max_hidden,
        }


@dataclass
class ControllerPolicy:
    """Per-slot logits, shape (max_hidden, decision_count); column 0 is terminate."""

    logits: np.ndarray
    baseline: Optional[float] = None
    temperature: float = 1.0

    @classmethod
    def uniform(cls, space, temperature=1.0):
        """Every depth in 1..max_hidden equally likely, every (width, activation) equally likely per slot."""
        logits = np.zeros((space.max_hidden, space.decision_count))
        continues = space.decision_count - 1
        for slot in range(1, space.max_hidden):
            # P(stop here | depth >= slot) = 1 / (max_hidden - slot + 1)
            logits[slot, TERMINATE] = np.log(continues / (space.max_hidden - slot))
        return cls(logits * temperature, None, temperature)

    def probabilities(self, slot):
        z = self.logits[slot] / self.temperature
        if slot == 0:
            # At least one hidden layer.
            z = z.copy()
            z[TERMINATE] = -np.inf
        return softmax(z)

    def log_prob(self, arch, space):
        return float(sum(np.log(self.probabilities(slot)[d]) for slot, d in space.decisions(arch)))

    def copy(self):
        return ControllerPolicy(self.logits.copy(), self.baseline, self.temperature)


@dataclass
class CandidateRecord:
    arch: ArchSpec
    acc: float
    size: int
    reward: float
    round: int
    index_in_round: int
    note: Optional[str] = None

    @property
    def depth(self):
        return self.arch.depth

    def to_dict(self):
        return {
            "arch": str(self.arch),
            "acc": self.acc,
            "size": self.size,
            "reward": self.reward,
            "round": self.round,
            "index_in_round": self.index_in_round,
            "depth": self.depth,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            arch=ArchSpec.from_string(data["arch"]),
            acc=float(data["acc"]),
            size=int(data["size"]),
            reward=float(data["reward"]),
            round=int(data["round"]),
            index_in_round=int(data["index_in_round"]),
            note=data.get("note"),
        )


def reward_formula(acc, size):
    """Accuracy gain over 0.98 plus the parameter saving against 7553, scaled by the 21121 maximum."""
    return (acc - ACC_BASE) + (P_BASE - size) / P_MAX


def candidate_reward(acc, size, size_reward_enabled=True):
    if size_reward_enabled:
        return reward_formula(acc, size)
    return acc - ACC_BASE


def sample_architecture(policy, space, rng):
    choices = space.choices
    layers = []
    for slot in range(space.max_hidden):
        p = policy.probabilities(slot)
        decision = int(rng.choice(len(p), p=p))
        if decision == TERMINATE:
            break
        width, activation = choices[decision - 1]
        layers.append(Layer(width, activation))
    return ArchSpec(tuple(layers))


def greedy_architecture(policy, space):
    """Most probable decision at every slot."""
    choices = space.choices
    layers = []
    for slot in range(space.max_hidden):
        decision = int(np.argmax(policy.probabilities(slot)))
        if decision == TERMINATE:
            break
        layers.append(Layer(*choices[decision - 1]))
    return ArchSpec(tuple(layers))


def update_policy(policy, records, space, learning_rate=1.0, baseline_decay=0.7):
    """One REINFORCE step over a round of scored candidates.

    Advantages are taken against the baseline as it stood before the round
    and divided by their root mean square, so a step moves the logits by
    about ``learning_rate`` whatever the reward scale. The baseline then
    absorbs the round's rewards as an exponential moving average; a policy
    without a baseline starts from the round's mean reward.
    """
    if not records:
        raise ValueError("update_policy needs at least one record")
    rewards = np.array([r.reward for r in records], dtype=np.float64)
    baseline = float(rewards.mean()) if policy.baseline is None else policy.baseline
    advantages = rewards - baseline
    scale = float(np.sqrt(np.mean(advantages ** 2)))
    updated = policy.copy()
    if scale > 0.0:
        for record, advantage in zip(records, advantages / scale):
            if advantage == 0.0:
                continue
            for slot, decision in space.decisions(record.arch):
                grad = -policy.probabilities(slot)
                grad[decision] += 1.0
                updated.logits[slot] += learning_rate * advantage * grad / policy.temperature
    for reward in rewards:
        baseline = baseline_decay * baseline + (1.0 - baseline_decay) * float(reward)
    updated.baseline = baseline
    return updated


class SharedWeights:
    """Supernet parameters; a child reads the top-left blocks of the first ``depth`` slots.

    Slot 1 is (max_width x 3), later slots (max_width x max_width). Each
    possible depth owns its own output head, since children of different
    depths end in different slots.
    """

    def __init__(self, weights, biases, heads, head_biases):
        self.weights = weights
        self.biases = biases
        self.heads = heads
        self.head_biases = head_biases

    @classmethod
    def initialize(cls, space, seed=0):
        rng = np.random.default_rng(seed)
        width = max(space.widths)
        weights = []
        for slot in range(space.max_hidden):
            fan_in = INPUT_DIM if slot == 0 else width
            limit = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(width, fan_in)))
        limit = np.sqrt(6.0 / width)
        heads = rng.uniform(-limit, limit, size=(space.max_hidden, width))
        return cls(weights, np.zeros((space.max_hidden, width)), heads, np.zeros((space.max_hidden, 1)))

    @property
    def max_hidden(self):
        return len(self.weights)

    def child(self, arch):
        """Network whose parameters are views into this supernet."""
        if arch.depth > self.max_hidden or max(arch.widths) > self.heads.shape[1]:
            raise ConfigurationError(f"architecture {arch} does not fit the shared weights")
        weights, biases = [], []
        fan_in = INPUT_DIM
        for slot, width in enumerate(arch.widths):
            weights.append(self.weights[slot][:width, :fan_in])
            biases.append(self.biases[slot][:width])
            fan_in = width
        depth = arch.depth
        return MlpNetwork(arch, weights, biases, self.heads[depth - 1:depth, :fan_in], self.head_biases[depth - 1])

    def arrays(self):
        return [*self.weights, self.biases, self.heads, self.head_biases]

    def snapshot(self):
        return [a.copy() for a in self.arrays()]

    def restore(self, snapshot):
        for dst, src in zip(self.arrays(), snapshot):
            np.copyto(dst, src)

    def copy(self):
        return SharedWeights(
            [w.copy() for w in self.weights], self.biases.copy(), self.heads.copy(), self.head_biases.copy()
        )

    def absorb(self, other, arch):
        """Copy the blocks ``arch`` reads from ``other`` into this supernet."""
        for dst, src in zip(self.child(arch).parameters(), other.child(arch).parameters()):
            np.copyto(dst, src)


def proxy_train_and_score(arch, shared, data, grid, cfg=None, round_number=1, index_in_round=0):
    """Train the shared-weight child for the proxy epochs and score it on the grid.

    A diverging child is recorded with accuracy 0 and its shared blocks are
    restored; the search carries on.
    """
    cfg = cfg or SearchConfig()
    offset = (round_number - 1) * cfg.per_round + index_in_round
    snapshot = shared.snapshot()
    note = None
    try:
        child = shared.child(arch)
        train(child, data, cfg.proxy_train_config(offset))
        acc = full_grid_accuracy(child, grid, cfg.accuracy_subsample, seed=cfg.seed)
    except (TrainingDivergedError, NumericOverflowError) as e:
        shared.restore(snapshot)
        acc = 0.0
        note = f"diverged: {e}"
        logger.warning("candidate %s diverged: %s", arch, e)
    size = parameter_count(arch)
    return CandidateRecord(
        arch=arch,
        acc=acc,
        size=size,
        reward=candidate_reward(acc, size, cfg.size_reward_enabled),
        round=round_number,
        index_in_round=index_in_round,
        note=note,
    )


@dataclass
class SearchResult:
    records: List[CandidateRecord]
    policy: ControllerPolicy
    space: SearchSpace
    shared: Optional[SharedWeights] = None
    greedy: Optional[ArchSpec] = None
    config: Optional[SearchConfig] = None
    history: List[ControllerPolicy] = field(default_factory=list)


def search_loop(space, cfg, evaluate, policy=None):
    """Sample ``cfg.per_round`` architectures per round, score them with ``evaluate``, update the policy.

    ``evaluate(archs, round_number)`` returns one CandidateRecord per architecture, in order.
    """
    controller_seed = np.random.SeedSequence(cfg.seed).spawn(1)[0]
    rng = np.random.default_rng(controller_seed)
    policy = policy or ControllerPolicy.uniform(space, cfg.temperature)
    records, history = [], []
    for round_number in range(1, cfg.rounds + 1):
        archs = [sample_architecture(policy, space, rng) for _ in range(cfg.per_round)]
        scored = evaluate(archs, round_number)
        for record in scored:
            logger.info(
                "round %d candidate %d: %s acc=%.5f size=%d reward=%.5f",
                record.round, record.index_in_round, record.arch, record.acc, record.size, record.reward,
            )
        policy = update_policy(policy, scored, space, cfg.controller_lr, cfg.baseline_decay)
        records.extend(scored)
        history.append(policy)
    return SearchResult(records, policy, space, greedy=greedy_architecture(policy, space), config=cfg, history=history)


def run_search(grid, data, space=None, cfg=None):
    space = space or SearchSpace()
    cfg = cfg or SearchConfig()
    shared_seed = np.random.SeedSequence(cfg.seed).spawn(2)[1]
    shared = SharedWeights.initialize(space, shared_seed)

    def evaluate(archs, round_number):
        if not cfg.parallel_candidates:
            return [
                proxy_train_and_score(arch, shared, data, grid, cfg, round_number, i)
                for i, arch in enumerate(archs)
            ]
        # Every candidate trains on its own copy of the round-start supernet; blocks merge back in order.
        copies = [shared.copy() for _ in archs]
        with ThreadPoolExecutor(max_workers=len(archs)) as pool:
            futures = [
                pool.submit(proxy_train_and_score, arch, local, data, grid, cfg, round_number, i)
                for i, (arch, local) in enumerate(zip(archs, copies))
            ]
            scored = [f.result() for f in futures]
        for arch, local in zip(archs, copies):
            shared.absorb(local, arch)
        return scored

    result = search_loop(space, cfg, evaluate)
    result.shared = shared
    best = max(result.records, key=lambda r: r.acc)
    logger.info("search finished: %d candidates, best acc %.5f (%s)", len(result.records), best.acc, best.arch)
    return result
