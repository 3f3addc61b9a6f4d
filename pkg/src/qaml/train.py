"""RMSProp training with alternating natural / adversarial batches.

One epoch is one optimizer step on one freshly sampled batch of triplets.
In the ``alternating`` schedule every second epoch first derives the
adversarial anchors from the current parameters, then optimizes the loss
of the perturbed batch; the ``natural`` schedule never touches the
adversarial machinery.  Everything is driven by a single seeded generator,
so identical configurations reproduce identical logs bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .adversarial import (
    STAGE_BOTH,
    AdversarialConfig,
    _expectation_with_extra_gates,
    adversarial_gradient,
    controlled_adversarial,
    rotation_angles,
)
from .ansatz import AnsatzParams
from .data import DatasetSplit, sample_triplets
from .embedding import MarginSpec
from .metric import TripletPlan, hinge_scale, plan_for_triplet
from .qsim import GateOp, ry_matrix

SCHEDULE_NATURAL = "natural"
SCHEDULE_ALTERNATING = "alternating"

CHECKPOINT_FORMAT = "qaml-checkpoint"
CHECKPOINT_VERSION = 1


class TrainingError(RuntimeError):
    """Training aborted: bad configuration or non-finite loss."""


@dataclass(frozen=True)
class OptimizerState:
    """RMSProp accumulator: v' = decay v + (1-decay) g^2."""

    second_moment: np.ndarray = field(repr=False)
    decay: float = 0.9
    learning_rate: float = 0.01
    epsilon_num: float = 1e-8

    def __post_init__(self):
        v = np.asarray(self.second_moment, dtype=np.float64)
        object.__setattr__(self, "second_moment", v)
        if np.any(v < 0):
            raise TrainingError("second moment must be nonnegative")
        if not 0 < self.decay < 1:
            raise TrainingError("decay must lie in (0, 1)")
        if self.learning_rate <= 0:
            raise TrainingError("learning rate must be positive")

    @classmethod
    def fresh(cls, n_params: int, learning_rate: float = 0.01) -> "OptimizerState":
        return cls(np.zeros(n_params), learning_rate=learning_rate)


def rmsprop_step(params, grad, st: OptimizerState):
    """One RMSProp update; returns (new params, new state), inputs untouched."""
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.shape != grad.shape:
        raise TrainingError("parameter and gradient shapes differ")
    if not np.all(np.isfinite(grad)):
        raise TrainingError("non-finite gradient")
    v = st.decay * st.second_moment + (1.0 - st.decay) * grad**2
    new_params = params - st.learning_rate * grad / (np.sqrt(v) + st.epsilon_num)
    return new_params, replace(st, second_moment=v)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    triplets_per_epoch: int = 4
    layers: int = 4
    schedule: str = SCHEDULE_NATURAL
    seed: int = 0
    alpha: float = 1.0
    learning_rate: float = 0.01
    adversarial: AdversarialConfig | None = None

    def __post_init__(self):
        if self.epochs < 0:
            raise TrainingError("epochs must be nonnegative")
        if self.triplets_per_epoch < 1:
            raise TrainingError("need at least one triplet per epoch")
        if self.schedule not in (SCHEDULE_NATURAL, SCHEDULE_ALTERNATING):
            raise TrainingError(f"unknown schedule {self.schedule!r}")

    @property
    def margin(self) -> MarginSpec:
        return MarginSpec(self.alpha)


@dataclass(frozen=True)
class LogEntry:
    iteration: int
    mode: str  # "natural" or "adversarial"
    loss: float
    grad_norm: float


@dataclass(frozen=True)
class TrainResult:
    params: AnsatzParams
    initial_params: AnsatzParams
    optimizer: OptimizerState
    log: tuple
    config: TrainConfig


def _batch_gradient(plans, flat_theta, margin) -> tuple[float, np.ndarray]:
    """Mean hinged loss over plans and its exact theta gradient."""
    expectations = np.array([plan.expectation(flat_theta) for plan in plans])
    mean_e = float(np.mean(expectations))
    loss = max(0.0, hinge_scale(margin) * mean_e)
    if mean_e <= 0.0:
        return loss, np.zeros(len(flat_theta))
    grads = np.zeros(len(flat_theta))
    for plan in plans:
        raw = _raw_theta_gradient(plan, flat_theta)
        grads += raw
    grads *= hinge_scale(margin) / len(plans)
    return loss, grads


def _raw_theta_gradient(plan, flat_theta) -> np.ndarray:
    partials = np.empty(len(flat_theta))
    for k in range(len(flat_theta)):
        plus = flat_theta.copy()
        plus[k] += np.pi / 2.0
        minus = flat_theta.copy()
        minus[k] -= np.pi / 2.0
        partials[k] = 0.5 * (plan.expectation(plus) - plan.expectation(minus))
    return partials


def train(cfg: TrainConfig, data: DatasetSplit) -> TrainResult:
    """Optimize the ansatz on the training split of ``data``.

    Raises ``TrainingError`` for degenerate datasets (fewer than two
    classes) or if any loss evaluation goes non-finite.
    """
    labels = {s.label for s in data.train}
    if len(labels) < 2:
        raise TrainingError("training requires at least two classes")
    dim = data.train[0].dim
    rng = np.random.default_rng(cfg.seed)
    params = AnsatzParams.random(dim, cfg.layers, rng)
    initial = params
    margin = cfg.margin
    adv_cfg = cfg.adversarial
    if cfg.schedule == SCHEDULE_ALTERNATING and adv_cfg is None:
        adv_cfg = AdversarialConfig.uniform(dim)
    state = OptimizerState.fresh(params.flat.size, learning_rate=cfg.learning_rate)
    log = []
    for iteration in range(cfg.epochs):
        adversarial_turn = cfg.schedule == SCHEDULE_ALTERNATING and iteration % 2 == 1
        batch = sample_triplets(data, cfg.triplets_per_epoch, rng=rng)
        flat = params.flat
        if not adversarial_turn:
            plans = [plan_for_triplet(t, params, margin) for t in batch]
            loss, grads = _batch_gradient(plans, flat, margin)
            mode = "natural"
        else:
            loss, grads = _adversarial_batch_gradient(batch, params, margin, adv_cfg)
            mode = "adversarial"
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss at iteration {iteration} ({mode})")
        new_flat, state = rmsprop_step(flat, grads, state)
        params = params.with_flat(new_flat)
        log.append(LogEntry(iteration, mode, float(loss), float(np.linalg.norm(grads))))
    return TrainResult(params, initial, state, tuple(log), cfg)


def _adversarial_batch_gradient(batch, params, margin, adv_cfg):
    """Loss and theta gradient of the batch with perturbed anchors."""
    plans = [_adversarial_plan(t, params, margin, adv_cfg) for t in batch]
    return _batch_gradient(plans, params.flat, margin)


class _PerturbedPlan:
    """Plan wrapper splicing fixed perturbation gates before the Hadamard."""

    def __init__(self, plan: TripletPlan, extra_gates):
        self._plan = plan
        self._extra = extra_gates

    def expectation(self, flat_theta):
        return _expectation_with_extra_gates(self._plan, flat_theta, self._extra)


def _adversarial_plan(t, params, margin, adv_cfg):
    grad = adversarial_gradient(t, params, margin, adv_cfg)
    betas = rotation_angles(grad, adv_cfg)
    if adv_cfg.stages == STAGE_BOTH:
        shifted = t.anchor.features + (2.0 / np.pi) * betas
        return TripletPlan(
            shifted, t.positive.features, t.negative.features,
            margin, params.qubit_count, params.layers,
        )
    plan = plan_for_triplet(t, params, margin)
    extra = controlled_adversarial(
        [GateOp(target=j, matrix=ry_matrix(2.0 * b)) for j, b in enumerate(betas)],
        plan.layout,
    )
    return _PerturbedPlan(plan, extra)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, result: TrainResult) -> None:
    """Write a self-describing JSON checkpoint of a training result."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "seed": result.config.seed,
        "alpha": result.config.alpha,
        "layers": result.config.layers,
        "schedule": result.config.schedule,
        "epochs": result.config.epochs,
        "triplets_per_epoch": result.config.triplets_per_epoch,
        "learning_rate": result.config.learning_rate,
        "qubit_count": result.params.qubit_count,
        "iteration": len(result.log),
        "theta": result.params.angles.tolist(),
        "theta_init": result.initial_params.angles.tolist(),
        "optimizer_second_moment": result.optimizer.second_moment.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


@dataclass(frozen=True)
class Checkpoint:
    params: AnsatzParams
    initial_params: AnsatzParams
    config: TrainConfig
    iteration: int
    optimizer_second_moment: np.ndarray


def load_checkpoint(path) -> Checkpoint:
    """Read a checkpoint; rejects unknown formats or versions."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise TrainingError(f"not a {CHECKPOINT_FORMAT} file: {path}")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise TrainingError(f"unsupported checkpoint version {payload.get('version')}")
    qubits = int(payload["qubit_count"])
    params = AnsatzParams(qubits, np.asarray(payload["theta"], dtype=np.float64))
    initial = AnsatzParams(qubits, np.asarray(payload["theta_init"], dtype=np.float64))
    cfg = TrainConfig(
        epochs=int(payload["epochs"]),
        triplets_per_epoch=int(payload["triplets_per_epoch"]),
        layers=int(payload["layers"]),
        schedule=payload["schedule"],
        seed=int(payload["seed"]),
        alpha=float(payload["alpha"]),
        learning_rate=float(payload["learning_rate"]),
    )
    return Checkpoint(
        params=params,
        initial_params=initial,
        config=cfg,
        iteration=int(payload["iteration"]),
        optimizer_second_moment=np.asarray(payload["optimizer_second_moment"]),
    )
