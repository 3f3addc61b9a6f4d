"""Adversarial anchor perturbations along the loss-ascent direction.

Each anchor feature j receives a small rotation RY(2 beta_j) where beta_j
couples the per-feature strength lambda_j to the anchor gradient.  In the
triplet circuit the rotations act only where ancilla 2 reads 0, so the
positive/negative branches are untouched.  In the default mode the
perturbation is applied at both encoding stages, which makes the
adversarial circuit exactly equivalent to re-running the natural circuit
with anchor features shifted by 2 beta / pi; the single-stage mode keeps
the initial encoding natural and perturbs only the re-encoding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ansatz import AnsatzParams
from .embedding import MarginSpec, Sample, Triplet, encode_sample
from .grad import MODE_EXACT, MODE_HALFPI, GradientVec, triplet_anchor_gradient
from .kernels import expectation_zz_kernel, run_circuit
from .metric import TripletPlan, hinge_scale
from .qsim import GateOp, Ket, RegisterLayout, apply_sequence, pack_gates, ry_matrix

STAGE_BOTH = "both"
STAGE_REENCODE = "reencode-only"


class AdversarialError(ValueError):
    """Perturbation configuration violates its bound or shape contract."""


@dataclass(frozen=True)
class AdversarialConfig:
    """Perturbation strengths and their norm bound.

    ``lam`` is the per-feature strength vector, bounded by
    ``norm_p(lam) <= bound``.  ``angle_mode`` selects how strengths and
    gradients combine into rotation half-angles:

    * ``small-angle``: beta_j = lam_j * grad_j (default; well defined for
      any gradient),
    * ``literal-arccos``: beta_j = arccos(clamp(1 + lam_j grad_j, -1, 1)),
      kept for fidelity to the constructed-rotation formulation; the
      arccos argument is clamped because it exceeds 1 whenever
      lam_j grad_j > 0.
    """

    lam: np.ndarray = field(repr=False)
    bound: float = 0.1
    p_norm: float = np.inf
    angle_mode: str = "small-angle"
    grad_mode: str = MODE_HALFPI
    stages: str = STAGE_BOTH

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.lam, dtype=np.float64))
        object.__setattr__(self, "lam", lam)
        if self.bound <= 0:
            raise AdversarialError("bound must be positive")
        if self.p_norm not in (1, 2, np.inf):
            raise AdversarialError("p_norm must be 1, 2, or inf")
        if np.linalg.norm(lam, ord=self.p_norm) > self.bound + 1e-12:
            raise AdversarialError("lambda violates its norm bound")
        if self.angle_mode not in ("small-angle", "literal-arccos"):
            raise AdversarialError(f"unknown angle mode {self.angle_mode!r}")
        if self.grad_mode not in (MODE_HALFPI, MODE_EXACT):
            raise AdversarialError(f"unknown gradient mode {self.grad_mode!r}")
        if self.stages not in (STAGE_BOTH, STAGE_REENCODE):
            raise AdversarialError(f"unknown stage mode {self.stages!r}")

    @classmethod
    def uniform(cls, n_features: int, strength: float = 0.1, **kwargs) -> "AdversarialConfig":
        kwargs.setdefault("bound", max(strength, 1e-12))
        return cls(lam=np.full(n_features, strength), **kwargs)


def rotation_angles(grad: GradientVec, cfg: AdversarialConfig) -> np.ndarray:
    """Half-angles beta_j from the gradient and the configured mode."""
    if grad.target != "anchor-features":
        raise AdversarialError("adversarial rotations need an anchor-feature gradient")
    if grad.partials.size != cfg.lam.size:
        raise AdversarialError("gradient and lambda lengths differ")
    coupling = cfg.lam * grad.partials
    if cfg.angle_mode == "small-angle":
        return coupling
    return np.arccos(np.clip(1.0 + coupling, -1.0, 1.0))


def build_adversarial_rotation(grad: GradientVec, cfg: AdversarialConfig) -> list[GateOp]:
    """Per-feature RY(2 beta_j) gates on the sample register."""
    return [
        GateOp(target=j, matrix=ry_matrix(2.0 * beta))
        for j, beta in enumerate(rotation_angles(grad, cfg))
    ]


def controlled_adversarial(gates, layout: RegisterLayout) -> list[GateOp]:
    """Condition every perturbation gate on ancilla 2 reading 0."""
    if layout.ancilla2 is None:
        raise AdversarialError("layout has no ancilla 2 to control on")
    ancillas = {layout.ancilla1, layout.ancilla2}
    out = []
    for gate in gates:
        touched = {gate.target} | {q for q, _ in gate.controls}
        if touched & ancillas:
            raise AdversarialError("perturbation gates must act on sample qubits only")
        out.append(
            GateOp(
                target=gate.target,
                matrix=gate.matrix,
                controls=gate.controls + ((layout.ancilla2, 0),),
            )
        )
    return out


def adversarial_anchor_state(x: Sample, grad: GradientVec, cfg: AdversarialConfig) -> Ket:
    """Perturbed anchor encoding; unit norm since rotations are unitary."""
    return apply_sequence(encode_sample(x), build_adversarial_rotation(grad, cfg))


def perturbed_anchor_features(x, grad: GradientVec, cfg: AdversarialConfig) -> np.ndarray:
    """Feature-space image of the perturbation: x + (2/pi) beta.

    Rotating encoding qubit j by beta_j equals encoding x_j + 2 beta_j / pi,
    so the both-stages adversarial circuit is the natural circuit at these
    shifted features.
    """
    x = np.asarray(x, dtype=np.float64)
    return x + (2.0 / np.pi) * rotation_angles(grad, cfg)


def adversarial_gradient(
    t: Triplet, p: AnsatzParams, margin: MarginSpec, cfg: AdversarialConfig
) -> GradientVec:
    """Anchor gradient in the configured mode (ascent direction source)."""
    return triplet_anchor_gradient(t, p, margin, mode=cfg.grad_mode)


def adversarial_expectation(
    t: Triplet,
    p: AnsatzParams,
    margin: MarginSpec,
    grad: GradientVec,
    cfg: AdversarialConfig,
) -> float:
    """<Z1 Z2> of the perturbed circuit for one triplet."""
    betas = rotation_angles(grad, cfg)
    xa = t.anchor.features
    xp = t.positive.features
    xn = t.negative.features
    if cfg.stages == STAGE_BOTH:
        shifted = xa + (2.0 / np.pi) * betas
        plan = TripletPlan(shifted, xp, xn, margin, p.qubit_count, p.layers)
        return plan.expectation(p.flat)
    plan = TripletPlan(xa, xp, xn, margin, p.qubit_count, p.layers)
    extra = controlled_adversarial(
        [GateOp(target=j, matrix=ry_matrix(2.0 * b)) for j, b in enumerate(betas)],
        plan.layout,
    )
    return _expectation_with_extra_gates(plan, p.flat, extra)


def adversarial_loss(
    t: Triplet,
    p: AnsatzParams,
    margin: MarginSpec,
    grad: GradientVec,
    cfg: AdversarialConfig,
) -> float:
    """Hinged loss of the perturbed triplet."""
    return max(0.0, hinge_scale(margin) * adversarial_expectation(t, p, margin, grad, cfg))


def _expectation_with_extra_gates(plan: TripletPlan, flat_theta, extra_gates) -> float:
    """Run a plan with gates inserted between the re-encode and the Hadamard."""
    half = np.asarray(flat_theta, dtype=np.float64) / 2.0
    mats = plan.mats.copy()
    if plan.theta_slots.size:
        c, s = np.cos(half), np.sin(half)
        mats[plan.theta_slots, 0, 0] = c
        mats[plan.theta_slots, 0, 1] = -s
        mats[plan.theta_slots, 1, 0] = s
        mats[plan.theta_slots, 1, 1] = c
    et, ec, ev, em = pack_gates(extra_gates, plan.layout)
    # splice before the trailing Hadamard slot
    targets = np.concatenate([plan.targets[:-1], et, plan.targets[-1:]])
    cmasks = np.concatenate([plan.cmasks[:-1], ec, plan.cmasks[-1:]])
    cvals = np.concatenate([plan.cvals[:-1], ev, plan.cvals[-1:]])
    mats = np.concatenate([mats[:-1], em, mats[-1:]])
    amps = run_circuit(plan.amps0, targets, cmasks, cvals, mats)
    return float(expectation_zz_kernel(amps, *plan.zz_bits))
