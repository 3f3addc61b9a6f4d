"""Interference expectation, triplet hinge loss, and the exact oracle.

The measurement circuit is: prepare the margin-weighted triplet state,
apply the ansatz to the sample register, branch-select the re-encoding,
interfere the sample pairs with a Hadamard on ancilla 2, and read
<Z1 Z2> over the two ancillas.  The loss is

    L = max(0, 4 sqrt(alpha^2 + 1) * <Z1 Z2>).

Ground truth for tests is the pairwise-overlap decomposition: at alpha = 0
the measured expectation equals (S_an - S_ap) / 2 where S_xy are inner
products of the embedded samples.  A legacy closed-form estimate
(``closed_form_expectation``) is kept purely as a diagnostic; its residual
against the simulated value is reported, never trusted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qsim
from .ansatz import AnsatzParams, build_ansatz, embed_features, module_pairs
from .embedding import (
    BATCH_CAP,
    MarginSpec,
    Triplet,
    _triplet_amplitudes,
    batch_reencode_gates,
    prepare_batch_superposition,
    prepared_norm_constant,
    reencode_gates,
)
from .kernels import expectation_zz_kernel, run_circuit
from .qsim import RegisterLayout, hadamard_matrix, pack_gates


class MetricError(ValueError):
    """Loss evaluation asked for an inconsistent or empty configuration."""


@dataclass(frozen=True)
class LossReport:
    """One loss evaluation with its oracle cross-checks.

    ``expectation``           measured <Z1 Z2>
    ``loss``                  hinge value fed to the optimizer
    ``s_ap`` / ``s_an``       oracle overlaps of the embedded pairs
    ``z_norm``                pre-normalization squared norm of the prepared state
    ``calibration_residual``  expectation minus the legacy closed-form estimate
    """

    expectation: float
    loss: float
    s_ap: float
    s_an: float
    z_norm: float
    calibration_residual: float


def hinge_scale(margin: MarginSpec) -> float:
    return 4.0 * np.sqrt(margin.alpha**2 + 1.0)


def triplet_loss(expectation: float, margin: MarginSpec) -> float:
    """Hinge loss max(0, 4 sqrt(alpha^2+1) expectation)."""
    return max(0.0, hinge_scale(margin) * expectation)


def closed_form_expectation(s_ap: float, s_an: float, margin: MarginSpec) -> float:
    """Idealized closed-form expectation estimate, kept as a diagnostic.

    (S_an - S_ap - margin) / (4 sqrt(alpha^2 + 1)).  The simulated circuit
    is authoritative; the deviation from this estimate is reported as
    ``calibration_residual``.
    """
    return (s_an - s_ap - margin.margin) / hinge_scale(margin)


# ---------------------------------------------------------------------------
# packed measurement plan
# ---------------------------------------------------------------------------

class TripletPlan:
    """Packed circuit for one triplet: fast repeated evaluation over theta.

    The prepared amplitudes and the re-encode/Hadamard tail are fixed;
    each evaluation only rewrites the ansatz RY matrices in place.
    Instances are cheap to build and safe to reuse sequentially.
    """

    def __init__(self, xa, xp, xn, margin: MarginSpec, qubit_count: int, layers: int):
        self.margin = margin
        self.n = qubit_count
        self.layers = layers
        self.layout = RegisterLayout.with_ancillas(qubit_count)
        amps, z = _triplet_amplitudes(xa, xp, xn, margin)
        if z <= 0:
            raise MetricError("degenerate triplet state")
        self.z_norm = z
        self.amps0 = amps / np.sqrt(z)
        template = AnsatzParams.zeros(qubit_count, layers)
        gates = build_ansatz(template)
        self.theta_slots = _ry_slot_indices(qubit_count, layers)
        gates += reencode_gates(xa, xp, xn, qubit_count)
        gates.append(qsim.GateOp(target=qubit_count + 1, matrix=hadamard_matrix()))
        self.targets, self.cmasks, self.cvals, self.mats = pack_gates(gates, self.layout)
        self.zz_bits = (self.layout.bit(qubit_count), self.layout.bit(qubit_count + 1))

    def expectation(self, flat_theta: np.ndarray) -> float:
        """Run the circuit with the given flat ansatz angles."""
        mats = self.mats
        if self.theta_slots.size:
            half = np.asarray(flat_theta, dtype=np.float64) / 2.0
            c, s = np.cos(half), np.sin(half)
            mats = mats.copy()
            mats[self.theta_slots, 0, 0] = c
            mats[self.theta_slots, 0, 1] = -s
            mats[self.theta_slots, 1, 0] = s
            mats[self.theta_slots, 1, 1] = c
        amps = run_circuit(self.amps0, self.targets, self.cmasks, self.cvals, mats)
        return float(expectation_zz_kernel(amps, *self.zz_bits))


def _ry_slot_indices(n: int, layers: int) -> np.ndarray:
    """Gate-slot index of each flat theta entry in the packed ansatz."""
    mods = len(module_pairs(n))
    slots = []
    for layer in range(layers):
        for m in range(mods):
            base = (layer * mods + m) * 3
            slots.extend((base, base + 1))
    return np.asarray(slots, dtype=np.intp)


class BatchPlan:
    """Index-register superposition over a batch, same interface as TripletPlan."""

    def __init__(self, batch, margin: MarginSpec, qubit_count: int, layers: int):
        state = prepare_batch_superposition(batch, margin)
        self.layout = state.layout
        self.amps0 = state.amplitudes
        self.n = qubit_count
        template = AnsatzParams.zeros(qubit_count, layers)
        gates = build_ansatz(template)
        self.theta_slots = _ry_slot_indices(qubit_count, layers)
        gates += batch_reencode_gates(batch, qubit_count)
        gates.append(qsim.GateOp(target=qubit_count + 1, matrix=hadamard_matrix()))
        self.targets, self.cmasks, self.cvals, self.mats = pack_gates(gates, self.layout)
        self.zz_bits = (self.layout.bit(qubit_count), self.layout.bit(qubit_count + 1))

    expectation = TripletPlan.expectation


def plan_for_triplet(t: Triplet, p: AnsatzParams, margin: MarginSpec) -> TripletPlan:
    if t.dim != p.qubit_count:
        raise MetricError("triplet dimension does not match ansatz qubits")
    return TripletPlan(
        t.anchor.features, t.positive.features, t.negative.features,
        margin, p.qubit_count, p.layers,
    )


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def measure_triplet_expectation(t: Triplet, p: AnsatzParams, margin: MarginSpec) -> float:
    """<Z1 Z2> of the full interference circuit for one triplet."""
    return plan_for_triplet(t, p, margin).expectation(p.flat)


def oracle_inner_products(t: Triplet, p: AnsatzParams) -> tuple[float, float]:
    """Ground-truth overlaps (s_ap, s_an) of the embedded triplet members."""
    ga = embed_features(t.anchor.features, p)
    gp = embed_features(t.positive.features, p)
    gn = embed_features(t.negative.features, p)
    return float(np.vdot(ga, gp).real), float(np.vdot(ga, gn).real)


def batch_loss(batch, p: AnsatzParams, margin: MarginSpec, mode: str = "classical-average") -> LossReport:
    """Loss of a batch: hinge applied to the mean expectation.

    ``classical-average`` evaluates each triplet's circuit and averages;
    ``superposed`` runs one circuit with an index register (power-of-two
    batch up to 4).  The two agree by linearity.
    """
    batch = list(batch)
    if not batch:
        raise MetricError("empty batch")
    if mode == "classical-average":
        expectation = float(
            np.mean([measure_triplet_expectation(t, p, margin) for t in batch])
        )
    elif mode == "superposed":
        if len(batch) > BATCH_CAP:
            raise MetricError(f"superposed mode capped at {BATCH_CAP} triplets")
        plan = BatchPlan(batch, margin, p.qubit_count, p.layers)
        expectation = plan.expectation(p.flat)
    else:
        raise MetricError(f"unknown batch mode {mode!r}")
    pairs = [oracle_inner_products(t, p) for t in batch]
    s_ap = float(np.mean([a for a, _ in pairs]))
    s_an = float(np.mean([b for _, b in pairs]))
    z = float(np.mean([prepared_norm_constant(t, margin) for t in batch]))
    return LossReport(
        expectation=expectation,
        loss=triplet_loss(expectation, margin),
        s_ap=s_ap,
        s_an=s_an,
        z_norm=z,
        calibration_residual=expectation - closed_form_expectation(s_ap, s_an, margin),
    )


def triplet_report(t: Triplet, p: AnsatzParams, margin: MarginSpec) -> LossReport:
    """Single-triplet loss report; identical to a batch of one."""
    return batch_loss([t], p, margin)


def classical_triplet_loss(ga, gp, gn, mu: float) -> float:
    """Reference hinge loss on plain vectors with the angular distance.

    D(u, v) = 1 - |u.v| / (||u|| ||v||); returns [D(ga,gp) - D(ga,gn) + mu]_+.
    Used as a classical test oracle, not in the quantum pipeline.
    """
    ga, gp, gn = (np.asarray(v, dtype=np.float64) for v in (ga, gp, gn))
    for v in (ga, gp, gn):
        if np.linalg.norm(v) == 0:
            raise MetricError("zero-norm vector has no angular distance")

    def dist(u, v):
        return 1.0 - abs(float(np.dot(u, v))) / (np.linalg.norm(u) * np.linalg.norm(v))

    return max(0.0, dist(ga, gp) - dist(ga, gn) + mu)
