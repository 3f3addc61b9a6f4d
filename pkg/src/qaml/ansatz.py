"""Hardware-efficient layered circuit and the measurement-based reducer.

Each layer places a two-qubit module on every even-start pair (0,1), (2,3),
... and then every odd-start pair (1,2), (3,4), ...; a module is RY on each
qubit followed by CZ.  Everything is real-valued, so embeddings built from
this circuit have exactly zero imaginary parts.  Zero layers means the
identity transform, which doubles as the "bare kernel" reference mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels, qsim
from .embedding import Sample, encode_features, encoding_unitary
from .qsim import BranchEnsemble, GateOp, Ket, RegisterLayout, cz_gate, ry_matrix


class AnsatzError(ValueError):
    """Parameter tensor inconsistent with the circuit structure."""


def module_pairs(n: int) -> list[tuple[int, int]]:
    """Neighboring qubit pairs of one layer: even starts first, then odd."""
    pairs = [(i, i + 1) for i in range(0, n - 1, 2)]
    pairs += [(i, i + 1) for i in range(1, n - 1, 2)]
    return pairs


def modules_per_layer(n: int) -> int:
    return len(module_pairs(n))


@dataclass(frozen=True)
class AnsatzParams:
    """Angles for the layered circuit, shaped [layer][module][2]."""

    qubit_count: int
    angles: np.ndarray = field(repr=False)

    def __post_init__(self):
        ang = np.asarray(self.angles, dtype=np.float64)
        object.__setattr__(self, "angles", ang)
        if self.qubit_count < 2:
            raise AnsatzError("ansatz needs at least two qubits")
        mods = modules_per_layer(self.qubit_count)
        if ang.ndim != 3 or ang.shape[1:] != (mods, 2):
            raise AnsatzError(
                f"angle tensor shape {ang.shape} incompatible with "
                f"{self.qubit_count} qubits ({mods} modules per layer)"
            )
        if not np.all(np.isfinite(ang)):
            raise AnsatzError("angles must be finite")

    @property
    def layers(self) -> int:
        return self.angles.shape[0]

    @property
    def flat(self) -> np.ndarray:
        return self.angles.reshape(-1).copy()

    def with_flat(self, flat) -> "AnsatzParams":
        flat = np.asarray(flat, dtype=np.float64)
        return AnsatzParams(self.qubit_count, flat.reshape(self.angles.shape))

    @classmethod
    def zeros(cls, qubit_count: int, layers: int) -> "AnsatzParams":
        return cls(qubit_count, np.zeros((layers, modules_per_layer(qubit_count), 2)))

    @classmethod
    def random(cls, qubit_count: int, layers: int, rng) -> "AnsatzParams":
        shape = (layers, modules_per_layer(qubit_count), 2)
        return cls(qubit_count, rng.uniform(-np.pi, np.pi, shape))


def build_ansatz(p: AnsatzParams) -> list[GateOp]:
    """Gate list of the full layered circuit, layers concatenated in order."""
    gates = []
    pairs = module_pairs(p.qubit_count)
    for layer in range(p.layers):
        for m, (i, j) in enumerate(pairs):
            gates.append(GateOp(target=i, matrix=ry_matrix(p.angles[layer, m, 0])))
            gates.append(GateOp(target=j, matrix=ry_matrix(p.angles[layer, m, 1])))
            gates.append(cz_gate(i, j))
    return gates


def embed_features(x: np.ndarray, p: AnsatzParams) -> np.ndarray:
    """Amplitudes of encode -> ansatz -> re-encode on raw features."""
    x = np.asarray(x, dtype=np.float64)
    if x.size != p.qubit_count:
        raise AnsatzError("feature dimension does not match the ansatz qubits")
    layout = RegisterLayout.sample_only(p.qubit_count)
    gates = build_ansatz(p) + encoding_unitary(x)
    packed = qsim.pack_gates(gates, layout)
    return kernels.run_circuit(encode_features(x), *packed)


def embed_sample(x: Sample, p: AnsatzParams) -> Ket:
    """The trained embedding g(x): encode, transform, re-encode.

    Pairwise inner products of these states are exactly what the triplet
    loss controls; with zero ansatz layers the overlap reduces to the
    doubled-frequency kernel prod_j cos(pi (x_j - y_j)).
    """
    layout = RegisterLayout.sample_only(p.qubit_count)
    return Ket(layout, embed_features(x.features, p))


# ---------------------------------------------------------------------------
# measurement-based dimension reduction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReductionParams:
    """Per-layer controlled angles for the reducer.

    ``controlled_angles[k]`` has shape (pairs_in_layer_k, 2): the RY angle
    applied to the kept qubit when the measured partner reads 0 or 1.
    Angles are fixed, not trained.
    """

    controlled_angles: tuple = ()

    def __post_init__(self):
        object.__setattr__(
            self,
            "controlled_angles",
            tuple(np.asarray(a, dtype=np.float64) for a in self.controlled_angles),
        )
        for a in self.controlled_angles:
            if a.ndim != 2 or a.shape[1] != 2:
                raise AnsatzError("each layer needs a (pairs, 2) angle array")

    @property
    def layers(self) -> int:
        return len(self.controlled_angles)

    @classmethod
    def identity(cls, qubit_count: int, layers: int) -> "ReductionParams":
        angles = []
        n = qubit_count
        for _ in range(layers):
            angles.append(np.zeros((n // 2, 2)))
            n //= 2
        return cls(tuple(angles))


def _drop_qubits(amps: np.ndarray, n: int, drops: list[tuple[int, int]]) -> np.ndarray:
    """Slice out qubits that sit in definite basis states."""
    shaped = amps.reshape((2,) * n)
    index = [slice(None)] * n
    for q, value in drops:
        index[q] = value
    return shaped[tuple(index)].reshape(-1)


def dimension_reduction(state: Ket, r: ReductionParams) -> BranchEnsemble:
    """Halve the register per layer by pairwise entangle-measure-correct.

    Each layer: CZ on the pairs (0,1), (2,3), ...; measure the first qubit
    of each pair; rotate the kept qubit by the angle selected by the
    outcome; drop the measured qubits.  Returns one branch per outcome
    string with its probability and reduced state.
    """
    if state.layout.ancilla1 is not None:
        raise AnsatzError("dimension reduction runs on sample-only states")
    n = state.layout.sample_qubits
    if r.layers and n % (1 << r.layers) != 0:
        raise AnsatzError(f"2^{r.layers} must divide the qubit count {n}")
    branches = [(1.0, state.amplitudes)]
    for layer in range(r.layers):
        angles = r.controlled_angles[layer]
        pairs = [(i, i + 1) for i in range(0, n - 1, 2)]
        if angles.shape[0] != len(pairs):
            raise AnsatzError(
                f"layer {layer} provides {angles.shape[0]} angle pairs, needs {len(pairs)}"
            )
        layout = RegisterLayout.sample_only(n)
        next_branches = []
        for prob, amps in branches:
            ket = Ket(layout, amps)
            for i, j in pairs:
                ket = qsim.apply_gate(ket, cz_gate(i, j))
            partial = [(prob, ket.amplitudes, [])]
            for pair_idx, (i, j) in enumerate(pairs):
                expanded = []
                for br_prob, br_amps, outcomes in partial:
                    ensemble = qsim.measure_branch(Ket(layout, br_amps), i)
                    for p_out, branch_state in ensemble.branches:
                        value = int(abs(branch_state.probability(i, 1) - 1.0) < 1e-9)
                        angle = angles[pair_idx, value]
                        corrected = qsim.apply_gate(
                            branch_state, GateOp(target=j, matrix=ry_matrix(angle))
                        )
                        expanded.append(
                            (br_prob * p_out, corrected.amplitudes, outcomes + [(i, value)])
                        )
                partial = expanded
            for br_prob, br_amps, outcomes in partial:
                reduced = _drop_qubits(br_amps, n, outcomes)
                next_branches.append((br_prob, reduced))
        branches = next_branches
        n //= 2
    layout = RegisterLayout.sample_only(n)
    return BranchEnsemble(tuple((p, Ket(layout, a)) for p, a in branches))
