"""Exact dense statevector simulator.

Conventions, fixed across the whole package:

* qubit 0 is the most significant bit of the amplitude index,
* states are immutable values; every operation returns a fresh ``Ket``,
* gates carry explicit 2x2 matrices plus an optional list of
  (control qubit, polarity) conditions, so data-dependent unitaries and
  multi-controlled rotations are all the same object.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

DEFAULT_QUBIT_CAP = 24
NORM_TOL = 1e-10
UNITARY_TOL = 1e-10
BRANCH_PROB_FLOOR = 1e-14


class LayoutError(ValueError):
    """Register layout is inconsistent or incompatible."""


class GateError(ValueError):
    """Gate definition or application is invalid."""


@dataclass(frozen=True)
class RegisterLayout:
    """Qubit addressing for a state: sample register, ancillas, index register.

    ``ancilla1``/``ancilla2`` are ``None`` for states living on the sample
    register alone (encodings, embeddings).  Index qubits are used by the
    batched superposition mode and sit after the ancillas.
    """

    sample_qubits: int
    ancilla1: int | None = None
    ancilla2: int | None = None
    index_qubits: int = 0
    cap: int = DEFAULT_QUBIT_CAP

    def __post_init__(self):
        if self.sample_qubits < 1:
            raise LayoutError("need at least one sample qubit")
        if (self.ancilla1 is None) != (self.ancilla2 is None):
            raise LayoutError("ancillas must be declared together")
        if self.index_qubits and self.ancilla1 is None:
            raise LayoutError("index register requires ancillas")
        idx = list(range(self.sample_qubits))
        if self.ancilla1 is not None:
            idx += [self.ancilla1, self.ancilla2]
        if len(set(idx)) != len(idx):
            raise LayoutError("register indices overlap")
        if self.total_qubits > self.cap:
            raise LayoutError(f"{self.total_qubits} qubits exceeds cap {self.cap}")

    @property
    def total_qubits(self) -> int:
        n = self.sample_qubits + self.index_qubits
        if self.ancilla1 is not None:
            n += 2
        return n

    @property
    def dim(self) -> int:
        return 1 << self.total_qubits

    def bit(self, qubit: int) -> int:
        """Bit mask of ``qubit`` in the amplitude index (qubit 0 = MSB)."""
        if not 0 <= qubit < self.total_qubits:
            raise LayoutError(f"qubit {qubit} outside register of {self.total_qubits}")
        return 1 << (self.total_qubits - 1 - qubit)

    def index_qubit(self, k: int) -> int:
        if not 0 <= k < self.index_qubits:
            raise LayoutError(f"index qubit {k} not in layout")
        return self.sample_qubits + 2 + k

    @classmethod
    def sample_only(cls, n: int) -> "RegisterLayout":
        return cls(sample_qubits=n)

    @classmethod
    def with_ancillas(cls, n: int, index_qubits: int = 0) -> "RegisterLayout":
        return cls(sample_qubits=n, ancilla1=n, ancilla2=n + 1, index_qubits=index_qubits)


@dataclass(frozen=True)
class Ket:
    """Normalized complex amplitude vector over a register layout."""

    layout: RegisterLayout
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape != (self.layout.dim,):
            raise LayoutError(
                f"amplitude length {amps.shape} does not match layout dim {self.layout.dim}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise GateError(f"state norm {norm} deviates from 1 beyond {NORM_TOL}")

    @classmethod
    def zero(cls, layout: RegisterLayout) -> "Ket":
        amps = np.zeros(layout.dim, dtype=np.complex128)
        amps[0] = 1.0
        return cls(layout, amps)

    @classmethod
    def from_amplitudes(cls, layout: RegisterLayout, amps, normalize=False) -> "Ket":
        amps = np.asarray(amps, dtype=np.complex128)
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0:
                raise GateError("cannot normalize a zero vector")
            amps = amps / norm
        return cls(layout, amps)

    def probability(self, qubit: int, value: int) -> float:
        """Marginal probability that ``qubit`` reads ``value``."""
        bit = self.layout.bit(qubit)
        idx = np.arange(self.layout.dim)
        sel = ((idx & bit) != 0) == bool(value)
        return float(np.sum(np.abs(self.amplitudes[sel]) ** 2))


@dataclass(frozen=True)
class GateOp:
    """Single-qubit unitary, optionally conditioned on control qubits.

    ``controls`` is a sequence of ``(qubit, polarity)`` pairs; the gate fires
    only where every control qubit reads its polarity bit.
    """

    target: int
    matrix: np.ndarray = field(repr=False)
    controls: tuple = ()

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.complex128)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "controls", tuple((int(q), int(b)) for q, b in self.controls))
        if mat.shape != (2, 2):
            raise GateError("gate matrix must be 2x2")
        if np.max(np.abs(mat.conj().T @ mat - np.eye(2))) > UNITARY_TOL:
            raise GateError("gate matrix is not unitary within tolerance")
        for q, b in self.controls:
            if q == self.target:
                raise GateError("target qubit cannot also be a control")
            if b not in (0, 1):
                raise GateError("control polarity must be 0 or 1")

    @property
    def kind(self) -> str:
        return "controlled-single" if self.controls else "single"


@dataclass(frozen=True)
class BranchEnsemble:
    """Probability-weighted collection of post-measurement states."""

    branches: tuple  # of (probability, Ket)

    def __post_init__(self):
        total = sum(p for p, _ in self.branches)
        if abs(total - 1.0) > NORM_TOL:
            raise GateError(f"branch probabilities sum to {total}, not 1")
        if any(p < 0 for p, _ in self.branches):
            raise GateError("negative branch probability")

    @property
    def probabilities(self):
        return tuple(p for p, _ in self.branches)


# ---------------------------------------------------------------------------
# gate matrices
# ---------------------------------------------------------------------------

def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def hadamard_matrix() -> np.ndarray:
    inv = 1.0 / np.sqrt(2.0)
    return np.array([[inv, inv], [inv, -inv]], dtype=np.complex128)


def pauli_z_matrix() -> np.ndarray:
    return np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)


def cz_gate(control: int, target: int) -> GateOp:
    return GateOp(target=target, matrix=pauli_z_matrix(), controls=((control, 1),))


# ---------------------------------------------------------------------------
# packing and application
# ---------------------------------------------------------------------------

def pack_gates(gates, layout: RegisterLayout):
    """Flatten a gate sequence into the arrays the kernels consume."""
    n = len(gates)
    targets = np.empty(n, dtype=np.int64)
    cmasks = np.zeros(n, dtype=np.int64)
    cvals = np.zeros(n, dtype=np.int64)
    mats = np.empty((n, 2, 2), dtype=np.complex128)
    for g, gate in enumerate(gates):
        targets[g] = layout.bit(gate.target)
        for q, b in gate.controls:
            bit = layout.bit(q)
            cmasks[g] |= bit
            if b:
                cvals[g] |= bit
        mats[g] = gate.matrix
    return targets, cmasks, cvals, mats


def apply_gate(state: Ket, gate: GateOp) -> Ket:
    """Apply one gate, returning a new state; the input is untouched."""
    return apply_sequence(state, (gate,))


def apply_sequence(state: Ket, gates) -> Ket:
    """Apply a gate sequence in order via one packed kernel call."""
    gates = tuple(gates)
    if not gates:
        return state
    packed = pack_gates(gates, state.layout)
    amps = kernels.run_circuit(state.amplitudes, *packed)
    return Ket(state.layout, amps)


def inner_product(a: Ket, b: Ket) -> complex:
    """<a|b>, conjugate-linear in the first argument."""
    if a.layout != b.layout:
        raise LayoutError("inner product requires identical layouts")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def expectation_zz(state: Ket, q1: int, q2: int) -> float:
    """<Z_q1 Z_q2> of the state; result lies in [-1, 1]."""
    if q1 == q2:
        raise GateError("expectation_zz needs two distinct qubits")
    b1, b2 = state.layout.bit(q1), state.layout.bit(q2)
    return float(kernels.expectation_zz_kernel(state.amplitudes, b1, b2))


def measure_branch(state: Ket, q: int) -> BranchEnsemble:
    """Projective Z measurement of qubit ``q`` as a branch ensemble.

    Branches below probability 1e-14 are dropped; surviving branches are
    renormalized on the unchanged layout.
    """
    bit = state.layout.bit(q)
    idx = np.arange(state.layout.dim)
    branches = []
    for value in (0, 1):
        sel = ((idx & bit) != 0) == bool(value)
        amps = np.where(sel, state.amplitudes, 0.0)
        p = float(np.sum(np.abs(amps) ** 2))
        if p < BRANCH_PROB_FLOOR:
            continue
        branches.append((p, Ket(state.layout, amps / np.sqrt(p))))
    # guard against tiny drift when one branch is dropped
    total = sum(p for p, _ in branches)
    branches = [(p / total, k) for p, k in branches]
    return BranchEnsemble(tuple(branches))
