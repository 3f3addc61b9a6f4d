"""Classical-to-quantum encoding and triplet superposition preparation.

A feature x in [-1, 1] becomes the single-qubit state
``cos(pi x / 2)|0> + sin(pi x / 2)|1>``; a sample is the tensor product of
its feature qubits.  A triplet (anchor a, positive p, negative n) is held
in one register entangled with two ancillas:

    1/2 |phi_a>|00>  +  1/2 |phi_a>|10>
  + 1/2 |phi_n>|0>( alpha|0> + |1> )/sqrt(alpha^2+1)
  + 1/2 |phi_p>|1>( -alpha|0> + |1> )/sqrt(alpha^2+1)

The alpha-dependent ancilla-2 amplitudes inject the separation margin.
The ideal vector is not normalized when the anchor overlaps the other
samples, so preparation rescales globally and the pre-normalization
squared norm Z is exposed for the analytic oracle
(``prepared_norm_constant``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qsim import GateOp, Ket, RegisterLayout, ry_matrix

BATCH_CAP = 4


class EncodingError(ValueError):
    """Feature vector outside the encodable domain or inconsistent shapes."""


@dataclass(frozen=True)
class Sample:
    """Feature vector in [-1, 1]^N with a class label."""

    features: np.ndarray = field(repr=False)
    label: object = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        object.__setattr__(self, "features", feats)
        if feats.ndim != 1 or feats.size == 0:
            raise EncodingError("features must be a nonempty 1-D vector")
        if np.max(np.abs(feats)) > 1.0 + 1e-12:
            raise EncodingError("features must lie in [-1, 1]; rescale first")

    @property
    def dim(self) -> int:
        return self.features.size


@dataclass(frozen=True)
class Triplet:
    """Anchor/positive share a class; the negative comes from the other."""

    anchor: Sample
    positive: Sample
    negative: Sample

    def __post_init__(self):
        if self.anchor.label != self.positive.label:
            raise EncodingError("anchor and positive must share a label")
        if self.anchor.label == self.negative.label:
            raise EncodingError("negative must come from a different class")
        if not (self.anchor.dim == self.positive.dim == self.negative.dim):
            raise EncodingError("triplet members must have equal dimension")

    @property
    def dim(self) -> int:
        return self.anchor.dim


@dataclass(frozen=True)
class MarginSpec:
    """Margin strength alpha >= 0; margin = alpha / sqrt(alpha^2 + 1)."""

    alpha: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise EncodingError("alpha must be nonnegative")

    @property
    def margin(self) -> float:
        return self.alpha / np.sqrt(self.alpha**2 + 1.0)

    @property
    def margin_coeffs(self) -> tuple[float, float]:
        """(alpha, 1) / sqrt(alpha^2 + 1): the ancilla-2 amplitude pair."""
        norm = np.sqrt(self.alpha**2 + 1.0)
        return self.alpha / norm, 1.0 / norm


# ---------------------------------------------------------------------------
# single-sample encoding
# ---------------------------------------------------------------------------

def encode_features(x: np.ndarray) -> np.ndarray:
    """Product-state amplitudes of a raw feature vector (no range check).

    Gradient shift rules evaluate encodings outside [-1, 1]; this helper
    accepts any real features.  All amplitudes are real.
    """
    x = np.asarray(x, dtype=np.float64)
    amps = np.array([1.0], dtype=np.complex128)
    for xj in x:
        qubit = np.array([np.cos(np.pi * xj / 2.0), np.sin(np.pi * xj / 2.0)])
        amps = np.kron(amps, qubit)
    return amps


def encode_sample(x: Sample) -> Ket:
    """Qubit encoding of a sample on the sample register only."""
    layout = RegisterLayout.sample_only(x.dim)
    return Ket(layout, encode_features(x.features))


def encoding_unitary(x) -> list[GateOp]:
    """The encoding as gates: RY(pi x_j) on qubit j, for re-encoding stages."""
    feats = x.features if isinstance(x, Sample) else np.asarray(x, dtype=np.float64)
    return [GateOp(target=j, matrix=ry_matrix(np.pi * xj)) for j, xj in enumerate(feats)]


def encoding_overlap(x, y) -> float:
    """Closed-form overlap of two encodings: prod_j cos(pi/2 (x_j - y_j))."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return float(np.prod(np.cos(np.pi * (x - y) / 2.0)))


# ---------------------------------------------------------------------------
# triplet superposition
# ---------------------------------------------------------------------------

def _triplet_amplitudes(xa, xp, xn, margin: MarginSpec):
    """Unnormalized target amplitudes on N+2 qubits and their squared norm."""
    ca, da = margin.margin_coeffs
    phi_a = encode_features(xa)
    phi_p = encode_features(xp)
    phi_n = encode_features(xn)
    block = np.zeros((phi_a.size, 2, 2), dtype=np.complex128)
    block[:, 0, 0] = 0.5 * phi_a + 0.5 * ca * phi_n
    block[:, 1, 0] = 0.5 * phi_a - 0.5 * ca * phi_p
    block[:, 0, 1] = 0.5 * da * phi_n
    block[:, 1, 1] = 0.5 * da * phi_p
    amps = block.reshape(-1)
    z = float(np.vdot(amps, amps).real)
    return amps, z


def prepare_triplet_superposition(t: Triplet, margin: MarginSpec) -> Ket:
    """Margin-weighted triplet state on sample register plus two ancillas."""
    amps, z = _triplet_amplitudes(
        t.anchor.features, t.positive.features, t.negative.features, margin
    )
    if z <= 0:
        raise EncodingError("degenerate triplet state")
    layout = RegisterLayout.with_ancillas(t.dim)
    return Ket(layout, amps / np.sqrt(z))


def prepared_norm_constant(t: Triplet, margin: MarginSpec) -> float:
    """Pre-normalization squared norm Z of the triplet target vector."""
    return norm_constant(t.anchor.features, t.positive.features, t.negative.features, margin)


def norm_constant(xa, xp, xn, margin: MarginSpec) -> float:
    """Closed form for Z: 1 + (alpha / (2 sqrt(alpha^2+1))) (S0_an - S0_ap).

    S0 terms are single-encoding overlaps, so Z = 1 exactly when the anchor
    encoding is orthogonal to both partners or when alpha = 0.
    """
    ca, _ = margin.margin_coeffs
    return 1.0 + 0.5 * ca * (encoding_overlap(xa, xn) - encoding_overlap(xa, xp))


def prepared_norm_gradient(xa, xp, xn, margin: MarginSpec) -> np.ndarray:
    """dZ/dx_a, analytic; used by the exact anchor differentiation rule."""
    xa = np.asarray(xa, dtype=np.float64)
    ca, _ = margin.margin_coeffs
    grad = np.zeros(xa.size)
    for other, sign in ((np.asarray(xn, float), 1.0), (np.asarray(xp, float), -1.0)):
        delta = xa - other
        cosines = np.cos(np.pi * delta / 2.0)
        for j in range(xa.size):
            rest = np.prod(np.delete(cosines, j))
            grad[j] += sign * (-np.pi / 2.0) * np.sin(np.pi * delta[j] / 2.0) * rest
    return 0.5 * ca * grad


def controlled_reencode(t: Triplet) -> list[GateOp]:
    """Branch-selected re-encoding on the triplet layout.

    Anchor rotations fire on ancilla2=0, negative on (ancilla1, ancilla2) =
    (0, 1), positive on (1, 1); each is a multi-controlled RY(pi x_j).
    """
    return reencode_gates(
        t.anchor.features, t.positive.features, t.negative.features, t.dim
    )


def reencode_gates(xa, xp, xn, n: int, extra_controls=()) -> list[GateOp]:
    a1, a2 = n, n + 1
    groups = (
        (xa, ((a2, 0),)),
        (xn, ((a1, 0), (a2, 1))),
        (xp, ((a1, 1), (a2, 1))),
    )
    gates = []
    for feats, controls in groups:
        for j, xj in enumerate(np.asarray(feats, dtype=np.float64)):
            gates.append(
                GateOp(target=j, matrix=ry_matrix(np.pi * xj), controls=controls + tuple(extra_controls))
            )
    return gates


# ---------------------------------------------------------------------------
# batched superposition with an index register
# ---------------------------------------------------------------------------

def prepare_batch_superposition(batch, margin: MarginSpec) -> Ket:
    """Uniform index-register superposition of per-triplet prepared states.

    Each index slice carries its triplet's margin-weighted pattern,
    individually normalized, so the measured batch expectation is the exact
    mean of the per-triplet expectations.  Batch size must be a power of two
    no larger than ``BATCH_CAP``.
    """
    batch = list(batch)
    m = len(batch)
    if m == 0:
        raise EncodingError("empty batch")
    if m & (m - 1):
        raise EncodingError("batch size must be a power of two")
    if m > BATCH_CAP:
        raise EncodingError(f"batch size {m} exceeds superposition cap {BATCH_CAP}")
    dims = {t.dim for t in batch}
    if len(dims) != 1:
        raise EncodingError("batch triplets must share a feature dimension")
    n = dims.pop()
    if m == 1:
        return prepare_triplet_superposition(batch[0], margin)
    k = m.bit_length() - 1
    layout = RegisterLayout.with_ancillas(n, index_qubits=k)
    block = np.zeros(((1 << n) * 4, m), dtype=np.complex128)
    for j, t in enumerate(batch):
        amps, z = _triplet_amplitudes(
            t.anchor.features, t.positive.features, t.negative.features, margin
        )
        block[:, j] = amps / np.sqrt(z)
    return Ket(layout, block.reshape(-1) / np.sqrt(m))


def batch_reencode_gates(batch, n: int) -> list[GateOp]:
    """Re-encoding gates with index-register controls selecting each slice."""
    m = len(batch)
    k = m.bit_length() - 1 if m > 1 else 0
    gates = []
    for j, t in enumerate(batch):
        extra = tuple((n + 2 + b, (j >> (k - 1 - b)) & 1) for b in range(k))
        gates.extend(
            reencode_gates(
                t.anchor.features, t.positive.features, t.negative.features, n, extra
            )
        )
    return gates
