"""Quantum metric learning on an exact statevector simulator.

Triplets of samples are held in one superposed register, a layered
variational circuit reshapes their Hilbert space, and an interference
measurement on two ancillas reads out the triplet hinge loss in a single
expectation value.  Training runs RMSProp over parameter-shift gradients,
optionally alternating natural batches with adversarially rotated anchors.
"""

from .adversarial import AdversarialConfig, adversarial_anchor_state
from .ansatz import AnsatzParams, ReductionParams, build_ansatz, dimension_reduction, embed_sample
from .data import DatasetSplit, PcaModel, load_iris, load_mnist_idx, pca_apply, pca_fit, preprocess, sample_triplets
from .embedding import (
    MarginSpec,
    Sample,
    Triplet,
    encode_sample,
    encoding_unitary,
    prepare_batch_superposition,
    prepare_triplet_superposition,
)
from .evaluate import (
    RobustnessReport,
    SimilarityMatrix,
    average_inner_products,
    epsilon_robust_accuracy,
    similarity_matrix,
)
from .grad import GradientVec, finite_diff, grad_anchor, grad_theta, triplet_anchor_gradient, triplet_theta_gradient
from .kernels import active_backend
from .metric import (
    LossReport,
    batch_loss,
    classical_triplet_loss,
    measure_triplet_expectation,
    oracle_inner_products,
    triplet_loss,
)
from .qsim import (
    BranchEnsemble,
    GateOp,
    Ket,
    RegisterLayout,
    apply_gate,
    expectation_zz,
    inner_product,
    measure_branch,
)
from .train import OptimizerState, TrainConfig, TrainResult, load_checkpoint, rmsprop_step, save_checkpoint, train

__version__ = "0.1.0"
