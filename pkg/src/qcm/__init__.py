"""Quantum causal models with Choi operators, independence tests and dilations."""

from .channel import (
    ChoiOperator,
    InvalidChannelError,
    KrausSet,
    UnitaryGate,
    apply_channel,
    choi_from_kraus,
    choi_from_unitary,
    compose,
    dephase,
    linking_operator,
    marginal_channel,
    stinespring_dilation,
)
from .classical import (
    Cpd,
    Dag,
    FunctionalModel,
    Variable,
    ci_check,
    classical_dilation,
    classical_record_distribution,
    common_cause_dilation_classical,
    functional_model_to_joint,
    markov_check,
    split_node_interventional,
)
from .model import (
    Instrument,
    ModelState,
    Qcm,
    QcmNode,
    bayes_update,
    build_sigma,
    joint_outcome_probabilities,
    marginalize_node,
    tau_identity,
    validate_model,
)
from .qci import (
    NotConditionallyIndependent,
    classical_reduction_check,
    common_cause_dilation,
    conditional_mutual_information,
    find_decomposition,
    multi_find_decomposition,
    multi_qci_check,
    no_causal_influence,
    qci_factorization_check,
)
from .tensor import (
    Operator,
    Space,
    System,
    commutator_norm,
    hermitian_eig,
    kron,
    partial_trace,
    permute_systems,
    psd_check,
    von_neumann_entropy,
)

__version__ = "0.1.0"
