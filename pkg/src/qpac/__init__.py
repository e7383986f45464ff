"""Simulation and experiment harness for quantum PAC learning with compatible measurement classes."""
from .quantum_core import (
    TOL,
    DensityOperator,
    HermitianOperator,
    Povm,
    ProjectivePovm,
    Tolerances,
    ValidationError,
    born_distribution,
    born_sample,
    eig_hermitian,
    simultaneous_eigenbasis,
    tensor,
)
from .concept_class import (
    CompatibilityPartition,
    ConceptClass,
    LossFunction,
    Predictor,
    are_compatible,
    loss_observable,
    objective_of_partition,
    opt_risk,
    partition_compatible,
    true_risk,
)
from .qerm_engine import (
    QermReport,
    SampleConsumedError,
    TrainingSample,
    check_concentration,
    deviation_bound,
    measure_subclass,
    plan_batches,
    run_naive,
    run_qerm,
)
from .synthetic_env import Environment, bloch_spin_preset, classical_embed, random_class

__version__ = "0.1.0"
