"""Fast hash-table nearest-neighbour classification with missing-mass tools."""

from .classifier import (
    BucketDiagnostics,
    BucketTable,
    ClassifierModel,
    LabeledExample,
    hash_count,
    load_model,
    predict,
    risk_estimate,
    save_model,
    train,
)
from .instrument import EvalCounter
from .knn import KnnModel, knn_predict
from .lsh_family import (
    CompositeHash,
    FamilyKind,
    SensitivityParams,
    StableHashFunction,
    collision_probability,
    composite_hash,
    hash_point,
    sample_hash,
    sensitivity_for,
    width_schedule,
)
from .missing_mass import (
    DiscreteDistribution,
    MissingMassSample,
    check_expectation_bound,
    concentration_trial,
    exact_expected_missing_mass,
    realized_missing_mass,
)
from .synthetic import SyntheticTask, bayes_predict, bayes_risk, make_task, sample_task

__version__ = "0.1.0"
