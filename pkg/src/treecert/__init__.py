"""treecert: formal verification of tree ensembles.

The verifier proves or refutes input-output properties of decision-tree
ensembles (random forests, gradient boosting models) by abstract
interpretation over hyperrectangles, refining the abstraction one tree
at a time until every property query is decided.
"""
from .boxes import Box, Interval, TransformStats, from_points, join, meet
from .engine import (
    CheckerContractError,
    CheckOutcome,
    Counterexample,
    EngineResult,
    PropertyChecker,
    Verdict,
    find_concrete_witness,
    verify_region,
)
from .modelio import (
    ConvertedModel,
    CountLeaf,
    CountModel,
    CountSplit,
    Dataset,
    Discrepancy,
    FormatError,
    NonInvertibleError,
    ValidationReport,
    convert,
    diff_count_models,
    invert,
    leaf_normalize,
    parse_counts,
    parse_dataset,
    parse_model,
    parse_property,
    roundtrip_validate,
    serialize_counts,
    serialize_dataset,
    serialize_model,
    serialize_property,
)
from .parallel import (
    BatchReport,
    ItemOutcome,
    ItemResult,
    WorkItem,
    is_robust_parallel,
    run_batch,
    split_region,
    verify_property_parallel,
)
from .properties import (
    And,
    Assertion,
    AssertionChecker,
    ClassIn,
    Dominates,
    Or,
    PostInterpretation,
    PropertySpec,
    RobustnessChecker,
    RobustnessSpec,
    ScoreGE,
    ScoreLE,
    assertion_check,
    brute_force_robustness,
    perturbation_region,
    robustness_check,
    validate_assertion,
)
from .transforms import ensemble_transform, tree_transform
from .trees import (
    Ensemble,
    Internal,
    Leaf,
    Node,
    PostProcess,
    Tree,
    argmax_class,
    classify,
    ensemble_predict,
    enumerate_cells,
    leaf_regions,
    stable_softmax,
    tree_predict,
)

__version__ = "0.1.0"

__all__ = [
    "And",
    "Assertion",
    "AssertionChecker",
    "BatchReport",
    "Box",
    "CheckOutcome",
    "CheckerContractError",
    "ClassIn",
    "ConvertedModel",
    "CountLeaf",
    "CountModel",
    "CountSplit",
    "Counterexample",
    "Dataset",
    "Discrepancy",
    "Dominates",
    "EngineResult",
    "Ensemble",
    "FormatError",
    "Internal",
    "Interval",
    "ItemOutcome",
    "ItemResult",
    "Leaf",
    "Node",
    "NonInvertibleError",
    "Or",
    "PostInterpretation",
    "PostProcess",
    "PropertyChecker",
    "PropertySpec",
    "RobustnessChecker",
    "RobustnessSpec",
    "ScoreGE",
    "ScoreLE",
    "TransformStats",
    "Tree",
    "ValidationReport",
    "Verdict",
    "WorkItem",
    "argmax_class",
    "assertion_check",
    "brute_force_robustness",
    "classify",
    "convert",
    "diff_count_models",
    "ensemble_predict",
    "ensemble_transform",
    "enumerate_cells",
    "find_concrete_witness",
    "from_points",
    "invert",
    "is_robust_parallel",
    "join",
    "leaf_normalize",
    "leaf_regions",
    "meet",
    "parse_counts",
    "parse_dataset",
    "parse_model",
    "parse_property",
    "perturbation_region",
    "robustness_check",
    "roundtrip_validate",
    "run_batch",
    "serialize_counts",
    "serialize_dataset",
    "serialize_model",
    "serialize_property",
    "split_region",
    "stable_softmax",
    "tree_predict",
    "tree_transform",
    "validate_assertion",
    "verify_property_parallel",
    "verify_region",
]
