"""Exact inference for discrete Bayesian networks built on sparse
potentials, with unity smoothing for inconsistent evidence and unity
propagation shortcuts in the junction tree message passing."""

from .errors import (
    ConfigurationError,
    ContractViolationError,
    DegenerateModelError,
    DomainError,
    DomainMismatchError,
    EngineError,
    IngestionError,
    ParseError,
    PhaseError,
    QueryError,
    UndefinedDivisionError,
)
from .estimation import (
    Cpt,
    CptCounts,
    SmoothingPolicy,
    count,
    laplace,
    mle,
    smoothed_child_column,
    unity_smooth,
)
from .graph import (
    Dag,
    JunctionTree,
    UndirectedGraph,
    assign_cpts,
    build_junction_tree,
    choose_root,
    compile_model,
    format_tree,
    max_cliques,
    moralize,
    triangulate,
)
from .io import (
    DiscreteDataset,
    fit,
    load_dataset,
    parse_dag,
    parse_network,
    serialize_network,
)
from .model import BayesianNetwork
from .potential import Cell, Evidence, Potential, Variable
from .propagation import (
    Message,
    PropagationState,
    collect,
    distribute,
    format_trace,
    initialize,
    predict_class,
    prob_evidence,
    propagate,
    query_marginal,
)
from .unity import (
    OpCounter,
    UnityPotential,
    materialize,
    up_divide_update,
    up_evidence_reduce,
    up_multiply,
    up_project,
)

__version__ = "0.1.0"

__all__ = [
    "BayesianNetwork",
    "Cell",
    "ConfigurationError",
    "ContractViolationError",
    "Cpt",
    "CptCounts",
    "Dag",
    "DegenerateModelError",
    "DiscreteDataset",
    "DomainError",
    "DomainMismatchError",
    "EngineError",
    "Evidence",
    "IngestionError",
    "JunctionTree",
    "Message",
    "OpCounter",
    "ParseError",
    "PhaseError",
    "Potential",
    "PropagationState",
    "QueryError",
    "SmoothingPolicy",
    "UndefinedDivisionError",
    "UndirectedGraph",
    "UnityPotential",
    "Variable",
    "assign_cpts",
    "build_junction_tree",
    "choose_root",
    "collect",
    "compile_model",
    "count",
    "distribute",
    "fit",
    "format_trace",
    "format_tree",
    "initialize",
    "laplace",
    "load_dataset",
    "materialize",
    "max_cliques",
    "mle",
    "moralize",
    "parse_dag",
    "parse_network",
    "predict_class",
    "prob_evidence",
    "propagate",
    "query_marginal",
    "serialize_network",
    "smoothed_child_column",
    "triangulate",
    "unity_smooth",
    "up_divide_update",
    "up_evidence_reduce",
    "up_multiply",
    "up_project",
]
