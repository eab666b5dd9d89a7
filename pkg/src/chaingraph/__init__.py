"""Discrete chain graph models: Markov properties, Moebius coordinates, fitting and probes."""

from .errors import ChainGraphError
from .graph import (
    ChainGraph,
    ComponentDag,
    chain_components,
    connected_sets,
    dag_relations,
    maximal_connected_partition,
    neighborhoods,
    parse_graph,
    read_graph,
)
from .markov import CiStatement, MarkovType, statements, statements_c1, statements_c2, statements_c3
from .mle import FitOptions, FitResult, fit, fit_component, lrt
from .moebius import (
    MoebiusParams,
    SaturatedMoebius,
    check_theorem8,
    conditional_from_saturated,
    model_dimension,
    sample_model_point,
    saturated_from_conditional,
    to_joint,
)
from .tables import (
    CountTable,
    JointTable,
    ci_holds,
    conditional,
    marginal,
    obeys_markov,
    simulate_counts,
)

__version__ = "0.1.0"
