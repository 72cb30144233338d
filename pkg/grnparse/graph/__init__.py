# flake8: noqa

from grnparse.graph.core import GraphModel, data_adjacency, graph_convolve, symmetrize
from grnparse.graph.gsm import (
    GsmOutput,
    GsmParams,
    aggregate,
    compute_aggregation,
    compute_decoupling,
    decouple,
    gsm_forward,
    gsm_weights,
    init_gsm,
    project_to_graph,
)
from grnparse.graph.lcm import (
    LcmOutput,
    LcmParams,
    init_lcm,
    lcm_forward,
    lcm_weights,
    lift_weights,
    project_pixels_to_graph,
)


__all__ = [
    "GraphModel",
    "GsmOutput",
    "GsmParams",
    "LcmOutput",
    "LcmParams",
    "aggregate",
    "compute_aggregation",
    "compute_decoupling",
    "data_adjacency",
    "decouple",
    "graph_convolve",
    "gsm_forward",
    "gsm_weights",
    "init_gsm",
    "init_lcm",
    "lcm_forward",
    "lcm_weights",
    "lift_weights",
    "project_pixels_to_graph",
    "project_to_graph",
    "symmetrize",
]
