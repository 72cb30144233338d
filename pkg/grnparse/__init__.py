"""grnparse - graph-reasoning pseudo-label rectification for human parsing"""

__version__ = "0.1.0"

from grnparse import autodiff, data, graph, metrics, nets, pipeline, recipes
from grnparse.parts import PART, get_category_table
from grnparse.pipeline import PipelineConfig, run_pipeline
from grnparse.tech import PRESETS


__all__ = (
    "PART",
    "PRESETS",
    "PipelineConfig",
    "autodiff",
    "data",
    "get_category_table",
    "graph",
    "metrics",
    "nets",
    "pipeline",
    "recipes",
    "run_pipeline",
)
