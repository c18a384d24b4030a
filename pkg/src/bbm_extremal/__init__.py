"""Branching Brownian motion with genealogical embedding: simulation and extremal diagnostics."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .bbm_core import (  # noqa: E402
    BbmConfig, BbmSnapshot, PopulationCapError, PruneBarrier, centering_m, max_centered,
    simulate, simulate_many, simulate_max_centered,
)
from .gw_tree import GenealogyTree, MultiIndex, OffspringDistribution, sample_tree  # noqa: E402

__all__ = [
    "BbmConfig", "BbmSnapshot", "GenealogyTree", "MultiIndex", "OffspringDistribution",
    "PopulationCapError", "PruneBarrier", "centering_m", "max_centered", "sample_tree",
    "simulate", "simulate_many", "simulate_max_centered",
]
