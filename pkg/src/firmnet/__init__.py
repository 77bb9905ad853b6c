"""Growth propagation on evolving two-layer firm networks."""

__version__ = "0.1.0"

from .counterfactual import (
    AggregateDecomposition,
    ProfileRow,
    ShockSplit,
    aggregate_decomposition,
    counterfactual_grid,
    propagate_counterfactual,
    propagation_profile,
    split_shocks,
)
from .estimation import (
    AttenuationReport,
    ChainConfig,
    PooledLikelihood,
    PosteriorChain,
    PriorSpec,
    gibbs_sample,
    measurement_error_experiment,
    summarize_chain,
)
from .exceptions import ConfigError, ConvergenceError, PanelFormatError
from .io import load_panel, read_growth, read_panel, read_params, save_panel, write_growth
from .logdet import LogdetEstimate, TraceSeriesLogdet, logdet_I_minus_M
from .model import (
    PARAM_NAMES,
    GaussianLikelihood,
    GrowthPanel,
    ShockVector,
    StructuralParams,
    extract_shocks_full,
    extract_shocks_simple,
    log_likelihood,
    neumann_solve,
    simulate_step,
)
from .network import (
    LinkDiff,
    NeighborGrowthStats,
    PanelNetwork,
    Snapshot,
    SpectralBound,
    link_diff,
    neighbor_growth_stats,
    spectral_bound,
    spmv,
)
from .synthetic import EXPERIMENT_TRUTH, GeneratorConfig, SyntheticPanel, generate_panel, persistence_table


__all__ = [
    "aggregate_decomposition",
    "AggregateDecomposition",
    "AttenuationReport",
    "ChainConfig",
    "ConfigError",
    "ConvergenceError",
    "counterfactual_grid",
    "EXPERIMENT_TRUTH",
    "extract_shocks_full",
    "extract_shocks_simple",
    "GaussianLikelihood",
    "generate_panel",
    "GeneratorConfig",
    "gibbs_sample",
    "GrowthPanel",
    "link_diff",
    "LinkDiff",
    "load_panel",
    "log_likelihood",
    "logdet_I_minus_M",
    "LogdetEstimate",
    "measurement_error_experiment",
    "neighbor_growth_stats",
    "NeighborGrowthStats",
    "neumann_solve",
    "PanelFormatError",
    "PanelNetwork",
    "PARAM_NAMES",
    "persistence_table",
    "PooledLikelihood",
    "PosteriorChain",
    "PriorSpec",
    "ProfileRow",
    "propagate_counterfactual",
    "propagation_profile",
    "read_growth",
    "read_panel",
    "read_params",
    "save_panel",
    "ShockSplit",
    "ShockVector",
    "simulate_step",
    "Snapshot",
    "spectral_bound",
    "SpectralBound",
    "split_shocks",
    "spmv",
    "StructuralParams",
    "summarize_chain",
    "SyntheticPanel",
    "TraceSeriesLogdet",
    "write_growth",
]
