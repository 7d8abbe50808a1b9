"""GMM-based limited feedback for FDD MIMO systems.

Thin python facade over the C++ core: channel generation, structured-GMM
fitting, mixture reduction, codebook construction, feedback selection,
baseline estimators, and multi-user precoding.
"""

from ._core import (
    ArrayGeometry,
    Codebook,
    Dataset,
    Gmm,
    ObservationGmm,
    PilotConfig,
    adapt_to_observations,
    build_codebook,
    build_omp_dictionary,
    build_pilot_config,
    default_config_json,
    discard_entries,
    estimate_gmm,
    estimate_lmmse,
    estimate_omp,
    eval_mu_csv,
    eval_p2p_csv,
    fit_em,
    generate_dataset,
    load_dataset,
    load_model,
    lloyd_codebook,
    merge_gmm,
    observe,
    parameter_count,
    prune_gmm,
    random_codebook,
    save_dataset,
    save_model,
    select_from_channel,
    select_from_observation,
    spectral_efficiency,
    sum_rate,
    swmmse,
    water_filling,
    wmmse,
)

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "Codebook",
    "Dataset",
    "Gmm",
    "ObservationGmm",
    "PilotConfig",
    "adapt_to_observations",
    "build_codebook",
    "build_omp_dictionary",
    "build_pilot_config",
    "default_config_json",
    "discard_entries",
    "estimate_gmm",
    "estimate_lmmse",
    "estimate_omp",
    "eval_mu_csv",
    "eval_p2p_csv",
    "fit_em",
    "generate_dataset",
    "load_dataset",
    "load_model",
    "lloyd_codebook",
    "merge_gmm",
    "observe",
    "parameter_count",
    "prune_gmm",
    "random_codebook",
    "save_dataset",
    "save_model",
    "select_from_channel",
    "select_from_observation",
    "spectral_efficiency",
    "sum_rate",
    "swmmse",
    "water_filling",
    "wmmse",
]
