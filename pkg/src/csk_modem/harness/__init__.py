"""Experiment orchestration: trials, sweeps, cross-validation, reports."""

from .datasets import (
    PacketRecord,
    collect_windows,
    dataset_features,
    generate_dataset,
    load_dataset,
    packet_features,
    train_decoder,
    trial_config_from_dict,
    trial_config_to_dict,
)
from .evaluation import (
    BAUD_GRID_HZ,
    DISTANCE_GRID_M,
    LUX_GRID,
    SweepSpec,
    anchor_groups,
    anchor_strategy_eval,
    apply_variable,
    kfold_eval,
    leave_one_out,
    mean_ber,
    run_sweep,
    strategy_selections,
)
from .reporting import load_results_csv, plot_ber, write_results_csv
from .trials import (
    DECODERS,
    DEFAULT_PAYLOAD_BITS,
    TrialConfig,
    TrialResult,
    ber,
    run_trial,
    text_to_bits,
    transmit,
)

__all__ = [
    "BAUD_GRID_HZ",
    "DECODERS",
    "DEFAULT_PAYLOAD_BITS",
    "DISTANCE_GRID_M",
    "LUX_GRID",
    "PacketRecord",
    "SweepSpec",
    "TrialConfig",
    "TrialResult",
    "anchor_groups",
    "anchor_strategy_eval",
    "apply_variable",
    "ber",
    "collect_windows",
    "dataset_features",
    "generate_dataset",
    "kfold_eval",
    "leave_one_out",
    "load_dataset",
    "load_results_csv",
    "mean_ber",
    "packet_features",
    "plot_ber",
    "run_sweep",
    "run_trial",
    "strategy_selections",
    "text_to_bits",
    "train_decoder",
    "transmit",
    "trial_config_from_dict",
    "trial_config_to_dict",
    "write_results_csv",
]
