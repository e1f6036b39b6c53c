"""Hybrid exponential smoothing / LSTM forecaster (C++ core)."""

from ._meslstm import (
    ContractError,
    DataError,
    DomainError,
    Error,
    FittedModel,
    Frame,
    InsufficientDataError,
    ModelConfig,
    NumericError,
    SizingError,
    TrainingDivergenceError,
    coverage,
    default_features,
    dm_test,
    extend,
    fit,
    format_iso_date,
    load_owid,
    mae,
    mis,
    parse_iso_date,
    percentile_pair,
    predict,
    rmse,
    run_experiment,
    sadc_countries,
    smape,
    split,
    t_test_one_sided,
)

__all__ = [name for name in dir() if not name.startswith("_")]
