from ._netpd import (
    ConfigError,
    Error,
    assortment,
    circulant,
    parse_action,
    points_to_currency,
    render_opening,
    resolve_round,
    run_experiment,
    run_stimulus,
    sample_regular,
    welch_t_test,
)

__all__ = [
    "ConfigError",
    "Error",
    "assortment",
    "circulant",
    "parse_action",
    "points_to_currency",
    "render_opening",
    "resolve_round",
    "run_experiment",
    "run_stimulus",
    "sample_regular",
    "welch_t_test",
]
