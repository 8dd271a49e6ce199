"""Python bindings for the gbsp core library."""

from ._gbsp import (  # noqa: F401
    ApproxFunction,
    ArgumentError,
    ConfigError,
    DimensionFunction,
    builtin_names,
    dim_bound,
    gbsp_term,
    lower_order,
    run,
    sbv_term,
    series_scan,
    shell_size,
    singular_fraction,
    validate_config,
)
