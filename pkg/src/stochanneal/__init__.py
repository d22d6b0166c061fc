"""Stochastic RRAM neurons driving a Boltzmann-machine Max-Cut annealer."""

from .device import (
    SCHEME_FIXED,
    SCHEME_IDEAL,
    SCHEME_MONITORED,
    SCHEMES,
    DriftModel,
    NeuronDevice,
    switch_probability,
)
from .errors import StochAnnealError
from .maxcut import (
    BoltzmannForm,
    MaxCutInstance,
    build_form,
    cut_value,
    energy,
    init_fields,
    local_field,
    update_fields_after_assign,
)
from .reference import get_reference
from .sampler import (
    BoltzmannConfig,
    EnsembleSummary,
    RunTrace,
    ensemble,
    map_field_to_voltage,
    run,
)
from .surface import DeviceSurface, fit_surface, load_params, save_params

__version__ = "0.1.0"

__all__ = [
    "BoltzmannConfig",
    "BoltzmannForm",
    "DeviceSurface",
    "DriftModel",
    "EnsembleSummary",
    "MaxCutInstance",
    "NeuronDevice",
    "RunTrace",
    "SCHEMES",
    "SCHEME_FIXED",
    "SCHEME_IDEAL",
    "SCHEME_MONITORED",
    "StochAnnealError",
    "build_form",
    "cut_value",
    "energy",
    "ensemble",
    "fit_surface",
    "get_reference",
    "init_fields",
    "load_params",
    "local_field",
    "map_field_to_voltage",
    "run",
    "save_params",
    "switch_probability",
    "update_fields_after_assign",
]
