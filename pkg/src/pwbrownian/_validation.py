"""Small input-checking helpers shared by the simulation modules."""

from __future__ import annotations

import numbers

import numpy as np


class ParameterError(ValueError):
    """Raised when a physical or numerical parameter is out of its domain."""


class StabilityError(RuntimeError):
    """Raised when a time step (or grid) would make a scheme unstable.

    ``suggested`` carries a value that would pass the guard, when one exists.
    """

    def __init__(self, message, suggested=None):
        super().__init__(message)
        self.suggested = suggested


def check_positive(value, name, allow_zero=False):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ParameterError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ParameterError(f"{name} must be {bound}, got {value!r}")
    return float(value)


def check_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ParameterError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ParameterError(f"{name} must be >= {minimum}, got {value!r}")
    return int(value)


def check_array(values, name, ndim=1, finite=True, dtype=float):
    arr = np.asarray(values, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise ParameterError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if finite and not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite entries")
    return arr


def check_same_length(name_to_array):
    lengths = {k: len(v) for k, v in name_to_array.items()}
    if len(set(lengths.values())) > 1:
        raise ParameterError(f"length mismatch: {lengths}")
