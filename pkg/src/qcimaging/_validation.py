"""Input validation helpers shared by the functional API and the estimators."""

import math
import numbers

import numpy as np

from .exceptions import ValidationError


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not math.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_finite(value, name):
    if not isinstance(value, numbers.Real) or not math.isfinite(value):
        raise ValidationError(f"{name} must be a finite number, got {value!r}")
    return float(value)


def is_power_of_two(n):
    return n > 0 and (n & (n - 1)) == 0


def check_amplitudes(amps, n, name="amps"):
    """Return ``amps`` as a read-only complex128 copy of length ``n``."""
    arr = np.array(amps, dtype=np.complex128, copy=True)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise ValidationError(f"{name} must be a 1-D array of length {n}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


def check_normalized(norm2, tol=1e-6, name="wavefunction"):
    if abs(norm2 - 1.0) > tol:
        raise ValidationError(f"{name} must be normalized within {tol:g}, got norm^2 = {norm2:.12g}")


def as_float_array(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr
