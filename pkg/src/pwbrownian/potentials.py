"""External potentials ``V(x)`` acting on the tagged particle."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from ._validation import ParameterError, check_array, check_positive


class PotentialSpec:
    """Base class: a potential with an analytic or tabulated gradient."""

    kind = "abstract"

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def force(self, x):
        return -self.gradient(x)

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class FreePotential(PotentialSpec):
    """Constant potential; exerts no force."""

    offset: float = 0.0
    kind = "free"

    def value(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.offset)

    def gradient(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def to_dict(self):
        return {"kind": self.kind, "offset": self.offset}


@dataclass(frozen=True)
class HarmonicPotential(PotentialSpec):
    """``V(x) = k (x - center)^2 / 2``."""

    k: float
    center: float = 0.0
    kind = "harmonic"

    def __post_init__(self):
        check_positive(self.k, "k", allow_zero=True)

    def value(self, x):
        return 0.5 * self.k * (np.asarray(x, dtype=float) - self.center) ** 2

    def gradient(self, x):
        return self.k * (np.asarray(x, dtype=float) - self.center)

    def to_dict(self):
        return {"kind": self.kind, "k": self.k, "center": self.center}


@dataclass(frozen=True)
class TabulatedPotential(PotentialSpec):
    """Potential given on a grid, interpolated with a cubic spline.

    If ``grad`` is omitted the spline derivative is used. Outside the table the
    potential is extrapolated by the spline, so keep trajectories inside it.
    """

    x: np.ndarray
    v: np.ndarray
    grad: np.ndarray | None = None
    kind = "tabulated"
    _spline: CubicSpline = field(init=False, repr=False, compare=False)
    _grad_spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x = check_array(self.x, "x")
        v = check_array(self.v, "v")
        if x.shape != v.shape or x.size < 4:
            raise ParameterError("tabulated potential needs matching x, v with >= 4 nodes")
        if np.any(np.diff(x) <= 0):
            raise ParameterError("tabulated x must be strictly increasing")
        spline = CubicSpline(x, v)
        object.__setattr__(self, "_spline", spline)
        if self.grad is None:
            object.__setattr__(self, "_grad_spline", spline.derivative())
        else:
            g = check_array(self.grad, "grad")
            object.__setattr__(self, "_grad_spline", CubicSpline(x, g))

    def value(self, x):
        return self._spline(np.asarray(x, dtype=float))

    def gradient(self, x):
        return self._grad_spline(np.asarray(x, dtype=float))

    def max_gradient_mismatch(self, n_probe=50):
        """Largest |dV/dx (table) - finite difference of V| at interior probes."""
        lo, hi = float(self.x[1]), float(self.x[-2])
        probe = np.linspace(lo, hi, n_probe)
        h = 1e-5 * max(1.0, hi - lo)
        fd = (self.value(probe + h) - self.value(probe - h)) / (2 * h)
        return float(np.max(np.abs(fd - self.gradient(probe))))

    def to_dict(self):
        return {"kind": self.kind, "n_nodes": int(np.size(self.x))}


def potential_from_dict(d):
    kind = d.get("kind", "free")
    if kind == "free":
        return FreePotential(float(d.get("offset", 0.0)))
    if kind == "harmonic":
        return HarmonicPotential(float(d["k"]), float(d.get("center", 0.0)))
    raise ParameterError(f"unknown potential kind {kind!r} (expected 'free' or 'harmonic')")
