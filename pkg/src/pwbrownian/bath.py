"""Caldeira-Leggett oscillator bath.

Discretizes an Ohmic spectral density into ``n_modes`` oscillators, evaluates
the memory-friction kernel, the zero-point constant ``A`` and the fluctuating
force along coherent-state Bohmian trajectories, and integrates the full
classical (1 + N)-body system as a brute-force reference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._validation import (
    ParameterError,
    StabilityError,
    check_array,
    check_int,
    check_positive,
    check_same_length,
)
from .potentials import FreePotential
from .units import HBAR, KB

CUTOFF_SHAPES = ("sharp", "lorentzian")
DEFAULT_FREQ_MAX_RATIO = 60.0


@dataclass(frozen=True, eq=False)
class BathSpec:
    """A discretized harmonic bath coupled bilinearly to a particle of mass ``mass``.

    Parameters
    ----------
    mode_mass, mode_freq, coupling : array_like, shape (n_modes,)
        Oscillator masses ``m_n``, angular frequencies ``omega_n`` and
        couplings ``c_n``.
    gamma0 : float
        Friction rate of the continuum spectral density.
    cutoff : float
        Cutoff frequency of the continuum spectral density.
    cutoff_shape : {"sharp", "lorentzian"}
    mass : float
        Mass of the tagged particle, used to normalize the kernel.
    """

    mode_mass: np.ndarray
    mode_freq: np.ndarray
    coupling: np.ndarray
    gamma0: float = 0.0
    cutoff: float = 1.0
    cutoff_shape: str = "lorentzian"
    mass: float = 1.0
    freq_step: float | None = None
    _weight: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = check_array(self.mode_mass, "mode_mass")
        w = check_array(self.mode_freq, "mode_freq")
        c = check_array(self.coupling, "coupling")
        check_same_length({"mode_mass": m, "mode_freq": w, "coupling": c})
        if m.size < 1:
            raise ParameterError("a bath needs at least one mode")
        if np.any(w <= 0) or np.any(m <= 0):
            raise ParameterError("mode frequencies and masses must be strictly positive")
        if self.cutoff_shape not in CUTOFF_SHAPES:
            raise ParameterError(f"cutoff_shape must be one of {CUTOFF_SHAPES}")
        check_positive(self.mass, "mass")
        for name, arr in (("mode_mass", m), ("mode_freq", w), ("coupling", c)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        weight = c**2 / (m * w**2)
        weight.setflags(write=False)
        object.__setattr__(self, "_weight", weight)
        if not np.isfinite(weight.sum() / self.mass):
            raise ParameterError("kernel at tau=0 is not finite")

    @property
    def n_modes(self):
        return self.mode_freq.size

    @property
    def weight(self):
        """``c_n^2 / (m_n omega_n^2)`` per mode (read-only)."""
        return self._weight

    @property
    def recurrence_time(self):
        """Time after which the finite bath returns energy: ``2 pi / d_omega``.

        For an irregular grid the smallest spacing between sorted frequencies
        is used, which is the earliest possible recurrence.
        """
        if self.freq_step is not None:
            return 2 * np.pi / self.freq_step
        if self.n_modes == 1:
            return 2 * np.pi / float(self.mode_freq[0])
        dw = np.diff(np.sort(self.mode_freq))
        dw = dw[dw > 0]
        return 2 * np.pi / float(dw.min()) if dw.size else np.inf

    def union(self, other):
        """Bath containing the modes of both baths (continuum metadata from ``self``)."""
        return BathSpec(
            np.concatenate([self.mode_mass, other.mode_mass]),
            np.concatenate([self.mode_freq, other.mode_freq]),
            np.concatenate([self.coupling, other.coupling]),
            gamma0=self.gamma0,
            cutoff=self.cutoff,
            cutoff_shape=self.cutoff_shape,
            mass=self.mass,
        )

    def to_dict(self):
        return {
            "n_modes": int(self.n_modes),
            "gamma0": float(self.gamma0),
            "cutoff": float(self.cutoff),
            "cutoff_shape": self.cutoff_shape,
            "mass": float(self.mass),
            "freq_step": None if self.freq_step is None else float(self.freq_step),
        }


def spectral_density(omega, gamma0, cutoff, cutoff_shape="lorentzian"):
    """Continuum ``g(omega)`` with ``gamma(tau) = int g(omega) cos(omega tau) d omega``."""
    omega = np.asarray(omega, dtype=float)
    flat = 2.0 * gamma0 / np.pi
    if cutoff_shape == "sharp":
        return np.where((omega >= 0) & (omega <= cutoff), flat, 0.0)
    if cutoff_shape == "lorentzian":
        return flat * cutoff**2 / (omega**2 + cutoff**2)
    raise ParameterError(f"cutoff_shape must be one of {CUTOFF_SHAPES}")


def continuum_kernel(tau, gamma0, cutoff, cutoff_shape="lorentzian"):
    """Infinite-bath limit of the memory kernel.

    Lorentzian: ``cutoff * gamma0 * exp(-cutoff |tau|)``;
    sharp: ``2 gamma0 sin(cutoff tau) / (pi tau)`` (``2 gamma0 cutoff / pi`` at 0).
    """
    tau = np.abs(np.asarray(tau, dtype=float))
    if cutoff_shape == "lorentzian":
        return cutoff * gamma0 * np.exp(-cutoff * tau)
    if cutoff_shape == "sharp":
        return 2.0 * gamma0 * cutoff / np.pi * np.sinc(cutoff * tau / np.pi)
    raise ParameterError(f"cutoff_shape must be one of {CUTOFF_SHAPES}")


def continuum_zpf_constant(gamma0, cutoff, mass=1.0, hbar=HBAR):
    """``A = m gamma0 hbar cutoff^2 / (2 pi)`` for the flat (sharp-cutoff) density."""
    return mass * gamma0 * hbar * cutoff**2 / (2 * np.pi)


def discretize_ohmic(gamma0, cutoff, n_modes, cutoff_shape="lorentzian", freq_max=None, mass=1.0):
    """Discretize the Ohmic spectral density on a midpoint frequency grid.

    ``omega_n = (n - 1/2) d_omega`` and ``c_n^2 = m m_n omega_n^2 g(omega_n) d_omega``
    with unit mode masses.  A sharp cutoff is sampled on ``[0, cutoff]``; a
    Lorentzian one on ``[0, freq_max]`` (default ``60 * cutoff``).  The
    Lorentzian tail beyond ``freq_max`` is dropped, which lowers the kernel at
    ``tau = 0`` by ``(2/pi) arctan(cutoff/freq_max) * cutoff * gamma0``.
    """
    gamma0 = check_positive(gamma0, "gamma0", allow_zero=True)
    cutoff = check_positive(cutoff, "cutoff")
    n_modes = check_int(n_modes, "n_modes")
    if freq_max is None:
        freq_max = DEFAULT_FREQ_MAX_RATIO * cutoff if cutoff_shape == "lorentzian" else cutoff
    freq_max = check_positive(freq_max, "freq_max")
    if freq_max < cutoff:
        raise ParameterError(f"freq_max ({freq_max}) must be >= cutoff ({cutoff})")
    if cutoff_shape not in CUTOFF_SHAPES:
        raise ParameterError(f"cutoff_shape must be one of {CUTOFF_SHAPES}")

    top = cutoff if cutoff_shape == "sharp" else freq_max
    dw = top / n_modes
    omega = (np.arange(1, n_modes + 1) - 0.5) * dw
    mode_mass = np.ones(n_modes)
    g = spectral_density(omega, gamma0, cutoff, cutoff_shape)
    coupling = np.sqrt(mass * mode_mass * omega**2 * g * dw)
    return BathSpec(
        mode_mass,
        omega,
        coupling,
        gamma0=gamma0,
        cutoff=cutoff,
        cutoff_shape=cutoff_shape,
        mass=mass,
        freq_step=dw,
    )


def memory_kernel(spec, tau):
    """``gamma(tau) = (1/m) sum_n c_n^2/(m_n omega_n^2) cos(omega_n tau)``.

    Vectorized over ``tau``.
    """
    tau = np.asarray(tau, dtype=float)
    out = np.cos(np.multiply.outer(np.abs(tau), spec.mode_freq)) @ spec.weight
    return out / spec.mass


def zpf_constant(spec, hbar=HBAR):
    """Zero-point constant ``A = sum_n c_n^2/(m_n omega_n^2) * hbar omega_n / 2``."""
    return float(np.sum(spec.weight * hbar * spec.mode_freq / 2))


@dataclass(frozen=True, eq=False)
class CoherentSample:
    """One bath realization: coherent amplitude, phase and Bohmian offset per mode.

    Arrays may carry leading batch axes, ``shape (..., n_modes)``, to hold many
    realizations at once.
    """

    amp: np.ndarray
    phase: np.ndarray
    offset: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        amp = np.asarray(self.amp, dtype=float)
        phase = np.asarray(self.phase, dtype=float)
        offset = np.asarray(self.offset, dtype=float)
        if not (amp.shape == phase.shape == offset.shape):
            raise ParameterError(
                f"amp/phase/offset shapes differ: {amp.shape}, {phase.shape}, {offset.shape}"
            )
        if np.any(amp < 0):
            raise ParameterError("coherent amplitudes must be nonnegative")
        if np.any((phase < 0) | (phase >= 2 * np.pi)):
            raise ParameterError("phases must lie in [0, 2 pi)")
        for name, arr in (("amp", amp), ("phase", phase), ("offset", offset)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_modes(self):
        return self.amp.shape[-1]

    @property
    def batch_shape(self):
        return self.amp.shape[:-1]

    def __getitem__(self, idx):
        return CoherentSample(self.amp[idx], self.phase[idx], self.offset[idx], self.t0)

    @classmethod
    def from_classical(cls, spec, positions, velocities, t0=0.0, hbar=HBAR):
        """Encode classical bath initial conditions ``x_n(t0), v_n(t0)``.

        The free solution ``x_n(t0) cos + v_n(t0)/omega_n sin`` is rewritten as
        ``sqrt(2 hbar/(m_n omega_n)) |alpha| cos(omega_n (t - t0) - sigma)`` with
        zero offset.
        """
        x = np.asarray(positions, dtype=float)
        v = np.asarray(velocities, dtype=float)
        scale = np.sqrt(2 * hbar / (spec.mode_mass * spec.mode_freq))
        z = x + 1j * v / spec.mode_freq
        amp = np.abs(z) / scale
        phase = np.mod(np.angle(z), 2 * np.pi)
        phase = np.where(phase >= 2 * np.pi, 0.0, phase)
        return cls(amp, phase, np.zeros_like(amp), t0)


def _check_sample(spec, sample):
    if sample.n_modes != spec.n_modes:
        raise ParameterError(
            f"sample has {sample.n_modes} modes but the bath has {spec.n_modes}"
        )


def _force_coefficients(spec, sample, hbar=HBAR):
    scale = spec.coupling * np.sqrt(2 * hbar / (spec.mode_mass * spec.mode_freq))
    p = scale * sample.amp * np.cos(sample.phase)
    q = scale * sample.amp * np.sin(sample.phase)
    u = (spec.coupling * sample.offset).sum(axis=-1)
    return p, q, u


def bath_force(spec, sample, t, hbar=HBAR):
    """Fluctuating force ``F'(t) = sum_n c_n x_n(t)`` along the modes' Bohmian paths.

    Each mode follows ``sqrt(2 hbar/(m_n omega_n)) amp_n cos(omega_n (t - t0) - phase_n)
    + offset_n``.  ``t`` may be a scalar or 1-D array; the result has shape
    ``sample.batch_shape + np.shape(t)``.
    """
    _check_sample(spec, sample)
    t = np.asarray(t, dtype=float)
    p, q, u = _force_coefficients(spec, sample, hbar)
    arg = np.multiply.outer(spec.mode_freq, t - sample.t0)
    cos, sin = np.cos(arg), np.sin(arg)
    if t.ndim == 0:
        return p @ cos + q @ sin + u
    flat_p = p.reshape(-1, spec.n_modes)
    flat_q = q.reshape(-1, spec.n_modes)
    out = flat_p @ cos + flat_q @ sin
    out = out.reshape(sample.batch_shape + t.shape)
    return out + np.expand_dims(u, -1)


@dataclass
class MicroscopicTrajectory:
    """System and bath time series; the time axis is last (bath arrays ``(..., n_modes, T)``)."""

    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    bath_x: np.ndarray
    bath_v: np.ndarray
    energy: np.ndarray


def system_bath_energy(spec, potential, x, v, bath_x, bath_v):
    """Total classical energy of the system plus counterterm-coupled bath."""
    m_n, w_n, c_n = spec.mode_mass, spec.mode_freq, spec.coupling
    x = np.asarray(x)[..., None]
    bath = 0.5 * m_n * bath_v**2 + 0.5 * m_n * w_n**2 * (bath_x - c_n * x / (m_n * w_n**2)) ** 2
    return 0.5 * spec.mass * np.asarray(v) ** 2 + potential.value(x[..., 0]) + bath.sum(axis=-1)


def integrate_full_microscopic(
    spec, x0, v0, bath_x0, bath_v0, t_span, dt, potential=None, record_every=1
):
    """Velocity-Verlet integration of the full system + bath Newton equations.

    Inputs may carry a leading batch axis (``x0`` shape ``(B,)``, bath arrays
    ``(B, n_modes)``).  Refuses ``dt > 0.1 / max(omega_n)``.
    """
    potential = potential or FreePotential()
    t0, t1 = map(float, t_span)
    if t1 <= t0:
        raise ParameterError("t_span must be increasing")
    dt = check_positive(dt, "dt")
    dt_max = 0.1 / float(spec.mode_freq.max())
    if dt > dt_max * (1 + 1e-12):
        raise StabilityError(
            f"dt={dt:g} does not resolve the fastest bath mode; use dt <= {dt_max:g}",
            suggested=dt_max,
        )
    n_steps = int(round((t1 - t0) / dt))
    m, m_n, w_n, c_n = spec.mass, spec.mode_mass, spec.mode_freq, spec.coupling
    counter = float(np.sum(c_n**2 / (m_n * w_n**2)))

    x = np.array(x0, dtype=float)
    v = np.array(v0, dtype=float)
    xb = np.array(bath_x0, dtype=float)
    vb = np.array(bath_v0, dtype=float)

    def accel(x, xb):
        a = (-potential.gradient(x) + xb @ c_n - counter * x) / m
        ab = (-m_n * w_n**2 * xb + c_n * x[..., None]) / m_n
        return a, ab

    a, ab = accel(x, xb)
    n_rec = n_steps // record_every + 1
    out_x = np.empty(x.shape + (n_rec,))
    out_v = np.empty_like(out_x)
    out_e = np.empty_like(out_x)
    out_xb = np.empty(xb.shape + (n_rec,))
    out_vb = np.empty_like(out_xb)

    def store(k):
        out_x[..., k], out_v[..., k] = x, v
        out_xb[..., k], out_vb[..., k] = xb, vb
        out_e[..., k] = system_bath_energy(spec, potential, x, v, xb, vb)

    store(0)
    k = 1
    for step in range(1, n_steps + 1):
        v_half = v + 0.5 * dt * a
        vb_half = vb + 0.5 * dt * ab
        x = x + dt * v_half
        xb = xb + dt * vb_half
        a, ab = accel(x, xb)
        v = v_half + 0.5 * dt * a
        vb = vb_half + 0.5 * dt * ab
        if step % record_every == 0:
            store(k)
            k += 1
    times = t0 + dt * record_every * np.arange(n_rec)
    return MicroscopicTrajectory(times, out_x, out_v, out_xb, out_vb, out_e)


def classical_bath_state(spec, temperature, x0, size, rng):
    """Classical thermal bath initial conditions for a system held at ``x0``.

    Positions are Gaussian about the coupling-shifted minimum
    ``c_n x0 / (m_n omega_n^2)`` with variance ``kT/(m_n omega_n^2)``;
    velocities have variance ``kT/m_n``.  Returns ``(positions, velocities)``
    with shape ``(size, n_modes)``.
    """
    check_positive(temperature, "temperature")
    m_n, w_n = spec.mode_mass, spec.mode_freq
    shape = (int(size), spec.n_modes)
    center = spec.coupling * x0 / (m_n * w_n**2)
    xb = center + rng.standard_normal(shape) * np.sqrt(KB * temperature / (m_n * w_n**2))
    vb = rng.standard_normal(shape) * np.sqrt(KB * temperature / m_n)
    return xb, vb


def save_bath(spec, path):
    """Write the bath as JSON lines: a header record, then one record per mode."""
    with open(path, "w") as fh:
        fh.write(json.dumps({"record": "bath", **spec.to_dict()}) + "\n")
        for n, (mm, w, c) in enumerate(zip(spec.mode_mass, spec.mode_freq, spec.coupling)):
            fh.write(
                json.dumps(
                    {"record": "mode", "index": n, "mode_mass": float(mm),
                     "mode_freq": float(w), "coupling": float(c)}
                )
                + "\n"
            )


def load_bath(path):
    with open(path) as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    if not records or records[0].get("record") != "bath":
        raise ParameterError(f"{path}: first record must be the bath header")
    head = records[0]
    modes = sorted((r for r in records[1:] if r.get("record") == "mode"), key=lambda r: r["index"])
    if len(modes) != head["n_modes"]:
        raise ParameterError(f"{path}: header says {head['n_modes']} modes, found {len(modes)}")
    return BathSpec(
        [r["mode_mass"] for r in modes],
        [r["mode_freq"] for r in modes],
        [r["coupling"] for r in modes],
        gamma0=head["gamma0"],
        cutoff=head["cutoff"],
        cutoff_shape=head["cutoff_shape"],
        mass=head.get("mass", 1.0),
        freq_step=head.get("freq_step"),
    )
