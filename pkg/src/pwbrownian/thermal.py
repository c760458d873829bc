"""Thermal mixtures of coherent states (Glauber P-representation) and Monte Carlo averages."""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._validation import ParameterError, check_int, check_positive
from .bath import CoherentSample, bath_force, memory_kernel, zpf_constant
from .coherent import CoherentState
from .units import HBAR, KB

HIGH_T_RATIO = 0.3
CHUNK = 4096


class HighTemperatureWarning(UserWarning):
    """``hbar omega / kB T`` exceeds the ratio where the classical-bath picture holds."""


@dataclass(frozen=True)
class ThermalSampler:
    """Draws thermal coherent states at temperature ``temperature`` (energy units).

    ``occupation="bose"`` uses the exact mean occupation ``1/(exp(hbar w/kT) - 1)``
    for ``|alpha|^2``; ``"classical"`` uses the high-temperature value ``kT/(hbar w)``.
    Sample streams depend only on ``(seed, chunk index)``, never on worker count.
    """

    temperature: float
    seed: int = 0
    n_samples: int = 100_000
    occupation: str = "bose"
    hbar: float = HBAR

    def __post_init__(self):
        check_positive(self.temperature, "temperature")
        check_int(self.n_samples, "n_samples", minimum=1)
        if self.occupation not in ("bose", "classical"):
            raise ParameterError("occupation must be 'bose' or 'classical'")

    def mean_occupation(self, omega):
        x = self.hbar * np.asarray(omega, dtype=float) / (KB * self.temperature)
        if self.occupation == "classical":
            return 1.0 / x
        return 1.0 / np.expm1(x)

    def rng(self, chunk=0):
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(chunk,)))

    def chunks(self, chunk_size=CHUNK):
        """``(index, size)`` pairs covering ``n_samples`` in fixed order."""
        n_full, rest = divmod(self.n_samples, chunk_size)
        sizes = [chunk_size] * n_full + ([rest] if rest else [])
        return list(enumerate(sizes))


@dataclass(frozen=True)
class EnsembleStats:
    """Monte Carlo mean with its standard error ``std / sqrt(n)``.

    ``mean`` and ``std_error`` may be arrays (one entry per lag, say).
    """

    mean: float | np.ndarray
    std_error: float | np.ndarray
    n_samples: int

    def zscore(self, expected):
        err = np.asarray(self.std_error, dtype=float)
        diff = np.asarray(self.mean, dtype=float) - expected
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(err > 0, np.abs(diff) / np.where(err > 0, err, 1.0),
                            np.where(diff == 0, 0.0, np.inf))


class _Accumulator:
    """Chan-style merge of (count, mean, M2) in a caller-fixed order."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add_block(self, values):
        values = np.asarray(values, dtype=float)
        nb = values.shape[0]
        mb = values.mean(axis=0)
        m2b = ((values - mb) ** 2).sum(axis=0)
        if self.n == 0:
            self.n, self.mean, self.m2 = nb, mb, m2b
            return
        n = self.n + nb
        delta = mb - self.mean
        self.mean = self.mean + delta * nb / n
        self.m2 = self.m2 + m2b + delta**2 * self.n * nb / n
        self.n = n

    def stats(self):
        if self.n > 1:
            err = np.sqrt(self.m2 / (self.n - 1) / self.n)
        else:
            err = np.zeros_like(np.asarray(self.mean, dtype=float))
        return EnsembleStats(self.mean, err, self.n)


def default_workers():
    return int(os.environ.get("PWBROWNIAN_WORKERS", "1"))


def _map_chunks(fn, chunks, workers):
    workers = workers or default_workers()
    if workers <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))


def _warn_regime(sampler, omega):
    ratio = sampler.hbar * float(np.max(omega)) / (KB * sampler.temperature)
    if ratio > HIGH_T_RATIO:
        warnings.warn(
            f"hbar*omega/kB*T = {ratio:.3g} > {HIGH_T_RATIO}: outside the high-temperature regime",
            HighTemperatureWarning,
            stacklevel=3,
        )
    return ratio


def _draw(rng, sampler, omega, mass, size):
    """Arrays (amp, phase, offset) with shape ``size + omega.shape``."""
    omega = np.asarray(omega, dtype=float)
    shape = tuple(np.atleast_1d(size)) + omega.shape if size is not None else omega.shape
    nbar = sampler.mean_occupation(omega)
    amp = np.sqrt(rng.exponential(1.0, shape) * nbar)
    phase = rng.uniform(0.0, 2 * np.pi, shape)
    offset = rng.standard_normal(shape) * np.sqrt(sampler.hbar / (2 * mass * omega))
    return amp, phase, offset


def sample_coherent_mode(sampler, omega, mass=1.0, t0=0.0, rng=None, size=None):
    """Draw thermal coherent state(s) for one oscillator.

    ``|alpha|^2`` is exponential with the thermal mean occupation, the phase is
    uniform and the Bohmian offset is Gaussian with the ``|psi|^2`` variance
    ``hbar / (2 m omega)``.  With ``size`` the returned state holds arrays.
    """
    omega = check_positive(omega, "omega")
    _warn_regime(sampler, omega)
    rng = rng if rng is not None else sampler.rng()
    amp, phase, offset = _draw(rng, sampler, omega, mass, size)
    return CoherentState(mass, omega, amp, phase, t0, offset, sampler.hbar)


def sample_bath(spec, sampler, size, t0=0.0, rng=None):
    """Draw ``size`` full bath realizations as one batched :class:`CoherentSample`."""
    _warn_regime(sampler, spec.mode_freq)
    rng = rng if rng is not None else sampler.rng()
    amp = np.empty((size, spec.n_modes))
    phase = np.empty_like(amp)
    offset = np.empty_like(amp)
    nbar = sampler.mean_occupation(spec.mode_freq)
    amp[:] = np.sqrt(rng.exponential(1.0, amp.shape) * nbar)
    phase[:] = rng.uniform(0.0, 2 * np.pi, amp.shape)
    offset[:] = rng.standard_normal(amp.shape) * np.sqrt(
        sampler.hbar / (2 * spec.mode_mass * spec.mode_freq)
    )
    return CoherentSample(amp, phase, offset, t0)


def thermal_average(observable, sampler, omega, mass=1.0, t=0.0, t0=0.0, workers=None):
    """Monte Carlo thermal average of ``observable(state, t)``.

    The observable receives a batched :class:`CoherentState` (array fields) and
    must return one value per member.
    """
    if sampler.n_samples < 1:
        raise ParameterError("need at least one sample")
    omega = check_positive(omega, "omega")
    _warn_regime(sampler, omega)

    def run(chunk):
        idx, size = chunk
        amp, phase, offset = _draw(sampler.rng(idx), sampler, omega, mass, size)
        state = CoherentState(mass, omega, amp, phase, t0, offset, sampler.hbar)
        vals = np.broadcast_to(np.asarray(observable(state, t), dtype=float), (size,))
        return vals

    acc = _Accumulator()
    for vals in _map_chunks(run, sampler.chunks(), workers):
        acc.add_block(vals)
    return acc.stats()


def potential_moment_analytic(omega, mass, temperature, hbar=HBAR):
    """Thermal ``<m omega^2 x^2 / 2>`` over phases, amplitudes and offsets: ``hbar w/4 + kT/2``."""
    return 0.25 * hbar * omega + 0.5 * KB * temperature


def pwi_correlator_single_mode(state, t, tau):
    """``|psi|^2``-weighted product ``<x(t + tau) x(t)>`` over the offset, closed form."""
    c = state.length_scale**2 * state.amp0**2
    return state.width_sq + c * np.cos(state._angle(t)) * np.cos(state._angle(np.asarray(t) + tau))


def sigma_averaged_pwi_correlator(amp0, omega, mass, tau, hbar=HBAR):
    """Phase average of :func:`pwi_correlator_single_mode`."""
    return hbar / (2 * mass * omega) + hbar / (mass * omega) * np.asarray(amp0) ** 2 * np.cos(
        omega * np.asarray(tau, dtype=float)
    )


def force_correlator_analytic(spec, temperature, tau, hbar=HBAR):
    """``C_F(tau) = A + kB T m gamma(tau)``: zero-point floor plus thermal kernel."""
    return zpf_constant(spec, hbar) + KB * temperature * spec.mass * memory_kernel(spec, tau)


def force_correlator_bose(spec, temperature, tau, hbar=HBAR):
    """Same correlator with the exact Bose occupation in place of ``kT/(hbar w)``.

    ``sum_n c_n^2/(m_n w_n^2) [hbar w_n / 2 + hbar w_n nbar_n cos(w_n tau)]``;
    tends to :func:`force_correlator_analytic` when ``hbar w_n << kT``.
    """
    w = spec.mode_freq
    nbar = 1.0 / np.expm1(hbar * w / (KB * temperature))
    tau = np.asarray(tau, dtype=float)
    cos = np.cos(np.multiply.outer(tau, w))
    return zpf_constant(spec, hbar) + cos @ (spec.weight * hbar * w * nbar)


@dataclass(frozen=True)
class ForceStatistics:
    mean_force: EnsembleStats
    correlator: EnsembleStats
    tau: np.ndarray
    t_ref: float


def force_statistics_mc(spec, sampler, tau_grid, t_ref=0.0, t0=0.0, workers=None):
    """Monte Carlo ``<F'(t_ref)>`` and ``<F'(t_ref + tau) F'(t_ref)>`` over bath realizations."""
    tau = np.atleast_1d(np.asarray(tau_grid, dtype=float))
    if tau.size == 0:
        raise ParameterError("tau_grid is empty")
    _warn_regime(sampler, spec.mode_freq)
    times = np.concatenate([[t_ref], t_ref + tau])

    def run(chunk):
        idx, size = chunk
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", HighTemperatureWarning)
            sample = sample_bath(spec, sampler, size, t0=t0, rng=sampler.rng(idx))
        f = bath_force(spec, sample, times, hbar=sampler.hbar)
        return f[:, 0], f[:, 1:] * f[:, :1]

    mean_acc, corr_acc = _Accumulator(), _Accumulator()
    for f0, prod in _map_chunks(run, sampler.chunks(), workers):
        mean_acc.add_block(f0)
        corr_acc.add_block(prod)
    return ForceStatistics(mean_acc.stats(), corr_acc.stats(), tau, float(t_ref))
