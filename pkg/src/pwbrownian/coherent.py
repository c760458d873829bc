"""Closed-form Bohmian dynamics of a harmonic oscillator in a coherent state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import ParameterError
from .units import HBAR


@dataclass(frozen=True)
class CoherentState:
    """Coherent state ``|alpha(t)>`` with ``alpha(t) = amp0 exp(i sigma - i omega (t - t0))``.

    ``offset`` is the Bohmian particle's constant displacement ``u`` from the
    packet center.
    """

    mass: float = 1.0
    omega: float = 1.0
    amp0: float = 0.0
    sigma: float = 0.0
    t0: float = 0.0
    offset: float = 0.0
    hbar: float = HBAR

    def __post_init__(self):
        # fields may be arrays (a batch of states sharing one formula)
        if np.any(np.asarray(self.omega) <= 0) or np.any(np.asarray(self.mass) <= 0):
            raise ParameterError("omega and mass must be > 0")
        if np.any(np.asarray(self.amp0) < 0):
            raise ParameterError("amp0 must be >= 0")
        sigma = np.asarray(self.sigma)
        if np.any((sigma < 0) | (sigma >= 2 * np.pi)):
            raise ParameterError("sigma must lie in [0, 2 pi)")

    @property
    def length_scale(self):
        """``sqrt(2 hbar / (m omega))``, the packet-center displacement per unit |alpha|."""
        return np.sqrt(2 * self.hbar / (self.mass * self.omega))

    @property
    def width_sq(self):
        """Variance of ``|psi|^2``: ``hbar / (2 m omega)``."""
        return self.hbar / (2 * self.mass * self.omega)

    def alpha(self, t):
        t = np.asarray(t, dtype=float)
        return self.amp0 * np.exp(1j * (self.sigma - self.omega * (t - self.t0)))

    def _angle(self, t):
        return self.omega * (np.asarray(t, dtype=float) - self.t0) - self.sigma


def packet_center(state, t):
    """``<x>_alpha(t) = sqrt(2 hbar/(m omega)) Re alpha(t)``."""
    return state.length_scale * state.amp0 * np.cos(state._angle(t))


def wavefunction_amplitude_phase(state, x, t):
    """Amplitude ``a(x, t)`` and phase ``S(x, t)`` (action units) of the coherent state."""
    m, w, hbar = state.mass, state.omega, state.hbar
    x = np.asarray(x, dtype=float)
    alpha = state.alpha(t)
    a = (m * w / (np.pi * hbar)) ** 0.25 * np.exp(
        -(m * w / (2 * hbar)) * (x - state.length_scale * alpha.real) ** 2
    )
    dt = np.asarray(t, dtype=float) - state.t0
    s_over_hbar = (
        np.sqrt(2 * m * w / hbar) * alpha.imag * x
        - 0.5 * w * dt
        + 0.5 * state.amp0**2 * np.sin(2 * w * dt - 2 * state.sigma)
    )
    return a, hbar * s_over_hbar


def guidance_velocity(state, t):
    """Bohmian velocity ``grad S / m``; uniform in space for a coherent state."""
    return -np.sqrt(2 * state.hbar * state.omega / state.mass) * state.amp0 * np.sin(state._angle(t))


def trajectory_position(state, t):
    return packet_center(state, t) + state.offset


def trajectory_acceleration(state, t):
    """Analytic second time derivative of :func:`trajectory_position`."""
    return -state.omega**2 * packet_center(state, t)


def quantum_potential(state, x, t):
    """``Q = hbar omega / 2 - m omega^2 (x - <x>(t))^2 / 2``."""
    d = np.asarray(x, dtype=float) - packet_center(state, t)
    return 0.5 * state.hbar * state.omega - 0.5 * state.mass * state.omega**2 * d**2


def particle_energy(state, t):
    """``E(t) = -dS/dt`` on the trajectory; oscillates unless ``offset == 0``."""
    hw = state.hbar * state.omega
    return (
        hw * state.amp0**2
        + 0.5 * hw
        + state.omega
        * np.sqrt(2 * state.mass * hw)
        * state.offset
        * state.amp0
        * np.cos(state._angle(t))
    )


def energy_partition(state, t):
    """Kinetic, harmonic and quantum-potential parts of the energy on the trajectory."""
    x = trajectory_position(state, t)
    v = guidance_velocity(state, t)
    kinetic = 0.5 * state.mass * v**2
    potential = 0.5 * state.mass * state.omega**2 * x**2
    return kinetic, potential, quantum_potential(state, x, t)


def standard_two_time_correlator(state, t, tau):
    """Operator-ordered ``<alpha| x(t + tau) x(t) |alpha>``.

    Uses ``x(t) = sqrt(hbar/(2 m omega)) (a e^{-i omega t} + a^dag e^{i omega t})``
    in the Heisenberg picture: the c-number part is the product of packet
    centers and the commutator part is ``hbar/(2 m omega) e^{-i omega tau}``.
    """
    tau = np.asarray(tau, dtype=float)
    center = packet_center(state, t) * packet_center(state, np.asarray(t) + tau)
    return center + state.width_sq * np.exp(-1j * state.omega * tau)


def trajectory_table(state, times):
    """Columns ``t, x, v, Q, E`` along the Bohmian trajectory."""
    times = np.asarray(times, dtype=float)
    x = trajectory_position(state, times)
    v = guidance_velocity(state, times)
    q = quantum_potential(state, x, times)
    e = particle_energy(state, times)
    return np.column_stack([times, x, v, q, e])
