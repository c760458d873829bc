import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwbrownian._validation import ParameterError
from pwbrownian.coherent import (
    CoherentState,
    energy_partition,
    guidance_velocity,
    packet_center,
    particle_energy,
    quantum_potential,
    standard_two_time_correlator,
    trajectory_acceleration,
    trajectory_position,
    trajectory_table,
    wavefunction_amplitude_phase,
)
from pwbrownian.thermal import pwi_correlator_single_mode

states = st.builds(
    CoherentState,
    mass=st.floats(0.2, 5.0),
    omega=st.floats(0.2, 5.0),
    amp0=st.floats(0.0, 4.0),
    sigma=st.floats(0.0, 2 * np.pi - 1e-9),
    t0=st.floats(-3.0, 3.0),
    offset=st.floats(-1.5, 1.5),
)


def test_ground_state_amplitude_and_phase():
    s = CoherentState(mass=2.0, omega=1.5, t0=0.5)
    a, phase = wavefunction_amplitude_phase(s, 0.0, 3.0)
    assert a == pytest.approx((2.0 * 1.5 / np.pi) ** 0.25)
    assert phase == pytest.approx(-1.5 * 2.5 / 2)


@settings(max_examples=25, deadline=None)
@given(states, st.floats(-5.0, 5.0))
def test_normalization(s, t):
    center = packet_center(s, t)
    width = np.sqrt(s.width_sq)
    x = np.linspace(center - 14 * width, center + 14 * width, 4001)
    a, _ = wavefunction_amplitude_phase(s, x, t)
    assert np.trapezoid(a**2, x) == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=50, deadline=None)
@given(states, st.floats(-5.0, 5.0))
def test_phase_gradient_is_guidance_velocity(s, t):
    x = np.linspace(-3, 3, 7)
    h = 1e-4
    _, sp = wavefunction_amplitude_phase(s, x + h, t)
    _, sm = wavefunction_amplitude_phase(s, x - h, t)
    grad = (sp - sm) / (2 * h) / s.mass
    scale = 1 + abs(guidance_velocity(s, t))
    assert np.allclose(grad, guidance_velocity(s, t), atol=1e-6 * scale)


def test_guidance_examples():
    assert guidance_velocity(CoherentState(amp0=0.0), 3.0) == 0
    s = CoherentState(mass=2.0, omega=3.0, amp0=1.7, sigma=np.pi / 2, t0=0.4)
    assert guidance_velocity(s, 0.4) == pytest.approx(np.sqrt(2 * 3.0 / 2.0) * 1.7)


def test_guidance_consistency_random_times(rng):
    s = CoherentState(mass=1.3, omega=2.1, amp0=1.2, sigma=0.8, offset=0.3)
    t = rng.uniform(-10, 10, 100)
    for dt in (1e-4, 1e-5, 1e-6):
        fd = (trajectory_position(s, t + dt) - trajectory_position(s, t - dt)) / (2 * dt)
        assert np.abs(fd - guidance_velocity(s, t)).max() < 1e-6


def test_trajectory_examples():
    s = CoherentState(amp0=0.0, offset=0.42)
    assert np.all(trajectory_position(s, np.linspace(0, 9, 5)) == 0.42)
    s = CoherentState(omega=1.7, amp0=2.0, sigma=1.0, offset=-0.2)
    t = np.linspace(-4, 4, 9)
    assert np.allclose(trajectory_position(s, t + 2 * np.pi / 1.7), trajectory_position(s, t), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(states, st.floats(-10.0, 10.0))
def test_newton_law_identity(s, t):
    lhs = s.mass * trajectory_acceleration(s, t) + s.mass * s.omega**2 * (trajectory_position(s, t) - s.offset)
    assert lhs == pytest.approx(0.0, abs=1e-10 * (1 + s.amp0) * s.mass * s.omega**2)


@settings(max_examples=50, deadline=None)
@given(states, st.floats(-10.0, 10.0))
def test_acceleration_matches_second_difference(s, t):
    h = 1e-3
    fd = (trajectory_position(s, t + h) - 2 * trajectory_position(s, t) + trajectory_position(s, t - h)) / h**2
    assert fd == pytest.approx(trajectory_acceleration(s, t), abs=1e-4 * (1 + s.amp0) * (1 + s.omega**4))


def test_quantum_potential_at_packet_center():
    s = CoherentState(mass=1.1, omega=2.3, amp0=0.9, sigma=0.2)
    assert quantum_potential(s, packet_center(s, 1.3), 1.3) == pytest.approx(2.3 / 2)


@settings(max_examples=25, deadline=None)
@given(states, st.floats(-5.0, 5.0))
def test_quantum_potential_from_amplitude(s, t):
    center = packet_center(s, t)
    width = np.sqrt(s.width_sq)
    x = center + width * np.linspace(-2, 2, 9)
    # analytic second derivative of the Gaussian amplitude
    k = s.mass * s.omega / s.hbar
    a, _ = wavefunction_amplitude_phase(s, x, t)
    a_xx = a * (k**2 * (x - center) ** 2 - k)
    q = -(s.hbar**2) * a_xx / (2 * s.mass * a)
    assert np.allclose(q, quantum_potential(s, x, t), atol=1e-8 * s.hbar * s.omega)
    # and by second differences of the amplitude
    h = 1e-4 * width
    ap, _ = wavefunction_amplitude_phase(s, x + h, t)
    am, _ = wavefunction_amplitude_phase(s, x - h, t)
    q_fd = -(s.hbar**2) * (ap - 2 * a + am) / h**2 / (2 * s.mass * a)
    assert np.allclose(q_fd, quantum_potential(s, x, t), atol=1e-4 * s.hbar * s.omega)


def test_quantum_potential_density_average():
    s = CoherentState(mass=0.8, omega=1.9, amp0=1.4, sigma=2.0)
    t = 0.6
    c = packet_center(s, t)
    x = np.linspace(c - 10, c + 10, 8001)
    a, _ = wavefunction_amplitude_phase(s, x, t)
    assert np.trapezoid(a**2 * quantum_potential(s, x, t), x) == pytest.approx(1.9 / 4, rel=1e-8)


def test_energy_examples():
    s = CoherentState(omega=2.0, amp0=1.5, sigma=0.3)
    e = particle_energy(s, np.linspace(0, 5, 11))
    assert np.allclose(e, 2.0 * 1.5**2 + 1.0)
    assert particle_energy(CoherentState(omega=3.0), 1.0) == pytest.approx(1.5)


@settings(max_examples=80, deadline=None)
@given(states, st.floats(-10.0, 10.0))
def test_energy_partition_identity(s, t):
    kin, pot, q = energy_partition(s, t)
    e = particle_energy(s, t)
    assert e - (kin + pot + q) == pytest.approx(0.0, abs=1e-10 * (1 + abs(e)))


def test_standard_correlator_examples():
    s = CoherentState(mass=2.0, omega=0.5)
    assert standard_two_time_correlator(s, 0.0, 0.0) == pytest.approx(1 / (2 * 2.0 * 0.5))
    s = CoherentState(mass=1.2, omega=0.7, amp0=1.3, sigma=0.4)
    assert standard_two_time_correlator(s, 2.0, 0.0).imag == pytest.approx(0.0, abs=1e-15)
    c = standard_two_time_correlator(s, 2.0, np.pi / 2 / 0.7)
    assert c.imag == pytest.approx(-1 / (2 * 1.2 * 0.7))


def test_standard_and_pwi_correlators_differ():
    # both carry the same ground-state width but differ in the amplitude term's time dependence
    s = CoherentState(omega=1.0, amp0=1.0, sigma=0.3)
    std = standard_two_time_correlator(s, 0.2, 0.9).real
    pwi = pwi_correlator_single_mode(s, 0.2, 0.9)
    assert not np.isclose(std, pwi)
    assert standard_two_time_correlator(s, 0.2, 0.0).real == pytest.approx(pwi_correlator_single_mode(s, 0.2, 0.0))


def test_alpha_is_unitary_rotation():
    s = CoherentState(omega=1.3, amp0=0.7, sigma=5.0)
    assert np.allclose(np.abs(s.alpha(np.linspace(-5, 5, 21))), 0.7)


def test_invalid_states():
    for kwargs in ({"omega": 0.0}, {"mass": -1.0}, {"amp0": -0.1}, {"sigma": 2 * np.pi}):
        with pytest.raises(ParameterError):
            CoherentState(**kwargs)


def test_trajectory_table_columns():
    s = CoherentState(amp0=1.0)
    table = trajectory_table(s, np.linspace(0, 1, 4))
    assert table.shape == (4, 5)
    assert np.allclose(table[:, 4], table[0, 4])
