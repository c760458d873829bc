import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwbrownian._validation import ParameterError, StabilityError
from pwbrownian.bath import (
    CoherentSample,
    classical_bath_state,
    discretize_ohmic,
    integrate_full_microscopic,
)
from pwbrownian.coherent import CoherentState
from pwbrownian.langevin import (
    BathNoise,
    GleConfig,
    QuantumPotentialSpec,
    RecurrenceWarning,
    TrajectoryRecord,
    WhiteNoise,
    diffusion_regime,
    effective_temperature,
    ensemble_msd,
    estimate_diffusion,
    gold_case,
    integrate_gle,
    integrate_markovian,
    per_realization_msd,
    stationary_moment,
)
from pwbrownian.potentials import HarmonicPotential
from pwbrownian.thermal import EnsembleStats


def _zero_sample(n_modes, batch=()):
    z = np.zeros(batch + (n_modes,))
    return CoherentSample(z, z, z)


def test_config_validation():
    with pytest.raises(ParameterError):
        GleConfig(dt=0.0)
    with pytest.raises(ParameterError):
        GleConfig(t0=1.0, t_end=1.0)
    with pytest.raises(ParameterError):
        GleConfig(gamma0=-1.0)
    with pytest.raises(ParameterError):
        QuantumPotentialSpec(kind="coherent_packet")


def test_gle_ballistic_without_friction():
    spec = discretize_ohmic(0.0, 1.0, 16, "sharp")
    cfg = GleConfig(gamma0=0.0, t_end=5.0, dt=0.01, x0=0.3, v0=-0.7)
    rec = integrate_gle(spec, _zero_sample(16), cfg)
    assert np.allclose(rec.positions, 0.3 - 0.7 * rec.times, atol=1e-12)


@pytest.fixture(scope="module")
def oracle_bath():
    return discretize_ohmic(0.5, 2.0, 100, "sharp")


@pytest.mark.parametrize("dt", [0.01, 0.005])
def test_gle_matches_microscopic(oracle_bath, dt):
    spec = oracle_bath
    rng = np.random.default_rng(1)
    n, T, x0, v0 = 20, 20.0, 0.3, -0.2
    xb, vb = classical_bath_state(spec, 1.0, x0, n, rng)
    mic = integrate_full_microscopic(spec, np.full(n, x0), np.full(n, v0), xb, vb, (0, T), dt)
    sample = CoherentSample.from_classical(spec, xb, vb)
    gle = integrate_gle(spec, sample, GleConfig(gamma0=0.5, t_end=T, dt=dt, x0=x0, v0=v0), kernel="history")
    assert T < spec.recurrence_time
    assert np.abs(mic.x - gle.positions).max() <= 10 * dt**2 * T


def test_gle_step_convergence_second_order(oracle_bath):
    rng = np.random.default_rng(2)
    xb, vb = classical_bath_state(oracle_bath, 1.0, 0.0, 3, rng)
    sample = CoherentSample.from_classical(oracle_bath, xb, vb)
    runs = {}
    for dt in (0.02, 0.01, 0.005):
        rec = integrate_gle(oracle_bath, sample, GleConfig(gamma0=0.5, t_end=10.0, dt=dt, record_every=int(round(0.02 / dt))))
        runs[dt] = rec.positions
    e1 = np.abs(runs[0.02] - runs[0.01]).max()
    e2 = np.abs(runs[0.01] - runs[0.005]).max()
    assert 3.0 < e1 / e2 < 5.0


def test_gle_harmonic_energy_without_bath():
    spec = discretize_ohmic(0.0, 1.0, 8, "sharp")
    cfg = GleConfig(gamma0=0.0, t_end=50.0, dt=0.01, x0=1.0, potential=HarmonicPotential(2.0))
    rec = integrate_gle(spec, _zero_sample(8), cfg)
    e = 0.5 * rec.velocities**2 + rec.positions**2
    assert np.abs(e - e[0]).max() < 1e-4


def test_gle_exponential_kernel_agrees_with_history():
    # a large Lorentzian bath approaches its continuum exponential kernel
    spec = discretize_ohmic(0.5, 2.0, 1000, "lorentzian", freq_max=40.0)
    cfg = GleConfig(gamma0=0.5, t_end=6.0, dt=0.0025, x0=0.0, v0=1.0)
    sample = _zero_sample(spec.n_modes)
    a = integrate_gle(spec, sample, cfg, kernel="exponential")
    b = integrate_gle(spec, sample, cfg, kernel="history")
    assert np.abs(a.velocities - b.velocities).max() < 1e-4


def test_gle_refuses_coarse_step(oracle_bath):
    with pytest.raises(StabilityError) as info:
        integrate_gle(oracle_bath, _zero_sample(100), GleConfig(dt=0.2, t_end=1.0))
    assert info.value.suggested == pytest.approx(0.1 / oracle_bath.mode_freq.max())
    lor = discretize_ohmic(0.5, 2.0, 50)
    with pytest.raises(StabilityError):
        integrate_gle(lor, _zero_sample(50), GleConfig(dt=0.03, t_end=1.0), kernel="exponential")
    with pytest.raises(ParameterError):
        integrate_gle(oracle_bath, _zero_sample(100), GleConfig(dt=0.01, t_end=1.0), kernel="exponential")


def test_gle_warns_past_recurrence():
    spec = discretize_ohmic(0.5, 2.0, 4, "sharp")
    with pytest.warns(RecurrenceWarning):
        rec = integrate_gle(spec, _zero_sample(4), GleConfig(dt=0.01, t_end=20.0))
    assert rec.window_valid_until == pytest.approx(spec.recurrence_time)


def test_gle_coherent_packet_force():
    packet = CoherentState(omega=1.0)
    cfg = GleConfig(gamma0=0.0, t_end=1.0, dt=0.01, x0=0.5, q_s=QuantumPotentialSpec("coherent_packet", packet))
    spec = discretize_ohmic(0.0, 1.0, 4, "sharp")
    rec = integrate_gle(spec, _zero_sample(4), cfg)
    # Q_S pushes away from the packet center: x = 0.5 cosh(t)
    assert rec.positions[-1] == pytest.approx(0.5 * np.cosh(1.0), rel=1e-4)


def test_markovian_damped_free_particle():
    spec = discretize_ohmic(0.0, 5.0, 8, "sharp")
    cfg = GleConfig(gamma0=0.7, t_end=5.0, dt=0.01, v0=2.0)
    rec = integrate_markovian(cfg, BathNoise(spec, _zero_sample(8)))
    assert np.allclose(rec.velocities, 2.0 * np.exp(-0.7 * rec.times), rtol=1e-8)


def test_markovian_white_noise_equipartition():
    g, kT, dt = 1.0, 2.0, 0.01
    cfg = GleConfig(gamma0=g, t_end=60.0, dt=dt, record_every=5)
    rec = integrate_markovian(cfg, WhiteNoise(kT, n_realizations=400, seed=3))
    stats = stationary_moment(rec, burn_in=8 / g)
    assert stats.mean == pytest.approx(kT, rel=0.05)
    # semi-implicit Euler bias is known exactly
    assert abs(stats.mean - kT / (1 + g * dt / 2)) < 4 * stats.std_error


def test_markovian_refuses_coarse_step():
    spec = discretize_ohmic(0.5, 5.0, 8, "sharp")
    with pytest.raises(StabilityError):
        integrate_markovian(GleConfig(gamma0=10.0, dt=0.1, t_end=1.0), BathNoise(spec, _zero_sample(8)))
    with pytest.raises(ParameterError):
        integrate_markovian(GleConfig(dt=0.1, t_end=1.0), object())


def test_msd_zero_without_coupling():
    spec = discretize_ohmic(0.0, 5.0, 64, "sharp")
    rec = integrate_markovian(GleConfig(gamma0=1.0, dt=0.05, t_end=20.0), BathNoise(spec, _zero_sample(64, (4,))))
    tau = np.arange(0, 5, 1.0)
    msd = ensemble_msd(rec, tau, burn_in=8.0)
    assert np.all(msd.mean == 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_msd_zero_lag_exact(seed):
    rng = np.random.default_rng(seed)
    t = np.arange(50) * 0.1
    x = np.cumsum(rng.standard_normal((3, 50)), axis=1)
    rec = TrajectoryRecord(t, x, x, x)
    msd = per_realization_msd(rec, [0.0, 0.3])
    assert np.all(msd[:, 0] == 0)
    assert msd[0, 1] == pytest.approx(np.mean((x[0, 3:] - x[0, :-3]) ** 2))


def test_msd_needs_post_burn_in_length():
    t = np.arange(10) * 0.1
    rec = TrajectoryRecord(t, t, t, t)
    with pytest.raises(ParameterError):
        ensemble_msd(rec, [0.0, 0.5], burn_in=0.6)
    with pytest.raises(ParameterError):
        ensemble_msd(rec, [0.05])


def test_record_validation():
    with pytest.raises(ParameterError):
        TrajectoryRecord(np.array([0.0, 0.0]), np.zeros(2), np.zeros(2), np.zeros(2))
    with pytest.raises(ParameterError):
        TrajectoryRecord(np.arange(3.0), np.zeros(2), np.zeros(3), np.zeros(3))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 100.0), st.floats(-5.0, 5.0), st.floats(0.0, 3.0))
def test_fit_recovers_exact_curves(D, B, c):
    tau = np.linspace(0, 10, 21)
    fit = estimate_diffusion(tau, c + 2 * D * tau + B * tau**2)
    assert fit.D == pytest.approx(D, rel=1e-8, abs=1e-8)
    assert fit.quadratic_coef == pytest.approx(B, abs=1e-8)
    assert fit.intercept == pytest.approx(c, abs=1e-7)


def test_fit_pure_linear_without_intercept():
    tau = np.linspace(0, 5, 11)
    fit = estimate_diffusion(tau, 2 * 3.0 * tau, intercept=False)
    assert fit.D == pytest.approx(3.0) and fit.quadratic_coef == pytest.approx(0.0, abs=1e-12)


def test_fit_forms_agree(rng):
    tau = np.linspace(0, 10, 11)
    rows = 2 * 1.5 * tau + 0.2 * tau**2 + rng.normal(0, 0.5, (200, tau.size))
    per_row = estimate_diffusion(tau, rows, fit_window=(1, 10))
    stats = EnsembleStats(rows.mean(0), rows.std(0, ddof=1) / np.sqrt(200), 200)
    weighted = estimate_diffusion(tau, stats, fit_window=(1, 10))
    assert per_row.D == pytest.approx(1.5, abs=4 * per_row.D_err)
    assert weighted.D == pytest.approx(per_row.D, abs=3 * per_row.D_err)
    assert per_row.D_err > 0 and weighted.D_err > 0


def test_fit_singular_window():
    tau = np.linspace(0, 10, 11)
    with pytest.raises(ParameterError):
        estimate_diffusion(tau, tau, fit_window=(2, 3))


def test_white_noise_diffusion_and_burn_in_independence():
    g, kT = 1.0, 1.0
    rec = integrate_markovian(GleConfig(gamma0=g, t_end=80.0, dt=0.01, record_every=10),
                              WhiteNoise(kT, n_realizations=400, seed=8))
    tau = np.arange(0, 21) * 1.0
    fits = [estimate_diffusion(tau, per_realization_msd(rec, tau, burn_in=b), fit_window=(4, 20))
            for b in (8.0, 16.0)]
    for fit in fits:
        # Ornstein-Uhlenbeck MSD has slope 2D at long lags
        assert fit.D == pytest.approx(kT / g, abs=4 * fit.D_err + 0.05)
    assert abs(fits[0].D - fits[1].D) < 2 * max(fits[0].D_err, fits[1].D_err)


def test_effective_temperature_examples():
    assert effective_temperature(3.0, 1e-9, 1.0) == pytest.approx(3.0)
    g = 0.4
    wc = 2 * np.pi * g
    assert effective_temperature(wc, wc, g) == pytest.approx(2 * wc)
    with pytest.raises(ParameterError):
        effective_temperature(0.0, 1.0, 1.0)


def test_diffusion_regime():
    assert diffusion_regime(1e4, 1.0, 1.0) == "diffusive"
    assert diffusion_regime(1e-2, 10.0, 1.0) == "linear-spreading"
    assert diffusion_regime(1.0, 1.0, 1.0) == "crossover"


def test_gold_numbers():
    r = gold_case()
    assert r.D_over_DQ == pytest.approx(112, abs=1)
    assert r.lambda_ratio == pytest.approx(0.037, abs=0.001)
    assert 5.5e-5 <= r.D_Q <= 5.8e-5
    assert r.tau_r_h == pytest.approx(2 * np.pi * r.tau_r_hbar)
    assert r.tau_r_h == pytest.approx(6.2e-14, rel=0.03)
    text = r.format()
    assert "112" in text and "1/Gamma" in text
