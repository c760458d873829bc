"""Acceptance checks, each returning a :class:`CriterionResult`.

Every check builds its own inputs from fixed seeds, so results are
reproducible.  ``run_all`` is used by both the test suite and ``pwbrownian check``.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import bath, coherent, kostin, langevin, relaxation, thermal
from .potentials import HarmonicPotential
from .units import HBAR, KB


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        items = ", ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items())
        return f"[{'PASS' if self.passed else 'FAIL'}] #{self.number} {self.name}: {items}"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.4g}"
    return str(v)


def kernel_fidelity(n_modes=4000, freq_max_ratio=30.0, tol=0.02):
    """Lorentzian kernel against ``wc Gamma exp(-wc tau)`` on ``[0, 5/wc]``."""
    gamma0, wc = 1.0, 1.0
    spec = bath.discretize_ohmic(gamma0, wc, n_modes, "lorentzian", freq_max=freq_max_ratio * wc)
    tau = np.linspace(0.0, 5.0 / wc, 501)
    exact = bath.continuum_kernel(tau, gamma0, wc, "lorentzian")
    err = float(np.max(np.abs(bath.memory_kernel(spec, tau) - exact) / exact))
    return CriterionResult(1, "kernel fidelity", err <= tol,
                           {"max_rel_dev": err, "tol": tol, "n_modes": n_modes,
                            "freq_max/wc": freq_max_ratio})


def zero_point_constant(tol=0.01):
    gamma0, wc = 1.0, 3.0
    worst = 0.0
    for n in (2000, 4000, 8000):
        spec = bath.discretize_ohmic(gamma0, wc, n, "sharp")
        target = spec.mass * gamma0 * HBAR * wc**2 / (2 * np.pi)
        worst = max(worst, abs(bath.zpf_constant(spec) / target - 1))
    return CriterionResult(2, "zero-point constant", worst <= tol,
                           {"max_rel_dev": worst, "tol": tol})


def force_statistics(n_samples=100_000, workers=None, seed=11):
    """Monte Carlo force mean and correlator against ``A + kT m gamma(tau)``."""
    spec = bath.discretize_ohmic(1.0, 1.0, 512, "lorentzian")
    temperature = 1000.0
    sampler = thermal.ThermalSampler(temperature, seed=seed, n_samples=n_samples)
    tau = np.linspace(0.0, 20.0, 10)
    stats = thermal.force_statistics_mc(spec, sampler, tau, workers=workers)
    expected = thermal.force_correlator_analytic(spec, temperature, tau)
    z_mean = float(stats.mean_force.zscore(0.0))
    z_corr = stats.correlator.zscore(expected)
    ok = z_mean <= 3 and bool(np.all(z_corr <= 3))
    return CriterionResult(3, "force statistics", ok, {
        "z_mean_force": z_mean, "max_z_correlator": float(np.max(z_corr)),
        "A": bath.zpf_constant(spec), "C_mc(tau=20)": float(stats.correlator.mean[-1]),
        "stderr(tau=20)": float(stats.correlator.std_error[-1]), "M": n_samples,
    })


def thermal_moments(n_samples=100_000, seed=5):
    """Energy, kinetic and potential thermal moments of a coherent-state mixture."""
    omega, mass, temperature = 1.0, 1.0, 500.0
    sampler = thermal.ThermalSampler(temperature, seed=seed, n_samples=n_samples,
                                     occupation="classical")
    t = 0.7
    energy = thermal.thermal_average(lambda s, t: coherent.particle_energy(s, t),
                                     sampler, omega, mass, t)
    kinetic = thermal.thermal_average(
        lambda s, t: 0.5 * s.mass * coherent.guidance_velocity(s, t) ** 2, sampler, omega, mass, t)
    potential = thermal.thermal_average(
        lambda s, t: 0.5 * s.mass * s.omega**2 * coherent.trajectory_position(s, t) ** 2,
        sampler, omega, mass, t)
    e_target = KB * temperature + 0.5 * HBAR * omega
    v_target = thermal.potential_moment_analytic(omega, mass, temperature)
    q_mean = 0.25 * HBAR * omega  # <Q> = hbar w/2 - m w^2 <u^2>/2
    closure = abs(0.5 * KB * temperature + v_target + q_mean - e_target)
    e_dev = abs(energy.mean / e_target - 1)
    z_k = float(kinetic.zscore(0.5 * KB * temperature))
    z_v = float(potential.zscore(v_target))
    ok = e_dev <= 0.01 and z_k <= 3 and z_v <= 3 and closure <= 1e-12
    return CriterionResult(4, "thermal moments", ok, {
        "energy_rel_dev": e_dev, "z_kinetic": z_k, "z_potential": z_v, "closure": closure,
    })


def gle_oracle(n_samples=20, dts=(0.01, 0.005), seed=3):
    """History-kernel GLE against the full Newtonian system-plus-bath integration."""
    spec = bath.discretize_ohmic(0.5, 2.0, 100, "sharp")
    x0, v0, t_end, temperature = 0.3, -0.2, 20.0, 1.0
    rng = np.random.default_rng(seed)
    xb, vb = bath.classical_bath_state(spec, temperature, x0, n_samples, rng)
    sample = bath.CoherentSample.from_classical(spec, xb, vb)
    worst = 0.0
    for dt in dts:
        mic = bath.integrate_full_microscopic(spec, np.full(n_samples, x0), np.full(n_samples, v0),
                                              xb, vb, (0.0, t_end), dt)
        cfg = langevin.GleConfig(gamma0=spec.gamma0, t_end=t_end, dt=dt, x0=x0, v0=v0)
        gle = langevin.integrate_gle(spec, sample, cfg, kernel="history")
        dev = float(np.max(np.abs(mic.x - gle.positions)))
        worst = max(worst, dev / (dt**2 * t_end))
    ok = worst <= 10 and t_end <= spec.recurrence_time
    return CriterionResult(5, "GLE vs microscopic", ok, {
        "max dev/(dt^2 T)": worst, "bound": 10.0, "T": t_end, "window": spec.recurrence_time,
    })


def einstein_regime(n_realizations=16_000, chunk=500, workers=None, seed=17):
    """Markovian ensemble driven by sampled bath forces: ``<v^2>``, ``D`` and the ``tau^2`` term."""
    gamma0, wc, temperature, mass = 1.0, 50.0, 1000.0, 1.0
    spec = bath.discretize_ohmic(gamma0, wc, 512, "sharp")
    cfg = langevin.GleConfig(mass=mass, gamma0=gamma0, t_end=48.0, dt=0.02)
    burn_in = 8.0
    tau = np.arange(0.5, 20.0 + 1e-9, 0.5)
    sampler = thermal.ThermalSampler(temperature, seed=seed, n_samples=n_realizations)
    msd_rows, v2_rows = _markovian_ensemble(spec, sampler, cfg, tau, burn_in, chunk, workers)
    v2 = langevin.ensemble_stats(v2_rows[:, None])
    fit = langevin.estimate_diffusion(tau, msd_rows, fit_window=(4.0, 20.0))
    t_eff = langevin.effective_temperature(temperature, wc, gamma0)
    v2_target = KB * temperature / mass * t_eff / temperature
    d_target = KB * temperature / (mass * gamma0)
    b_target = bath.zpf_constant(spec) / (mass**2 * gamma0**2)
    dev_v = abs(float(v2.mean[0]) / v2_target - 1)
    dev_d = abs(fit.D / d_target - 1)
    dev_b = abs(fit.quadratic_coef / b_target - 1)
    ok = dev_v <= 0.05 and dev_d <= 0.05 and dev_b <= 0.15
    ratio = HBAR * wc / (KB * temperature)
    return CriterionResult(6, "Einstein regime", ok and ratio <= 0.05, {
        "v2_rel_dev": dev_v, "D_rel_dev": dev_d, "B_rel_dev": dev_b,
        "hbar wc/kT": ratio, "realizations": n_realizations,
    })


def _markovian_ensemble(spec, sampler, cfg, tau, burn_in, chunk, workers):
    chunks = sampler.chunks(chunk)

    def run(c):
        idx, size = c
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", thermal.HighTemperatureWarning)
            sample = thermal.sample_bath(spec, sampler, size, rng=sampler.rng(idx))
        rec = langevin.integrate_markovian(cfg, langevin.BathNoise(spec, sample))
        return (langevin.per_realization_msd(rec, tau, burn_in),
                langevin.per_realization_moment(rec, burn_in))

    parts = thermal._map_chunks(run, chunks, workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def gold_arithmetic():
    rep = langevin.gold_case()
    ok = (abs(rep.D_over_DQ - 112) <= 1 and abs(rep.lambda_ratio - 0.037) <= 0.001
          and 5.5e-5 <= rep.D_Q <= 5.8e-5)
    text = rep.format()
    documented = "5.5e-5" in text or "5.5e-05" in text
    return CriterionResult(7, "gold arithmetic", ok and documented, {
        "D/D_Q": rep.D_over_DQ, "lambda ratio": rep.lambda_ratio, "D_Q": rep.D_Q,
        "discrepancy_documented": documented,
    })


def h_theorem(t_end=9.0, n_initial=10, seed=23):
    """Both footnote dynamics from 10 random densities on 512 nodes."""
    x = np.linspace(-4.0, 4.0, 512)
    psi = relaxation.gaussian_density(x, 0.0, 1.0)
    rng = np.random.default_rng(seed)
    rho = relaxation.random_mixture_densities(x, n_initial, rng)
    finals, detail, ok = {}, {}, True
    for variant, v in (("drezet", relaxation.stationary_drift(x, psi, 1.0)),
                       ("bohm_hiley", 0.0)):
        grid = relaxation.FieldGrid(x, rho, psi, D=1.0, v=v).normalized()
        if variant == "drezet":
            dt = relaxation.drezet_dt_max(grid)
        else:
            dt = relaxation.bohm_hiley_dt_max(grid)
        series = relaxation.relaxation_series(grid, dt, int(np.ceil(t_end / dt)), variant, every=100)
        l1 = float(np.max(series.L1[-1]))
        below = np.all(series.L1 < 1e-3, axis=1)
        t_relax = float(series.t[np.argmax(below)]) if below.any() else np.inf
        finals[variant] = series.final
        ok &= series.max_increment <= 1e-8 and l1 < 1e-3
        detail[f"{variant}_max_dH_step"] = series.max_increment
        detail[f"{variant}_L1"] = l1
        detail[f"{variant}_t_relax"] = t_relax
    w = finals["drezet"].weights
    cross = float(np.max(np.abs(finals["drezet"].rho - finals["bohm_hiley"].rho) @ w))
    ratio = detail["drezet_t_relax"] / detail["bohm_hiley_t_relax"]
    ok &= cross < 2e-3 and 0.5 <= ratio <= 2.0
    detail["L1(drezet, bohm_hiley)"] = cross
    return CriterionResult(8, "H-theorem", bool(ok), detail)


def kostin_validation():
    """Norm, damped centre of mass, and residual convergence of the Kostin solver."""
    omega, gamma0, x0 = 1.0, 0.3, 1.0
    width = np.sqrt(HBAR / (2 * omega))
    pot = HarmonicPotential(omega**2)

    def state(n):
        x = kostin.kostin_grid(16.0, n)
        return kostin.KostinState(x, kostin.gaussian_packet(x, x0, 0.0, width),
                                  gamma0=gamma0, potential=pot)

    dt = 2e-3
    n_steps = int(round(5 * 2 * np.pi / omega / dt))
    _, hist = kostin.evolve_kostin(state(256), dt, n_steps, record_every=10)
    drift = float(np.max(np.abs(hist.norms() - hist.norms()[0])) * 1e4 / n_steps)
    com_ref = kostin.damped_oscillator(hist.times, x0, 0.0, omega, gamma0)
    com_err = float(np.max(np.abs(hist.center_of_mass() - com_ref)) / x0)

    residuals = []
    for n, step in ((128, 8e-3), (256, 4e-3), (512, 2e-3)):
        _, h = kostin.evolve_kostin(state(n), step, int(round(3.0 / step)))
        traj = kostin.bohmian_trajectories_from_field(h, [0.5, 1.0, 1.6])
        residuals.append(kostin.langevin_residual(h, traj.x).max_abs)
    orders = np.log2(np.array(residuals[:-1]) / np.array(residuals[1:]))
    ok = drift <= 1e-6 and com_err <= 0.03 and bool(np.all(orders >= 1.8))
    return CriterionResult(9, "Kostin validation", ok, {
        "norm_drift_per_1e4": drift, "com_rel_err": com_err,
        "residuals": "/".join(f"{r:.3g}" for r in residuals), "min_order": float(orders.min()),
    })


def coherent_identities():
    """Newton law, energy partition and a finite-difference quantum potential."""
    rng = np.random.default_rng(2)
    worst_newton = worst_energy = worst_q = worst_v = 0.0
    for _ in range(20):
        st = coherent.CoherentState(
            mass=rng.uniform(0.5, 2), omega=rng.uniform(0.5, 2), amp0=rng.uniform(0, 3),
            sigma=rng.uniform(0, 2 * np.pi), t0=0.0, offset=rng.normal(0, 0.5))
        t = rng.uniform(0, 10, 50)
        x = coherent.trajectory_position(st, t)
        # m x'' = -d_x (V + Q) with V = m w^2 x^2/2 and d_x Q = -m w^2 (x - <x>)
        rhs = -st.omega**2 * x + st.omega**2 * (x - coherent.packet_center(st, t))
        worst_newton = max(worst_newton, float(np.max(np.abs(coherent.trajectory_acceleration(st, t) - rhs))))
        k, v, q = coherent.energy_partition(st, t)
        worst_energy = max(worst_energy, float(np.max(np.abs(k + v + q - coherent.particle_energy(st, t)))))
        # trajectory derivative equals the guidance velocity (4th-order difference)
        h = 1e-3
        xt = [coherent.trajectory_position(st, t + s * h) for s in (-2, -1, 1, 2)]
        dxdt = (xt[0] - 8 * xt[1] + 8 * xt[2] - xt[3]) / (12 * h)
        worst_v = max(worst_v, float(np.max(np.abs(dxdt - coherent.guidance_velocity(st, t)))))
        # Q = -hbar^2 a''/(2 m a) with a 4th-order stencil
        xs = coherent.packet_center(st, t[0]) + np.linspace(-2, 2, 21) * np.sqrt(st.width_sq)
        a = [coherent.wavefunction_amplitude_phase(st, xs + s * h, t[0])[0] for s in (-2, -1, 0, 1, 2)]
        d2a = (-a[0] + 16 * a[1] - 30 * a[2] + 16 * a[3] - a[4]) / (12 * h * h)
        q_fd = -st.hbar**2 * d2a / (2 * st.mass * a[2])
        worst_q = max(worst_q, float(np.max(np.abs(q_fd - coherent.quantum_potential(st, xs, t[0])))))
    ok = worst_newton <= 1e-10 and worst_energy <= 1e-10 and worst_q <= 1e-8 and worst_v <= 1e-8
    return CriterionResult(10, "coherent-state identities", ok, {
        "newton": worst_newton, "energy_partition": worst_energy,
        "guidance_fd": worst_v, "Q_fd": worst_q,
    })


CRITERIA = {
    1: kernel_fidelity,
    2: zero_point_constant,
    3: force_statistics,
    4: thermal_moments,
    5: gle_oracle,
    6: einstein_regime,
    7: gold_arithmetic,
    8: h_theorem,
    9: kostin_validation,
    10: coherent_identities,
}


def run_criterion(number, **kwargs):
    start = time.perf_counter()
    result = CRITERIA[number](**kwargs)
    result.seconds = time.perf_counter() - start
    return result


def run_all(numbers=None, workers=None, echo=None):
    """Run the selected criteria in order; ``echo`` receives each result line."""
    results = []
    for n in numbers or sorted(CRITERIA):
        kwargs = {"workers": workers} if n in (3, 6) else {}
        res = run_criterion(n, **kwargs)
        results.append(res)
        if echo is not None:
            echo(res.line())
    return results
