"""Command-line driver: one subcommand per experiment plus ``sweep`` and ``check``.

Parameters come from built-in defaults, then an optional YAML file
(``--config``), then ``--set key=value`` overrides with dotted keys.  Every run
writes ``manifest.json`` (resolved parameters, seed, version, wall time),
data CSVs and a one-line ``summary.jsonl`` into ``--out``.

Exit codes: 0 success, 2 invalid input, 3 numerical refusal, 4 acceptance failure.
"""

from __future__ import annotations

import argparse
import copy
import difflib
import os
import platform
import sys
import time
import warnings
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path

import numpy as np
import yaml

from . import acceptance, bath, coherent, kostin, langevin, relaxation, thermal
from ._validation import ParameterError, StabilityError
from .io import to_json, write_csv, write_jsonl
from .potentials import HarmonicPotential, potential_from_dict
from .units import KB

EXIT_OK, EXIT_INVALID, EXIT_REFUSED, EXIT_ACCEPTANCE = 0, 2, 3, 4
WORKERS_ENV = "PWBROWNIAN_WORKERS"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


# ---------------------------------------------------------------- parameters

_BATH = {
    "gamma0": 1.0,
    "cutoff": 1.0,
    "n_modes": 512,
    "cutoff_shape": "lorentzian",
    "freq_max_ratio": 60.0,
}

_POTENTIAL = {"kind": "free", "k": 0.0, "center": 0.0}

DEFAULTS = {
    "bath-check": {
        **_BATH,
        "n_modes": 4000,
        "tau_max": 5.0,
        "n_tau": 201,
        "tolerance": 0.02,
        "write_modes": False,
    },
    "correlator": {
        **_BATH,
        "temperature": 1000.0,
        "n_samples": 100_000,
        "occupation": "bose",
        "tau_max": 20.0,
        "n_tau": 10,
        "t_ref": 0.0,
    },
    "gle": {
        **_BATH,
        "gamma0": 0.5,
        "cutoff": 2.0,
        "n_modes": 100,
        "cutoff_shape": "sharp",
        "temperature": 1.0,
        "n_samples": 20,
        "bath_state": "classical",
        "dt": 0.01,
        "t_end": 20.0,
        "x0": 0.3,
        "v0": -0.2,
        "kernel": "auto",
        "slip_term": True,
        "compare_microscopic": True,
        "record_every": 1,
        "potential": dict(_POTENTIAL),
    },
    "markovian": {
        **_BATH,
        "cutoff": 50.0,
        "cutoff_shape": "sharp",
        "noise": "bath",
        "temperature": 1000.0,
        "occupation": "bose",
        "n_realizations": 2000,
        "chunk": 500,
        "dt": 0.02,
        "t_end": 48.0,
        "burn_in": 8.0,
        "tau_step": 0.5,
        "tau_max": 20.0,
        "fit_min": 4.0,
        "fit_max": 20.0,
        "potential": dict(_POTENTIAL),
    },
    "relax": {
        "variant": "both",
        "n_nodes": 512,
        "length": 8.0,
        "D": 1.0,
        "psi_width": 1.0,
        "boundary": "reflecting",
        "drezet_velocity": "stationary",
        "n_initial": 10,
        "n_components": 3,
        "t_end": 9.0,
        "dt": 0.0,
        "record_every": 200,
    },
    "kostin": {
        "n_nodes": 256,
        "length": 16.0,
        "dt": 0.004,
        "periods": 5.0,
        "omega": 1.0,
        "mass": 1.0,
        "gamma0": 0.3,
        "x0": 1.0,
        "p0": 0.0,
        "width": 0.7071067811865476,
        "mean_phase_subtraction": False,
        "drive": {"kind": "none", "amplitude": 0.0, "frequency": 0.0},
        "n_trajectories": 5,
        "record_every": 1,
    },
    "gold": {
        "hbar_gamma_eV": 0.0658,
        "fermi_energy_eV": 5.53,
        "fermi_wavelength_nm": 0.55,
    },
    "coherent": {
        "mass": 1.0,
        "omega": 1.0,
        "amp0": 1.0,
        "sigma": 0.0,
        "offset": 0.2,
        "t0": 0.0,
        "t_end": 20.0,
        "n_t": 401,
    },
}

CHOICES = {
    "cutoff_shape": bath.CUTOFF_SHAPES,
    "occupation": ("bose", "classical"),
    "bath_state": ("classical", "thermal"),
    "kernel": ("auto", "history", "exponential"),
    "noise": ("bath", "white"),
    "variant": ("both", "drezet", "bohm_hiley"),
    "boundary": ("reflecting", "periodic"),
    "drezet_velocity": ("stationary", "zero"),
    "potential.kind": ("free", "harmonic"),
    "drive.kind": ("none", "constant", "cosine"),
}


def flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _set_dotted(d, key, value):
    parts = key.split(".")
    for p in parts[:-1]:
        d = d[p]
    d[parts[-1]] = value


def _suggest(key, valid):
    match = difflib.get_close_matches(key, valid, n=1, cutoff=0.5)
    return f"; did you mean {match[0]!r}?" if match else ""


def _coerce(key, value, default, where):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    else:
        ok = isinstance(value, str)
    if not ok:
        raise ConfigError(
            f"{where}parameter {key!r} expects {type(default).__name__}, got {value!r}"
        )
    leaf = key.split(".")[-1]
    choices = CHOICES.get(key) or (CHOICES.get(leaf) if "." not in key else None)
    if choices and value not in choices:
        raise ConfigError(f"{where}parameter {key!r} must be one of {list(choices)}, got {value!r}")
    return value


def _key_lines(text):
    """Map dotted keys of a YAML mapping to their 1-based line numbers."""
    lines = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = f"{prefix}{k.value}"
                lines[key] = k.start_mark.line + 1
                walk(v, key + ".")

    try:
        walk(yaml.compose(text), "")
    except yaml.YAMLError:
        pass
    return lines


def load_config_file(path):
    """Parse a YAML file into ``(params, seed, workers, key_lines)``."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f" (line {mark.line + 1})" if mark is not None else ""
        raise ConfigError(f"{path}{loc}: invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    seed = data.pop("seed", None)
    workers = data.pop("workers", None)
    return data, seed, workers, _key_lines(text)


def parse_set(items):
    """``["a.b=1", ...]`` -> ``{"a.b": 1, ...}`` with YAML scalar typing."""
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            out[key.strip()] = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"--set {key}: cannot parse value {raw!r}") from exc
    return out


def resolve_params(experiment, file_params=None, overrides=None, key_lines=None, source="config"):
    """Merge defaults, file parameters and overrides, rejecting unknown keys."""
    params = copy.deepcopy(DEFAULTS[experiment])
    valid = flatten(params)
    key_lines = key_lines or {}
    layers = [(flatten(file_params or {}), source), (overrides or {}, "--set")]
    for flat, origin in layers:
        for key, value in flat.items():
            line = key_lines.get(key) if origin == source else None
            where = f"{origin}{f' line {line}' if line else ''}: "
            if key not in valid:
                raise ConfigError(
                    f"{where}unknown parameter {key!r} for {experiment}{_suggest(key, list(valid))}"
                )
            _set_dotted(params, key, _coerce(key, value, valid[key], where))
    return params


# ---------------------------------------------------------------- runners

@dataclass
class RunContext:
    out: Path
    seed: int
    workers: int

    def csv(self, name, columns, data):
        write_csv(self.out / name, columns, data)
        return name


def _bath_from(p):
    freq_max = p["freq_max_ratio"] * p["cutoff"] if p["cutoff_shape"] == "lorentzian" else None
    return bath.discretize_ohmic(p["gamma0"], p["cutoff"], p["n_modes"], p["cutoff_shape"],
                                 freq_max=freq_max)


def run_bath_check(p, ctx):
    spec = _bath_from(p)
    tau = np.linspace(0.0, p["tau_max"] / p["cutoff"], p["n_tau"])
    discrete = bath.memory_kernel(spec, tau)
    exact = bath.continuum_kernel(tau, p["gamma0"], p["cutoff"], p["cutoff_shape"])
    if p["cutoff_shape"] == "lorentzian":
        dev = np.abs(discrete - exact) / exact
    else:  # the sinc kernel has zeros: measure against its value at tau = 0
        dev = np.abs(discrete - exact) / exact[0]
    files = [ctx.csv("kernel.csv", ["tau", "gamma_discrete", "gamma_continuum", "rel_dev"],
                     np.column_stack([tau, discrete, exact, dev]))]
    if p["write_modes"]:
        bath.save_bath(spec, ctx.out / "bath.jsonl")
        files.append("bath.jsonl")
    summary = {
        "max_rel_dev": float(dev.max()),
        "tolerance": p["tolerance"],
        "passed": bool(dev.max() <= p["tolerance"]),
        "zpf_constant": bath.zpf_constant(spec),
        "recurrence_time": spec.recurrence_time,
    }
    if p["cutoff_shape"] == "sharp":
        summary["zpf_continuum"] = bath.continuum_zpf_constant(p["gamma0"], p["cutoff"], spec.mass)
    return summary, files


def run_correlator(p, ctx):
    spec = _bath_from(p)
    sampler = thermal.ThermalSampler(p["temperature"], seed=ctx.seed, n_samples=p["n_samples"],
                                     occupation=p["occupation"])
    tau = np.linspace(0.0, p["tau_max"], p["n_tau"])
    stats = thermal.force_statistics_mc(spec, sampler, tau, t_ref=p["t_ref"], workers=ctx.workers)
    analytic = thermal.force_correlator_analytic(spec, p["temperature"], tau)
    bose = thermal.force_correlator_bose(spec, p["temperature"], tau)
    z = stats.correlator.zscore(analytic)
    files = [ctx.csv("correlator.csv",
                     ["tau", "C_mc", "C_mc_stderr", "C_analytic", "C_bose", "z_analytic"],
                     np.column_stack([tau, stats.correlator.mean, stats.correlator.std_error,
                                      analytic, bose, z]))]
    thermal_part = KB * p["temperature"] * spec.mass * bath.memory_kernel(spec, tau)
    resid = stats.correlator.mean - thermal_part
    w = 1.0 / stats.correlator.std_error**2
    summary = {
        "mean_force": float(stats.mean_force.mean),
        "mean_force_stderr": float(stats.mean_force.std_error),
        "z_mean_force": float(stats.mean_force.zscore(0.0)),
        "max_z_correlator": float(z.max()),
        "zpf_constant": bath.zpf_constant(spec),
        "floor_estimate": float(np.sum(w * resid) / np.sum(w)),
        "floor_estimate_stderr": float(1.0 / np.sqrt(np.sum(w))),
        "n_samples": p["n_samples"],
    }
    return summary, files


def run_gle(p, ctx):
    spec = _bath_from(p)
    rng = np.random.default_rng(ctx.seed)
    n = p["n_samples"]
    cfg = langevin.GleConfig(mass=spec.mass, gamma0=spec.gamma0, t_end=p["t_end"], dt=p["dt"],
                             x0=p["x0"], v0=p["v0"], slip_term=p["slip_term"],
                             potential=potential_from_dict(p["potential"]),
                             record_every=p["record_every"])
    if p["bath_state"] == "classical":
        xb, vb = bath.classical_bath_state(spec, p["temperature"], p["x0"], n, rng)
        sample = bath.CoherentSample.from_classical(spec, xb, vb)
    else:
        sampler = thermal.ThermalSampler(p["temperature"], seed=ctx.seed, n_samples=n)
        sample = thermal.sample_bath(spec, sampler, n, rng=rng)
    rec = langevin.integrate_gle(spec, sample, cfg, kernel=p["kernel"])
    t = rec.times
    real = np.repeat(np.arange(n), t.size)
    cols = [real, np.tile(t, n), rec.positions.ravel(), rec.velocities.ravel(),
            rec.force_samples.ravel()]
    names = ["realization", "t", "x", "v", "F"]
    summary = {"recurrence_time": spec.recurrence_time, "n_samples": n,
               "final_x_mean": float(rec.positions[:, -1].mean())}
    if p["compare_microscopic"]:
        if p["bath_state"] != "classical":
            raise ParameterError("compare_microscopic needs bath_state='classical'")
        mic = bath.integrate_full_microscopic(
            spec, np.full(n, p["x0"]), np.full(n, p["v0"]), xb, vb, (0.0, p["t_end"]), p["dt"],
            potential=cfg.potential, record_every=p["record_every"])
        dev = float(np.max(np.abs(mic.x - rec.positions)))
        cols.append(mic.x.ravel())
        names.append("x_microscopic")
        summary.update({
            "sup_deviation": dev,
            "deviation_per_dt2_time": dev / (p["dt"] ** 2 * p["t_end"]),
            "energy_drift": float(np.max(np.abs(mic.energy - mic.energy[:, :1]))),
        })
    files = [ctx.csv("trajectories.csv", names, np.column_stack(cols))]
    return summary, files


def run_markovian(p, ctx):
    spec = _bath_from(p)
    cfg = langevin.GleConfig(mass=spec.mass, gamma0=spec.gamma0, t_end=p["t_end"], dt=p["dt"],
                             potential=potential_from_dict(p["potential"]))
    tau = np.arange(1, int(round(p["tau_max"] / p["tau_step"])) + 1) * p["tau_step"]
    sampler = thermal.ThermalSampler(p["temperature"], seed=ctx.seed,
                                     n_samples=p["n_realizations"], occupation=p["occupation"])

    def run(chunk):
        idx, size = chunk
        if p["noise"] == "bath":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", thermal.HighTemperatureWarning)
                sample = thermal.sample_bath(spec, sampler, size, rng=sampler.rng(idx))
            noise = langevin.BathNoise(spec, sample)
        else:
            seed = int(np.random.SeedSequence(ctx.seed, spawn_key=(idx,)).generate_state(1)[0])
            noise = langevin.WhiteNoise(p["temperature"], size, seed)
        rec = langevin.integrate_markovian(cfg, noise)
        return (langevin.per_realization_msd(rec, tau, p["burn_in"]),
                langevin.per_realization_moment(rec, p["burn_in"]))

    parts = thermal._map_chunks(run, sampler.chunks(p["chunk"]), ctx.workers)
    rows = np.concatenate([a for a, _ in parts])
    v2 = langevin.ensemble_stats(np.concatenate([b for _, b in parts])[:, None])
    msd = langevin.ensemble_stats(rows)
    fit = langevin.estimate_diffusion(tau, rows, fit_window=(p["fit_min"], p["fit_max"]))
    model = fit.intercept + 2 * fit.D * tau + fit.quadratic_coef * tau**2
    files = [ctx.csv("msd.csv", ["tau", "msd", "msd_stderr", "fit"],
                     np.column_stack([tau, msd.mean, msd.std_error, model]))]
    m, g, temp = spec.mass, spec.gamma0, p["temperature"]
    t_eff = langevin.effective_temperature(temp, spec.cutoff, g)
    summary = {
        "v2": float(v2.mean[0]), "v2_stderr": float(v2.std_error[0]),
        "v2_expected": KB * temp / m * t_eff / temp,
        "D": fit.D, "D_stderr": fit.D_err, "D_expected": KB * temp / (m * g),
        "quadratic": fit.quadratic_coef, "quadratic_stderr": fit.quadratic_err,
        "quadratic_expected": bath.zpf_constant(spec) / (m * g) ** 2,
        "intercept": fit.intercept,
        "regime_at_fit_max": langevin.diffusion_regime(temp, spec.cutoff, p["fit_max"]),
        "n_realizations": p["n_realizations"],
    }
    return summary, files


def run_relax(p, ctx):
    x = np.linspace(-p["length"] / 2, p["length"] / 2, p["n_nodes"],
                    endpoint=p["boundary"] == "reflecting")
    psi = relaxation.gaussian_density(x, 0.0, p["psi_width"])
    rng = np.random.default_rng(ctx.seed)
    rho = relaxation.random_mixture_densities(x, p["n_initial"], rng, p["n_components"])
    variants = ["drezet", "bohm_hiley"] if p["variant"] == "both" else [p["variant"]]
    summary, files, finals = {}, [], {}
    for variant in variants:
        v = 0.0
        if variant == "drezet" and p["drezet_velocity"] == "stationary":
            v = relaxation.stationary_drift(x, psi, p["D"])
        grid = relaxation.FieldGrid(x, rho, psi, D=p["D"], v=v, boundary=p["boundary"]).normalized()
        guard = relaxation.drezet_dt_max(grid) if variant == "drezet" else relaxation.bohm_hiley_dt_max(grid)
        dt = p["dt"] or guard
        series = relaxation.relaxation_series(grid, dt, int(np.ceil(p["t_end"] / dt)), variant,
                                              every=p["record_every"])
        k = np.arange(p["n_initial"])
        n_rows = series.t.size
        table = np.column_stack([
            np.repeat(k, n_rows), np.tile(series.t, k.size),
            series.H.T.ravel(), series.dH.T.ravel(), series.L1.T.ravel(),
        ])
        files.append(ctx.csv(f"series_{variant}.csv", ["initial", "t", "H", "dHdt", "L1"], table))
        below = np.all(series.L1 < 1e-3, axis=1)
        finals[variant] = series.final
        summary[variant] = {
            "dt": dt,
            "max_H_increment_per_step": series.max_increment,
            "final_L1_max": float(series.L1[-1].max()),
            "t_below_1e-3": float(series.t[np.argmax(below)]) if below.any() else None,
        }
    if len(finals) == 2:
        w = finals["drezet"].weights
        summary["L1_between_variants"] = float(
            np.max(np.abs(finals["drezet"].rho - finals["bohm_hiley"].rho) @ w))
    return summary, files


def _drive_from(d):
    kind, amp, freq = d["kind"], d["amplitude"], d["frequency"]
    if kind == "none":
        return None
    if kind == "constant":
        return amp
    return lambda t: amp * np.cos(freq * t)


def run_kostin(p, ctx):
    x = kostin.kostin_grid(p["length"], p["n_nodes"])
    st = kostin.KostinState(
        x, kostin.gaussian_packet(x, p["x0"], p["p0"], p["width"]), gamma0=p["gamma0"],
        potential=HarmonicPotential(p["mass"] * p["omega"] ** 2), drive=_drive_from(p["drive"]),
        mean_phase_subtraction=p["mean_phase_subtraction"], mass=p["mass"]).normalized()
    n_steps = int(round(p["periods"] * 2 * np.pi / p["omega"] / p["dt"]))
    final, hist = kostin.evolve_kostin(st, p["dt"], n_steps, record_every=p["record_every"])
    com = hist.center_of_mass()
    files = []
    cols = [hist.times, com]
    names = ["t", "x_mean"]
    free_oscillator = p["drive"]["kind"] == "none"
    if free_oscillator:
        ref = kostin.damped_oscillator(hist.times, p["x0"], p["p0"] / p["mass"], p["omega"], p["gamma0"])
        cols.append(ref)
        names.append("x_damped_ode")
    files.append(ctx.csv("center_of_mass.csv", names, np.column_stack(cols)))

    rho0 = np.abs(st.field) ** 2
    cdf = np.cumsum(rho0) / rho0.sum()
    qs = (np.arange(p["n_trajectories"]) + 0.5) / p["n_trajectories"]
    starts = np.interp(qs, cdf, x)
    traj = kostin.bohmian_trajectories_from_field(hist, starts)
    res = kostin.langevin_residual(hist, traj.x)
    k = np.arange(p["n_trajectories"])
    files.append(ctx.csv("trajectories.csv", ["trajectory", "t", "x"],
                         np.column_stack([np.repeat(k, hist.times.size), np.tile(hist.times, k.size),
                                          traj.x.ravel()])))
    files.append(ctx.csv("residual.csv", ["trajectory", "t", "r"],
                         np.column_stack([np.repeat(k, res.times.size), np.tile(res.times, k.size),
                                          res.residual.ravel()])))
    files.append(ctx.csv("field_final.csv", ["x", "re", "im", "rho", "S"],
                         kostin.field_snapshot_table(final)))
    norms = hist.norms()
    summary = {
        "n_steps": n_steps,
        "norm_drift": float(np.max(np.abs(norms - norms[0]))),
        "energy_initial": kostin.expectation_energy(st),
        "energy_final": kostin.expectation_energy(final),
        "residual_max": res.max_abs,
        "residual_rms": res.rms,
        "trajectories_exited": int(traj.exited.sum()),
    }
    if free_oscillator:
        summary["com_max_rel_err"] = float(np.max(np.abs(com - ref)) / max(abs(p["x0"]), 1e-300))
    return summary, files


def run_gold(p, ctx):
    rep = langevin.gold_case(p["hbar_gamma_eV"], p["fermi_energy_eV"], p["fermi_wavelength_nm"] * 1e-9)
    (ctx.out / "gold_report.txt").write_text(rep.format() + "\n")
    summary = {k: v for k, v in rep.as_dict().items()}
    summary["D_over_DQ_within_112pm1"] = bool(abs(rep.D_over_DQ - 112) <= 1)
    return summary, ["gold_report.txt"]


def run_coherent(p, ctx):
    st = coherent.CoherentState(p["mass"], p["omega"], p["amp0"], p["sigma"], p["t0"], p["offset"])
    t = np.linspace(p["t0"], p["t_end"], p["n_t"])
    table = coherent.trajectory_table(st, t)
    k, v, q = coherent.energy_partition(st, t)
    summary = {
        "energy_partition_max_err": float(np.max(np.abs(k + v + q - table[:, 4]))),
        "energy_min": float(table[:, 4].min()),
        "energy_max": float(table[:, 4].max()),
    }
    return summary, [ctx.csv("trajectory.csv", ["t", "x", "v", "Q", "E"], table)]


RUNNERS = {
    "bath-check": run_bath_check,
    "correlator": run_correlator,
    "gle": run_gle,
    "markovian": run_markovian,
    "relax": run_relax,
    "kostin": run_kostin,
    "gold": run_gold,
    "coherent": run_coherent,
}

HELP = {
    "bath-check": "discretized memory kernel and zero-point constant against the continuum",
    "correlator": "Monte Carlo bath-force mean and two-time correlator",
    "gle": "generalized Langevin equation, optionally against the full microscopic system",
    "markovian": "Markovian ensemble: stationary <v^2> and MSD diffusion fit",
    "relax": "Fokker-Planck relaxation toward |psi|^2 with the H-functional",
    "kostin": "Schrodinger-Langevin field, Bohmian trajectories and Langevin residual",
    "gold": "free-electron diffusion numbers for gold",
    "coherent": "closed-form coherent-state Bohmian trajectory table",
}


# ---------------------------------------------------------------- orchestration

def package_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def default_workers():
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1")
    return value


def execute(experiment, params, seed, workers, out):
    """Run one experiment and write its manifest, data and summary. Returns the summary."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(out, seed, workers)
    start = time.perf_counter()
    summary, files = RUNNERS[experiment](params, ctx)
    wall = time.perf_counter() - start
    record = {"experiment": experiment, "seed": seed, **summary}
    write_jsonl(out / "summary.jsonl", [record])
    manifest = {
        "experiment": experiment,
        "parameters": params,
        "seed": seed,
        "workers": workers,
        "version": package_version(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "wall_time_s": wall,
        "outputs": sorted(files + ["summary.jsonl"]),
    }
    (out / "manifest.json").write_text(to_json(manifest, indent=2) + "\n")
    return record


def derived_seed(seed, index):
    state = np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


def _common(parser):
    parser.add_argument("--config", help="YAML file with parameters (and optional seed/workers)")
    parser.add_argument("--seed", type=int, help="root seed (default 0)")
    parser.add_argument("--workers", type=int, help=f"worker threads (default ${WORKERS_ENV} or 1)")
    parser.add_argument("--out", help="output directory (default runs/<experiment>)")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                        help="override a parameter; dotted keys reach nested values")


def build_parser():
    parser = argparse.ArgumentParser(prog="pwbrownian", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        _common(sub.add_parser(name, help=HELP[name]))
    sw = sub.add_parser("sweep", help="one run per value of a numeric parameter")
    sw.add_argument("experiment", choices=sorted(RUNNERS))
    sw.add_argument("--axis", required=True, help="parameter to vary (dotted key)")
    sw.add_argument("--values", default="", help="comma-separated values; empty is a no-op")
    _common(sw)
    ck = sub.add_parser("check", help="run the acceptance suite (exit 4 on any failure)")
    ck.add_argument("--only", default="", help="comma-separated criterion numbers")
    ck.add_argument("--workers", type=int)
    ck.add_argument("--out", help="directory for acceptance.jsonl")
    return parser


def _settings(args, experiment):
    file_params, seed, workers, lines = {}, None, None, {}
    if getattr(args, "config", None):
        file_params, seed, workers, lines = load_config_file(args.config)
    params = resolve_params(experiment, file_params, parse_set(args.set), lines, source=args.config)
    seed = args.seed if args.seed is not None else (seed if seed is not None else 0)
    workers = args.workers or workers or default_workers()
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError(f"workers must be a positive integer, got {workers!r}")
    return params, seed, workers


def _run_sweep(args):
    params, seed, workers = _settings(args, args.experiment)
    flat = flatten(params)
    if args.axis not in flat:
        raise ConfigError(f"unknown sweep axis {args.axis!r}{_suggest(args.axis, list(flat))}")
    default = flat[args.axis]
    if isinstance(default, bool) or not isinstance(default, (int, float)):
        raise ConfigError(f"sweep axis {args.axis!r} is not numeric")
    raw = [v for v in args.values.split(",") if v.strip()]
    if not raw:
        print("sweep: no values, nothing to do")
        return EXIT_OK
    out = Path(args.out or f"runs/sweep-{args.experiment}")
    records = []
    for i, text in enumerate(raw):
        value = _coerce(args.axis, yaml.safe_load(text), default, "--values: ")
        run_params = copy.deepcopy(params)
        _set_dotted(run_params, args.axis, value)
        rec = execute(args.experiment, run_params, derived_seed(seed, i), workers, out / f"run_{i:03d}")
        records.append({"index": i, args.axis: value, **rec})
        print(f"{args.axis}={value}: {_headline(rec)}")
    write_jsonl(out / "sweep_summary.jsonl", records)
    numeric = [k for k, v in records[0].items()
               if isinstance(v, (int, float)) and not isinstance(v, bool)]
    write_csv(out / "sweep_summary.csv", numeric, [[r.get(k, np.nan) for k in numeric] for r in records])
    return EXIT_OK


def _headline(rec):
    keys = [k for k, v in rec.items()
            if k not in ("experiment", "seed") and isinstance(v, (int, float, bool))][:4]
    return ", ".join(f"{k}={rec[k]:.4g}" if isinstance(rec[k], float) else f"{k}={rec[k]}"
                     for k in keys)


def _run_check(args):
    try:
        numbers = [int(s) for s in args.only.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"--only expects comma-separated integers, got {args.only!r}") from exc
    bad = [n for n in numbers if n not in acceptance.CRITERIA]
    if bad:
        raise ConfigError(f"unknown criteria {bad}; valid are {sorted(acceptance.CRITERIA)}")
    workers = args.workers or default_workers()
    results = acceptance.run_all(numbers or None, workers=workers, echo=print)
    if args.out:
        write_jsonl(Path(args.out) / "acceptance.jsonl",
                    [{"criterion": r.number, "name": r.name, "passed": r.passed, **r.detail}
                     for r in results])
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed"
          + (f"; failing: {failed}" if failed else ""))
    return EXIT_ACCEPTANCE if failed else EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "check":
            return _run_check(args)
        if args.command == "sweep":
            return _run_sweep(args)
        params, seed, workers = _settings(args, args.command)
        out = Path(args.out or f"runs/{args.command}")
        rec = execute(args.command, params, seed, workers, out)
        print(f"{args.command}: {_headline(rec)} -> {out}")
        return EXIT_OK
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (StabilityError, kostin.PhaseUnwrapError) as exc:
        hint = getattr(exc, "suggested", None)
        extra = f" (suggested value: {hint:g})" if isinstance(hint, float) else ""
        print(f"refused: {exc}{extra}", file=sys.stderr)
        return EXIT_REFUSED


if __name__ == "__main__":
    sys.exit(main())
