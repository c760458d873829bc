import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwbrownian._validation import ParameterError, StabilityError
from pwbrownian.relaxation import (
    FieldGrid,
    FloorDiagnostics,
    bohm_hiley_dt_max,
    drezet_dt_max,
    equilibrium_distance,
    evolve_fp_bohm_hiley,
    evolve_fp_drezet,
    gaussian_density,
    h_dissipation_rate,
    h_functional,
    random_mixture_densities,
    relaxation_series,
    stationary_drift,
)

X = np.linspace(-4, 4, 129)


def _grid(rho, psi, D=0.5, v=0.0, x=X, boundary="reflecting"):
    return FieldGrid(x, rho, psi, D, v, boundary).normalized()


def test_grid_validation():
    psi = gaussian_density(X)
    with pytest.raises(ParameterError):
        FieldGrid(X, -psi, psi, 1.0)
    with pytest.raises(ParameterError):
        FieldGrid(X, psi, psi * 0, 1.0)
    with pytest.raises(ParameterError):
        FieldGrid(X[:-1], psi, psi, 1.0)
    with pytest.raises(ParameterError):
        FieldGrid(X**3, psi, psi, 1.0)
    with pytest.raises(ParameterError):
        FieldGrid(X, psi, psi, 1.0, boundary="open")
    with pytest.raises(ParameterError):
        FieldGrid(X, 2 * psi, psi, 1.0).check_normalization()


@pytest.mark.parametrize("evolve", [evolve_fp_drezet, evolve_fp_bohm_hiley])
def test_equilibrium_is_fixed_point(evolve):
    psi = gaussian_density(X, 0.3, 1.1)
    g = _grid(psi, psi, v=stationary_drift(X, psi, 0.5) if evolve is evolve_fp_drezet else 0.0)
    out = evolve(g, 0.8 * min(drezet_dt_max(g), bohm_hiley_dt_max(g)), 500)
    assert np.allclose(out.rho, out.psi_sq, rtol=1e-12, atol=1e-15)
    assert h_functional(out) == pytest.approx(0.0, abs=1e-14)


def test_drezet_fixed_point_with_time_dependent_drift():
    x = np.linspace(0, 2 * np.pi, 128, endpoint=False)
    psi = 1 + 0.3 * np.cos(x)
    g = FieldGrid(x, psi, psi, 0.2, lambda t: 0.4 * np.sin(t), "periodic").normalized()
    out = evolve_fp_drezet(g, 0.004, 750)
    assert np.array_equal(out.rho, out.psi_sq)
    assert out.t == pytest.approx(3.0)


def test_heat_kernel_variance():
    x = np.linspace(-12, 12, 961)
    D, s0, t_end = 0.5, 0.4, 4.0
    g = _grid(gaussian_density(x, 0, s0), np.ones_like(x), D=D, x=x)
    dt = drezet_dt_max(g) * 0.9
    n = int(round(t_end / dt))
    out = evolve_fp_drezet(g, t_end / n, n)
    mean = out.integral(x * out.rho)
    var = out.integral((x - mean) ** 2 * out.rho)
    assert var - s0**2 == pytest.approx(2 * D * t_end, rel=0.02)


@pytest.mark.parametrize("evolve", [evolve_fp_drezet, evolve_fp_bohm_hiley])
def test_mass_conservation(evolve):
    rho = random_mixture_densities(X, 1, np.random.default_rng(1))[0]
    g = _grid(rho, gaussian_density(X), v=0.0)
    dt = 0.9 * min(drezet_dt_max(g), bohm_hiley_dt_max(g))
    out = evolve(g, dt, 10_000)
    assert abs(out.integral(out.rho) - 1) <= 1e-6
    assert abs(out.integral(out.psi_sq) - 1) <= 1e-6
    assert np.all(out.rho >= 0)


def test_h_of_shifted_gaussians():
    x = np.linspace(-15, 15, 3001)
    s, d = 0.9, 1.7
    g = FieldGrid(x, gaussian_density(x, d, s), gaussian_density(x, 0, s), 1.0)
    assert h_functional(g) == pytest.approx(d**2 / (2 * s**2), rel=1e-6)


def test_zero_density_nodes_handled():
    rho = np.where(np.abs(X) < 1, 1.0, 0.0)
    g = _grid(rho, gaussian_density(X))
    assert np.isfinite(h_functional(g))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 4))
def test_h_nonnegative_and_dissipation_nonpositive(seed, k):
    rng = np.random.default_rng(seed)
    rho, psi = random_mixture_densities(X, 2, rng, n_components=k)
    g = _grid(rho, psi)
    assert h_functional(g) >= -1e-12
    assert h_dissipation_rate(g) <= 0


def test_dissipation_rate_zero_at_equilibrium():
    psi = gaussian_density(X)
    assert h_dissipation_rate(_grid(psi, psi)) == 0.0


def test_dissipation_rate_matches_finite_difference():
    x = np.linspace(-6, 6, 481)
    psi = gaussian_density(x, 0, 1.2)
    rho = psi * (1 + 0.5 * np.cos(1.3 * x))
    g = _grid(rho, psi, D=0.5, v=stationary_drift(x, psi, 0.5), x=x)
    dt = 0.5 * drezet_dt_max(g)
    n = 20
    out = evolve_fp_drezet(g, dt, n)
    mid = evolve_fp_drezet(g, dt, n // 2)
    fd = (h_functional(out) - h_functional(g)) / (n * dt)
    assert fd == pytest.approx(h_dissipation_rate(mid), rel=0.05)


def test_distance_examples():
    x = np.linspace(0, 4, 401)
    a = np.where(x < 1.9, 1.0, 0.0)
    b = np.where(x > 2.1, 1.0, 1e-300)  # reference density must stay positive
    g = FieldGrid(x, a, b, 1.0).normalized()
    assert equilibrium_distance(g) == pytest.approx(2.0)
    assert equilibrium_distance(FieldGrid(x, b, b, 1.0)) == 0.0


def test_slowest_mode_relaxation_time():
    L, D = 2.0, 0.3
    x = np.linspace(0, L, 81)
    rho = 1 + 0.5 * np.cos(np.pi * x / L)
    g = _grid(rho, np.ones_like(x), D=D, x=x)
    t_end = 10 * L**2 / (D * np.pi**2)
    dt = drezet_dt_max(g)
    n = int(np.ceil(t_end / dt))
    out = evolve_fp_drezet(g, t_end / n, n)
    assert equilibrium_distance(out) < 1e-3
    assert equilibrium_distance(g) > 0.1


@pytest.fixture(scope="module")
def random_batch():
    rng = np.random.default_rng(44)
    return random_mixture_densities(X, 10, rng)


@pytest.mark.parametrize("variant", ["drezet", "bohm_hiley"])
def test_h_monotone_on_random_densities(random_batch, variant):
    psi = gaussian_density(X)
    v = stationary_drift(X, psi, 0.5) if variant == "drezet" else 0.0
    g = _grid(random_batch, psi, D=0.5, v=v)
    dt = 0.9 * min(drezet_dt_max(g), bohm_hiley_dt_max(g))
    series = relaxation_series(g, dt, 2000, variant=variant, every=100)
    assert series.max_increment <= 1e-8
    assert np.all(np.diff(series.H, axis=0) <= 1e-8)
    assert np.all(series.dH <= 0)
    assert series.table(member=3).shape == (series.t.size, 4)


def test_bohm_hiley_cosine_modulation_decays():
    x = np.linspace(-5, 5, 201)
    psi = gaussian_density(x)
    g = _grid(psi * (1 + 0.5 * np.cos(2 * x)), psi, D=0.4, x=x)
    series = relaxation_series(g, 0.9 * bohm_hiley_dt_max(g), 3000, "bohm_hiley", every=50)
    assert series.max_increment <= 1e-8
    assert series.H[-1] < 0.01 * series.H[0]


def test_variants_share_equilibrium():
    psi = gaussian_density(X)
    rho = random_mixture_densities(X, 1, np.random.default_rng(9))[0]
    out = {}
    for variant, v in (("drezet", stationary_drift(X, psi, 0.5)), ("bohm_hiley", 0.0)):
        g = _grid(rho, psi, D=0.5, v=v)
        dt = 0.9 * min(drezet_dt_max(g), bohm_hiley_dt_max(g))
        out[variant] = relaxation_series(g, dt, 12_000, variant, every=12_000).final
    l1 = [equilibrium_distance(g) for g in out.values()]
    assert max(l1) < 1e-3
    diff = out["drezet"].integral(np.abs(out["drezet"].rho - out["bohm_hiley"].rho))
    assert diff < 2e-3


def test_step_guards():
    psi = gaussian_density(X)
    g = _grid(psi, psi)
    with pytest.raises(StabilityError) as info:
        evolve_fp_drezet(g, 10 * drezet_dt_max(g), 1)
    assert info.value.suggested == pytest.approx(drezet_dt_max(g))
    with pytest.raises(StabilityError):
        evolve_fp_bohm_hiley(g, 10 * bohm_hiley_dt_max(g), 1)
    fast = _grid(psi, psi, D=0.01, v=5.0)
    with pytest.raises(StabilityError):
        evolve_fp_drezet(fast, 1e-6, 1)
    with pytest.raises(ParameterError):
        relaxation_series(g, 1e-4, 1, variant="nelson")


def test_bohm_hiley_floor_diagnostic():
    rho = np.where(np.abs(X) < 1, 1.0, 0.0)
    g = _grid(rho, gaussian_density(X))
    diag = FloorDiagnostics()
    out = evolve_fp_bohm_hiley(g, 0.9 * bohm_hiley_dt_max(g), 50, diagnostics=diag)
    assert diag.steps_below_floor >= 1 and diag.min_f == 0.0
    assert np.all(out.rho >= 0)
