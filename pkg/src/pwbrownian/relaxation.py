"""Fokker-Planck relaxation of a density ``rho`` toward ``|psi|^2`` and the H-functional.

Two dynamics are provided:

* :func:`evolve_fp_drezet` -- ``rho`` and ``|psi|^2`` both obey
  ``d_t q = -d_x(q v) + D d_x^2 q``;
* :func:`evolve_fp_bohm_hiley` -- ``|psi|^2`` is only advected while ``rho``
  gains the osmotic term ``D d_x(rho d_x ln f)`` with ``f = rho/|psi|^2``.

Densities live on grid nodes and are integrated with trapezoid weights
``w_i``.  Every update is written as fluxes between neighbouring nodes divided
by ``w_i``, so ``sum_i w_i q_i`` is conserved exactly and, under the time-step
guard, one step is a positive stochastic map on the masses ``w_i q_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ._validation import ParameterError, StabilityError, check_positive

F_FLOOR = 1e-12
SAFETY = 0.8


@dataclass(frozen=True, eq=False)
class FieldGrid:
    """Uniform 1-D grid carrying ``rho``, ``|psi|^2`` and a velocity field.

    ``rho`` may carry leading batch axes; ``psi_sq`` must broadcast against it.
    ``v`` is a constant, a per-node array, or a callable ``v(t)`` returning either.
    For ``boundary="periodic"`` the grid omits the duplicated end point.
    """

    x: np.ndarray
    rho: np.ndarray
    psi_sq: np.ndarray
    D: float
    v: object = 0.0
    boundary: str = "reflecting"
    t: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or x.size < 3:
            raise ParameterError("x must be a 1-D grid with at least 3 nodes")
        h = np.diff(x)
        if not np.allclose(h, h[0], rtol=1e-9, atol=0):
            raise ParameterError("x must be uniform")
        if self.boundary not in ("reflecting", "periodic"):
            raise ParameterError("boundary must be 'reflecting' or 'periodic'")
        check_positive(self.D, "D", allow_zero=True)
        rho = np.asarray(self.rho, dtype=float)
        psi = np.asarray(self.psi_sq, dtype=float)
        if rho.shape[-1] != x.size or psi.shape[-1] != x.size:
            raise ParameterError("rho and psi_sq must match the grid length")
        if np.any(rho < 0):
            raise ParameterError("rho must be nonnegative")
        if np.any(psi <= 0):
            raise ParameterError("psi_sq must be strictly positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "psi_sq", psi)

    @property
    def h(self):
        return float(self.x[1] - self.x[0])

    @property
    def weights(self):
        return quadrature_weights(self.x.size, self.h, self.boundary)

    def velocity(self, t=None):
        v = self.v(self.t if t is None else t) if callable(self.v) else self.v
        return np.broadcast_to(np.asarray(v, dtype=float), self.x.shape)

    def integral(self, q):
        return np.asarray(q) @ self.weights

    def normalized(self):
        """Copy with both densities rescaled to unit mass."""
        return replace(
            self,
            rho=self.rho / self.integral(self.rho)[..., None],
            psi_sq=self.psi_sq / self.integral(self.psi_sq)[..., None],
        )

    def check_normalization(self, tol=1e-6):
        for name in ("rho", "psi_sq"):
            err = np.max(np.abs(self.integral(getattr(self, name)) - 1.0))
            if err > tol:
                raise ParameterError(f"{name} integrates to 1 +/- {err:.2e} (tolerance {tol:g})")


def _evolved(grid, rho, psi, t):
    """Copy of ``grid`` with new fields, skipping validation (hot loop)."""
    new = object.__new__(FieldGrid)
    new.__dict__.update(grid.__dict__)
    new.__dict__.update(rho=rho, psi_sq=psi, t=t)
    return new


def quadrature_weights(n, h, boundary="reflecting"):
    w = np.full(n, h)
    if boundary == "reflecting":
        w[0] = w[-1] = h / 2
    return w


def _face_velocity(v, boundary):
    if boundary == "periodic":
        return 0.5 * (v + np.roll(v, -1))
    return 0.5 * (v[1:] + v[:-1])


def _divergence(flux, weights, boundary):
    """``-(J_{i+1/2} - J_{i-1/2}) / w_i`` with zero flux through reflecting walls."""
    if boundary == "periodic":
        return (np.roll(flux, 1, axis=-1) - flux) / weights
    out = np.zeros(flux.shape[:-1] + (flux.shape[-1] + 1,))
    out[..., :-1] -= flux
    out[..., 1:] += flux
    return out / weights


def _diff(q, boundary):
    if boundary == "periodic":
        return np.roll(q, -1, axis=-1) - q
    return q[..., 1:] - q[..., :-1]


def _mean(q, boundary):
    if boundary == "periodic":
        return 0.5 * (q + np.roll(q, -1, axis=-1))
    return 0.5 * (q[..., 1:] + q[..., :-1])


def drezet_dt_max(grid, v=None):
    """Largest stable explicit step for the central advection-diffusion stencil.

    Keeps every diagonal entry of the update nonnegative (including the
    half-weight wall nodes): ``0.8 h^2 / (2 D + h max|v|)``.
    """
    v = grid.velocity() if v is None else v
    vmax = float(np.max(np.abs(v)))
    h, D = grid.h, grid.D
    denom = 2 * D + h * vmax
    return np.inf if denom == 0 else SAFETY * h * h / denom


def _check_peclet(grid, v):
    vmax = float(np.max(np.abs(v)))
    if vmax == 0:
        return
    if grid.D == 0 or vmax * grid.h / (2 * grid.D) > 1:
        h_ok = 2 * grid.D / vmax if grid.D > 0 else 0.0
        raise StabilityError(
            f"cell Peclet number |v| h / 2D exceeds 1; refine the grid to h <= {h_ok:g}",
            suggested=h_ok,
        )


def _drezet_rate(q, vf, grid, w):
    flux = vf * _mean(q, grid.boundary) - grid.D * _diff(q, grid.boundary) / grid.h
    return _divergence(flux, w, grid.boundary)


def evolve_fp_drezet(grid, dt, n_steps, callback=None, every=1):
    """Advance ``rho`` and ``|psi|^2`` with the same advection-diffusion operator.

    ``callback(grid, step)`` is called every ``every`` steps (and at step 0).
    """
    dt = check_positive(dt, "dt")
    w = grid.weights
    rho, psi = grid.rho.copy(), grid.psi_sq.copy()
    t = grid.t
    static_v = not callable(grid.v)
    v = grid.velocity(t)
    _check_peclet(grid, v)
    dt_max = drezet_dt_max(grid, v)
    if dt > dt_max:
        raise StabilityError(f"dt={dt:g} violates the explicit step guard; use dt <= {dt_max:g}",
                             suggested=dt_max)
    vf = _face_velocity(v, grid.boundary)
    if callback is not None:
        callback(grid, 0)
    for step in range(1, n_steps + 1):
        if not static_v:
            v = grid.velocity(t)
            if dt > drezet_dt_max(grid, v):
                raise StabilityError("time-dependent velocity violated the step guard",
                                     suggested=drezet_dt_max(grid, v))
            _check_peclet(grid, v)
            vf = _face_velocity(v, grid.boundary)
        rho = rho + dt * _drezet_rate(rho, vf, grid, w)
        psi = psi + dt * _drezet_rate(psi, vf, grid, w)
        t = grid.t + step * dt
        if callback is not None and step % every == 0:
            callback(_evolved(grid, rho, psi, t), step)
    return replace(grid, rho=rho, psi_sq=psi, t=t)


def _upwind_rate(q, v, grid, w):
    vf = _face_velocity(v, grid.boundary)
    if grid.boundary == "periodic":
        right = np.roll(q, -1, axis=-1)
        left = q
    else:
        right, left = q[..., 1:], q[..., :-1]
    flux = np.where(vf > 0, vf * left, vf * right)
    return _divergence(flux, w, grid.boundary)


def _osmotic_conductance(psi, grid):
    if grid.boundary == "periodic":
        return grid.D * np.sqrt(psi * np.roll(psi, -1, axis=-1)) / grid.h
    return grid.D * np.sqrt(psi[..., 1:] * psi[..., :-1]) / grid.h


def bohm_hiley_dt_max(grid, psi=None, v=None):
    """Step guard for upwind advection plus the osmotic exchange between nodes."""
    psi = grid.psi_sq if psi is None else psi
    v = grid.velocity() if v is None else v
    w = grid.weights
    k = _osmotic_conductance(psi, grid)
    if grid.boundary == "periodic":
        out = k + np.roll(k, 1, axis=-1)
    else:
        out = np.zeros(psi.shape)
        out[..., :-1] += k
        out[..., 1:] += k
    osm = np.max(out / (w * psi))
    adv = 2 * float(np.max(np.abs(v))) / grid.h
    rate = osm + adv
    return np.inf if rate == 0 else SAFETY / rate


@dataclass
class FloorDiagnostics:
    """Counts nodes where ``f = rho/|psi|^2`` fell below :data:`F_FLOOR`."""

    steps_below_floor: int = 0
    min_f: float = np.inf


def evolve_fp_bohm_hiley(grid, dt, n_steps, callback=None, every=1, diagnostics=None):
    """Advance ``rho`` with advection plus osmotic drift; ``|psi|^2`` is only advected.

    The osmotic term is applied in the equivalent flux form
    ``D d_x(|psi|^2 d_x f)``, which stays finite where ``rho -> 0``.  Each
    step is split: upwind advection of both densities, then the osmotic
    exchange with ``|psi|^2`` frozen.
    """
    dt = check_positive(dt, "dt")
    w = grid.weights
    rho, psi = grid.rho.copy(), np.array(grid.psi_sq, dtype=float)
    t = grid.t
    diag = diagnostics if diagnostics is not None else FloorDiagnostics()
    dt_max = bohm_hiley_dt_max(grid, psi, grid.velocity(t))
    if dt > dt_max:
        raise StabilityError(f"dt={dt:g} violates the explicit step guard; use dt <= {dt_max:g}",
                             suggested=dt_max)
    static = not callable(grid.v)
    v = grid.velocity(t)
    moving = bool(np.any(v != 0)) or not static
    k = _osmotic_conductance(psi, grid)
    if callback is not None:
        callback(grid, 0)
    for step in range(1, n_steps + 1):
        if moving:
            v = grid.velocity(t)
            rho = rho + dt * _upwind_rate(rho, v, grid, w)
            psi = psi + dt * _upwind_rate(psi, v, grid, w)
            k = _osmotic_conductance(psi, grid)
            if dt > bohm_hiley_dt_max(grid, psi, v):
                raise StabilityError("step guard violated while advecting |psi|^2",
                                     suggested=bohm_hiley_dt_max(grid, psi, v))
        f = rho / psi
        fmin = float(np.min(f))
        if fmin < F_FLOOR:
            diag.steps_below_floor += 1
        diag.min_f = min(diag.min_f, fmin)
        rho = rho + dt * _divergence(-k * _diff(f, grid.boundary), w, grid.boundary)
        t = grid.t + step * dt
        if callback is not None and step % every == 0:
            callback(_evolved(grid, rho, psi, t), step)
    return replace(grid, rho=rho, psi_sq=psi, t=t)


def h_functional(grid):
    """``H = int rho ln(rho / |psi|^2) dx`` with ``0 ln 0 = 0`` (trapezoid weights)."""
    rho = grid.rho
    ratio = np.where(rho > 0, rho / grid.psi_sq, 1.0)
    return grid.integral(rho * np.log(ratio))


def h_dissipation_rate(grid):
    """``-int D |psi|^2 (d_x f)^2 / f dx`` with central differences; always <= 0."""
    f = np.maximum(grid.rho / grid.psi_sq, F_FLOOR)
    if grid.boundary == "periodic":
        df = (np.roll(f, -1, axis=-1) - np.roll(f, 1, axis=-1)) / (2 * grid.h)
    else:
        df = np.gradient(f, grid.h, axis=-1, edge_order=2)
        df[..., 0] = df[..., -1] = 0.0  # zero-flux walls
    return -grid.D * grid.integral(grid.psi_sq * df**2 / f)


def equilibrium_distance(grid):
    """L1 distance ``int |rho - |psi|^2| dx``."""
    return grid.integral(np.abs(grid.rho - grid.psi_sq))


@dataclass(frozen=True)
class RelaxationSeries:
    """Recorded ``t, H, dH/dt, L1`` rows plus the largest one-step rise of ``H``.

    ``H``, ``dH`` and ``L1`` have the row axis first and any batch axes after.
    ``max_increment`` is taken over every step, not only the recorded ones.
    """

    final: FieldGrid
    t: np.ndarray
    H: np.ndarray
    dH: np.ndarray
    L1: np.ndarray
    max_increment: float

    def table(self, member=None):
        """``t, H, dH/dt, L1`` columns (for one batch member if given)."""
        cols = [self.H, self.dH, self.L1]
        if member is not None:
            cols = [c[:, member] for c in cols]
        return np.column_stack([self.t] + cols)


def relaxation_series(grid, dt, n_steps, variant="drezet", every=1):
    """Evolve, tracking ``H`` at every step and recording rows every ``every`` steps."""
    evolve = {"drezet": evolve_fp_drezet, "bohm_hiley": evolve_fp_bohm_hiley}.get(variant)
    if evolve is None:
        raise ParameterError("variant must be 'drezet' or 'bohm_hiley'")
    rows = []
    last = [None, -np.inf]  # previous H, largest rise

    def monitor(g, step):
        h = h_functional(g)
        if last[0] is not None:
            last[1] = max(last[1], float(np.max(h - last[0])))
        last[0] = h
        if step % every == 0:
            rows.append((g.t, h, h_dissipation_rate(g), equilibrium_distance(g)))

    final = evolve(grid, dt, n_steps, callback=monitor, every=1)
    t = np.array([r[0] for r in rows])
    cols = [np.array([r[i] for r in rows]) for i in (1, 2, 3)]
    return RelaxationSeries(final, t, *cols, last[1])


def random_mixture_densities(x, n_densities, rng, n_components=3, spread=None):
    """Random Gaussian mixtures on ``x`` (rows), each with ``n_components`` parts.

    Centers are uniform within the middle half of the grid (or ``+/- spread``),
    widths in ``[0.3, 1.0]`` and weights in ``[0.2, 1.0]``; rows are not yet
    normalized to the trapezoid rule.
    """
    x = np.asarray(x, dtype=float)
    half = 0.25 * (x[-1] - x[0]) if spread is None else spread
    out = np.zeros((n_densities, x.size))
    for row in out:
        centers = rng.uniform(-half, half, n_components) + 0.5 * (x[0] + x[-1])
        widths = rng.uniform(0.3, 1.0, n_components)
        weights = rng.uniform(0.2, 1.0, n_components)
        for c, w, a in zip(centers, widths, weights):
            row += a * gaussian_density(x, c, w)
    return out


def stationary_drift(x, psi_sq, D):
    """``v = D d_x ln|psi|^2``: the drift that keeps ``|psi|^2`` fixed under the Drezet dynamics."""
    return D * np.gradient(np.log(psi_sq), np.asarray(x, dtype=float), edge_order=2)


def gaussian_density(x, center=0.0, width=1.0):
    """Normalized Gaussian with standard deviation ``width``."""
    return np.exp(-0.5 * ((np.asarray(x) - center) / width) ** 2) / (width * np.sqrt(2 * np.pi))
