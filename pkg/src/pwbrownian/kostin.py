"""Schrodinger-Langevin (Kostin) evolution, Bohmian trajectories and the Langevin residual.

The field obeys

    i hbar d_t Psi = -hbar^2/(2m) d_x^2 Psi + [V(x) - x F(t)] Psi + Gamma S(x, t) Psi,

with ``S`` the (unwrapped) phase of ``Psi`` in action units.  The damping term
only rotates the local phase, so ``|Psi|`` is untouched by it.  It is
integrated exactly: with ``Psi = a exp(iS/hbar)`` the local equation is
``d_t S = -Gamma S``, hence ``Psi -> Psi exp(i S (exp(-Gamma dt) - 1) / hbar)``.
The kinetic part is applied in Fourier space (Strang splitting), so the grid
is periodic and the field should decay well before the edges.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from dataclasses import field as dc_field

import numpy as np
from scipy.interpolate import CubicSpline

from ._validation import ParameterError, StabilityError, check_array, check_int, check_positive
from .potentials import FreePotential, PotentialSpec
from .units import HBAR

AMP_FLOOR = 1e-10
_JUMP_LIMIT = 0.9 * np.pi


class PhaseUnwrapError(RuntimeError):
    """The phase cannot be followed continuously across the tracked support."""


def kostin_grid(length, n_nodes, center=0.0):
    """Periodic grid of ``n_nodes`` points spanning ``length`` (end point omitted)."""
    length = check_positive(length, "length")
    n = check_int(n_nodes, "n_nodes", minimum=8)
    h = length / n
    return center + (np.arange(n) - n // 2) * h


def gaussian_packet(x, center=0.0, momentum=0.0, width=1.0, hbar=HBAR):
    """Normalized Gaussian with position spread ``width`` and mean momentum ``momentum``."""
    x = np.asarray(x, dtype=float)
    amp = (2 * np.pi * width**2) ** -0.25 * np.exp(-((x - center) ** 2) / (4 * width**2))
    return amp * np.exp(1j * momentum * (x - center) / hbar)


def _as_drive(drive):
    """Normalize the drive to a callable ``F(t)``."""
    if drive is None:
        return lambda t: 0.0
    if callable(drive):
        return drive
    if np.isscalar(drive):
        value = float(drive)
        return lambda t: value
    times, values = drive
    times = check_array(times, "drive times")
    values = check_array(values, "drive values")
    if times.shape != values.shape or times.size < 2 or np.any(np.diff(times) <= 0):
        raise ParameterError("drive must be (times, values) with increasing times")
    return lambda t: np.interp(t, times, values)


@dataclass(frozen=True, eq=False)
class KostinState:
    """Field ``Psi`` on a uniform periodic grid plus the parameters of its evolution.

    ``drive`` is ``None``, a constant force, a callable ``F(t)`` or a pair
    ``(times, values)`` interpolated linearly.  With ``mean_phase_subtraction``
    the damping uses ``S - <S>`` (``|Psi|^2``-weighted mean) instead of ``S``.
    """

    x: np.ndarray
    field: np.ndarray
    gamma0: float = 0.0
    potential: PotentialSpec = dc_field(default_factory=FreePotential)
    drive: object = None
    mean_phase_subtraction: bool = False
    t: float = 0.0
    mass: float = 1.0
    hbar: float = HBAR

    def __post_init__(self):
        x = check_array(self.x, "x")
        psi = np.asarray(self.field, dtype=complex)
        if x.size < 8 or psi.shape != x.shape:
            raise ParameterError("field must match a grid of at least 8 nodes")
        if not np.allclose(np.diff(x), x[1] - x[0], rtol=1e-9, atol=0):
            raise ParameterError("x must be uniform")
        if not np.all(np.isfinite(psi)):
            raise ParameterError("field contains non-finite values")
        check_positive(self.gamma0, "gamma0", allow_zero=True)
        check_positive(self.mass, "mass")
        check_positive(self.hbar, "hbar")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "field", psi)

    @property
    def h(self):
        return float(self.x[1] - self.x[0])

    @property
    def wavenumbers(self):
        return 2 * np.pi * np.fft.fftfreq(self.x.size, d=self.h)

    def force(self, t=None):
        return float(_as_drive(self.drive)(self.t if t is None else t))

    def norm(self):
        return float(np.sum(np.abs(self.field) ** 2) * self.h)

    def normalized(self):
        return replace(self, field=self.field / np.sqrt(self.norm()))

    def to_dict(self):
        return {
            "n_nodes": int(self.x.size),
            "x_min": float(self.x[0]),
            "h": self.h,
            "gamma0": self.gamma0,
            "potential": self.potential.to_dict(),
            "mean_phase_subtraction": bool(self.mean_phase_subtraction),
            "t": self.t,
            "mass": self.mass,
        }


def unwrap_phase(psi, floor=AMP_FLOOR, center=None):
    """Continuous phase of ``psi`` (radians), unwrapped outward from ``center``.

    The tracked support is the contiguous run of nodes with ``|psi| >= floor``
    around ``center``; outside it the phase is frozen at the run's end values.
    Amplitude of at least ``sqrt(floor)`` outside the run (a separate lobe
    behind a node), or a neighbour jump above ``0.9 pi`` where
    ``|psi| >= sqrt(floor)``, raises :class:`PhaseUnwrapError`.
    """
    psi = np.asarray(psi)
    n = psi.size
    c = n // 2 if center is None else int(center)
    amp = np.abs(psi)
    above = amp >= floor
    if not above[c]:
        raise PhaseUnwrapError(f"|psi| below floor {floor:g} at the unwrap origin (node {c})")
    below = np.flatnonzero(~above)
    lo = int(below[below < c].max()) + 1 if np.any(below < c) else 0
    hi = int(below[below > c].min()) - 1 if np.any(below > c) else n - 1
    strong = amp >= np.sqrt(floor)
    outside = strong.copy()
    outside[lo:hi + 1] = False
    if np.any(outside):
        bad = int(np.flatnonzero(outside)[0])
        raise PhaseUnwrapError(
            f"|psi| falls below floor {floor:g} between the unwrap origin and node {bad}, "
            "where the amplitude is appreciable"
        )
    raw = np.angle(psi[lo:hi + 1])
    jumps = np.angle(np.exp(1j * np.diff(raw)))
    check = strong[lo:hi] & strong[lo + 1:hi + 1]
    if np.any(check) and np.max(np.abs(jumps[check])) > _JUMP_LIMIT:
        k = lo + int(np.argmax(np.where(check, np.abs(jumps), 0.0)))
        raise PhaseUnwrapError(
            f"phase jump {abs(jumps[k - lo]):.3f} rad between nodes {k} and {k + 1}; refine the grid"
        )
    phase = np.empty(n)
    inner = np.concatenate([[0.0], np.cumsum(jumps)])
    inner += raw[c - lo] - inner[c - lo]  # anchor the origin to its principal value
    phase[lo:hi + 1] = inner
    phase[:lo] = inner[0]
    phase[hi + 1:] = inner[-1]
    return phase


def _damping_phase(state, psi):
    """``S~`` in action units, with the optional mean subtracted."""
    s = state.hbar * unwrap_phase(psi)
    if state.mean_phase_subtraction:
        rho = np.abs(psi) ** 2
        s = s - np.sum(rho * s) / np.sum(rho)
    return s


@dataclass(frozen=True, eq=False)
class KostinHistory:
    """Field snapshots at uniform times (snapshot axis first)."""

    times: np.ndarray
    x: np.ndarray
    fields: np.ndarray
    state: KostinState  # parameters; its field is the last snapshot

    @property
    def dt(self):
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def norms(self):
        return np.sum(np.abs(self.fields) ** 2, axis=1) * self.state.h

    def center_of_mass(self):
        rho = np.abs(self.fields) ** 2
        return (rho @ self.x) / rho.sum(axis=1)


def _dt_limit(state):
    v = state.potential.value(state.x) - state.x * state.force()
    span = float(np.max(v) - np.min(v))
    return np.inf if span == 0 else np.pi * state.hbar / span


def evolve_kostin(state, dt, n_steps, record_every=1):
    """Advance ``state`` by ``n_steps`` Strang steps of size ``dt``.

    Returns ``(final_state, history)``; the history stores the initial field
    and every ``record_every``-th step.  The step is refused when the
    potential's phase spread over one step exceeds ``pi``.
    """
    dt = check_positive(dt, "dt")
    n_steps = check_int(n_steps, "n_steps", minimum=0)
    record_every = check_int(record_every, "record_every", minimum=1)
    limit = _dt_limit(state)
    if dt > limit:
        raise StabilityError(f"dt={dt:g} lets the potential phase wrap within a step; use dt <= {limit:g}",
                             suggested=limit)
    m, hbar, g = state.mass, state.hbar, state.gamma0
    drive = _as_drive(state.drive)
    x = state.x
    v0 = state.potential.value(x)
    kinetic = np.exp(-0.5j * hbar * state.wavenumbers**2 * dt / m)
    tau = dt / 2
    decay = np.expm1(-g * tau)  # exp(-Gamma tau) - 1
    lag = -decay / g if g > 0 else tau  # (1 - exp(-Gamma tau)) / Gamma

    def half_local(psi, t):
        # exact flow of d_t S = -(V - x F) - Gamma (S - <S>) over tau, |Psi| fixed
        veff = v0 - x * drive(t)
        if g == 0:
            return psi * np.exp(-1j * veff * tau / hbar)
        s = _damping_phase(state, psi)
        if state.mean_phase_subtraction:
            rho = np.abs(psi) ** 2
            mean_v = np.sum(rho * veff) / np.sum(rho)
            ds = decay * s - (veff - mean_v) * lag - mean_v * tau
        else:
            ds = decay * s - veff * lag
        return psi * np.exp(1j * ds / hbar)

    psi = state.field.copy()
    t0 = state.t
    snaps, times = [psi.copy()], [t0]
    for step in range(1, n_steps + 1):
        t = t0 + (step - 1) * dt
        psi = half_local(psi, t)
        psi = np.fft.ifft(kinetic * np.fft.fft(psi))
        psi = half_local(psi, t + dt)
        if step % record_every == 0:
            snaps.append(psi.copy())
            times.append(t0 + step * dt)
    final = replace(state, field=psi, t=t0 + n_steps * dt)
    return final, KostinHistory(np.array(times), x, np.array(snaps), final)


def _spectral_derivative(psi, k, order=1):
    return np.fft.ifft((1j * k) ** order * np.fft.fft(psi, axis=-1), axis=-1)


def expectation_energy(state):
    """``<T + V>`` (the drive term excluded), kinetic part evaluated spectrally."""
    psi = state.field
    h = state.h
    k = state.wavenumbers
    phat = np.fft.fft(psi)
    kin = 0.5 * state.hbar**2 / state.mass * np.sum(k**2 * np.abs(phat) ** 2) / psi.size * h
    pot = np.sum(state.potential.value(state.x) * np.abs(psi) ** 2) * h
    return float(kin + pot)


def guidance_field(state, psi=None, floor=AMP_FLOOR):
    """Bohmian velocity ``(hbar/m) Im(Psi* d_x Psi)/|Psi|^2`` on the grid.

    Outside the support (the run of ``|Psi| >= floor`` around the peak) the
    nearest valid value is kept so
    that interpolation stays finite.
    """
    psi = state.field if psi is None else psi
    dpsi = _spectral_derivative(psi, state.wavenumbers)
    rho = np.abs(psi) ** 2
    valid = _support(np.abs(psi), floor)
    v = np.zeros(psi.shape)
    v[valid] = state.hbar / state.mass * np.imag(np.conj(psi[valid]) * dpsi[valid]) / rho[valid]
    return _freeze_outside(v, valid)


def quantum_potential_field(state, psi=None, floor=AMP_FLOOR):
    """``Q = -hbar^2 d_x^2 a / (2 m a)`` with ``a = |Psi|`` (spectral second derivative)."""
    psi = state.field if psi is None else psi
    a = np.abs(psi)
    d2a = np.real(_spectral_derivative(a, state.wavenumbers, order=2))
    valid = _support(a, floor)
    q = np.zeros(a.shape)
    q[valid] = -state.hbar**2 * d2a[valid] / (2 * state.mass * a[valid])
    return _freeze_outside(q, valid)


def _support(amp, floor):
    """Contiguous run of nodes with ``amp >= floor`` around the amplitude peak."""
    c = int(np.argmax(amp))
    mask = np.zeros(amp.shape, dtype=bool)
    if amp[c] < floor:
        return mask
    below = np.flatnonzero(amp < floor)
    lo = int(below[below < c].max()) + 1 if np.any(below < c) else 0
    hi = int(below[below > c].min()) - 1 if np.any(below > c) else amp.size - 1
    mask[lo:hi + 1] = True
    return mask


def _freeze_outside(values, valid):
    idx = np.flatnonzero(valid)
    if idx.size == 0:
        return values
    values[: idx[0]] = values[idx[0]]
    values[idx[-1] + 1:] = values[idx[-1]]
    return values


@dataclass(frozen=True)
class TrajectorySet:
    """Bohmian trajectories ``x[i, k]`` at ``times[k]``.

    ``exited[i]`` flags trajectories that left the grid (or the support); their
    positions are ``nan`` from the exit onward.
    """

    times: np.ndarray
    x: np.ndarray
    exited: np.ndarray

    def final_positions(self):
        return self.x[:, -1]


class _SnapshotVelocity:
    """Cubic-in-x, linear-in-t velocity interpolant with a two-snapshot cache."""

    def __init__(self, history, floor):
        self.history = history
        self.floor = floor
        self._cache = {}

    def spline(self, k):
        if k not in self._cache:
            if len(self._cache) > 2:
                self._cache.pop(min(self._cache))
            v = guidance_field(self.history.state, self.history.fields[k], self.floor)
            self._cache[k] = CubicSpline(self.history.x, v)
        return self._cache[k]

    def __call__(self, x, k, frac):
        if frac == 0.0:
            return self.spline(k)(x)
        return (1 - frac) * self.spline(k)(x) + frac * self.spline(k + 1)(x)


def bohmian_trajectories_from_field(history, x_starts, floor=AMP_FLOOR):
    """Integrate ``dx/dt = v(x, t)`` through the stored snapshots (RK4 per snapshot step).

    The velocity is interpolated cubically in ``x`` and linearly in ``t``
    between snapshots.  Trajectories that leave ``[x_0, x_end]`` are truncated
    and flagged.
    """
    x0 = check_array(np.atleast_1d(x_starts), "x_starts")
    times = history.times
    if times.size < 2:
        raise ParameterError("history needs at least two snapshots")
    xs = history.x
    lo, hi = xs[0], xs[-1]
    if np.any((x0 < lo) | (x0 > hi)):
        raise ParameterError("starts must lie inside the grid")
    rho0 = np.interp(x0, xs, np.abs(history.fields[0]) ** 2)
    if np.any(rho0 < floor**2):
        raise ParameterError("starts must lie inside the amplitude-floored support")
    vel = _SnapshotVelocity(history, floor)
    dt = history.dt
    out = np.full((x0.size, times.size), np.nan)
    out[:, 0] = x0
    exited = np.zeros(x0.size, dtype=bool)
    pos = x0.copy()
    for k in range(times.size - 1):
        live = ~exited
        p = pos[live]
        k1 = vel(p, k, 0.0)
        k2 = vel(p + 0.5 * dt * k1, k, 0.5)
        k3 = vel(p + 0.5 * dt * k2, k, 0.5)
        k4 = vel(p + dt * k3, k + 1, 0.0)
        p = p + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        pos[live] = p
        gone = live & ((pos < lo) | (pos > hi))
        exited |= gone
        out[~exited, k + 1] = pos[~exited]
    return TrajectorySet(times.copy(), out, exited)


@dataclass(frozen=True)
class ResidualSeries:
    """``r(t) = m x'' + d_x(V + Q) + m Gamma x' - F`` along one trajectory."""

    times: np.ndarray
    residual: np.ndarray

    @property
    def max_abs(self):
        return float(np.nanmax(np.abs(self.residual)))

    @property
    def rms(self):
        return float(np.sqrt(np.nanmean(self.residual**2)))


def langevin_residual(history, trajectory, floor=AMP_FLOOR):
    """Residual of the damped Langevin equation along trajectories.

    ``trajectory`` is a position series on ``history.times``, shape ``(K,)``
    or ``(n_traj, K)``.  ``x'`` and ``x''`` are central differences at the
    snapshot spacing and ``d_x Q`` is the second-order gradient of the grid
    quantum potential interpolated cubically at ``x(t)``.  Interior snapshots
    only.
    """
    x = np.asarray(trajectory, dtype=float)
    times = history.times
    if x.shape[-1] != times.size or x.ndim > 2 or times.size < 3:
        raise ParameterError("trajectory must be sampled at the history times (>= 3 points)")
    state = history.state
    dt = history.dt
    m, g = state.mass, state.gamma0
    drive = _as_drive(state.drive)
    xi = x[..., 1:-1]
    vel = (x[..., 2:] - x[..., :-2]) / (2 * dt)
    acc = (x[..., 2:] - 2 * xi + x[..., :-2]) / dt**2
    grad_q = np.empty(xi.shape)
    for j, k in enumerate(range(1, times.size - 1)):
        q = quantum_potential_field(state, history.fields[k], floor)
        spline = CubicSpline(history.x, np.gradient(q, state.h))
        pts = xi[..., j]
        ok = np.isfinite(pts)
        grad_q[..., j] = np.where(ok, spline(np.where(ok, pts, 0.0)), np.nan)
    force = np.array([drive(t) for t in times[1:-1]], dtype=float)
    r = m * acc + state.potential.gradient(xi) + grad_q + m * g * vel - force
    return ResidualSeries(times[1:-1].copy(), r)


def damped_oscillator(t, x0, v0, omega, gamma0):
    """Closed-form solution of ``x'' = -omega^2 x - gamma0 x'`` (any damping regime)."""
    t = np.asarray(t, dtype=float)
    disc = complex(omega**2 - 0.25 * gamma0**2)
    wd = np.sqrt(disc)
    decay = np.exp(-0.5 * gamma0 * t)
    if abs(wd) < 1e-14:
        return decay * (x0 + (v0 + 0.5 * gamma0 * x0) * t)
    sol = decay * (x0 * np.cos(wd * t) + (v0 + 0.5 * gamma0 * x0) * np.sin(wd * t) / wd)
    return np.real(sol)


def field_snapshot_table(state, floor=AMP_FLOOR):
    """Columns ``x, Re Psi, Im Psi, |Psi|^2, S~`` (``S~`` in action units)."""
    psi = state.field
    try:
        s = state.hbar * unwrap_phase(psi, floor)
    except PhaseUnwrapError:
        s = np.full(psi.shape, np.nan)
    return np.column_stack([state.x, psi.real, psi.imag, np.abs(psi) ** 2, s])
