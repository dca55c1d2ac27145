"""Reference flows and fixed-step integration.

The built-in systems cover the regimes exercised elsewhere in the package:
the Lorenz and Roessler attractors (dissipative, chaotic), a 2-D harmonic
oscillator and rigid rotation (volume preserving), and a uniformly expanding
flow.  Integration is classical fixed-step RK4 throughout; reproducibility
beats adaptive accuracy here, so identical inputs give bit-identical orbits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "BlowUpError",
    "DegenerateTangentError",
    "FlowSystem",
    "Trajectory",
    "SYSTEMS",
    "make_system",
    "lorenz",
    "rossler",
    "harmonic_oscillator",
    "rigid_rotation",
    "uniform_divergence",
    "integrate",
    "integrate_ensemble",
    "divergence",
    "jacobian_at",
    "lyapunov_spectrum",
    "local_stability",
    "write_trajectory_csv",
]


class BlowUpError(RuntimeError):
    """Integration produced a non-finite state."""

    def __init__(self, step: int):
        super().__init__(f"non-finite state at integration step {step}")
        self.step = step


class DegenerateTangentError(RuntimeError):
    """Tangent basis lost rank during QR re-orthonormalization."""


@dataclass(frozen=True)
class FlowSystem:
    """Autonomous vector field dx/dt = rhs(x).

    ``rhs`` maps a state of shape (dim,) to its time derivative.  Built-in
    systems are ``vectorized``: their rhs also accepts stacked states of
    shape (..., dim), which the ensemble integrator and the density solver
    exploit.  ``jacobian`` and ``analytic_divergence`` are optional; finite
    differences stand in when they are absent.
    """

    name: str
    dim: int
    params: dict
    rhs: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    analytic_divergence: Optional[Callable[[np.ndarray], float]] = None
    default_dt: float = 0.01
    vectorized: bool = False


@dataclass(frozen=True)
class Trajectory:
    """Sampled orbit: ``points[k]`` is the state after k steps of size dt."""

    system_name: str
    dt: float
    points: np.ndarray  # shape (n_steps + 1, dim)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("trajectory contains non-finite points")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.points)) * self.dt


# ---------------------------------------------------------------------------
# built-in systems
# ---------------------------------------------------------------------------


def lorenz(sigma: float = 10.0, rho: float = 28.0, beta: float = 8.0 / 3.0) -> FlowSystem:
    """Lorenz 1963 convection equations; chaotic at the default parameters."""

    def rhs(state):
        x, y, z = state[..., 0], state[..., 1], state[..., 2]
        return np.stack([sigma * (y - x), x * (rho - z) - y, x * y - beta * z], axis=-1)

    def jac(state):
        x, y, z = state
        return np.array(
            [
                [-sigma, sigma, 0.0],
                [rho - z, -1.0, -x],
                [y, x, -beta],
            ]
        )

    div = -(sigma + 1.0 + beta)
    return FlowSystem(
        name="lorenz",
        dim=3,
        params={"sigma": sigma, "rho": rho, "beta": beta},
        rhs=rhs,
        jacobian=jac,
        analytic_divergence=lambda x: div,
        default_dt=0.005,
        vectorized=True,
    )


def rossler(a: float = 0.2, b: float = 0.2, c: float = 5.7) -> FlowSystem:
    """Roessler 1976 flow; divergence is state dependent but negative overall."""

    def rhs(state):
        x, y, z = state[..., 0], state[..., 1], state[..., 2]
        return np.stack([-y - z, x + a * y, b + z * (x - c)], axis=-1)

    def jac(state):
        x, _, z = state
        return np.array(
            [
                [0.0, -1.0, -1.0],
                [1.0, a, 0.0],
                [z, 0.0, x - c],
            ]
        )

    return FlowSystem(
        name="rossler",
        dim=3,
        params={"a": a, "b": b, "c": c},
        rhs=rhs,
        jacobian=jac,
        analytic_divergence=lambda x: a + x[0] - c,
        default_dt=0.02,
        vectorized=True,
    )


def harmonic_oscillator() -> FlowSystem:
    """Unit-frequency oscillator in (position, velocity) coordinates."""

    def rhs(state):
        x, v = state[..., 0], state[..., 1]
        return np.stack([v, -x], axis=-1)

    jac_const = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return FlowSystem(
        name="harmonic_oscillator",
        dim=2,
        params={},
        rhs=rhs,
        jacobian=lambda x: jac_const,
        analytic_divergence=lambda x: 0.0,
        default_dt=0.01,
        vectorized=True,
    )


def rigid_rotation() -> FlowSystem:
    """Solid-body rotation about the origin, unit angular velocity."""

    def rhs(state):
        x, y = state[..., 0], state[..., 1]
        return np.stack([-y, x], axis=-1)

    jac_const = np.array([[0.0, -1.0], [1.0, 0.0]])
    return FlowSystem(
        name="rigid_rotation",
        dim=2,
        params={},
        rhs=rhs,
        jacobian=lambda x: jac_const,
        analytic_divergence=lambda x: 0.0,
        default_dt=0.01,
        vectorized=True,
    )


def uniform_divergence() -> FlowSystem:
    """Radially expanding flow dx/dt = x, dy/dt = y with divergence 2."""

    def rhs(state):
        return state.copy()

    return FlowSystem(
        name="uniform_divergence",
        dim=2,
        params={},
        rhs=rhs,
        jacobian=lambda x: np.eye(2),
        analytic_divergence=lambda x: 2.0,
        default_dt=0.01,
        vectorized=True,
    )


SYSTEMS: dict[str, Callable[..., FlowSystem]] = {
    "lorenz": lorenz,
    "rossler": rossler,
    "harmonic_oscillator": harmonic_oscillator,
    "rigid_rotation": rigid_rotation,
    "uniform_divergence": uniform_divergence,
}


def make_system(name: str, **params) -> FlowSystem:
    """Instantiate a registered system, overriding canonical parameters."""
    try:
        factory = SYSTEMS[name]
    except KeyError:
        raise ValueError(f"unknown system {name!r}; known: {sorted(SYSTEMS)}") from None
    return factory(**params)


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------


def _rk4_step(f, x, dt):
    k1 = f(x)
    k2 = f(x + (0.5 * dt) * k1)
    k3 = f(x + (0.5 * dt) * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(system: FlowSystem, x0, dt: float, n_steps: int) -> Trajectory:
    """Fixed-step RK4 orbit of ``n_steps`` steps starting at ``x0``.

    Point 0 of the result is ``x0`` itself.  Raises :class:`BlowUpError`
    carrying the failing step index if the state goes non-finite.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (system.dim,):
        raise ValueError(f"x0 must have shape ({system.dim},), got {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")

    points = np.empty((n_steps + 1, system.dim))
    points[0] = x0
    x = x0
    with np.errstate(all="ignore"):
        for k in range(n_steps):
            x = _rk4_step(system.rhs, x, dt)
            if not np.all(np.isfinite(x)):
                raise BlowUpError(k + 1)
            points[k + 1] = x
    return Trajectory(system.name, dt, points)


def integrate_ensemble(system: FlowSystem, x0s: np.ndarray, dt: float, n_steps: int):
    """Endpoint states for a batch of initial conditions.

    Returns ``(endpoints, ok)`` where ``ok[i]`` is False for trials that
    went non-finite; their endpoint rows are zeroed.  Uses the batched rhs
    when the system supports it, otherwise falls back to per-trial loops.
    """
    x0s = np.asarray(x0s, dtype=float)
    if x0s.ndim != 2 or x0s.shape[1] != system.dim:
        raise ValueError(f"x0s must have shape (m, {system.dim})")
    if not system.vectorized:
        endpoints = np.zeros_like(x0s)
        ok = np.ones(len(x0s), dtype=bool)
        for i, x0 in enumerate(x0s):
            try:
                endpoints[i] = integrate(system, x0, dt, n_steps).points[-1]
            except BlowUpError:
                ok[i] = False
        return endpoints, ok

    x = x0s.copy()
    ok = np.all(np.isfinite(x), axis=1)
    with np.errstate(all="ignore"):
        for _ in range(n_steps):
            x = _rk4_step(system.rhs, x, dt)
            bad = ~np.all(np.isfinite(x), axis=1)
            if bad.any():
                ok &= ~bad
                x[bad] = 0.0  # keep the batch arithmetic finite
    x[~ok] = 0.0
    return x, ok


# ---------------------------------------------------------------------------
# divergence and Jacobians
# ---------------------------------------------------------------------------


def _fd_scale(x: np.ndarray) -> float:
    # balanced truncation/round-off step for central differences
    return 1e-6 * (1.0 + float(np.linalg.norm(x)))


def divergence(system: FlowSystem, x) -> float:
    """Divergence of the flow at ``x``.

    Uses the analytic expression when the system carries one, otherwise a
    central finite difference with step h = 1e-6 * (1 + |x|).
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    if system.analytic_divergence is not None:
        return float(system.analytic_divergence(x))
    h = _fd_scale(x)
    total = 0.0
    for i in range(system.dim):
        e = np.zeros(system.dim)
        e[i] = h
        total += (system.rhs(x + e)[i] - system.rhs(x - e)[i]) / (2.0 * h)
    return float(total)


def jacobian_at(system: FlowSystem, x: np.ndarray) -> np.ndarray:
    """Jacobian of the rhs at ``x``, analytic or by central differences."""
    if system.jacobian is not None:
        return np.asarray(system.jacobian(x), dtype=float)
    h = _fd_scale(x)
    cols = []
    for i in range(system.dim):
        e = np.zeros(system.dim)
        e[i] = h
        cols.append((system.rhs(x + e) - system.rhs(x - e)) / (2.0 * h))
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------------------
# Lyapunov analysis
# ---------------------------------------------------------------------------


def _aug_rk4_step(system: FlowSystem, x, tang, dt):
    """One RK4 step of the state jointly with tangent columns.

    ``tang`` has shape (dim, k): k tangent vectors propagated by the
    variational equation dY/dt = J(x) Y along the orbit.
    """

    def fx(xc):
        return system.rhs(xc)

    def fy(xc, yc):
        return jacobian_at(system, xc) @ yc

    k1x = fx(x)
    k1y = fy(x, tang)
    x2 = x + 0.5 * dt * k1x
    k2x = fx(x2)
    k2y = fy(x2, tang + 0.5 * dt * k1y)
    x3 = x + 0.5 * dt * k2x
    k3x = fx(x3)
    k3y = fy(x3, tang + 0.5 * dt * k2y)
    x4 = x + dt * k3x
    k4x = fx(x4)
    k4y = fy(x4, tang + dt * k3y)
    x_new = x + (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
    y_new = tang + (dt / 6.0) * (k1y + 2 * k2y + 2 * k3y + k4y)
    return x_new, y_new


def lyapunov_spectrum(
    system: FlowSystem,
    x0,
    dt: float,
    n_steps: int,
    n_transient: int = 0,
    qr_every: int = 10,
) -> np.ndarray:
    """Full Lyapunov spectrum by tangent propagation with periodic QR.

    An orthonormal tangent frame rides along the orbit; every ``qr_every``
    steps it is re-orthonormalized and the log growth factors accumulate.
    Exponents come out sorted descending.  Their sum estimates the
    time-averaged divergence along the orbit.
    """
    x = np.asarray(x0, dtype=float)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    with np.errstate(all="ignore"):
        for k in range(n_transient):
            x = _rk4_step(system.rhs, x, dt)
            if not np.all(np.isfinite(x)):
                raise BlowUpError(k + 1)

        tang = np.eye(system.dim)
        sums = np.zeros(system.dim)
        since_qr = 0
        for k in range(n_steps):
            x, tang = _aug_rk4_step(system, x, tang, dt)
            if not np.all(np.isfinite(x)):
                raise BlowUpError(n_transient + k + 1)
            since_qr += 1
            if since_qr == qr_every or k == n_steps - 1:
                q, r = np.linalg.qr(tang)
                diag = np.abs(np.diag(r))
                if not np.all(np.isfinite(diag)) or np.any(diag == 0.0):
                    raise DegenerateTangentError(
                        f"tangent frame lost rank near step {k + 1}"
                    )
                sums += np.log(diag)
                tang = q
                since_qr = 0
    exponents = sums / (n_steps * dt)
    return np.sort(exponents)[::-1]


def local_stability(system: FlowSystem, traj: Trajectory, window: int) -> np.ndarray:
    """Leading finite-time expansion rate over consecutive windows.

    A single tangent vector is propagated continuously along the stored
    orbit (renormalized each step); each window of ``window`` steps reports
    its mean log growth rate.  Negative rates mark quasi-stable stretches.
    """
    if window < 1:
        raise ValueError("window must be positive")
    n_steps = len(traj.points) - 1
    if window > n_steps:
        raise ValueError(f"window {window} exceeds trajectory steps {n_steps}")
    n_windows = n_steps // window
    dt = traj.dt
    v = np.ones(system.dim) / np.sqrt(system.dim)
    rates = np.empty(n_windows)
    acc = 0.0
    for k in range(n_windows * window):
        _, v = _aug_rk4_step(system, traj.points[k], v, dt)
        norm = float(np.linalg.norm(v))
        if norm == 0.0 or not np.isfinite(norm):
            raise DegenerateTangentError(f"tangent vector collapsed at step {k + 1}")
        acc += np.log(norm)
        v /= norm
        if (k + 1) % window == 0:
            rates[k // window] = acc / (window * dt)
            acc = 0.0
    return rates


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """CSV export with header t,x0,x1,...; the time column is step*dt."""
    dim = traj.points.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x{i}" for i in range(dim)])
        for k, row in enumerate(traj.points):
            writer.writerow([repr(k * traj.dt)] + [repr(float(v)) for v in row])
